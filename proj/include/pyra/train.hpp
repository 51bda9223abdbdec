#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pyra/datapipe.hpp"
#include "pyra/pyramid_net.hpp"

namespace pyra {

struct Stage {
  std::size_t epochs = 0;
  std::size_t sw = 0, sh = 0, sd = 0;  // sub-volume dims
};

// Bootstrapping schedule: stages of growing sub-volume sizes. The epoch
// counter feeding the learning rate resets at each stage boundary, so every
// stage restarts near lr_scale.
struct Schedule {
  std::vector<Stage> stages;
  double lr_floor = 1e-6;
  double lr_scale = 1e-2;
  double half_life = 100.0;

  std::size_t total_epochs() const {
    std::size_t n = 0;
    for (const auto& s : stages) n += s.epochs;
    return n;
  }
};

// lr(e) = floor + scale * (1/2)^(e / half_life): starts at scale + floor,
// halves (above the floor) every half_life epochs, tends to the floor.
inline double lr(const Schedule& s, std::size_t epoch_in_stage) {
  return s.lr_floor +
         s.lr_scale * std::pow(0.5, static_cast<double>(epoch_in_stage) / s.half_life);
}

Schedule default_schedule();

struct TrainExample {
  Vol input;
  LabelVolume labels;
};

// Mean over voxels and classes of (one_hot(target) - prob)^2, plus its
// gradient with respect to prob.
double loss_and_grad(const Vol& prob, const LabelVolume& target, Vol& dprob);

// Per weight, in order: mse <- rho*mse + (1-rho)*g^2; G = g / (sqrt(mse)+eps);
// momentum <- rho*momentum + (1-rho)*G; theta <- theta - lr*momentum.
void rmsprop_step(Network& net, OptimizerState& opt, const Network& grads,
                  double lr);

struct TrainLogRow {
  std::size_t epoch = 0;  // global, across stages
  std::size_t stage = 0;
  double lr = 0.0;
  double loss = 0.0;
  double wall_ms = 0.0;
};

struct TrainOptions {
  Schedule schedule;
  AugmentFlags augment;
  std::uint64_t seed = 0;
  std::uint64_t start_epoch = 0;      // global epochs already completed (resume)
  std::size_t checkpoint_every = 0;   // 0 = checkpoint only when done
  // Final checkpoint lands here; periodic ones get ".<epoch>" before the
  // extension. Empty = never checkpoint.
  std::string checkpoint_path;
  std::string log_path;               // empty = no CSV loss log
};

// One epoch = one sampled sub-volume = one update. Epoch e draws all its
// randomness from substream(seed, "sample", e), so a resumed run replays
// the exact remaining epochs of an uninterrupted one.
void train_loop(Network& net, OptimizerState& opt,
                const std::vector<TrainExample>& data, const TrainOptions& opts,
                std::vector<TrainLogRow>* log = nullptr);

}  // namespace pyra
