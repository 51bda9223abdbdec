#include "pyra/train.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>

namespace pyra {

Schedule default_schedule() {
  Schedule s;
  s.stages = {{300, 16, 16, 8}, {200, 32, 32, 12}, {100, 48, 48, 16}};
  return s;
}

double loss_and_grad(const Vol& prob, const LabelVolume& target, Vol& dprob) {
  if (prob.W != target.W || prob.H != target.H || prob.D != target.D)
    throw ShapeError("loss_and_grad: dims mismatch");
  if (prob.C != target.num_classes)
    throw ShapeError("loss_and_grad: channel count differs from num_classes");
  dprob = Vol(prob.W, prob.H, prob.D, prob.C);
  const std::size_t V = prob.voxels();
  const double scale = 1.0 / static_cast<double>(V * prob.C);
  double err = 0.0;
  for (std::size_t v = 0; v < V; ++v) {
    const std::uint8_t lab = target.labels[v];
    for (std::size_t k = 0; k < prob.C; ++k) {
      const double d = prob.data[v + V * k] - (k == lab ? 1.0 : 0.0);
      err += d * d;
      dprob.data[v + V * k] = 2.0 * scale * d;
    }
  }
  return err * scale;
}

void rmsprop_step(Network& net, OptimizerState& opt, const Network& grads,
                  double lr) {
  const auto params = collect_params(net);
  const auto gparams = collect_params(grads);
  if (params.size() != gparams.size() || opt.mse.size() != params.size() ||
      opt.momentum.size() != params.size())
    throw ShapeError("rmsprop_step: parameter/state size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = *gparams[i];
    opt.mse[i] = opt.rho_mse * opt.mse[i] + (1.0 - opt.rho_mse) * g * g;
    const double G = g / (std::sqrt(opt.mse[i]) + opt.eps);
    opt.momentum[i] = opt.rho_m * opt.momentum[i] + (1.0 - opt.rho_m) * G;
    *params[i] -= lr * opt.momentum[i];
  }
}

void train_loop(Network& net, OptimizerState& opt,
                const std::vector<TrainExample>& data, const TrainOptions& o,
                std::vector<TrainLogRow>* log) {
  if (data.empty()) throw ConfigError("train: no training examples");
  if (o.schedule.stages.empty()) throw ConfigError("train: schedule has no stages");
  for (const auto& st : o.schedule.stages)
    for (const auto& ex : data)
      if (st.sw == 0 || st.sh == 0 || st.sd == 0 || st.sw > ex.input.W ||
          st.sh > ex.input.H || st.sd > ex.input.D)
        throw ConfigError("train: stage sub-volume does not fit in the data");
  const std::size_t total = o.schedule.total_epochs();
  if (o.start_epoch > total)
    throw ConfigError("train: start epoch beyond end of schedule");

  std::ofstream csv;
  if (!o.log_path.empty()) {
    csv.open(o.log_path, o.start_epoch > 0 ? std::ios::app : std::ios::out);
    if (!csv) throw DataError(o.log_path + ": cannot open loss log");
    if (o.start_epoch == 0) csv << "epoch,stage,lr,loss,wall_ms\n";
  }

  std::size_t stage_idx = 0, stage_start = 0;
  for (std::size_t e = o.start_epoch; e < total; ++e) {
    while (e >= stage_start + o.schedule.stages[stage_idx].epochs) {
      stage_start += o.schedule.stages[stage_idx].epochs;
      ++stage_idx;
    }
    const Stage& st = o.schedule.stages[stage_idx];
    const double rate = lr(o.schedule, e - stage_start);
    const auto t0 = std::chrono::steady_clock::now();

    Rng rng = substream(o.seed, "sample", e);
    const TrainExample& ex = data[rng.uniform_int(data.size())];
    SubVolumeSample sample =
        sample_subvolume(ex.input, ex.labels, st.sw, st.sh, st.sd, rng, o.augment);

    NetworkCache cache;
    const Vol prob = network_forward_cached(sample.input, net, cache);
    Vol dprob;
    const double loss = loss_and_grad(prob, sample.target, dprob);
    const Network grads = network_backward(net, cache, dprob);
    rmsprop_step(net, opt, grads, rate);

    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    if (log) log->push_back({e, stage_idx, rate, loss, wall_ms});
    if (csv.is_open()) {
      csv << e << ',' << stage_idx << ',' << std::setprecision(17) << rate
          << ',' << loss << ',' << std::setprecision(6) << wall_ms << '\n';
      csv.flush();
    }
    if (!o.checkpoint_path.empty()) {
      if (e + 1 == total) {
        save_checkpoint(o.checkpoint_path, net, opt, e + 1, o.seed);
      } else if (o.checkpoint_every > 0 && (e + 1) % o.checkpoint_every == 0) {
        // Periodic snapshots get their epoch in the name so every one stays
        // resumable after the run finishes.
        std::filesystem::path p(o.checkpoint_path);
        const auto snap =
            p.parent_path() /
            (p.stem().string() + "." + std::to_string(e + 1) + p.extension().string());
        save_checkpoint(snap.string(), net, opt, e + 1, o.seed);
      }
    }
  }
}

}  // namespace pyra
