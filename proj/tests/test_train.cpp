#include "pyra/train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "pyra/rng.hpp"

using namespace pyra;

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

Network tiny_net() {
  Network net;
  net.add_pyramid(1, 2, 3);
  net.add_fc(2, 2, Activation::Softmax);
  return net;
}

// Single one-parameter "network" so optimizer steps can be hand-checked.
Network scalar_net() {
  Network net;
  net.add_fc(1, 1, Activation::Softmax);
  std::get<FcLayer>(net.layers[0]).b[0] = 0.0;
  return net;
}

std::vector<double> param_vector(const Network& net) {
  std::vector<double> out;
  net.for_each_param([&](const double& w) { out.push_back(w); });
  return out;
}

TrainExample constant_example(std::size_t W, std::size_t H, std::size_t D) {
  TrainExample ex;
  ex.input = Vol(W, H, D, 1);
  Rng rng(123);
  for (auto& v : ex.input.data) v = rng.uniform(-1.0, 1.0);
  ex.labels = LabelVolume(W, H, D, 2);
  for (std::size_t i = 0; i < ex.labels.size(); ++i) ex.labels.labels[i] = 1;
  return ex;
}

}  // namespace

TEST_CASE("learning-rate schedule hits the pinned values") {
  Schedule s = default_schedule();
  CHECK(lr(s, 0) == doctest::Approx(0.010001).epsilon(1e-15));
  CHECK(lr(s, 100) == doctest::Approx(0.005001).epsilon(1e-15));
  for (std::size_t e : {0u, 50u, 250u}) {
    const double above = lr(s, e) - s.lr_floor;
    const double later = lr(s, e + 100) - s.lr_floor;
    CHECK(later == doctest::Approx(above / 2.0).epsilon(1e-15));
  }
}

TEST_CASE("default schedule is three growing stages") {
  Schedule s = default_schedule();
  REQUIRE(s.stages.size() == 3);
  CHECK(s.stages[0].epochs == 300);
  CHECK(s.stages[0].sw == 16);
  CHECK(s.stages[0].sd == 8);
  CHECK(s.stages[1].epochs == 200);
  CHECK(s.stages[1].sh == 32);
  CHECK(s.stages[2].epochs == 100);
  CHECK(s.stages[2].sd == 16);
  CHECK(s.total_epochs() == 600);
}

TEST_CASE("rmsprop step matches the hand-computed trajectory") {
  Network net = scalar_net();
  auto& fc = std::get<FcLayer>(net.layers[0]);
  fc.w[0] = 1.0;
  fc.b[0] = 0.0;
  OptimizerState opt = make_optimizer_state(net);
  REQUIRE(opt.mse.size() == 2);

  Network g = scalar_net();
  std::get<FcLayer>(g.layers[0]).w[0] = 1.0;  // dE/dw = 1, dE/db = 0

  rmsprop_step(net, opt, g, 0.01);
  CHECK(opt.mse[0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(opt.momentum[0] ==
        doctest::Approx(0.3162177663330557).epsilon(1e-15));
  CHECK(fc.w[0] ==
        doctest::Approx(1.0 - 0.003162177663330557).epsilon(1e-15));
  CHECK(opt.mse[1] == 0.0);
  CHECK(fc.b[0] == 0.0);

  rmsprop_step(net, opt, g, 0.01);
  CHECK(opt.mse[0] == doctest::Approx(0.19).epsilon(1e-15));
  CHECK(opt.momentum[0] ==
        doctest::Approx(0.5140064605331596).epsilon(1e-14));
}

TEST_CASE("zero gradient from a fresh state is a no-op") {
  Network net = tiny_net();
  init_uniform(net, 9);
  OptimizerState opt = make_optimizer_state(net);
  Network g = tiny_net();  // all zeros
  const auto before = param_vector(net);
  rmsprop_step(net, opt, g, 0.5);
  CHECK(param_vector(net) == before);
  for (double m : opt.mse) CHECK(m == 0.0);
  for (double m : opt.momentum) CHECK(m == 0.0);
}

TEST_CASE("mean squared error of a uniform prediction is 0.25") {
  Vol prob(3, 2, 2, 2);
  fill(prob, 0.5);
  LabelVolume target(3, 2, 2, 2);
  Vol dprob;
  CHECK(loss_and_grad(prob, target, dprob) ==
        doctest::Approx(0.25).epsilon(1e-15));
  // d/dp mean((onehot - p)^2): 2 (p - t) / (V*C).
  const double V = 12.0;
  CHECK(dprob.at(0, 0, 0, 0) ==
        doctest::Approx(2.0 * (0.5 - 1.0) / (V * 2.0)).epsilon(1e-15));
  CHECK(dprob.at(0, 0, 0, 1) ==
        doctest::Approx(2.0 * 0.5 / (V * 2.0)).epsilon(1e-15));
}

TEST_CASE("loss is zero exactly on a perfect prediction") {
  Vol prob(2, 2, 1, 3);
  LabelVolume target(2, 2, 1, 3);
  const std::size_t V = prob.voxels();
  for (std::size_t v = 0; v < V; ++v) {
    target.labels[v] = static_cast<std::uint8_t>(v % 3);
    prob.data[v + V * (v % 3)] = 1.0;
  }
  Vol dprob;
  CHECK(loss_and_grad(prob, target, dprob) == 0.0);
  for (double d : dprob.data) CHECK(d == 0.0);
}

TEST_CASE("training twice with one seed is bit-identical") {
  TrainOptions opts;
  opts.schedule.stages = {{3, 4, 4, 2}};
  opts.seed = 21;
  std::vector<TrainExample> data;
  data.push_back(constant_example(6, 6, 3));

  Network a = tiny_net();
  init_uniform(a, 5);
  OptimizerState oa = make_optimizer_state(a);
  train_loop(a, oa, data, opts);

  Network b = tiny_net();
  init_uniform(b, 5);
  OptimizerState ob = make_optimizer_state(b);
  train_loop(b, ob, data, opts);

  CHECK(param_vector(a) == param_vector(b));
  CHECK(oa.mse == ob.mse);
  CHECK(oa.momentum == ob.momentum);
}

TEST_CASE("a resumed run reproduces the uninterrupted one bit-exactly") {
  const std::string full_path = temp_path("pyra_test_full.pnet");
  TrainOptions opts;
  opts.schedule.stages = {{2, 4, 4, 2}, {3, 5, 5, 3}};
  opts.seed = 33;
  opts.checkpoint_every = 2;
  opts.checkpoint_path = full_path;
  std::vector<TrainExample> data;
  data.push_back(constant_example(7, 6, 4));

  Network full = tiny_net();
  init_uniform(full, 8);
  OptimizerState of = make_optimizer_state(full);
  train_loop(full, of, data, opts);

  // Periodic snapshots stay on disk under epoch-suffixed names; pick the
  // epoch-2 one up and replay the remaining epochs.
  const std::string snap = temp_path("pyra_test_full.2.pnet");
  Checkpoint ckpt = load_checkpoint(snap);
  CHECK(ckpt.epoch == 2);
  CHECK(ckpt.seed == 33);
  TrainOptions rest = opts;
  rest.checkpoint_path.clear();
  rest.start_epoch = ckpt.epoch;
  train_loop(ckpt.net, ckpt.opt, data, rest);

  CHECK(param_vector(ckpt.net) == param_vector(full));
  CHECK(ckpt.opt.mse == of.mse);
  CHECK(ckpt.opt.momentum == of.momentum);
  std::remove(full_path.c_str());
  std::remove(snap.c_str());
  std::remove(temp_path("pyra_test_full.4.pnet").c_str());
}

TEST_CASE("loss CSV has a header, one row per epoch, and appends on resume") {
  const std::string log_path = temp_path("pyra_test_loss.csv");
  TrainOptions opts;
  opts.schedule.stages = {{4, 4, 4, 2}};
  opts.seed = 2;
  opts.log_path = log_path;
  std::vector<TrainExample> data;
  data.push_back(constant_example(6, 6, 3));

  Network net = tiny_net();
  init_uniform(net, 1);
  OptimizerState opt = make_optimizer_state(net);
  TrainOptions half = opts;
  half.schedule.stages = {{2, 4, 4, 2}};
  train_loop(net, opt, data, half);
  TrainOptions rest = opts;
  rest.start_epoch = 2;
  train_loop(net, opt, data, rest);

  std::ifstream is(log_path);
  std::string line;
  std::getline(is, line);
  CHECK(line == "epoch,stage,lr,loss,wall_ms");
  int rows = 0;
  int want_epoch = 0;
  while (std::getline(is, line)) {
    CHECK(line.rfind(std::to_string(want_epoch) + ",", 0) == 0);
    ++rows;
    ++want_epoch;
  }
  CHECK(rows == 4);
  std::remove(log_path.c_str());
}

TEST_CASE("training on a constant-label toy drives the loss down") {
  TrainOptions opts;
  opts.schedule.stages = {{150, 6, 6, 3}};
  opts.seed = 4;
  std::vector<TrainExample> data;
  data.push_back(constant_example(8, 8, 4));

  Network net = tiny_net();
  init_uniform(net, 11);
  OptimizerState opt = make_optimizer_state(net);
  std::vector<TrainLogRow> log;
  train_loop(net, opt, data, opts, &log);
  REQUIRE(log.size() == 150);
  double window[3] = {0, 0, 0};
  for (std::size_t i = 0; i < 150; ++i) window[i / 50] += log[i].loss / 50.0;
  CHECK(window[1] < window[0]);
  CHECK(window[2] < window[1]);
  CHECK(log.back().loss < 0.05);
  for (const auto& row : log) {
    CHECK(row.lr ==
          doctest::Approx(lr(opts.schedule, row.epoch)).epsilon(1e-15));
    CHECK(row.stage == 0);
  }
}

TEST_CASE("the learning rate restarts at the top of every stage") {
  TrainOptions opts;
  opts.schedule.stages = {{2, 4, 4, 2}, {3, 5, 5, 3}};
  opts.seed = 14;
  std::vector<TrainExample> data;
  data.push_back(constant_example(7, 6, 4));

  Network net = tiny_net();
  init_uniform(net, 3);
  OptimizerState opt = make_optimizer_state(net);
  std::vector<TrainLogRow> log;
  train_loop(net, opt, data, opts, &log);
  REQUIRE(log.size() == 5);
  CHECK(log[1].stage == 0);
  CHECK(log[2].stage == 1);
  CHECK(log[2].lr == lr(opts.schedule, 0));
  CHECK(log[3].lr == lr(opts.schedule, 1));
  CHECK(log[2].lr == log[0].lr);
}

TEST_CASE("train_loop validates its inputs") {
  Network net = tiny_net();
  init_uniform(net, 1);
  OptimizerState opt = make_optimizer_state(net);
  TrainOptions opts;
  opts.schedule.stages = {{2, 4, 4, 2}};

  std::vector<TrainExample> none;
  CHECK_THROWS_AS(train_loop(net, opt, none, opts), ConfigError);

  std::vector<TrainExample> data;
  data.push_back(constant_example(3, 3, 3));  // smaller than the stage crop
  CHECK_THROWS_AS(train_loop(net, opt, data, opts), ConfigError);

  data.clear();
  data.push_back(constant_example(6, 6, 3));
  TrainOptions beyond = opts;
  beyond.start_epoch = 5;
  CHECK_THROWS_AS(train_loop(net, opt, data, beyond), ConfigError);

  TrainOptions no_stages;
  CHECK_THROWS_AS(train_loop(net, opt, data, no_stages), ConfigError);
}
