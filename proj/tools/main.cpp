#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "pyra/commands.hpp"
#include "pyra/parallel.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs& c) {
  cmd->add_option("--config", c.config, "INI config file");
  cmd->add_option("--seed", c.seed, "override the config seed");
  cmd->add_option("--threads", c.threads, "override the worker thread count");
  cmd->add_option("--out", c.out, "override the output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Volumetric segmentation with six-direction convolutional LSTM "
      "pyramids"};
  app.require_subcommand(1);

  CommonArgs c;
  std::string resume;
  CLI::App* pre = app.add_subcommand(
      "preprocess", "Assemble normalized input channels from raw volumes");
  CLI::App* train = app.add_subcommand(
      "train", "Train a network; writes checkpoints and a loss CSV");
  CLI::App* predict = app.add_subcommand(
      "predict", "Tile, forward and stitch a volume into class probabilities");
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "Segmentation metrics for a prediction/reference pair");
  CLI::App* bench = app.add_subcommand(
      "bench", "Forward-pass wall time across thread counts");
  CLI::App* pcount =
      app.add_subcommand("param-count", "Layer-by-layer parameter counts");
  for (CLI::App* cmd : {pre, train, predict, evaluate, bench, pcount})
    add_common(cmd, c);
  train->add_option("--resume", resume, "checkpoint to continue from");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    pyra::RunConfig cfg;
    if (sub->count("--config")) cfg = pyra::load_run_config(c.config);
    if (sub->count("--seed")) cfg.seed = c.seed;
    if (sub->count("--threads")) {
      if (c.threads < 1) throw pyra::ConfigError("--threads must be >= 1");
      cfg.threads = c.threads;
    }
    if (sub->count("--out")) cfg.out_dir = c.out;
    pyra::set_threads(cfg.threads);

    if (sub == pre) pyra::run_preprocess(cfg);
    else if (sub == train) pyra::run_train(cfg, resume);
    else if (sub == predict) pyra::run_predict(cfg);
    else if (sub == evaluate) pyra::run_evaluate(cfg);
    else if (sub == bench) pyra::run_bench(cfg);
    else pyra::run_param_count(cfg);
    return 0;
  } catch (const pyra::ConfigError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 2;
  } catch (const pyra::DataError& e) {
    std::cerr << "error: data: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: runtime: " << e.what() << "\n";
    return 4;
  }
}
