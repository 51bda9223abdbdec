#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pyra/datapipe.hpp"
#include "pyra/metrics.hpp"
#include "pyra/pyramid_net.hpp"
#include "pyra/train.hpp"

namespace pyra {

// One parsed "key = value" line of a config file.
struct ConfigEntry {
  std::string section;
  std::string key;
  std::string value;
  int line = 0;
};

// Flat INI-style parser: [section] headers, key = value lines, '#' or ';'
// comments, blank lines ignored.
std::vector<ConfigEntry> parse_ini(const std::string& text);

enum class BenchPrecision { F64, F32 };

struct RunConfig {
  // [run]
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out_dir = ".";

  // [network]
  std::vector<std::string> arch = {"pyramid:16", "fc:25", "pyramid:32",
                                   "fc:45",      "pyramid:64", "softmax"};
  std::size_t filter = 7;
  std::size_t input_channels = 1;
  std::uint32_t classes = 2;

  // [data]
  std::string train_input;
  std::string train_labels;

  // [preprocess]
  std::vector<std::string> pre_inputs;
  std::vector<ModalityConfig> pre_modalities;
  std::string pre_output;

  // [train]
  Schedule schedule = default_schedule();
  AugmentFlags augment = {false, true, true, true};
  std::size_t checkpoint_every = 0;

  // [predict]
  std::string predict_input;
  std::string predict_checkpoint;
  std::size_t tile_w = 48, tile_h = 48, tile_d = 16;
  double overlap = 0.5;
  double sigma_frac = 0.25;

  // [evaluate]
  std::string eval_predicted;
  std::string eval_reference;
  Spacing spacing;
  Connectivity rand_connectivity = Connectivity::Volume6;

  // [bench]
  std::size_t bench_w = 128, bench_h = 128, bench_d = 16;
  std::size_t bench_channels = 1;
  std::vector<int> bench_threads = {1, 2, 4, 8};
  BenchPrecision bench_precision = BenchPrecision::F64;
};

// Parses and validates a config file; rejects unknown keys.
RunConfig load_run_config(const std::string& path);

// Builds the layer stack from arch tokens ("pyramid:N", "fc:N", "softmax").
// Pyramid and softmax-bearing networks enforce filter >= 3; a bare token
// list without "softmax" is allowed (used by param-count).
Network build_network(const std::vector<std::string>& arch,
                      std::size_t input_channels, std::uint32_t classes,
                      std::size_t filter);

// Writes every setting, defaults materialized, so the run can be reproduced
// from the echoed file alone.
void write_resolved_config(const RunConfig& cfg, const std::string& path);

}  // namespace pyra
