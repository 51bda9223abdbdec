#pragma once

#include <string>

#include "pyra/config.hpp"

namespace pyra {

// One function per CLI subcommand. Each validates its inputs up front,
// writes its artifacts (plus the resolved config) into cfg.out_dir, and
// prints a short summary; errors surface as the usual exception types.
void run_preprocess(const RunConfig& cfg);
void run_train(const RunConfig& cfg, const std::string& resume_path);
void run_predict(const RunConfig& cfg);
void run_evaluate(const RunConfig& cfg);
void run_bench(const RunConfig& cfg);
void run_param_count(const RunConfig& cfg);

}  // namespace pyra
