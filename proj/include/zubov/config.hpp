#pragma once

#include <string>
#include <vector>

#include "zubov/dataset.hpp"
#include "zubov/evaluate.hpp"
#include "zubov/train.hpp"

namespace zubov {

struct ConfigError : TensorError {
  explicit ConfigError(const std::string& what) : TensorError(what) {}
};

// One JSON document drives a whole run. Every object level rejects unknown
// keys; missing keys fall back to the defaults below. The single top-level
// seed feeds dataset, model init, training, and the eval scenarios, so a rerun
// of the same file is bit-identical.
struct RunConfig {
  uint64_t seed = 0;
  double rho = 0.9;
  std::string out = "runs/out";
  int64_t checkpoint_every = 0;  // 0: write checkpoint.json once, at the end
  DatasetSpec dataset;
  BuildConfig model;
  TrainConfig train;
  std::vector<EvalScenario> scenarios;  // "clean" is implicit and reserved
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// re-derive every sub-seed from a new top-level seed (CLI --seed override)
void reseed(RunConfig& cfg, uint64_t seed);

}  // namespace zubov
