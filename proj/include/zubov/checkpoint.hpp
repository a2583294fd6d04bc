#pragma once

#include <string>

#include "zubov/nets.hpp"

namespace zubov {

struct CheckpointError : TensorError {
  explicit CheckpointError(const std::string& what) : TensorError(what) {}
};

struct CheckpointMeta {
  int version = 1;
  uint64_t seed = 0;
  int64_t step = 0;
  std::string config_echo;  // raw config text, stored verbatim
};

// Deterministic JSON serialization: fixed key order, parameters in
// collect_params order, doubles printed with 17 significant digits so
// save -> load -> save is byte-identical.
std::string checkpoint_string(ModelBundle& bundle, const CheckpointMeta& meta);
void save_checkpoint(const std::string& path, ModelBundle& bundle, const CheckpointMeta& meta);
ModelBundle load_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr);
ModelBundle parse_checkpoint(const std::string& text, CheckpointMeta* meta = nullptr);

}  // namespace zubov
