#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zubov/tensor.hpp"

namespace zubov {

struct DatasetError : TensorError {
  explicit DatasetError(const std::string& what) : TensorError(what) {}
};

struct DatasetSpec {
  std::string tag = "moons";  // moons | circles | blobs | spirals | system-1d | system-vdp
  int64_t count = 2048;       // total points before the split
  double noise_std = 0.1;
  double train_fraction = 0.5;
  uint64_t seed = 0;
  int64_t blob_classes = 3;   // blobs only
};

struct Dataset {
  Tensor X;                  // (n, d)
  std::vector<int64_t> y;    // labels in [0, classes)
  int64_t classes = 0;
  Tensor lo, hi;             // (1, d) axis-aligned domain box of the full set
};

struct SplitDataset {
  Dataset train, test;
};

// Deterministic generation: class counts balanced within one sample, the split
// is stratified, and the domain box covers the union of both halves.
SplitDataset generate_dataset(const DatasetSpec& spec);

// known fields used by the system-* datasets and the certification oracles
Tensor cubic_field(const Tensor& h);          // dh/dt = h^3 - h        (1D)
Tensor vdp_reversed_field(const Tensor& h);   // time-reversed Van der Pol, mu = 1

}  // namespace zubov
