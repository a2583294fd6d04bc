#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "zubov/checkpoint.hpp"
#include "zubov/config.hpp"
#include "zubov/dataset.hpp"
#include "zubov/evaluate.hpp"
#include "zubov/sampler.hpp"
#include "zubov/train.hpp"
#include "zubov/verify.hpp"

namespace py = pybind11;
using namespace zubov;

namespace {

using Rows = std::vector<std::vector<double>>;

Tensor tensor_of(const Rows& rows, const char* what) {
  if (rows.empty()) throw std::invalid_argument(std::string(what) + ": empty point list");
  const size_t d = rows.front().size();
  Tensor t(static_cast<int64_t>(rows.size()), static_cast<int64_t>(d), 0.0);
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != d)
      throw std::invalid_argument(std::string(what) + ": ragged point list");
    for (size_t j = 0; j < d; ++j) t(static_cast<int64_t>(i), static_cast<int64_t>(j)) = rows[i][j];
  }
  return t;
}

Rows rows_of(const Tensor& t) {
  Rows out(static_cast<size_t>(t.rows()), std::vector<double>(static_cast<size_t>(t.cols())));
  for (int64_t i = 0; i < t.rows(); ++i)
    for (int64_t j = 0; j < t.cols(); ++j) out[static_cast<size_t>(i)][static_cast<size_t>(j)] = t(i, j);
  return out;
}

// Owning wrapper so python holds one object for bundle plus bookkeeping.
struct Model {
  ModelBundle bundle;
  uint64_t seed = 0;
  int64_t step = 0;
  std::string config_echo;

  std::vector<double> w(const Rows& pts, int cls) {
    const Tensor t = tensor_of(pts, "w");
    const Tensor v = w_eval(bundle.head, t, cls);
    std::vector<double> out(static_cast<size_t>(v.rows()));
    for (int64_t i = 0; i < v.rows(); ++i) out[static_cast<size_t>(i)] = v(i, 0);
    return out;
  }

  std::vector<int64_t> classify(const Rows& pts) {
    const Tensor x = tensor_of(pts, "classify");
    const ForwardStates fs = forward_states(bundle, x, {});
    std::vector<int64_t> labels(static_cast<size_t>(x.rows()), 0);
    for (int64_t i = 0; i < fs.h_final.rows(); ++i) {
      Tensor h(1, fs.h_final.cols(), 0.0);
      for (int64_t j = 0; j < fs.h_final.cols(); ++j) h(0, j) = fs.h_final(i, j);
      double best = 0.0;
      int64_t arg = 0;
      for (int64_t c = 0; c < bundle.classes(); ++c) {
        const double wv = w_eval(bundle.head, h, static_cast<int>(c))(0, 0);
        if (c == 0 || wv < best) {
          best = wv;
          arg = c;
        }
      }
      labels[static_cast<size_t>(i)] = arg;
    }
    return labels;
  }

  Rows boundary(int cls, int rand_per_pair, uint64_t bseed) {
    const Tensor dirs =
        make_directions(bundle.head.anchors.c, cls, rand_per_pair, 0.5, bseed);
    return rows_of(boundary_sample(bundle.head, cls, dirs, 1e-4, 60).points);
  }

  Rows anchors() { return rows_of(bundle.head.anchors.c); }

  void save(const std::string& path) {
    CheckpointMeta meta{1, seed, step, config_echo};
    save_checkpoint(path, bundle, meta);
  }
};

Model train_from_config(const std::string& json_text) {
  RunConfig cfg = parse_run_config(json_text);
  const SplitDataset data = generate_dataset(cfg.dataset);
  Model m;
  m.bundle = build_bundle(data.train, cfg.model);
  train_loop(m.bundle, data.train, cfg.train);
  m.seed = cfg.seed;
  m.step = cfg.train.iterations;
  m.config_echo = json_text;
  return m;
}

Model load_model(const std::string& path) {
  Model m;
  CheckpointMeta meta;
  m.bundle = load_checkpoint(path, &meta);
  m.seed = meta.seed;
  m.step = meta.step;
  m.config_echo = meta.config_echo;
  return m;
}

std::pair<Rows, std::vector<int64_t>> make_dataset(const std::string& tag, int64_t count,
                                                   double noise, uint64_t seed) {
  DatasetSpec spec;
  spec.tag = tag;
  spec.count = count;
  spec.noise_std = noise;
  spec.seed = seed;
  spec.train_fraction = 1.0;
  const SplitDataset d = generate_dataset(spec);
  return {rows_of(d.train.X), d.train.y};
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "neural region-of-attraction core operations";

  py::class_<Model>(mod, "Model")
      .def_property_readonly("classes", [](Model& m) { return m.bundle.classes(); })
      .def_property_readonly("dim", [](Model& m) { return m.bundle.d_h(); })
      .def_property_readonly("rho", [](Model& m) { return m.bundle.head.rho; })
      .def_property_readonly("step", [](Model& m) { return m.step; })
      .def("w", &Model::w, py::arg("points"), py::arg("cls"),
           "certificate level W of each point for one class")
      .def("classify", &Model::classify, py::arg("points"),
           "labels by the smallest-W class at the flowed state")
      .def("boundary", &Model::boundary, py::arg("cls"), py::arg("rand_per_pair") = 20,
           py::arg("seed") = 0, "level-boundary samples for one class")
      .def("anchors", &Model::anchors)
      .def("save", &Model::save, py::arg("path"));

  mod.def("train_from_config", &train_from_config, py::arg("config_json"),
          "train a model from a run-configuration JSON string");
  mod.def("load_checkpoint", &load_model, py::arg("path"));
  mod.def("generate_dataset", &make_dataset, py::arg("tag"), py::arg("count") = 256,
          py::arg("noise") = 0.1, py::arg("seed") = 0,
          "synthetic labeled points: (points, labels)");
  mod.def("separability_bound", &separability_bound, py::arg("n"), py::arg("m"), py::arg("d"));
  mod.def(
      "hull_distance",
      [](const Rows& pts, const std::vector<double>& q) {
        Tensor query(1, static_cast<int64_t>(q.size()), 0.0);
        for (size_t j = 0; j < q.size(); ++j) query(0, static_cast<int64_t>(j)) = q[j];
        return hull_distance(tensor_of(pts, "hull_distance"), query);
      },
      py::arg("points"), py::arg("query"),
      "Euclidean distance from a query point to the convex hull of the points");
}
