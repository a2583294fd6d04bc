#include "zubov/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "zubov/rng.hpp"

namespace zubov {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError("config: unknown key '" + item.key() + "' in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const std::exception&) {
    throw ConfigError("config: bad value for '" + std::string(key) + "' in " + where);
  }
}

void parse_dataset(const json& j, DatasetSpec& d) {
  check_keys(j, "dataset",
             {"tag", "count", "noise_std", "train_fraction", "blob_classes"});
  read(j, "tag", d.tag, "dataset");
  read(j, "count", d.count, "dataset");
  read(j, "noise_std", d.noise_std, "dataset");
  read(j, "train_fraction", d.train_fraction, "dataset");
  read(j, "blob_classes", d.blob_classes, "dataset");
}

void parse_model(const json& j, BuildConfig& m) {
  check_keys(j, "model",
             {"d_h", "dynamics_hidden", "x_widths", "u_widths", "delta", "knee", "beta",
              "alpha", "eps_w"});
  read(j, "d_h", m.d_h, "model");
  read(j, "dynamics_hidden", m.dynamics_hidden, "model");
  read(j, "x_widths", m.x_widths, "model");
  read(j, "u_widths", m.u_widths, "model");
  read(j, "delta", m.delta, "model");
  read(j, "knee", m.knee, "model");
  read(j, "beta", m.beta, "model");
  read(j, "alpha", m.alpha, "model");
  read(j, "eps_w", m.eps_w, "model");
}

void parse_train(const json& j, TrainConfig& t) {
  check_keys(j, "train",
             {"iterations", "batch", "horizon", "ode_steps", "traj_samples", "refine_steps",
              "refine_step_size", "boundary_samples", "rand_per_pair", "dir_scale_max",
              "boundary_eps", "boundary_iters", "decay_frac", "decay_factor",
              "divergence_norm", "lr", "beta1", "beta2", "adam_eps", "lambda1", "lambda2",
              "lambda3"});
  read(j, "iterations", t.iterations, "train");
  read(j, "batch", t.batch, "train");
  read(j, "horizon", t.horizon, "train");
  read(j, "ode_steps", t.ode_steps, "train");
  read(j, "traj_samples", t.traj_samples, "train");
  read(j, "refine_steps", t.refine_steps, "train");
  read(j, "refine_step_size", t.refine_step_size, "train");
  read(j, "boundary_samples", t.boundary_samples, "train");
  read(j, "rand_per_pair", t.rand_per_pair, "train");
  read(j, "dir_scale_max", t.dir_scale_max, "train");
  read(j, "boundary_eps", t.boundary_eps, "train");
  read(j, "boundary_iters", t.boundary_iters, "train");
  read(j, "decay_frac", t.decay_frac, "train");
  read(j, "decay_factor", t.decay_factor, "train");
  read(j, "divergence_norm", t.divergence_norm, "train");
  read(j, "lr", t.adam.lr, "train");
  read(j, "beta1", t.adam.beta1, "train");
  read(j, "beta2", t.adam.beta2, "train");
  read(j, "adam_eps", t.adam.eps, "train");
  read(j, "lambda1", t.loss.lambda1, "train");
  read(j, "lambda2", t.loss.lambda2, "train");
  read(j, "lambda3", t.loss.lambda3, "train");
}

EvalScenario parse_scenario(const json& j, size_t idx) {
  const std::string where = "eval.scenarios[" + std::to_string(idx) + "]";
  check_keys(j, where,
             {"name", "kind", "tag", "epsilon", "steps", "step_size", "magnitude"});
  EvalScenario s;
  if (!j.contains("name")) throw ConfigError("config: scenario without a name in " + where);
  read(j, "name", s.name, where);
  read(j, "kind", s.kind, where);
  if (s.kind == "attack") {
    read(j, "tag", s.attack.tag, where);
    read(j, "epsilon", s.attack.epsilon, where);
    s.attack.step_size = s.attack.epsilon / 8.0;
    read(j, "steps", s.attack.steps, where);
    read(j, "step_size", s.attack.step_size, where);
  } else if (s.kind == "corrupt") {
    read(j, "tag", s.corrupt_tag, where);
    read(j, "magnitude", s.magnitude, where);
  } else {
    throw ConfigError("config: scenario kind must be attack or corrupt in " + where);
  }
  return s;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  check_keys(j, "top level",
             {"seed", "rho", "out", "checkpoint_every", "dataset", "model", "train", "eval"});

  RunConfig c;
  read(j, "seed", c.seed, "top level");
  read(j, "rho", c.rho, "top level");
  read(j, "out", c.out, "top level");
  read(j, "checkpoint_every", c.checkpoint_every, "top level");
  if (c.rho <= 0.0 || c.rho >= 1.0) throw ConfigError("config: rho must lie in (0,1)");
  if (c.checkpoint_every < 0) throw ConfigError("config: checkpoint_every must be >= 0");

  if (j.contains("dataset")) parse_dataset(j.at("dataset"), c.dataset);
  if (j.contains("model")) parse_model(j.at("model"), c.model);
  if (j.contains("train")) parse_train(j.at("train"), c.train);
  if (j.contains("eval")) {
    check_keys(j.at("eval"), "eval", {"scenarios"});
    if (j.at("eval").contains("scenarios")) {
      const auto& arr = j.at("eval").at("scenarios");
      if (!arr.is_array()) throw ConfigError("config: eval.scenarios must be an array");
      for (size_t i = 0; i < arr.size(); ++i) c.scenarios.push_back(parse_scenario(arr[i], i));
    }
  }

  c.model.rho = c.rho;
  reseed(c, c.seed);
  return c;
}

void reseed(RunConfig& cfg, uint64_t seed) {
  // every stream of randomness descends from the one top-level seed
  cfg.seed = seed;
  cfg.dataset.seed = mix_seed(seed, 0xdA7A5E7ull);
  cfg.model.seed = mix_seed(seed, 0x30DE1ull);
  cfg.train.seed = mix_seed(seed, 0x7124ull);
  for (size_t i = 0; i < cfg.scenarios.size(); ++i)
    cfg.scenarios[i].seed = mix_seed(seed, 0x5CE9ull + i);
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("config: cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_run_config(buf.str());
}

}  // namespace zubov
