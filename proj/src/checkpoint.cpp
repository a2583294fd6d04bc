#include "zubov/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace zubov {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out;
}

void emit_tensor_data(std::ostringstream& os, const Tensor& t) {
  os << "[";
  for (int64_t k = 0; k < t.numel(); ++k) {
    if (k) os << ",";
    os << fmt_double(t[k]);
  }
  os << "]";
}

void emit_int_list(std::ostringstream& os, const std::vector<int64_t>& v) {
  os << "[";
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) os << ",";
    os << v[i];
  }
  os << "]";
}

Tensor tensor_from(const nlohmann::json& shape, const nlohmann::json& data,
                   const std::string& what) {
  if (!shape.is_array() || shape.size() != 2)
    throw CheckpointError("checkpoint: bad shape for " + what);
  const int64_t r = shape[0].get<int64_t>(), c = shape[1].get<int64_t>();
  if (!data.is_array() || static_cast<int64_t>(data.size()) != r * c)
    throw CheckpointError("checkpoint: data length mismatch for " + what);
  Tensor t(r, c, 0.0);
  for (int64_t k = 0; k < r * c; ++k) t[k] = data[static_cast<size_t>(k)].get<double>();
  return t;
}

MlpParams mlp_from_params(const std::map<int64_t, std::pair<Tensor, Tensor>>& layers,
                          const std::string& what) {
  MlpParams m;
  int64_t expect = 0;
  for (const auto& [idx, wb] : layers) {
    if (idx != expect) throw CheckpointError("checkpoint: non-contiguous layers in " + what);
    ++expect;
    m.layers.push_back({wb.first, wb.second, true});
  }
  if (m.layers.empty()) throw CheckpointError("checkpoint: empty mlp " + what);
  m.layers.back().tanh_act = false;  // hidden layers tanh, output linear
  for (size_t i = 1; i < m.layers.size(); ++i)
    if (m.layers[i - 1].w.cols() != m.layers[i].w.rows())
      throw CheckpointError("checkpoint: layer shape chain broken in " + what);
  return m;
}

}  // namespace

std::string checkpoint_string(ModelBundle& bundle, const CheckpointMeta& meta) {
  std::ostringstream os;
  os << "{\n";
  os << "  \"format_version\": " << meta.version << ",\n";
  os << "  \"seed\": " << meta.seed << ",\n";
  os << "  \"step\": " << meta.step << ",\n";
  os << "  \"config\": \"" << escape(meta.config_echo) << "\",\n";
  os << "  \"d_in\": " << bundle.d_in << ",\n";
  const auto& h = bundle.head;
  os << "  \"head\": {\"dim\": " << h.dim() << ", \"zw\": ";
  emit_int_list(os, h.net.zw);
  os << ", \"uw\": ";
  emit_int_list(os, h.net.uw);
  os << ", \"delta\": " << fmt_double(h.delta) << ", \"knee\": " << fmt_double(h.knee)
     << ", \"beta\": " << fmt_double(h.beta) << ", \"rho\": " << fmt_double(h.rho)
     << ", \"alpha\": " << fmt_double(h.alpha) << ", \"eps_w\": " << fmt_double(h.eps_w)
     << ", \"max_abs_cos\": " << fmt_double(h.anchors.max_abs_cos) << "},\n";
  os << "  \"anchors\": {\"shape\": [" << h.anchors.c.rows() << "," << h.anchors.c.cols()
     << "], \"data\": ";
  emit_tensor_data(os, h.anchors.c);
  os << "},\n";
  os << "  \"domain_lo\": ";
  emit_tensor_data(os, bundle.domain_lo);
  os << ",\n  \"domain_hi\": ";
  emit_tensor_data(os, bundle.domain_hi);
  os << ",\n  \"params\": [\n";
  std::vector<ParamRef> params = collect_params(bundle);
  for (size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = *params[i].t;
    os << "    {\"name\": \"" << escape(params[i].name) << "\", \"shape\": [" << t.rows() << ","
       << t.cols() << "], \"data\": ";
    emit_tensor_data(os, t);
    os << "}" << (i + 1 < params.size() ? "," : "") << "\n";
  }
  os << "  ]\n}\n";
  return os.str();
}

void save_checkpoint(const std::string& path, ModelBundle& bundle, const CheckpointMeta& meta) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("save_checkpoint: cannot open " + path);
  f << checkpoint_string(bundle, meta);
  if (!f) throw CheckpointError("save_checkpoint: write failed for " + path);
}

ModelBundle parse_checkpoint(const std::string& text, CheckpointMeta* meta) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint: parse error: ") + e.what());
  }
  if (!j.contains("format_version") || j["format_version"].get<int>() != 1)
    throw CheckpointError("checkpoint: unsupported format version");

  ModelBundle b;
  b.d_in = j.at("d_in").get<int64_t>();
  const auto& jh = j.at("head");
  b.head.delta = jh.at("delta").get<double>();
  b.head.knee = jh.at("knee").get<double>();
  b.head.beta = jh.at("beta").get<double>();
  b.head.rho = jh.at("rho").get<double>();
  b.head.alpha = jh.at("alpha").get<double>();
  b.head.eps_w = jh.at("eps_w").get<double>();

  b.head.anchors.c = tensor_from(j.at("anchors").at("shape"), j.at("anchors").at("data"),
                                 "anchors");
  b.head.anchors.max_abs_cos = jh.at("max_abs_cos").get<double>();
  b.domain_lo = tensor_from(nlohmann::json::array({1, static_cast<int64_t>(j.at("domain_lo").size())}),
                            j.at("domain_lo"), "domain_lo");
  b.domain_hi = tensor_from(nlohmann::json::array({1, static_cast<int64_t>(j.at("domain_hi").size())}),
                            j.at("domain_hi"), "domain_hi");

  // rebuild the convex net skeleton from recorded widths, then fill by name
  std::vector<int64_t> zw = jh.at("zw").get<std::vector<int64_t>>();
  std::vector<int64_t> uw = jh.at("uw").get<std::vector<int64_t>>();
  const int64_t dim = jh.at("dim").get<int64_t>();
  Rng scratch(0);
  b.head.net = make_gated_convex(dim, zw, uw, scratch);

  std::map<int64_t, std::pair<Tensor, Tensor>> dyn_layers, lift_layers;
  std::map<std::string, Tensor> head_params;
  for (const auto& jp : j.at("params")) {
    const std::string name = jp.at("name").get<std::string>();
    Tensor t = tensor_from(jp.at("shape"), jp.at("data"), name);
    // mlp names look like "dynamics.w0" / "lift.b1"
    const auto mlp_slot = [&](const std::string& prefix,
                              std::map<int64_t, std::pair<Tensor, Tensor>>& layers) {
      const std::string rest = name.substr(prefix.size() + 1);
      if (rest.size() < 2 || (rest[0] != 'w' && rest[0] != 'b'))
        throw CheckpointError("checkpoint: unknown parameter '" + name + "'");
      auto& slot = layers[std::stoll(rest.substr(1))];
      (rest[0] == 'w' ? slot.first : slot.second) = std::move(t);
    };
    if (name.rfind("dynamics.", 0) == 0) {
      mlp_slot("dynamics", dyn_layers);
    } else if (name.rfind("lift.", 0) == 0) {
      mlp_slot("lift", lift_layers);
    } else if (name.rfind("head.", 0) == 0) {
      head_params.emplace(name, std::move(t));
    } else {
      throw CheckpointError("checkpoint: unknown parameter '" + name + "'");
    }
  }
  b.dynamics = mlp_from_params(dyn_layers, "dynamics");
  if (!lift_layers.empty()) b.lift = mlp_from_params(lift_layers, "lift");
  for (auto& ref : collect_params(b.head.net, "head")) {
    auto it = head_params.find(ref.name);
    if (it == head_params.end())
      throw CheckpointError("checkpoint: missing parameter '" + ref.name + "'");
    if (it->second.rows() != ref.t->rows() || it->second.cols() != ref.t->cols())
      throw CheckpointError("checkpoint: shape mismatch for '" + ref.name + "'");
    *ref.t = std::move(it->second);
    head_params.erase(it);
  }
  if (!head_params.empty())
    throw CheckpointError("checkpoint: extra head parameter '" + head_params.begin()->first + "'");
  if (!nonneg_ok(b.head.net))
    throw CheckpointError("checkpoint: negative convex-path weight; file is corrupt");

  if (meta) {
    meta->version = 1;
    meta->seed = j.at("seed").get<uint64_t>();
    meta->step = j.at("step").get<int64_t>();
    meta->config_echo = j.at("config").get<std::string>();
  }
  return b;
}

ModelBundle load_checkpoint(const std::string& path, CheckpointMeta* meta) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("load_checkpoint: cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_checkpoint(buf.str(), meta);
}

}  // namespace zubov
