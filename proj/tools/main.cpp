#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "zubov/checkpoint.hpp"
#include "zubov/config.hpp"
#include "zubov/dataset.hpp"
#include "zubov/evaluate.hpp"
#include "zubov/sampler.hpp"
#include "zubov/svg.hpp"
#include "zubov/train.hpp"
#include "zubov/verify.hpp"

namespace fs = std::filesystem;
using namespace zubov;

namespace {

struct Args {
  std::string config_path;
  std::string checkpoint_path;
  std::string out = ".";
  std::optional<uint64_t> seed;
  std::optional<double> rho;
  int grid = 201;
};

std::string f17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

RunConfig config_with_overrides(const Args& a, std::string* raw_text) {
  const std::string text = slurp(a.config_path);
  RunConfig cfg = parse_run_config(text);
  if (a.seed) reseed(cfg, *a.seed);
  if (a.rho) {
    cfg.rho = *a.rho;
    cfg.model.rho = *a.rho;
  }
  if (raw_text) *raw_text = text;
  return cfg;
}

std::vector<AxisSpec> domain_axes(const ModelBundle& b, int grid, double pad = 0.0) {
  std::vector<AxisSpec> axes;
  for (int64_t k = 0; k < b.domain_lo.cols(); ++k) {
    const double lo = b.domain_lo(0, k), hi = b.domain_hi(0, k);
    const double m = pad * (hi - lo);
    axes.push_back({lo - m, hi + m, grid});
  }
  return axes;
}

EvalPipelineConfig pipe_of(const TrainConfig& t) {
  return {t.horizon, t.ode_steps, t.traj_samples, t.divergence_norm};
}

int cmd_train(const Args& a) {
  std::string raw;
  RunConfig cfg = config_with_overrides(a, &raw);
  const std::string out = (a.out != ".") ? a.out : cfg.out;
  fs::create_directories(out);

  const SplitDataset data = generate_dataset(cfg.dataset);
  ModelBundle bundle = build_bundle(data.train, cfg.model);

  std::ofstream csv(out + "/metrics.csv", std::ios::binary);
  if (!csv) throw TrainError("cannot open " + out + "/metrics.csv");
  csv << "step,loss_total,loss_cla,loss_fc,loss_con_mean,loss_con_max,loss_sep,"
         "acc_w_head,acc_fc_head,lr\n";

  const auto on_step = [&](const StepMetrics& m, const ModelBundle& b) {
    csv << m.step << "," << f17(m.loss_total) << "," << f17(m.loss_cla) << ","
        << f17(m.loss_fc) << "," << f17(m.loss_con_mean) << "," << f17(m.loss_con_max) << ","
        << f17(m.loss_sep) << "," << f17(m.acc_w) << "," << f17(m.acc_fc) << "," << f17(m.lr)
        << "\n";
    if (cfg.checkpoint_every > 0 && m.step % cfg.checkpoint_every == 0) {
      CheckpointMeta meta{1, cfg.seed, m.step, raw};
      // serialization only reads the bundle; collect_params wants mutable refs
      save_checkpoint(out + "/checkpoint_step" + std::to_string(m.step) + ".json",
                      const_cast<ModelBundle&>(b), meta);
    }
    if (m.step % 50 == 0 || m.step == cfg.train.iterations)
      std::printf("step %5lld  loss %.4f  cla %.4f  con %.5f  sep %.4f  acc %.3f\n",
                  static_cast<long long>(m.step), m.loss_total, m.loss_cla, m.loss_con_mean,
                  m.loss_sep, m.acc_w);
  };
  train_loop(bundle, data.train, cfg.train, on_step);
  csv.close();

  CheckpointMeta meta{1, cfg.seed, cfg.train.iterations, raw};
  save_checkpoint(out + "/checkpoint.json", bundle, meta);

  const auto rows = evaluate(bundle, data.test, {}, pipe_of(cfg.train));
  std::printf("test  acc_w %.4f  acc_fc %.4f  containment %.4f\n", rows[0].acc_w,
              rows[0].acc_fc, rows[0].containment);
  std::printf("wrote %s/checkpoint.json and %s/metrics.csv\n", out.c_str(), out.c_str());
  return 0;
}

int cmd_eval(const Args& a) {
  RunConfig cfg = config_with_overrides(a, nullptr);
  ModelBundle bundle = load_checkpoint(a.checkpoint_path);
  if (a.rho) bundle.head.rho = *a.rho;
  fs::create_directories(a.out);

  const SplitDataset data = generate_dataset(cfg.dataset);
  const auto rows = evaluate(bundle, data.test, cfg.scenarios, pipe_of(cfg.train));

  std::ofstream csv(a.out + "/eval.csv", std::ios::binary);
  if (!csv) throw EvalError("cannot open " + a.out + "/eval.csv");
  csv << "scenario,n,acc_w,acc_fc,res_mean,res_max,containment";
  for (int64_t c = 0; c < bundle.classes(); ++c) csv << ",acc_class" << c;
  csv << "\n";
  for (const auto& r : rows) {
    csv << r.scenario << "," << r.n << "," << f17(r.acc_w) << "," << f17(r.acc_fc) << ","
        << f17(r.res_mean) << "," << f17(r.res_max) << "," << f17(r.containment);
    for (double v : r.per_class_acc) csv << "," << f17(v);
    csv << "\n";
    std::printf("%-16s n=%-5lld acc_w %.4f  acc_fc %.4f  containment %.4f\n",
                r.scenario.c_str(), static_cast<long long>(r.n), r.acc_w, r.acc_fc,
                r.containment);
  }
  std::printf("wrote %s/eval.csv\n", a.out.c_str());
  return 0;
}

int cmd_certify(const Args& a) {
  ModelBundle bundle = load_checkpoint(a.checkpoint_path);
  if (a.rho) bundle.head.rho = *a.rho;
  if (bundle.lift)
    throw VerifyError("certify needs matching data and latent dimensions (no lift)");
  fs::create_directories(a.out);

  const auto axes = domain_axes(bundle, a.grid);
  const Field f = make_field_eval(bundle.dynamics);
  const RoaGrid grid = roa_compare(f, bundle.head, axes, bundle.head.rho, 40.0);

  std::ostringstream os;
  os << "{\n  \"kind\": \"certify\",\n  \"rho\": " << f17(bundle.head.rho)
     << ",\n  \"disagreement\": " << f17(grid.disagreement) << ",\n  \"iou\": [";
  for (size_t c = 0; c < grid.iou.size(); ++c)
    os << (c ? "," : "") << f17(grid.iou[c]);
  os << "],\n  \"axes\": [";
  for (size_t k = 0; k < grid.axes.size(); ++k)
    os << (k ? "," : "") << "{\"lo\": " << f17(grid.axes[k].lo)
       << ", \"hi\": " << f17(grid.axes[k].hi) << ", \"n\": " << grid.axes[k].n << "}";
  os << "],\n  \"oracle\": [";
  for (size_t i = 0; i < grid.oracle.size(); ++i) os << (i ? "," : "") << grid.oracle[i];
  os << "],\n  \"learned\": [";
  for (size_t i = 0; i < grid.learned.size(); ++i) os << (i ? "," : "") << grid.learned[i];
  os << "]\n}\n";
  std::ofstream rep(a.out + "/reports.json", std::ios::binary);
  if (!rep) throw VerifyError("cannot open " + a.out + "/reports.json");
  rep << os.str();

  for (size_t c = 0; c < grid.iou.size(); ++c)
    std::printf("class %zu  IoU %.4f\n", c, grid.iou[c]);
  std::printf("label disagreement %.4f\nwrote %s/reports.json\n", grid.disagreement,
              a.out.c_str());
  return 0;
}

int cmd_verify(const Args& a) {
  ModelBundle bundle = load_checkpoint(a.checkpoint_path);
  if (a.rho) bundle.head.rho = *a.rho;
  fs::create_directories(a.out);
  const uint64_t seed = a.seed.value_or(0);

  std::vector<PropositionReport> reports;
  reports.push_back(
      convexity_suite(bundle.head.net, bundle.head.anchors.c, 10000, mix_seed(seed, 0xc011ull)));

  {
    // empirical separability against the closed-form lower bound; the final
    // case has d >= N+1, where the bound is exact at one
    const int64_t cases[5][3] = {{2, 2, 2}, {3, 2, 3}, {5, 5, 8}, {2, 5, 3}, {3, 3, 4}};
    double worst = 1.0;
    bool pass = true;
    for (const auto& c : cases) {
      const auto t = separability_mc(c[0], c[1], c[2], 20000, mix_seed(seed, 0x5e9ull));
      worst = std::min(worst, t.empirical - t.bound);
      if (c[2] >= c[0] + 1)
        pass = pass && t.empirical == 1.0;
      else
        pass = pass && t.empirical >= t.bound;
    }
    reports.push_back({"separability", pass, worst, 0.0});
  }

  reports.push_back(overlap_check(bundle.head, domain_axes(bundle, 101), bundle.head.rho));

  if (!a.config_path.empty()) {
    RunConfig cfg = config_with_overrides(a, nullptr);
    const SplitDataset data = generate_dataset(cfg.dataset);
    reports.push_back(
        containment_check(bundle, data.test, bundle.head.rho, 1, cfg.train.horizon));
  }

  std::ostringstream os;
  os << "{\n  \"kind\": \"verify\",\n  \"reports\": [\n";
  bool all_pass = true;
  for (size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    all_pass = all_pass && r.pass;
    os << "    {\"tag\": \"" << r.tag << "\", \"pass\": " << (r.pass ? "true" : "false")
       << ", \"statistic\": " << f17(r.statistic) << ", \"tolerance\": " << f17(r.tolerance)
       << "}" << (i + 1 < reports.size() ? "," : "") << "\n";
    std::printf("%-14s %s  statistic=%.6g  tolerance=%.6g\n", r.tag.c_str(),
                r.pass ? "PASS" : "FAIL", r.statistic, r.tolerance);
  }
  os << "  ]\n}\n";
  std::ofstream rep(a.out + "/reports.json", std::ios::binary);
  if (!rep) throw VerifyError("cannot open " + a.out + "/reports.json");
  rep << os.str();
  std::printf("wrote %s/reports.json\n", a.out.c_str());
  return all_pass ? 0 : 1;
}

int cmd_sample_boundary(const Args& a) {
  ModelBundle bundle = load_checkpoint(a.checkpoint_path);
  if (a.rho) bundle.head.rho = *a.rho;
  const uint64_t seed = a.seed.value_or(0);
  const LyapunovHead& head = bundle.head;

  std::printf("class");
  for (int64_t k = 0; k < head.dim(); ++k) std::printf(",x%lld", static_cast<long long>(k));
  std::printf(",w,converged\n");
  for (int64_t c = 0; c < head.classes(); ++c) {
    const Tensor dirs =
        make_directions(head.anchors.c, static_cast<int>(c), 20, 0.5, mix_seed(seed, 0xd1 + c));
    const BoundaryBatch b = boundary_sample(head, static_cast<int>(c), dirs, 1e-4, 60);
    for (int64_t r = 0; r < b.points.rows(); ++r) {
      std::printf("%lld", static_cast<long long>(c));
      for (int64_t k = 0; k < b.points.cols(); ++k) std::printf(",%s", f17(b.points(r, k)).c_str());
      std::printf(",%s,%d\n", f17(b.w_values(r, 0)).c_str(), b.converged[r] ? 1 : 0);
    }
  }
  return 0;
}

int cmd_plot(const Args& a) {
  ModelBundle bundle = load_checkpoint(a.checkpoint_path);
  if (a.rho) bundle.head.rho = *a.rho;
  fs::create_directories(a.out);
  const auto axes = domain_axes(bundle, a.grid, 0.10);
  if (axes.size() != 2)
    throw SvgError("plot needs a 2D state space, got dim " + std::to_string(axes.size()));

  RegionPlotInputs in = region_inputs(bundle.head, axes[0], axes[1]);

  if (!bundle.lift) {
    const Field f = make_field_eval(bundle.dynamics);

    // dashed oracle boundary: convergence labels on a coarse grid
    const AxisSpec cax{axes[0].lo, axes[0].hi, 41}, cay{axes[1].lo, axes[1].hi, 41};
    std::vector<Tensor> ind(static_cast<size_t>(bundle.classes()),
                            Tensor(cax.n, cay.n, -1.0));
    Tensor p(1, 2, 0.0);
    for (int64_t i = 0; i < cax.n; ++i)
      for (int64_t j = 0; j < cay.n; ++j) {
        p(0, 0) = cax.lo + (cax.hi - cax.lo) * i / (cax.n - 1);
        p(0, 1) = cay.lo + (cay.hi - cay.lo) * j / (cay.n - 1);
        const int lab = flow_to_convergence(f, p, bundle.head.anchors.c, 0.05, 40.0, {});
        if (lab >= 0) ind[lab](i, j) = 1.0;
      }
    for (size_t c = 0; c < ind.size(); ++c) {
      ContourSet cs;
      cs.segs = marching_squares(ind[c], cax, cay, 0.0);
      cs.color = "#444444";
      cs.dashed = true;
      in.contours.push_back(std::move(cs));
    }

    // a ring of sampled trajectories around the domain
    const double cx = 0.5 * (axes[0].lo + axes[0].hi), cy = 0.5 * (axes[1].lo + axes[1].hi);
    const double rx = 0.45 * (axes[0].hi - axes[0].lo), ry = 0.45 * (axes[1].hi - axes[1].lo);
    std::vector<double> times;
    for (int s = 1; s <= 100; ++s) times.push_back(10.0 * s / 100.0);
    for (int k = 0; k < 8; ++k) {
      const double th = 2.0 * 3.14159265358979312 * k / 8.0;
      Tensor h0(1, 2, 0.0);
      h0(0, 0) = cx + rx * std::cos(th);
      h0(0, 1) = cy + ry * std::sin(th);
      Tensor line(static_cast<int64_t>(times.size()) + 1, 2, 0.0);
      line(0, 0) = h0(0, 0);
      line(0, 1) = h0(0, 1);
      try {
        const PlainTrajectory tr = dopri5_integrate(f, h0, 10.0, {}, times);
        for (size_t s = 1; s < tr.states.size(); ++s) {
          line(static_cast<int64_t>(s), 0) = tr.states[s](0, 0);
          line(static_cast<int64_t>(s), 1) = tr.states[s](0, 1);
        }
        in.trajectories.push_back(std::move(line));
      } catch (const SolverError&) {
        // diverging start point: drop the polyline, keep the plot
      }
    }
  }

  emit_svg(in, a.out + "/regions.svg");
  std::printf("wrote %s/regions.svg\n", a.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neural region-of-attraction training, certification, and plotting"};
  app.require_subcommand(1);

  Args args;
  const auto add_common = [&](CLI::App* sub, bool need_cfg, bool need_ckpt) {
    auto* oc = sub->add_option("--config", args.config_path, "run configuration JSON");
    auto* ok = sub->add_option("--checkpoint", args.checkpoint_path, "checkpoint JSON");
    sub->add_option("--out", args.out, "output directory");
    sub->add_option("--seed", args.seed, "override the config seed");
    sub->add_option("--grid", args.grid, "grid nodes per axis")->check(CLI::Range(2, 2001));
    sub->add_option("--rho", args.rho, "override the sublevel threshold")
        ->check(CLI::Range(1e-9, 1.0));
    if (need_cfg) oc->required();
    if (need_ckpt) ok->required();
  };

  auto* t = app.add_subcommand("train", "train a model and write checkpoint + metrics");
  add_common(t, true, false);
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint under the configured scenarios");
  add_common(e, true, true);
  auto* c = app.add_subcommand("certify", "compare learned regions against the flow oracle");
  add_common(c, false, true);
  auto* v = app.add_subcommand("verify", "run the proposition suites on a checkpoint");
  add_common(v, false, true);
  auto* s = app.add_subcommand("sample-boundary", "dump level-boundary samples as CSV");
  add_common(s, false, true);
  auto* p = app.add_subcommand("plot", "render regions, level sets, and trajectories as SVG");
  add_common(p, false, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return 2;
  }

  try {
    if (t->parsed()) return cmd_train(args);
    if (e->parsed()) return cmd_eval(args);
    if (c->parsed()) return cmd_certify(args);
    if (v->parsed()) return cmd_verify(args);
    if (s->parsed()) return cmd_sample_boundary(args);
    if (p->parsed()) return cmd_plot(args);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 2;
}
