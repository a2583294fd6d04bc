#include "zubov/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace zubov {

namespace {

double axis_at(const AxisSpec& a, int64_t i) {
  return a.lo + (a.hi - a.lo) * static_cast<double>(i) / static_cast<double>(a.n - 1);
}

struct Pt {
  double x, y;
};

Pt interp(double px, double py, double vp, double qx, double qy, double vq, double level) {
  double t = (vq == vp) ? 0.5 : (level - vp) / (vq - vp);
  t = std::clamp(t, 0.0, 1.0);
  return {px + t * (qx - px), py + t * (qy - py)};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string lerp_color(double t) {
  // three-stop ramp: deep blue (W=0) through mid blue to paper white (W=1)
  static const double stops[3][3] = {{21, 48, 107}, {78, 154, 199}, {247, 247, 242}};
  t = std::clamp(t, 0.0, 1.0);
  const int seg = t < 0.5 ? 0 : 1;
  const double u = (t - 0.5 * seg) * 2.0;
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x",
                static_cast<int>(std::lround(stops[seg][0] + u * (stops[seg + 1][0] - stops[seg][0]))),
                static_cast<int>(std::lround(stops[seg][1] + u * (stops[seg + 1][1] - stops[seg][1]))),
                static_cast<int>(std::lround(stops[seg][2] + u * (stops[seg + 1][2] - stops[seg][2]))));
  return buf;
}

const char* kPalette[6] = {"#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#e377c2"};

}  // namespace

std::vector<Segment> marching_squares(const Tensor& vals, const AxisSpec& ax,
                                      const AxisSpec& ay, double level) {
  if (vals.rows() != ax.n || vals.cols() != ay.n)
    throw SvgError("marching_squares: grid shape does not match the axes");
  if (ax.n < 2 || ay.n < 2) throw SvgError("marching_squares: need at least a 2x2 grid");
  std::vector<Segment> out;
  for (int64_t i = 0; i + 1 < ax.n; ++i) {
    const double xa = axis_at(ax, i), xb = axis_at(ax, i + 1);
    for (int64_t j = 0; j + 1 < ay.n; ++j) {
      const double ya = axis_at(ay, j), yb = axis_at(ay, j + 1);
      const double vA = vals(i, j), vB = vals(i + 1, j);
      const double vC = vals(i + 1, j + 1), vD = vals(i, j + 1);
      const int code = (vA > level ? 1 : 0) | (vB > level ? 2 : 0) | (vC > level ? 4 : 0) |
                       (vD > level ? 8 : 0);
      if (code == 0 || code == 15) continue;
      const auto eAB = [&] { return interp(xa, ya, vA, xb, ya, vB, level); };
      const auto eBC = [&] { return interp(xb, ya, vB, xb, yb, vC, level); };
      const auto eCD = [&] { return interp(xb, yb, vC, xa, yb, vD, level); };
      const auto eDA = [&] { return interp(xa, yb, vD, xa, ya, vA, level); };
      const auto seg = [&](Pt p, Pt q) { out.push_back({p.x, p.y, q.x, q.y}); };
      switch (code) {
        case 1: case 14: seg(eDA(), eAB()); break;
        case 2: case 13: seg(eAB(), eBC()); break;
        case 3: case 12: seg(eDA(), eBC()); break;
        case 4: case 11: seg(eBC(), eCD()); break;
        case 6: case 9: seg(eAB(), eCD()); break;
        case 7: case 8: seg(eCD(), eDA()); break;
        case 5: case 10: {
          const double center = 0.25 * (vA + vB + vC + vD);
          const bool band_13 = (code == 5) == (center > level);  // A-C side holds the center
          if (band_13) {
            seg(eAB(), eBC());
            seg(eCD(), eDA());
          } else {
            seg(eDA(), eAB());
            seg(eBC(), eCD());
          }
          break;
        }
      }
    }
  }
  return out;
}

RegionPlotInputs region_inputs(const LyapunovHead& head, const AxisSpec& ax,
                               const AxisSpec& ay) {
  if (head.dim() != 2)
    throw SvgError("region_inputs: plotting needs a 2D state space, got dim " +
                   std::to_string(head.dim()));
  if (ax.n < 2 || ay.n < 2) throw SvgError("region_inputs: need at least a 2x2 grid");
  Tensor nodes(ax.n * ay.n, 2, 0.0);
  for (int64_t i = 0; i < ax.n; ++i)
    for (int64_t j = 0; j < ay.n; ++j) {
      nodes(i * ay.n + j, 0) = axis_at(ax, i);
      nodes(i * ay.n + j, 1) = axis_at(ay, j);
    }
  RegionPlotInputs in;
  in.ax = ax;
  in.ay = ay;
  in.heat = Tensor(ax.n, ay.n, 0.0);
  const int64_t L = head.classes();
  std::vector<Tensor> grids;
  for (int64_t c = 0; c < L; ++c) {
    const Tensor w = w_eval(head, nodes, static_cast<int>(c));
    Tensor g(ax.n, ay.n, 0.0);
    for (int64_t i = 0; i < ax.n; ++i)
      for (int64_t j = 0; j < ay.n; ++j) g(i, j) = w(i * ay.n + j, 0);
    grids.push_back(std::move(g));
  }
  for (int64_t k = 0; k < in.heat.numel(); ++k) {
    double m = grids[0][k];
    for (int64_t c = 1; c < L; ++c) m = std::min(m, grids[static_cast<size_t>(c)][k]);
    in.heat[k] = m;
  }
  for (int64_t c = 0; c < L; ++c) {
    ContourSet cs;
    cs.segs = marching_squares(grids[static_cast<size_t>(c)], ax, ay, head.rho);
    cs.color = kPalette[c % 6];
    in.contours.push_back(std::move(cs));
  }
  in.anchors = head.anchors.c;
  return in;
}

std::string render_svg(const RegionPlotInputs& in, int64_t px) {
  const AxisSpec &ax = in.ax, &ay = in.ay;
  if (in.heat.rows() != ax.n || in.heat.cols() != ay.n)
    throw SvgError("render_svg: heat grid shape does not match the axes");
  if (px < 16) throw SvgError("render_svg: image too small");
  const double W = static_cast<double>(px);
  const double H = W * (ay.hi - ay.lo) / (ax.hi - ax.lo);
  const auto sx = [&](double x) { return (x - ax.lo) / (ax.hi - ax.lo) * W; };
  const auto sy = [&](double y) { return H - (y - ay.lo) / (ay.hi - ay.lo) * H; };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(W) << "\" height=\""
     << fmt(H) << "\" viewBox=\"0 0 " << fmt(W) << " " << fmt(H) << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << fmt(W) << "\" height=\"" << fmt(H)
     << "\" fill=\"#ffffff\"/>\n";

  // heatmap: one quantized color per cell, runs merged along x
  constexpr int kLevels = 24;
  os << "<g shape-rendering=\"crispEdges\" stroke=\"none\">\n";
  for (int64_t j = 0; j + 1 < ay.n; ++j) {
    int64_t run_start = 0;
    int run_q = -1;
    const auto flush = [&](int64_t end) {
      if (run_q < 0 || end <= run_start) return;
      const double x0 = sx(axis_at(ax, run_start)), x1 = sx(axis_at(ax, end));
      const double y1 = sy(axis_at(ay, j)), y0 = sy(axis_at(ay, j + 1));
      os << "<rect x=\"" << fmt(x0) << "\" y=\"" << fmt(y0) << "\" width=\"" << fmt(x1 - x0)
         << "\" height=\"" << fmt(y1 - y0) << "\" fill=\""
         << lerp_color((run_q + 0.5) / kLevels) << "\"/>\n";
    };
    for (int64_t i = 0; i + 1 < ax.n; ++i) {
      const double v = 0.25 * (in.heat(i, j) + in.heat(i + 1, j) + in.heat(i, j + 1) +
                               in.heat(i + 1, j + 1));
      const int q = std::clamp(static_cast<int>(v * kLevels), 0, kLevels - 1);
      if (q != run_q) {
        flush(i);
        run_start = i;
        run_q = q;
      }
    }
    flush(ax.n - 1);
  }
  os << "</g>\n";

  for (const auto& cs : in.contours) {
    if (cs.segs.empty()) continue;
    os << "<path fill=\"none\" stroke=\"" << cs.color << "\" stroke-width=\"1.5\"";
    if (cs.dashed) os << " stroke-dasharray=\"6 4\"";
    os << " d=\"";
    for (const auto& s : cs.segs)
      os << "M" << fmt(sx(s.x0)) << " " << fmt(sy(s.y0)) << "L" << fmt(sx(s.x1)) << " "
         << fmt(sy(s.y1));
    os << "\"/>\n";
  }

  for (const auto& traj : in.trajectories) {
    if (traj.rows() < 2 || traj.cols() != 2) continue;
    os << "<polyline fill=\"none\" stroke=\"#333333\" stroke-width=\"0.8\" points=\"";
    for (int64_t r = 0; r < traj.rows(); ++r) {
      if (r) os << " ";
      os << fmt(sx(traj(r, 0))) << "," << fmt(sy(traj(r, 1)));
    }
    os << "\"/>\n";
  }

  if (in.anchors.rows() > 0 && in.anchors.cols() == 2)
    for (int64_t r = 0; r < in.anchors.rows(); ++r)
      os << "<circle cx=\"" << fmt(sx(in.anchors(r, 0))) << "\" cy=\""
         << fmt(sy(in.anchors(r, 1))) << "\" r=\"4\" fill=\"" << kPalette[r % 6]
         << "\" stroke=\"#ffffff\" stroke-width=\"1.2\"/>\n";

  os << "</svg>\n";
  return os.str();
}

void emit_svg(const RegionPlotInputs& in, const std::string& path, int64_t px) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw SvgError("emit_svg: cannot open " + path);
  f << render_svg(in, px);
  if (!f) throw SvgError("emit_svg: write failed for " + path);
}

}  // namespace zubov
