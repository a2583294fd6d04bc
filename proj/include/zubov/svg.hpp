#pragma once

#include <string>
#include <vector>

#include "zubov/nets.hpp"
#include "zubov/verify.hpp"

namespace zubov {

struct SvgError : TensorError {
  explicit SvgError(const std::string& what) : TensorError(what) {}
};

struct Segment {
  double x0, y0, x1, y1;
};

// Level-set segments of a nodal field: vals(i, j) holds f(x_i, y_j). Linear
// interpolation along cell edges; saddle cells split by the center average.
std::vector<Segment> marching_squares(const Tensor& vals, const AxisSpec& ax,
                                      const AxisSpec& ay, double level);

struct ContourSet {
  std::vector<Segment> segs;
  std::string color = "#000000";
  bool dashed = false;
};

struct RegionPlotInputs {
  Tensor heat;  // (ax.n, ay.n) nodal values of min_i W_i, expected in [0, 1]
  AxisSpec ax, ay;
  std::vector<ContourSet> contours;
  Tensor anchors;                        // (L, 2) markers; default empty
  std::vector<Tensor> trajectories;      // (k, 2) polylines
};

// Grid evaluation of a 2D head: heatmap of min_i W_i plus one rho contour per
// class. Throws on head.dim() != 2.
RegionPlotInputs region_inputs(const LyapunovHead& head, const AxisSpec& ax,
                               const AxisSpec& ay);

std::string render_svg(const RegionPlotInputs& in, int64_t px = 640);
void emit_svg(const RegionPlotInputs& in, const std::string& path, int64_t px = 640);

}  // namespace zubov
