#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "zubov/rng.hpp"
#include "zubov/verify.hpp"

using namespace zubov;
using testutil::quad_head;
using testutil::zero_mlp;

namespace {

double seg_dist(double ax, double ay, double bx, double by, double qx, double qy) {
  const double vx = bx - ax, vy = by - ay;
  const double l2 = vx * vx + vy * vy;
  double t = l2 > 0.0 ? ((qx - ax) * vx + (qy - ay) * vy) / l2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(ax + t * vx - qx, ay + t * vy - qy);
}

// planar oracle: zero if the query sits in any vertex triangle, otherwise the
// closest point lies on a segment between two of the vertices
double brute_hull_dist(const Tensor& pts, double qx, double qy) {
  const int64_t n = pts.rows();
  auto cross = [](double ax, double ay, double bx, double by) { return ax * by - ay * bx; };
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = i + 1; j < n; ++j)
      for (int64_t k = j + 1; k < n; ++k) {
        const double x1 = pts(i, 0), y1 = pts(i, 1);
        const double x2 = pts(j, 0), y2 = pts(j, 1);
        const double x3 = pts(k, 0), y3 = pts(k, 1);
        const double area = cross(x2 - x1, y2 - y1, x3 - x1, y3 - y1);
        if (std::abs(area) < 1e-12) continue;
        const double s1 = cross(x2 - x1, y2 - y1, qx - x1, qy - y1) / area;
        const double s2 = cross(x3 - x2, y3 - y2, qx - x2, qy - y2) / area;
        const double s3 = cross(x1 - x3, y1 - y3, qx - x3, qy - y3) / area;
        if (s1 >= -1e-12 && s2 >= -1e-12 && s3 >= -1e-12) return 0.0;
      }
  double best = 1e300;
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = i; j < n; ++j)
      best = std::min(best, seg_dist(pts(i, 0), pts(i, 1), pts(j, 0), pts(j, 1), qx, qy));
  return best;
}

TEST_CASE("hull distance agrees with a planar brute force") {
  Rng rng(42);
  for (int rep = 0; rep < 300; ++rep) {
    Tensor pts = rng.uniform_tensor(5, 2, -1.0, 1.0);
    Tensor q = rng.uniform_tensor(1, 2, -2.0, 2.0);
    const double got = hull_distance(pts, q);
    const double want = brute_hull_dist(pts, q(0, 0), q(0, 1));
    CHECK(std::abs(got - want) <= 1e-6);
  }
}

TEST_CASE("hull distance degenerate shapes") {
  Tensor one(1, 2, std::vector<double>{0.3, -0.7});
  Tensor q(1, 2, std::vector<double>{1.3, -0.7});
  CHECK(hull_distance(one, q) == doctest::Approx(1.0).epsilon(1e-12));

  Tensor line(3, 1, std::vector<double>{-1.0, 0.5, 2.0});
  CHECK(hull_distance(line, Tensor::scalar(3.0)) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(hull_distance(line, Tensor::scalar(0.0)) <= 1e-9);
  CHECK(hull_distance(line, Tensor::scalar(-4.0)) == doctest::Approx(3.0).epsilon(1e-9));

  Tensor tri(3, 2, std::vector<double>{0, 0, 1, 0, 0, 1});
  CHECK(hull_membership(tri, Tensor(1, 2, std::vector<double>{0.2, 0.2})));
  CHECK(!hull_membership(tri, Tensor(1, 2, std::vector<double>{1.0, 1.0})));
  CHECK(hull_membership(tri, Tensor(1, 2, std::vector<double>{1.0, 0.0})));

  CHECK_THROWS_AS(hull_distance(tri, Tensor(2, 2, 0.0)), VerifyError);
  CHECK_THROWS_AS(hull_distance(tri, Tensor::scalar(0.0)), VerifyError);
}

TEST_CASE("separability bound closed form") {
  CHECK(separability_bound(2, 2, 1) == doctest::Approx(4.0 / 9.0).epsilon(1e-14));
  CHECK(separability_bound(3, 1, 1) == 0.5);
  CHECK(separability_bound(2, 2, 3) == 1.0);
  CHECK(separability_bound(3, 2, 4) == 1.0);
  CHECK(separability_bound(2, 2, 2) > separability_bound(2, 2, 1));
  CHECK_THROWS_AS(separability_bound(1, 1, 1), VerifyError);
  CHECK_THROWS_AS(separability_bound(2, 0, 1), VerifyError);
  CHECK_THROWS_AS(separability_bound(2, 1, 0), VerifyError);
}

TEST_CASE("separability sampling matches the line case and beats the bound above it") {
  // d = 1 is the tight case: the closed form is the exact probability
  const SeparabilityTrial line = separability_mc(2, 2, 1, 20000, 7);
  CHECK(line.N == 2);
  CHECK(line.trials == 20000);
  CHECK(std::abs(line.empirical - 4.0 / 9.0) <= 0.015);
  CHECK(line.bound == doctest::Approx(4.0 / 9.0).epsilon(1e-14));

  // in higher dimensions the closed form is only a floor
  for (auto [N, M] : std::vector<std::pair<int64_t, int64_t>>{{2, 2}, {3, 2}, {4, 3}}) {
    const SeparabilityTrial t = separability_mc(N, M, 2, 2000, 11);
    CHECK(t.empirical >= t.bound);
  }

  // past the dimension threshold separation is certain
  const SeparabilityTrial sure = separability_mc(2, 2, 3, 300, 3);
  CHECK(sure.bound == 1.0);
  CHECK(sure.empirical == 1.0);

  CHECK_THROWS_AS(separability_mc(2, 2, 1, 0, 1), VerifyError);
  CHECK_THROWS_AS(separability_mc(1, 2, 1, 10, 1), VerifyError);
}

Field nearest_anchor_field(const Tensor& anchors) {
  return [anchors](const Tensor& h) {
    Tensor out(h.rows(), h.cols(), 0.0);
    for (int64_t i = 0; i < h.rows(); ++i) {
      double best = 1e300;
      int64_t arg = 0;
      for (int64_t c = 0; c < anchors.rows(); ++c) {
        double d2 = 0.0;
        for (int64_t k = 0; k < h.cols(); ++k) {
          const double dd = h(i, k) - anchors(c, k);
          d2 += dd * dd;
        }
        if (d2 < best) {
          best = d2;
          arg = c;
        }
      }
      for (int64_t k = 0; k < h.cols(); ++k) out(i, k) = anchors(arg, k) - h(i, k);
    }
    return out;
  };
}

TEST_CASE("region comparison is exact when the level sets mirror the flow") {
  Tensor anchors(2, 2, std::vector<double>{-1.5, 0.0, 1.5, 0.0});
  Field f = nearest_anchor_field(anchors);
  // wide bowls: every grid node lies below the certification level
  LyapunovHead head = quad_head(anchors, 0.05);
  std::vector<LevelFn> fns{make_w_eval(head, 0), make_w_eval(head, 1)};
  std::vector<AxisSpec> axes{{-2.0, 2.0, 41}, {-2.0, 2.0, 41}};

  const RoaGrid g = roa_compare(f, fns, anchors, axes, 0.9, 12.0);
  REQUIRE(g.oracle.size() == 41u * 41u);
  REQUIRE(g.iou.size() == 2);
  CHECK(g.iou[0] == 1.0);
  CHECK(g.iou[1] == 1.0);
  CHECK(g.disagreement == 0.0);
  CHECK(std::count(g.learned.begin(), g.learned.end(), -1) == 0);

  // the head overload must agree with the explicit level functions
  std::vector<AxisSpec> small{{-2.0, 2.0, 21}, {-2.0, 2.0, 21}};
  const RoaGrid via_fns = roa_compare(f, fns, anchors, small, 0.9, 12.0);
  const RoaGrid via_head = roa_compare(f, head, small, 0.9, 12.0);
  CHECK(via_fns.learned == via_head.learned);
  CHECK(via_fns.oracle == via_head.oracle);

  // a tighter level leaves the far corners unclaimed
  const RoaGrid shrunk = roa_compare(f, fns, anchors, small, 0.1, 12.0);
  CHECK(std::count(shrunk.learned.begin(), shrunk.learned.end(), -1) > 0);
  CHECK(shrunk.disagreement > 0.0);
  CHECK(shrunk.iou[0] < 1.0);
}

TEST_CASE("region comparison argument validation") {
  Tensor anchors(2, 2, std::vector<double>{-1.5, 0.0, 1.5, 0.0});
  Field f = nearest_anchor_field(anchors);
  LyapunovHead head = quad_head(anchors, 0.05);
  std::vector<LevelFn> fns{make_w_eval(head, 0), make_w_eval(head, 1)};
  std::vector<AxisSpec> axes{{-2.0, 2.0, 5}, {-2.0, 2.0, 5}};

  CHECK_THROWS_AS(roa_compare(f, std::vector<LevelFn>{}, anchors, axes, 0.9, 1.0), VerifyError);
  CHECK_THROWS_AS(roa_compare(f, fns, Tensor(3, 2, 0.5), axes, 0.9, 1.0), VerifyError);
  std::vector<AxisSpec> one_axis{{-2.0, 2.0, 5}};
  CHECK_THROWS_AS(roa_compare(f, fns, anchors, one_axis, 0.9, 1.0), VerifyError);
  std::vector<AxisSpec> bad{{-2.0, 2.0, 1}, {-2.0, 2.0, 5}};
  CHECK_THROWS_AS(roa_compare(f, fns, anchors, bad, 0.9, 1.0), VerifyError);
  std::vector<LevelFn> wrong{fns[0], [](const Tensor& p) { return Tensor(p.rows(), 2, 0.0); }};
  CHECK_THROWS_AS(roa_compare(f, wrong, anchors, axes, 0.9, 1.0), VerifyError);
}

TEST_CASE("claim overlap across classes") {
  std::vector<AxisSpec> axes{{-2.0, 2.0, 81}, {-2.0, 2.0, 81}};

  LyapunovHead apart = quad_head(Tensor(2, 2, std::vector<double>{-2.2, 0.0, 2.2, 0.0}), 1.0);
  const PropositionReport ok = overlap_check(apart, axes, 0.9);
  CHECK(ok.tag == "non-overlap");
  CHECK(ok.pass);
  CHECK(ok.statistic == 0.0);
  CHECK(ok.tolerance == 0.01);

  LyapunovHead close = quad_head(Tensor(2, 2, std::vector<double>{-1.0, 0.0, 1.0, 0.0}), 1.0);
  const PropositionReport bad = overlap_check(close, axes, 0.9);
  CHECK(!bad.pass);
  CHECK(bad.statistic > 0.05);

  std::vector<AxisSpec> one{{-2.0, 2.0, 11}};
  CHECK_THROWS_AS(overlap_check(close, one, 0.9), VerifyError);
}

TEST_CASE("trajectory containment on a frozen model") {
  ModelBundle b;
  b.d_in = 2;
  b.dynamics = zero_mlp(2, 4, 2);
  b.head = quad_head(Tensor(2, 2, std::vector<double>{-1, 0, 1, 0}), 0.5);
  b.domain_lo = Tensor(1, 2, -3.0);
  b.domain_hi = Tensor(1, 2, 3.0);

  Dataset test;
  test.X = Tensor(4, 2, std::vector<double>{-1.2, 0.1, 0.9, -0.2, -0.8, 0.0, 1.1, 0.3});
  test.y = {0, 1, 0, 1};
  test.classes = 2;
  test.lo = Tensor(1, 2, -3.0);
  test.hi = Tensor(1, 2, 3.0);

  const PropositionReport rep = containment_check(b, test, 0.9, 2);
  CHECK(rep.tag == "containment");
  CHECK(rep.statistic == 1.0);
  CHECK(rep.pass);

  // mislabeled points leave nothing to certify
  Dataset wrong = test;
  wrong.y = {1, 0, 1, 0};
  const PropositionReport none = containment_check(b, wrong, 0.9, 2);
  CHECK(none.statistic == 0.0);
  CHECK(!none.pass);

  CHECK_THROWS_AS(containment_check(b, test, 0.9, 0), VerifyError);
  Dataset empty;
  empty.classes = 2;
  CHECK_THROWS_AS(containment_check(b, empty, 0.9, 2), VerifyError);
}

TEST_CASE("midpoint convexity probes") {
  Rng rng(8);
  GatedConvexNet net = make_gated_convex(2, {6, 6, 1}, {4, 4, 0}, rng);
  project_nonneg(net);
  Tensor anchors(2, 2, std::vector<double>{-1.0, 0.0, 1.0, 0.0});
  const PropositionReport ok = convexity_suite(net, anchors, 2000, 3);
  CHECK(ok.tag == "convexity");
  CHECK(ok.pass);
  CHECK(ok.statistic <= 1e-9);

  // a free-signed weight bends the surface concave around the origin
  GatedConvexNet bent = testutil::zero_convex(1, {1, 1}, {1, 0});
  bent.layers[0].ax(0, 0) = 1.0;
  bent.layers[1].az(0, 0) = -3.0;
  bent.layers[1].ax(0, 0) = 2.0;
  Tensor a1(1, 1, std::vector<double>{0.0});
  const PropositionReport caught = convexity_suite(bent, a1, 2000, 3);
  CHECK(!caught.pass);
  CHECK(caught.statistic > 1e-3);

  // the all-zero network is flat, so the worst violation is exactly zero
  GatedConvexNet flat = testutil::zero_convex(2);
  const PropositionReport zero = convexity_suite(flat, anchors, 500, 1);
  CHECK(zero.statistic == 0.0);
  CHECK(zero.pass);

  CHECK_THROWS_AS(convexity_suite(net, anchors, 0, 1), VerifyError);
  CHECK_THROWS_AS(convexity_suite(net, Tensor(2, 3, 0.0), 10, 1), VerifyError);
}

}  // namespace
