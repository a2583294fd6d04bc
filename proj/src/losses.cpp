#include "zubov/losses.hpp"

namespace zubov {

Value consistency_residual(const BoundHead& head, const TapeFieldFn& field, Value x, int cls) {
  const int64_t m = x.val().rows();
  Value fx = field(x);
  Dual xd = dual(x, fx);
  Dual v = v_value<Dual>(head, xd, cls);
  Dual e = exp(affine(v, -1.0, 0.0));  // e = 1 - W; tangent of W is -e.t
  Value crow = head.anchor_rows[static_cast<size_t>(cls)];
  Value phi = rowsum(square(sub(x, repeat_rows(crow, m))));
  Value resid = sub(hadamard(phi, e.p), e.t);
  return square(resid);
}

Value consistency_residual(const BoundHead& head, const BoundMlp& field, Value x, int cls) {
  return consistency_residual(
      head, [&field](Value h) { return mlp_forward<Value>(field, h); }, x, cls);
}

Value output_probs(const BoundHead& head, Value h_final) {
  std::vector<Value> cols;
  for (int64_t i = 0; i < head.classes; ++i) {
    auto we = w_value<Value>(head, h_final, static_cast<int>(i));
    cols.push_back(clamp(we.w, head.eps_w, 1.0 - head.eps_w));
  }
  Value w = concat_cols(cols);
  Value shifted = affine(reciprocal(w), 1.0, -head.alpha);
  Value denom = rowsum(shifted);
  return hadamard(shifted, colbroadcast(reciprocal(denom), head.classes));
}

Value cla_loss(Value probs, const std::vector<int64_t>& labels) {
  Value py = gather_per_row(probs, labels);
  Value nll = neg(log(py));
  return scale(sum_all(nll), 1.0 / static_cast<double>(labels.size()));
}

Value fc_loss(const BoundHead& head, Value h_final, const std::vector<int64_t>& labels) {
  Tape* tape = h_final.tape;
  const int64_t m = h_final.val().rows();
  // logits = h . C^T, via the stored anchor rows
  Tensor ct(head.dim, head.classes, 0.0);
  for (int64_t i = 0; i < head.classes; ++i) {
    const Tensor& row = head.anchor_rows[static_cast<size_t>(i)].val();
    for (int64_t k = 0; k < head.dim; ++k) ct(k, i) = row(0, k);
  }
  Value logits = matmul(h_final, tape->constant(std::move(ct)));
  // stable log-sum-exp with a detached row max
  Value mx = tape->constant(rowmax(logits.val()));
  Value zs = sub(logits, colbroadcast(mx, head.classes));
  Value lse = add(log(rowsum(exp(zs))), mx);
  Value zy = gather_per_row(logits, labels);
  Value ce = sub(lse, zy);
  return scale(sum_all(ce), 1.0 / static_cast<double>(m));
}

Value sep_term(const BoundHead& head, Value pts_const, int cls) {
  Value acc{};
  bool first = true;
  for (int64_t k = 0; k < head.classes; ++k) {
    if (k == cls) continue;
    Value wb = wbeta_value<Value>(head, pts_const, static_cast<int>(k));
    Value s = neg(sum_all(wb));
    if (first) {
      acc = s;
      first = false;
    } else {
      acc = add(acc, s);
    }
  }
  if (first) return pts_const.tape->constant(Tensor::scalar(0.0));
  return acc;
}

}  // namespace zubov
