#include "nvqa/reference.hpp"

#include <cmath>

#include "nvqa/error.hpp"

namespace nvqa::reference {
namespace {

Vec matvec(const Matrix& w, const Vec& x) {
  if (w.cols() != x.size()) throw DimensionError("reference matvec: " + w.shape_string() + " vs " +
                                                 std::to_string(x.size()));
  Vec y(w.rows(), 0.0L);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    Real acc = 0.0L;
    for (std::size_t c = 0; c < w.cols(); ++c) acc += static_cast<Real>(w(r, c)) * x[c];
    y[r] = acc;
  }
  return y;
}

Vec row_of(const Matrix& table, std::size_t r) {
  Vec v(table.cols());
  for (std::size_t c = 0; c < table.cols(); ++c) v[c] = table(r, c);
  return v;
}

Vec widen(const std::vector<double>& x) { return Vec(x.begin(), x.end()); }

Real sigmoid(Real z) { return 1.0L / (1.0L + std::exp(-z)); }

struct State {
  Vec h, c;
};

State step(const seqae::LstmParams& p, const Vec& x, const State& s) {
  Vec pre[4];
  for (int k = 0; k < 4; ++k) {
    pre[k] = matvec(p.w[k], x);
    const Vec rec = matvec(p.u[k], s.h);
    for (std::size_t i = 0; i < p.d_h; ++i) pre[k][i] += rec[i] + static_cast<Real>(p.b[k][i]);
  }
  State out{Vec(p.d_h), Vec(p.d_h)};
  for (std::size_t i = 0; i < p.d_h; ++i) {
    const Real ig = sigmoid(pre[seqae::kGateI][i]);
    const Real fg = sigmoid(pre[seqae::kGateF][i]);
    const Real og = sigmoid(pre[seqae::kGateO][i]);
    const Real gg = std::tanh(pre[seqae::kGateG][i]);
    out.c[i] = fg * s.c[i] + ig * gg;
    out.h[i] = og * std::tanh(out.c[i]);
  }
  return out;
}

State zero(std::size_t d_h) { return {Vec(d_h, 0.0L), Vec(d_h, 0.0L)}; }

Real xent(const Vec& z, std::size_t target) {
  Real mx = z[0];
  for (Real v : z) mx = std::max(mx, v);
  Real total = 0.0L;
  for (Real v : z) total += std::exp(v - mx);
  return mx + std::log(total) - z.at(target);
}

}  // namespace

Real ae_loss(const seqae::AutoencoderParams& ae, const seqae::AeSample& s) {
  using seqae::Variant;
  const std::size_t d_h = ae.dims.d_h;
  State st = zero(d_h);
  if (ae.variant == Variant::kMultimodalA2) {
    st = step(ae.enc, matvec(ae.w_img, widen(s.image)), st);
  } else {
    st = step(ae.enc, row_of(ae.embed, text::kBosId), st);
  }
  for (auto id : s.ids) st = step(ae.enc, row_of(ae.embed, id), st);
  if (ae.variant != Variant::kMultimodalA2) st = step(ae.enc, row_of(ae.embed, text::kEosId), st);

  Vec h0 = st.h;
  if (ae.variant == Variant::kMultimodalA1) {
    const Vec q = matvec(ae.wq_f, st.h);
    const Vec v = matvec(ae.wi_f, widen(s.image));
    for (std::size_t i = 0; i < d_h; ++i) h0[i] += std::tanh(q[i]) * std::tanh(v[i]);
  }
  State dec{h0, Vec(d_h, 0.0L)};
  Real loss = 0.0L;
  std::size_t prev = text::kBosId;
  for (std::size_t k = 0; k <= s.ids.size(); ++k) {
    const std::size_t target = k < s.ids.size() ? s.ids[k] : text::kEosId;
    dec = step(ae.dec, row_of(ae.embed, prev), dec);
    Vec z = matvec(ae.out_w, dec.h);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += ae.out_b[i];
    loss += xent(z, target);
    prev = target;
  }
  return loss;
}

Vec vqa_logits(const vqa::VqaModel& m, const std::vector<std::size_t>& ids, const std::vector<double>& x_i) {
  State st = zero(m.dims.d_h);
  if (m.arch == vqa::Arch::kArch1) {
    st = step(m.lstm, row_of(m.embed, text::kBosId), st);
    for (auto id : ids) st = step(m.lstm, row_of(m.embed, id), st);
    st = step(m.lstm, row_of(m.embed, text::kEosId), st);
    const Vec q = matvec(m.w_q, st.h);
    const Vec v = matvec(m.w_i, widen(x_i));
    Vec fused(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) fused[i] = std::tanh(q[i]) * std::tanh(v[i]);
    return matvec(m.w_qi, fused);
  }
  st = step(m.lstm, matvec(m.w_e, widen(x_i)), st);
  for (auto id : ids) st = step(m.lstm, row_of(m.embed, id), st);
  return matvec(m.w_a, st.h);
}

Real vqa_loss(const vqa::VqaModel& m, const std::vector<std::size_t>& ids, const std::vector<double>& x_i,
              std::size_t target) {
  return xent(vqa_logits(m, ids, x_i), target);
}

}  // namespace nvqa::reference
