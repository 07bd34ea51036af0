#include "nvqa/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "nvqa/error.hpp"

namespace nvqa {
namespace {

double eval_loss(const LossBuilder& loss, const ParamList& params) {
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) leaves.push_back(tape.leaf(*p.value));
  return tape.scalar(loss(tape, leaves));
}

}  // namespace

double relative_error(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / denom;
}

GradList tape_gradient(const LossBuilder& loss, const ParamList& params, double* loss_value) {
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) leaves.push_back(tape.leaf(*p.value));
  const ad::Var out = loss(tape, leaves);
  if (loss_value) *loss_value = tape.scalar(out);
  tape.backward(out);
  GradList grads;
  grads.reserve(params.size());
  for (const auto& v : leaves) grads.push_back(tape.grad(v));
  return grads;
}

namespace {

// Central differences of `eval` around the current parameter values. The
// divisor is the realized step (x+h) - (x-h), which differs from 2h by the
// rounding of x +/- h.
template <typename Eval>
GradCheckReport compare(const ParamList& params, const GradList& analytic, double h, double tol,
                        const Eval& eval) {
  if (!(h > 0.0)) throw ContractError("grad_check: step h must be positive");
  if (analytic.size() != params.size()) throw DimensionError("grad_check: gradient count mismatch");
  GradCheckReport rep;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Matrix& w = *params[p].value;
    require_same_shape(w, analytic[p], params[p].name.c_str());
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double saved = w[k];
      const double hi = saved + h;
      const double lo = saved - h;
      w[k] = hi;
      const auto up = eval();
      w[k] = lo;
      const auto down = eval();
      w[k] = saved;
      const double numeric = static_cast<double>((up - down) / (static_cast<decltype(up)>(hi) - lo));
      const double err = relative_error(analytic[p][k], numeric);
      if (err > rep.max_rel_err || rep.coords_checked == 0) {
        rep.max_rel_err = err;
        rep.worst_param = params[p].name;
        rep.worst_index = k;
        rep.worst_analytic = analytic[p][k];
        rep.worst_numeric = numeric;
      }
      ++rep.coords_checked;
    }
  }
  rep.pass = rep.max_rel_err <= tol;
  return rep;
}

}  // namespace

GradCheckReport grad_check(const LossBuilder& loss, const ParamList& params, double h, double tol,
                           const GradList* analytic) {
  GradList own;
  if (!analytic) {
    own = tape_gradient(loss, params);
    analytic = &own;
  }
  return compare(params, *analytic, h, tol, [&] { return eval_loss(loss, params); });
}

GradCheckReport grad_check_precise(const LossBuilder& loss, const ParamList& params,
                                   const PreciseLoss& precise, double h, double tol) {
  const GradList analytic = tape_gradient(loss, params);
  return compare(params, analytic, h, tol, precise);
}

GradCheckReport grad_check(const std::function<ad::Var(ad::Tape&, ad::Var)>& f, Matrix point,
                           double h, double tol) {
  ParamList params{{"x", &point}};
  return grad_check([&](ad::Tape& t, const std::vector<ad::Var>& v) { return f(t, v[0]); }, params,
                    h, tol);
}

}  // namespace nvqa
