#ifndef NVQA_GRADCHECK_HPP_
#define NVQA_GRADCHECK_HPP_

#include <functional>
#include <string>
#include <vector>

#include "nvqa/params.hpp"
#include "nvqa/tape.hpp"

namespace nvqa {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;  // name of the tensor holding the worst coordinate
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coords_checked = 0;
  bool pass = false;
};

// |a - b| / max(|a|, |b|, 1e-8)
double relative_error(double a, double b);

// Builds the scalar loss on a fresh tape, given one leaf per parameter.
using LossBuilder = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

// Compares backward() against central differences (f(x+h) - f(x-h)) / 2h
// on every coordinate of every parameter. `analytic` may be supplied to
// check an externally computed gradient instead of the tape's.
GradCheckReport grad_check(const LossBuilder& loss, const ParamList& params, double h, double tol,
                           const GradList* analytic = nullptr);

// Loss evaluated outside the tape at higher precision, reading the current
// parameter values.
using PreciseLoss = std::function<long double()>;

// As grad_check, but the finite differences come from `precise`. In binary64
// the roundoff of (f(x+h) - f(x-h)) / 2h is about ulp(f) / 2h, which at
// h = 1e-6 swamps the 1e-4 relative tolerance for coordinates with tiny
// true gradients; an extended-precision reference removes that floor.
GradCheckReport grad_check_precise(const LossBuilder& loss, const ParamList& params,
                                   const PreciseLoss& precise, double h, double tol);

// Single-input convenience form.
GradCheckReport grad_check(const std::function<ad::Var(ad::Tape&, ad::Var)>& f, Matrix point,
                           double h, double tol);

// Analytic gradient of `loss` at the current parameter values.
GradList tape_gradient(const LossBuilder& loss, const ParamList& params, double* loss_value = nullptr);

}  // namespace nvqa

#endif  // NVQA_GRADCHECK_HPP_
