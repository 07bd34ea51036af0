#include "nvqa/params.hpp"

#include <cmath>

#include "nvqa/error.hpp"
#include "nvqa/kernels.hpp"

namespace nvqa {

GradList zero_grads(const ParamList& params) {
  GradList g;
  g.reserve(params.size());
  for (const auto& p : params) g.emplace_back(p.value->rows(), p.value->cols());
  return g;
}

void accumulate(GradList& acc, const GradList& g) {
  if (acc.size() != g.size()) throw DimensionError("accumulate: gradient list length mismatch");
  for (std::size_t i = 0; i < g.size(); ++i) kernels::add_inplace(acc[i], g[i]);
}

void scale_grads(GradList& g, double s) {
  for (auto& m : g)
    for (double& v : m.values()) v *= s;
}

double global_norm(const GradList& g) {
  double s = 0.0;
  for (const auto& m : g)
    for (double v : m.values()) s += v * v;
  return std::sqrt(s);
}

void clip_global_norm(GradList& g, double max_norm) {
  if (max_norm <= 0.0) return;
  const double n = global_norm(g);
  if (n > max_norm) scale_grads(g, max_norm / n);
}

std::vector<Matrix> snapshot(const ParamList& params) {
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(*p.value);
  return out;
}

void restore(const ParamList& params, const std::vector<Matrix>& values) {
  if (params.size() != values.size()) throw DimensionError("restore: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(*params[i].value, values[i], params[i].name.c_str());
    *params[i].value = values[i];
  }
}

}  // namespace nvqa
