#include "nvqa/optim.hpp"

#include <cmath>
#include <string>

#include "nvqa/error.hpp"

namespace nvqa {
namespace {

void check(const ParamList& params, const GradList& grads, double lr) {
  if (lr <= 0.0) throw ContractError("optimizer: learning rate must be positive");
  if (params.size() != grads.size())
    throw DimensionError("optimizer: " + std::to_string(params.size()) + " params but " +
                         std::to_string(grads.size()) + " gradients");
  for (std::size_t i = 0; i < params.size(); ++i)
    require_same_shape(*params[i].value, grads[i], params[i].name.c_str());
}

}  // namespace

void sgd_step(const ParamList& params, const GradList& grads, const SgdConfig& cfg) {
  check(params, grads, cfg.lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& w = *params[i].value;
    const Matrix& g = grads[i];
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= cfg.lr * g[k];
  }
}

void Adam::step(const ParamList& params, const GradList& grads) {
  check(params, grads, cfg_.lr);
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value->rows(), p.value->cols());
      v_.emplace_back(p.value->rows(), p.value->cols());
    }
  }
  if (m_.size() != params.size()) throw DimensionError("Adam: parameter set changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& w = *params[i].value;
    const Matrix& g = grads[i];
    Matrix& m = m_[i];
    Matrix& v = v_[i];
    require_same_shape(w, m, params[i].name.c_str());
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
      if (m[k] == 0.0) continue;  // rows never touched stay put
      w[k] -= cfg_.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg_.eps);
    }
  }
}

}  // namespace nvqa
