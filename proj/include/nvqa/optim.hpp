#ifndef NVQA_OPTIM_HPP_
#define NVQA_OPTIM_HPP_

#include <cstdint>
#include <vector>

#include "nvqa/params.hpp"

namespace nvqa {

struct SgdConfig {
  double lr = 0.1;
};

// w -= lr * g for every parameter.
void sgd_step(const ParamList& params, const GradList& grads, const SgdConfig& cfg);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers are created on the first step
// and must keep matching the parameter shapes afterwards.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(const ParamList& params, const GradList& grads);
  std::uint64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace nvqa

#endif  // NVQA_OPTIM_HPP_
