#ifndef NVQA_PARAMS_HPP_
#define NVQA_PARAMS_HPP_

#include <string>
#include <vector>

#include "nvqa/matrix.hpp"

namespace nvqa {

// Named, non-owning view of one learnable tensor.
struct ParamRef {
  std::string name;
  Matrix* value;
};

using ParamList = std::vector<ParamRef>;

// One gradient per ParamRef, same order and shapes.
using GradList = std::vector<Matrix>;

GradList zero_grads(const ParamList& params);
void accumulate(GradList& acc, const GradList& g);
void scale_grads(GradList& g, double s);
double global_norm(const GradList& g);
// Rescales g so its global L2 norm is at most max_norm (no-op if max_norm <= 0).
void clip_global_norm(GradList& g, double max_norm);

// Deep copies of the parameter values, e.g. to keep a best checkpoint.
std::vector<Matrix> snapshot(const ParamList& params);
void restore(const ParamList& params, const std::vector<Matrix>& values);

}  // namespace nvqa

#endif  // NVQA_PARAMS_HPP_
