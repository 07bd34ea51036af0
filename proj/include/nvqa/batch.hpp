#ifndef NVQA_BATCH_HPP_
#define NVQA_BATCH_HPP_

#include <cstddef>
#include <functional>
#include <vector>

#include "nvqa/params.hpp"
#include "nvqa/tape.hpp"

namespace nvqa {

// Loss of one training example, built on a fresh tape from one leaf per
// parameter (same order as the ParamList).
using ExampleLoss =
    std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&, std::size_t example)>;

struct BatchGradient {
  GradList grads;         // summed over the batch, not averaged
  double loss_sum = 0.0;
};

// Sum of per-example gradients, accumulated in batch order.
BatchGradient batch_gradient_serial(const ParamList& params, const std::vector<std::size_t>& batch,
                                    const ExampleLoss& loss);

// Same result bit for bit: examples run on separate tapes in parallel and
// the reduction still walks the batch in order.
BatchGradient batch_gradient_omp(const ParamList& params, const std::vector<std::size_t>& batch,
                                 const ExampleLoss& loss);

inline BatchGradient batch_gradient(const ParamList& params, const std::vector<std::size_t>& batch,
                                    const ExampleLoss& loss, bool parallel) {
  return parallel ? batch_gradient_omp(params, batch, loss) : batch_gradient_serial(params, batch, loss);
}

}  // namespace nvqa

#endif  // NVQA_BATCH_HPP_
