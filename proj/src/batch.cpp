#include "nvqa/batch.hpp"

#include <exception>

namespace nvqa {
namespace {

struct ExampleGrad {
  std::vector<Matrix> grads;  // empty matrix = unreachable parameter
  double loss = 0.0;
};

ExampleGrad run_example(const ParamList& params, const ExampleLoss& loss, std::size_t example) {
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) leaves.push_back(tape.leaf(*p.value));
  const ad::Var out = loss(tape, leaves, example);
  ExampleGrad eg;
  eg.loss = tape.scalar(out);
  tape.backward(out);
  eg.grads.resize(params.size());
  for (std::size_t i = 0; i < leaves.size(); ++i)
    if (const Matrix* g = tape.grad_if_any(leaves[i])) eg.grads[i] = *g;
  return eg;
}

void fold(BatchGradient& acc, const ExampleGrad& eg) {
  acc.loss_sum += eg.loss;
  for (std::size_t i = 0; i < eg.grads.size(); ++i) {
    const Matrix& g = eg.grads[i];
    if (g.empty()) continue;
    Matrix& a = acc.grads[i];
    for (std::size_t k = 0; k < a.size(); ++k) a[k] += g[k];
  }
}

}  // namespace

BatchGradient batch_gradient_serial(const ParamList& params, const std::vector<std::size_t>& batch,
                                    const ExampleLoss& loss) {
  BatchGradient acc{zero_grads(params), 0.0};
  for (std::size_t ex : batch) fold(acc, run_example(params, loss, ex));
  return acc;
}

BatchGradient batch_gradient_omp(const ParamList& params, const std::vector<std::size_t>& batch,
                                 const ExampleLoss& loss) {
  std::vector<ExampleGrad> per(batch.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(batch.size()); ++i) {
    try {
      per[i] = run_example(params, loss, batch[i]);
    } catch (...) {
#pragma omp critical(nvqa_batch_error)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  BatchGradient acc{zero_grads(params), 0.0};
  for (const auto& eg : per) fold(acc, eg);
  return acc;
}

}  // namespace nvqa
