#ifndef NVQA_REFERENCE_HPP_
#define NVQA_REFERENCE_HPP_

#include <vector>

#include "nvqa/seqae.hpp"
#include "nvqa/vqa.hpp"

// Plain-loop forward passes in long double, written independently of the
// tape. Used as the finite-difference side of gradient checks and as a
// recomputation oracle for the tape forward.
namespace nvqa::reference {

using Real = long double;
using Vec = std::vector<Real>;

Real ae_loss(const seqae::AutoencoderParams& ae, const seqae::AeSample& s);

Vec vqa_logits(const vqa::VqaModel& m, const std::vector<std::size_t>& ids, const std::vector<double>& x_i);
Real vqa_loss(const vqa::VqaModel& m, const std::vector<std::size_t>& ids, const std::vector<double>& x_i,
              std::size_t target);

}  // namespace nvqa::reference

#endif  // NVQA_REFERENCE_HPP_
