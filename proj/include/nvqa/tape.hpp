#ifndef NVQA_TAPE_HPP_
#define NVQA_TAPE_HPP_

#include <cstdint>
#include <vector>

#include "nvqa/matrix.hpp"

namespace nvqa::ad {

// Handle to a node on a Tape. Only meaningful for the tape that made it.
struct Var {
  std::uint32_t id = 0;
};

// Append-only reverse-mode tape.
//
// Every op appends one node whose inputs already exist, so node order is a
// topological order and backward() is a single reverse sweep. Leaves made
// with leaf() refer to caller-owned matrices, which must outlive the tape.
class Tape {
 public:
  Tape() { nodes_.reserve(256); }

  Var leaf(const Matrix& value);
  Var constant(Matrix value);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var scale(Var a, double s);
  Var sum(Var a);
  // Row `index` of a table, returned as a column vector.
  Var row(Var table, std::size_t index);
  // -log softmax(logits)[target] for a column (or row) vector of logits.
  Var softmax_cross_entropy(Var logits, std::size_t target);

  const Matrix& value(Var v) const;
  double scalar(Var v) const;

  // Reverse sweep from a 1x1 node. Replaces any earlier gradients.
  void backward(Var loss);
  // Gradient of the last backward() loss w.r.t. v; zeros if v was unreachable.
  Matrix grad(Var v) const;
  // Same, without materializing zeros; nullptr if unreachable.
  const Matrix* grad_if_any(Var v) const;

  std::size_t size() const { return nodes_.size(); }
  void clear();

 private:
  enum class Op : std::uint8_t {
    kLeaf,
    kConst,
    kMatMul,
    kAdd,
    kSub,
    kMul,
    kTanh,
    kSigmoid,
    kScale,
    kSum,
    kRow,
    kSoftmaxXent,
  };

  struct Node {
    explicit Node(Op o, std::uint32_t in_a = 0, std::uint32_t in_b = 0) : op(o), a(in_a), b(in_b) {}
    Op op;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    std::size_t index = 0;
    double factor = 0.0;
    const Matrix* ref = nullptr;
    Matrix value;
    Matrix cache;
  };

  Var push(Node n);
  const Matrix& val(std::uint32_t id) const;
  void check_finite(const Matrix& m, const char* what) const;
  Matrix& grad_slot(std::uint32_t id);

  std::vector<Node> nodes_;
  std::vector<Matrix> grads_;
};

}  // namespace nvqa::ad

#endif  // NVQA_TAPE_HPP_
