#include "nvqa/tape.hpp"

#include <cmath>
#include <string>

#include "nvqa/error.hpp"
#include "nvqa/kernels.hpp"

namespace nvqa::ad {

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Matrix& Tape::val(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.ref ? *n.ref : n.value;
}

const Matrix& Tape::value(Var v) const {
  if (v.id >= nodes_.size()) throw ContractError("Tape::value: unknown node");
  return val(v.id);
}

double Tape::scalar(Var v) const {
  const Matrix& m = value(v);
  if (m.size() != 1) throw ContractError("Tape::scalar: node is " + m.shape_string());
  return m[0];
}

void Tape::check_finite(const Matrix& m, const char* what) const {
  if (!m.all_finite()) throw NumericError(std::string(what) + ": non-finite input");
}

Var Tape::leaf(const Matrix& value) {
  check_finite(value, "leaf");
  Node n(Op::kLeaf);
  n.ref = &value;
  return push(std::move(n));
}

Var Tape::constant(Matrix value) {
  check_finite(value, "constant");
  Node n(Op::kConst);
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  Node n(Op::kMatMul, a.id, b.id);
  n.value = kernels::matmul_serial(val(a.id), val(b.id));
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  Node n(Op::kAdd, a.id, b.id);
  n.value = kernels::add(val(a.id), val(b.id));
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  Node n(Op::kSub, a.id, b.id);
  n.value = kernels::sub(val(a.id), val(b.id));
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  Node n(Op::kMul, a.id, b.id);
  n.value = kernels::hadamard(val(a.id), val(b.id));
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  Node n(Op::kTanh, a.id);
  n.value = kernels::tanh(val(a.id));
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  Node n(Op::kSigmoid, a.id);
  n.value = kernels::sigmoid(val(a.id));
  return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
  Node n(Op::kScale, a.id);
  n.factor = s;
  n.value = kernels::scale(val(a.id), s);
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  Node n(Op::kSum, a.id);
  n.value = Matrix(1, 1, val(a.id).sum());
  return push(std::move(n));
}

Var Tape::row(Var table, std::size_t index) {
  const Matrix& t = val(table.id);
  if (index >= t.rows()) {
    throw DimensionError("row: index " + std::to_string(index) + " out of range for " +
                         t.shape_string());
  }
  Node n(Op::kRow, table.id);
  n.index = index;
  auto r = t.row(index);
  n.value = Matrix(t.cols(), 1, std::vector<double>(r.begin(), r.end()));
  return push(std::move(n));
}

Var Tape::softmax_cross_entropy(Var logits, std::size_t target) {
  const Matrix& z = val(logits.id);
  if (z.rows() != 1 && z.cols() != 1) {
    throw DimensionError("softmax_cross_entropy: logits must be a vector, got " + z.shape_string());
  }
  if (target >= z.size()) {
    throw DimensionError("softmax_cross_entropy: target " + std::to_string(target) +
                         " out of range for " + std::to_string(z.size()) + " logits");
  }
  std::size_t top = 0;
  for (std::size_t i = 1; i < z.size(); ++i)
    if (z[i] > z[top]) top = i;
  const double mx = z[top];
  // loss = (mx - z_t) + log1p(sum over i != top of exp(z_i - mx)); log1p
  // keeps full relative precision when the top class dominates.
  Matrix p(z.rows(), z.cols());
  double rest = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - mx);
    if (i != top) rest += p[i];
  }
  const double total = 1.0 + rest;
  for (std::size_t i = 0; i < z.size(); ++i) p[i] /= total;
  Node n(Op::kSoftmaxXent, logits.id);
  n.index = target;
  n.value = Matrix(1, 1, (mx - z[target]) + std::log1p(rest));
  n.cache = std::move(p);
  return push(std::move(n));
}

Matrix& Tape::grad_slot(std::uint32_t id) {
  Matrix& g = grads_[id];
  if (g.empty()) {
    const Matrix& v = val(id);
    g = Matrix(v.rows(), v.cols());
  }
  return g;
}

void Tape::backward(Var loss) {
  if (loss.id >= nodes_.size()) throw ContractError("backward: unknown loss node");
  if (val(loss.id).size() != 1) {
    throw ContractError("backward: loss must be scalar, got " + val(loss.id).shape_string());
  }
  grads_.assign(nodes_.size(), Matrix());
  grads_[loss.id] = Matrix(1, 1, 1.0);

  for (std::uint32_t id = loss.id + 1; id-- > 0;) {
    if (grads_[id].empty()) continue;
    const Node& n = nodes_[id];
    // inputs always have smaller ids, so g is never the slot being written
    const Matrix& g = grads_[id];
    switch (n.op) {
      case Op::kLeaf:
      case Op::kConst:
        break;
      case Op::kMatMul: {
        Matrix ga = Matrix(val(n.a).rows(), val(n.a).cols());
        kernels::add_matmul_nt(ga, g, val(n.b));
        Matrix gb = Matrix(val(n.b).rows(), val(n.b).cols());
        kernels::add_matmul_tn(gb, val(n.a), g);
        kernels::add_inplace(grad_slot(n.a), ga);
        kernels::add_inplace(grad_slot(n.b), gb);
        break;
      }
      case Op::kAdd:
        kernels::add_inplace(grad_slot(n.a), g);
        kernels::add_inplace(grad_slot(n.b), g);
        break;
      case Op::kSub:
        kernels::add_inplace(grad_slot(n.a), g);
        kernels::axpy(grad_slot(n.b), -1.0, g);
        break;
      case Op::kMul: {
        const Matrix& av = val(n.a);
        const Matrix& bv = val(n.b);
        Matrix& ga = grad_slot(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        Matrix& gb = grad_slot(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        break;
      }
      case Op::kTanh: {
        Matrix& ga = grad_slot(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
        break;
      }
      case Op::kSigmoid: {
        Matrix& ga = grad_slot(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
        break;
      }
      case Op::kScale:
        kernels::axpy(grad_slot(n.a), n.factor, g);
        break;
      case Op::kSum: {
        Matrix& ga = grad_slot(n.a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
        break;
      }
      case Op::kRow: {
        Matrix& ga = grad_slot(n.a);
        auto r = ga.row(n.index);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] += g[i];
        break;
      }
      case Op::kSoftmaxXent: {
        Matrix& ga = grad_slot(n.a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0] * n.cache[i];
        ga[n.index] -= g[0];
        break;
      }
    }
  }
}

const Matrix* Tape::grad_if_any(Var v) const {
  if (v.id >= grads_.size() || grads_[v.id].empty()) return nullptr;
  return &grads_[v.id];
}

Matrix Tape::grad(Var v) const {
  if (const Matrix* g = grad_if_any(v)) return *g;
  const Matrix& m = value(v);
  return Matrix(m.rows(), m.cols());
}

void Tape::clear() {
  nodes_.clear();
  grads_.clear();
}

}  // namespace nvqa::ad
