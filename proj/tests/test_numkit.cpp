#include <cmath>
#include <sstream>

#include "doctest.h"
#include "nvqa/error.hpp"
#include "nvqa/gradcheck.hpp"
#include "nvqa/kernels.hpp"
#include "nvqa/lstsq.hpp"
#include "nvqa/matrix_io.hpp"
#include "nvqa/optim.hpp"
#include "nvqa/rng.hpp"
#include "nvqa/tape.hpp"

using namespace nvqa;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double sd = 1.0) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.normal(0.0, sd);
  return m;
}

}  // namespace

TEST_CASE("elementwise ops follow their definitions") {
  ad::Tape t;
  Matrix a = Matrix::column({1, 2, 3});
  Matrix b = Matrix::column({4, 5, 6});
  auto p = t.mul(t.leaf(a), t.leaf(b));
  CHECK(t.value(p) == Matrix::column({4, 10, 18}));

  Matrix z(3, 2);
  CHECK(t.value(t.tanh(t.leaf(z))) == Matrix(3, 2));
  CHECK(kernels::sigmoid(Matrix(1, 1))[0] == doctest::Approx(0.5));

  Matrix logits = Matrix::column({0, 0, 0});
  auto l = t.softmax_cross_entropy(t.leaf(logits), 1);
  CHECK(t.scalar(l) == doctest::Approx(std::log(3.0)).epsilon(1e-15));
}

TEST_CASE("shape and finiteness errors") {
  ad::Tape t;
  Matrix a(2, 3), b(2, 3);
  try {
    t.matmul(t.leaf(a), t.leaf(b));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
  }
  Matrix c(3, 2);
  CHECK_THROWS_AS(t.add(t.leaf(a), t.leaf(c)), DimensionError);
  CHECK_THROWS_AS(t.softmax_cross_entropy(t.constant(Matrix::column({1, 2})), 2), DimensionError);
  Matrix bad = Matrix::column({1.0, NAN});
  CHECK_THROWS_AS(t.leaf(bad), NumericError);
  CHECK_THROWS_AS(Matrix::from_external(1, 2, {1.0, INFINITY}), NumericError);
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), DimensionError);
}

TEST_CASE("backward on small closed forms") {
  Matrix x = Matrix::column({1, 2});
  ad::Tape t;
  auto xv = t.leaf(x);
  auto loss = t.sum(t.mul(xv, xv));
  t.backward(loss);
  CHECK(t.grad(xv) == Matrix::column({2, 4}));

  Matrix w(1, 3);
  Matrix in = Matrix::column({0.3, -1.2, 2.0});
  ad::Tape t2;
  auto wv = t2.leaf(w);
  auto y = t2.tanh(t2.matmul(wv, t2.leaf(in)));
  t2.backward(y);
  Matrix g = t2.grad(wv);
  for (std::size_t i = 0; i < 3; ++i) CHECK(g[i] == doctest::Approx(in[i]));

  ad::Tape t3;
  auto v = t3.leaf(x);
  CHECK_THROWS_AS(t3.backward(t3.tanh(v)), ContractError);
}

TEST_CASE("random five-op graphs agree with central differences") {
  // property: 100 random shapes and seeds
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const std::size_t n = 1 + rng.below(5);
    const std::size_t k = 1 + rng.below(5);
    // moderate scales keep tanh/sigmoid out of saturation, so every true
    // partial sits well above the ~1e-10 roundoff floor of the h=1e-6 quotient
    Matrix w1 = random_matrix(rng, k, n, 0.5);
    Matrix w2 = random_matrix(rng, k, n, 0.5);
    Matrix x(n, 1);
    for (double& v : x.values()) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 1.5);
    const std::size_t target = rng.below(k);
    ParamList params{{"w1", &w1}, {"w2", &w2}, {"x", &x}};
    auto loss = [&](ad::Tape& t, const std::vector<ad::Var>& v) {
      auto a = t.tanh(t.matmul(v[0], v[2]));
      auto b = t.sigmoid(t.matmul(v[1], v[2]));
      auto c = t.sub(t.mul(a, b), t.scale(a, 0.5));
      return t.add(t.softmax_cross_entropy(c, target), t.sum(t.mul(b, b)));
    };
    auto rep = grad_check(loss, params, 1e-6, 1e-5);
    INFO("seed " << seed << " worst " << rep.worst_param << "[" << rep.worst_index
                       << "] analytic " << rep.worst_analytic << " numeric " << rep.worst_numeric
                       << " err " << rep.max_rel_err);
    CHECK(rep.pass);
  }
}

TEST_CASE("row gather scatters its gradient into the table") {
  Matrix table(4, 3);
  for (std::size_t i = 0; i < table.size(); ++i) table[i] = 0.1 * static_cast<double>(i);
  ad::Tape t;
  auto tv = t.leaf(table);
  auto r = t.row(tv, 2);
  CHECK(t.value(r)[1] == table(2, 1));
  auto loss = t.sum(t.add(r, t.row(tv, 2)));
  t.backward(loss);
  Matrix g = t.grad(tv);
  CHECK(g(2, 0) == 2.0);
  CHECK(g(1, 0) == 0.0);
  CHECK_THROWS_AS(t.row(tv, 4), DimensionError);
}

TEST_CASE("grad_check verdicts") {
  Matrix q(3, 3);
  Rng rng(3);
  for (double& v : q.values()) v = rng.normal();
  auto quad = [&](ad::Tape& t, ad::Var x) {
    auto qx = t.matmul(t.constant(q), x);
    return t.sum(t.mul(x, qx));
  };
  Matrix x0 = Matrix::column({0.5, -1.0, 2.0});
  CHECK(grad_check(quad, x0, 1e-6, 1e-6).pass);

  ParamList params{{"x", &x0}};
  LossBuilder lb = [&](ad::Tape& t, const std::vector<ad::Var>& v) { return quad(t, v[0]); };
  GradList g = tape_gradient(lb, params);
  for (double& v : g[0].values()) v *= 1.1;
  auto rep = grad_check(lb, params, 1e-6, 1e-4, &g);
  CHECK_FALSE(rep.pass);
  CHECK(rep.max_rel_err > 0.05);
  CHECK_THROWS_AS(grad_check(quad, x0, 0.0, 1e-6), ContractError);
}

TEST_CASE("relative error formula") {
  CHECK(relative_error(1.0, 1.0) == 0.0);
  CHECK(relative_error(0.0, 1e-9) == doctest::Approx(0.1));
  CHECK(relative_error(2.0, 1.0) == doctest::Approx(0.5));
}

TEST_CASE("least squares") {
  Rng rng(11);
  Matrix a = random_matrix(rng, 20, 5);

  Matrix m = least_squares(a, a);
  CHECK(kernels::sub(m, Matrix::identity(5)).frobenius_norm() < 1e-10);

  Matrix r = random_matrix(rng, 5, 5);
  Matrix b = kernels::matmul(a, r);
  Matrix mr = least_squares(a, b);
  CHECK(kernels::sub(mr, r).frobenius_norm() < 1e-8);

  Matrix dup = a;
  for (std::size_t i = 0; i < dup.rows(); ++i) dup(i, 4) = dup(i, 1);
  CHECK_THROWS_AS(least_squares(dup, b), SingularityError);
  CHECK_NOTHROW(least_squares(dup, b, kRobustRidge));

  CHECK_THROWS_AS(least_squares(a, Matrix(3, 2)), DimensionError);
}

TEST_CASE("least squares residual-gradient bound holds on accepted inputs") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed + 100);
    const std::size_t p = 1 + rng.below(8);
    const std::size_t n = p + rng.below(30);
    const std::size_t q = 1 + rng.below(6);
    Matrix a = random_matrix(rng, n, p, rng.uniform(0.1, 10.0));
    Matrix b = random_matrix(rng, n, q);
    const double ridge = (seed % 3 == 0) ? 0.0 : rng.uniform(0.0, 1.0);
    Matrix m;
    try {
      m = least_squares(a, b, ridge);
    } catch (const SingularityError&) {
      continue;
    }
    const double bound = 1e-8 * (1.0 + kernels::matmul_tn(a, b).frobenius_norm());
    CHECK(normal_residual(a, b, m, ridge) <= bound);
  }
}

TEST_CASE("optimizers") {
  Matrix w(1, 1, 1.0);
  ParamList p{{"w", &w}};
  sgd_step(p, {Matrix(1, 1, 2.0)}, {0.1});
  CHECK(w[0] == doctest::Approx(0.8));
  sgd_step(p, {Matrix(1, 1, 0.0)}, {0.1});
  CHECK(w[0] == doctest::Approx(0.8));
  CHECK_THROWS_AS(sgd_step(p, {Matrix(2, 1)}, {0.1}), DimensionError);
  CHECK_THROWS_AS(sgd_step(p, {Matrix(1, 1)}, {0.0}), ContractError);

  Matrix u(1, 1, 3.0);
  ParamList pu{{"u", &u}};
  Adam adam({0.01});
  adam.step(pu, {Matrix(1, 1, 1.0)});
  CHECK(u[0] == doctest::Approx(3.0 - 0.01).epsilon(1e-9));
  CHECK(adam.steps() == 1);
}

TEST_CASE("matmul associativity and distributivity") {
  Rng rng(5);
  Matrix a = random_matrix(rng, 8, 8), b = random_matrix(rng, 8, 8), c = random_matrix(rng, 8, 8);
  using namespace kernels;
  CHECK(sub(matmul(matmul(a, b), c), matmul(a, matmul(b, c))).max_abs() < 1e-10);
  CHECK(sub(matmul(a, add(b, c)), add(matmul(a, b), matmul(a, c))).max_abs() < 1e-10);
}

TEST_CASE("parallel kernels match the serial reference bit for bit") {
  Rng rng(9);
  Matrix a = random_matrix(rng, 67, 45), b = random_matrix(rng, 45, 31);
  CHECK(kernels::matmul_omp(a, b) == kernels::matmul_serial(a, b));
  Matrix c = random_matrix(rng, 67, 12);
  CHECK(kernels::matmul_tn_omp(a, c) == kernels::matmul_tn_serial(a, c));
  Matrix d = random_matrix(rng, 23, 45);
  CHECK(kernels::cosine_rows_omp(a, d) == kernels::cosine_rows_serial(a, d));
  Matrix nt(67, 23);
  kernels::add_matmul_nt(nt, a, d);
  CHECK(kernels::sub(nt, kernels::matmul(a, d.transpose())).max_abs() < 1e-12);
}

TEST_CASE("rng determinism") {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    CHECK(x == b.normal());
    differs |= (x != c.normal());
  }
  CHECK(differs);
  Rng d(1);
  auto s = d.sample_without_replacement(10, 10);
  std::sort(s.begin(), s.end());
  for (std::size_t i = 0; i < 10; ++i) CHECK(s[i] == i);
}

TEST_CASE("matrix serialization") {
  Rng rng(2);
  Matrix m = random_matrix(rng, 3, 4);
  std::stringstream ss;
  write_matrix(ss, m);
  const std::string bytes = ss.str();
  CHECK(bytes.substr(0, 4) == "NVQM");
  CHECK(bytes.size() == 4 + 8 + 12 * 8);
  CHECK(static_cast<unsigned char>(bytes[4]) == 3);
  CHECK(read_matrix(ss) == m);
  CHECK(from_text(to_text(m)) == m);
  std::stringstream junk("XXXX");
  CHECK_THROWS_AS(read_matrix(junk), LoadError);
}
