// Serial reference kernels against their OpenMP versions. Run with
// OMP_NUM_THREADS set to compare thread counts.

#include <benchmark/benchmark.h>

#include <vector>

#include "nvqa/batch.hpp"
#include "nvqa/kernels.hpp"
#include "nvqa/kmeans.hpp"
#include "nvqa/rng.hpp"
#include "nvqa/vqa.hpp"

namespace {

using namespace nvqa;

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (double& v : m.row(i)) v = rng.normal();
  return m;
}

void BM_MatmulSerial(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::matmul_serial(a, b));
  st.SetItemsProcessed(st.iterations() * n * n * n);
}

void BM_MatmulOmp(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::matmul_omp(a, b));
  st.SetItemsProcessed(st.iterations() * n * n * n);
}

BENCHMARK(BM_MatmulSerial)->Arg(64)->Arg(256);
BENCHMARK(BM_MatmulOmp)->Arg(64)->Arg(256);

// Vocabulary-sized neighbour search: rows of a against rows of b.
void BM_CosineRowsSerial(benchmark::State& st) {
  const Matrix a = random_matrix(200, 300, 3), b = random_matrix(static_cast<std::size_t>(st.range(0)), 300, 4);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::cosine_rows_serial(a, b));
}

void BM_CosineRowsOmp(benchmark::State& st) {
  const Matrix a = random_matrix(200, 300, 3), b = random_matrix(static_cast<std::size_t>(st.range(0)), 300, 4);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::cosine_rows_omp(a, b));
}

BENCHMARK(BM_CosineRowsSerial)->Arg(2000);
BENCHMARK(BM_CosineRowsOmp)->Arg(2000);

void BM_KMeansAssignSerial(benchmark::State& st) {
  const Matrix pts = random_matrix(5000, 16, 5), centers = random_matrix(14, 16, 6);
  std::vector<std::size_t> labels;
  for (auto _ : st) benchmark::DoNotOptimize(assign_serial(pts, centers, labels));
}

void BM_KMeansAssignOmp(benchmark::State& st) {
  const Matrix pts = random_matrix(5000, 16, 5), centers = random_matrix(14, 16, 6);
  std::vector<std::size_t> labels;
  for (auto _ : st) benchmark::DoNotOptimize(assign_omp(pts, centers, labels));
}

BENCHMARK(BM_KMeansAssignSerial);
BENCHMARK(BM_KMeansAssignOmp);

// One minibatch of Arch1 question/image examples.
struct VqaBatch {
  text::Vocabulary vocab;
  vqa::VqaModel model;
  std::vector<std::vector<std::size_t>> ids;
  std::vector<std::vector<double>> feats;
  std::vector<std::size_t> targets;
  std::vector<std::size_t> batch;

  VqaBatch() {
    text::Counts counts;
    for (int w = 0; w < 50; ++w) counts["w" + std::to_string(w)] = 1;
    vocab = text::Vocabulary::build(counts, 1);
    Rng rng(7);
    const vqa::VqaDims dims{.vocab = vocab.size(), .d_e = 16, .d_h = 32, .d_i = 85, .d = 64, .answers = 30};
    model = vqa::init_model(vqa::Arch::kArch1, dims, vocab, rng);
    for (std::size_t i = 0; i < 32; ++i) {
      std::vector<std::size_t> q;
      for (int t = 0; t < 6; ++t) q.push_back(rng.below(vocab.size()));
      ids.push_back(q);
      std::vector<double> x(85);
      for (auto& v : x) v = rng.normal();
      feats.push_back(x);
      targets.push_back(rng.below(30));
      batch.push_back(i);
    }
  }

  ExampleLoss loss() {
    return [this](ad::Tape& t, const std::vector<ad::Var>& leaves, std::size_t i) {
      return vqa::vqa_loss(t, model, vqa::vqa_vars(model, leaves), ids[i], feats[i], targets[i]);
    };
  }
};

void BM_BatchGradientSerial(benchmark::State& st) {
  VqaBatch b;
  const ParamList params = b.model.params();
  const ExampleLoss loss = b.loss();
  for (auto _ : st) benchmark::DoNotOptimize(batch_gradient_serial(params, b.batch, loss));
}

void BM_BatchGradientOmp(benchmark::State& st) {
  VqaBatch b;
  const ParamList params = b.model.params();
  const ExampleLoss loss = b.loss();
  for (auto _ : st) benchmark::DoNotOptimize(batch_gradient_omp(params, b.batch, loss));
}

BENCHMARK(BM_BatchGradientSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchGradientOmp)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
