// Microbenchmarks for the numerical hot paths: eigendecomposition, heat
// kernels, batch encoding, one taped optimization step, the contrastive
// loss, and view-graph construction.

#include <benchmark/benchmark.h>

#include <vector>

#include "specmatch/augment.hpp"
#include "specmatch/encoder.hpp"
#include "specmatch/graph.hpp"
#include "specmatch/loss.hpp"
#include "specmatch/rng.hpp"
#include "specmatch/spectral.hpp"
#include "specmatch/tape.hpp"

namespace {

using namespace specmatch;

Eigen::MatrixXd random_laplacian(int n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (rng.uniform() < 0.3) a(i, j) = a(j, i) = 1.0;
    }
  }
  // Keep it connected: chain fallback edges.
  for (int i = 0; i + 1 < n; ++i) a(i, i + 1) = a(i + 1, i) = 1.0;
  return normalized_laplacian(a);
}

Eigen::MatrixXd random_unit_rows(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd z(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) z(i, j) = rng.normal();
    z.row(i) /= z.row(i).norm();
  }
  return z;
}

struct BatchFixture {
  Dataset dataset;
  std::vector<Graph> v1, v2;
  EncoderParams params;

  explicit BatchFixture(int n_graphs) {
    SbmParams sbm;
    sbm.n_graphs = n_graphs;
    dataset = generate_sbm(sbm, 7);
    AugmentPolicy policy = preset_policy("social-dense");
    Rng rng(derive_seed(7, 0xB));
    for (const auto& g : dataset.graphs) {
      auto [a, b] = sample_views(g, policy, rng);
      v1.push_back(std::move(a));
      v2.push_back(std::move(b));
    }
    params = init_encoder(EncoderConfig{}, dataset.feature_dim(), 3);
  }
};

void BM_eigh(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Eigen::MatrixXd lap = random_laplacian(n, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(eigh(lap));
  }
}
BENCHMARK(BM_eigh)->Arg(16)->Arg(64)->Arg(128);

void BM_heat_kernel(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Eigen::MatrixXd lap = random_laplacian(n, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(heat_kernel(lap, 1.0));
  }
}
BENCHMARK(BM_heat_kernel)->Arg(16)->Arg(64);

void BM_encode_batch(benchmark::State& state) {
  const BatchFixture fx(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(encode_batch(fx.params, fx.v1));
  }
}
BENCHMARK(BM_encode_batch)->Arg(16)->Arg(64);

void BM_taped_step(benchmark::State& state) {
  const BatchFixture fx(static_cast<int>(state.range(0)));
  LossConfig cfg;
  for (auto _ : state) {
    Tape tape;
    TapedEncoder enc(tape, fx.params);
    std::vector<NodeId> o1, o2;
    for (const auto& g : fx.v1) o1.push_back(enc.forward(g));
    for (const auto& g : fx.v2) o2.push_back(enc.forward(g));
    const TapedLoss loss = taped_total_loss(tape, tape.vstack(o1), tape.vstack(o2), cfg);
    tape.backward(loss.total);
    benchmark::DoNotOptimize(enc.gradient());
  }
}
BENCHMARK(BM_taped_step)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_info_nce(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Eigen::MatrixXd z1 = random_unit_rows(n, 32, 11);
  const Eigen::MatrixXd z2 = random_unit_rows(n, 32, 12);
  for (auto _ : state) {
    benchmark::DoNotOptimize(info_nce(z1, z2, 0.2));
  }
}
BENCHMARK(BM_info_nce)->Arg(64)->Arg(256);

void BM_build_view_graph(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Eigen::MatrixXd z = random_unit_rows(n, 32, 13);
  LossConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_view_graph(z, cfg));
  }
}
BENCHMARK(BM_build_view_graph)->Arg(64)->Arg(256);

} // namespace

BENCHMARK_MAIN();
