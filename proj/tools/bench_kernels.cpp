#include "moltk/kernels.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace moltk;
using kernels::Exec;

struct GridCase {
  ClassPtr cls;
  Vec params;
  Mat P;
  Mat T;
  BregmanLoss loss = make_square_loss(1);

  explicit GridCase(int n) {
    auto grid = std::make_shared<GridLipschitzClass>(256, 2.0);
    Rng rng(1);
    params = grid->random_params(rng);
    Mat X(n, 1);
    T = Mat(n, 1);
    for (int i = 0; i < n; ++i) {
      X(i, 0) = rng.uniform();
      T(i, 0) = rng.uniform();
    }
    P = grid->prepare(X);
    cls = grid;
  }
};

struct LinearCase {
  ClassPtr cls;
  Vec params;
  Mat P;
  Mat T;
  BregmanLoss loss = make_binary_entropy_loss();

  explicit LinearCase(int n) {
    auto lin = std::make_shared<LinearClass>(2, 5, Ball::L2, 20.0,
                                             Link::Sigmoid);
    Rng rng(2);
    params = lin->random_params(rng);
    Mat X(n, 2);
    T = Mat(n, 1);
    for (int i = 0; i < n; ++i) {
      X(i, 0) = rng.uniform();
      X(i, 1) = rng.uniform();
      T(i, 0) = rng.uniform(0.1, 0.9);
    }
    P = lin->prepare(X);
    cls = lin;
  }
};

template <typename Case>
void bench_loss_sum(benchmark::State& state, Exec exec) {
  Case c(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::weighted_loss_sum(
        c.loss, *c.cls, c.params, c.P, c.T, Vec(), exec));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <typename Case>
void bench_loss_grad(benchmark::State& state, Exec exec) {
  Case c(static_cast<int>(state.range(0)));
  Vec g;
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::weighted_loss_sum_grad(
        c.loss, *c.cls, c.params, c.P, c.T, Vec(), g, exec));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void grid_sum_serial(benchmark::State& s) { bench_loss_sum<GridCase>(s, Exec::Serial); }
void grid_sum_parallel(benchmark::State& s) { bench_loss_sum<GridCase>(s, Exec::Parallel); }
void grid_grad_serial(benchmark::State& s) { bench_loss_grad<GridCase>(s, Exec::Serial); }
void grid_grad_parallel(benchmark::State& s) { bench_loss_grad<GridCase>(s, Exec::Parallel); }
void linear_sum_serial(benchmark::State& s) { bench_loss_sum<LinearCase>(s, Exec::Serial); }
void linear_sum_parallel(benchmark::State& s) { bench_loss_sum<LinearCase>(s, Exec::Parallel); }
void linear_grad_serial(benchmark::State& s) { bench_loss_grad<LinearCase>(s, Exec::Serial); }
void linear_grad_parallel(benchmark::State& s) { bench_loss_grad<LinearCase>(s, Exec::Parallel); }

}  // namespace

BENCHMARK(grid_sum_serial)->Arg(4096)->Arg(65536);
BENCHMARK(grid_sum_parallel)->Arg(4096)->Arg(65536);
BENCHMARK(grid_grad_serial)->Arg(4096)->Arg(65536);
BENCHMARK(grid_grad_parallel)->Arg(4096)->Arg(65536);
BENCHMARK(linear_sum_serial)->Arg(4096)->Arg(65536);
BENCHMARK(linear_sum_parallel)->Arg(4096)->Arg(65536);
BENCHMARK(linear_grad_serial)->Arg(4096)->Arg(65536);
BENCHMARK(linear_grad_parallel)->Arg(4096)->Arg(65536);

BENCHMARK_MAIN();
