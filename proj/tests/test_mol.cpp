#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "moltk/mol.hpp"

#include <cmath>

using namespace moltk;

namespace {

const Tolerances kTol{};

WeightGrid single_weight(std::initializer_list<double> lam) {
  WeightGrid g;
  g.K = static_cast<int>(lam.size());
  g.m = 2;
  Vec l(g.K);
  int i = 0;
  for (double v : lam) l[i++] = v;
  g.weights.push_back(WeightVector::make(l));
  return g;
}

MultiTaskData constant_tasks(double a, double b, int n, int N, Rng& rng,
                             double noise = 0.0) {
  MultiTaskData data;
  const double mean[2] = {a, b};
  for (int k = 0; k < 2; ++k) {
    TaskData t;
    t.task_id = k + 1;
    t.X = Mat(n, 1);
    t.Y = Mat(n, 1);
    t.XU = Mat(N, 1);
    for (int i = 0; i < n; ++i) {
      t.X(i, 0) = rng.uniform();
      t.Y(i, 0) = mean[k] + noise * rng.uniform(-1.0, 1.0);
    }
    for (int i = 0; i < N; ++i) t.XU(i, 0) = rng.uniform();
    data.tasks.push_back(std::move(t));
  }
  return data;
}

}  // namespace

TEST_CASE("two constant tasks: stage two lands at the mean of the teachers") {
  Rng rng(71);
  MultiTaskData data = constant_tasks(0.2, 0.8, 30, 50, rng, 0.05);
  auto H = std::make_shared<GridLipschitzClass>(8, 0.0);  // constants
  auto G = std::make_shared<GridLipschitzClass>(8, 0.0);
  std::vector<BregmanLoss> losses = {make_square_loss(1), make_square_loss(1)};
  TradeoffSolution sol =
      pl_mol(data, {H, H}, G, losses, ScalKind::Linear,
             single_weight({0.5, 0.5}), kTol, 7);
  // teachers are the per-task label means
  const double ahat = data.tasks[0].Y.col(0).mean();
  const double bhat = data.tasks[1].Y.col(0).mean();
  for (int j = 0; j < 8; ++j) {
    CHECK(sol.teachers[0].params[j] == doctest::Approx(ahat).epsilon(1e-6));
    CHECK(sol.entries[0].model.params[j] ==
          doctest::Approx(0.5 * (ahat + bhat)).epsilon(1e-5));
  }
}

TEST_CASE("a vertex weight reproduces the embedded teacher") {
  Rng rng(72);
  MultiTaskData data = constant_tasks(0.3, 0.9, 25, 40, rng, 0.02);
  auto H = std::make_shared<GridLipschitzClass>(8, 0.1);
  auto G = std::make_shared<GridLipschitzClass>(8, 1.0);
  std::vector<BregmanLoss> losses = {make_square_loss(1), make_square_loss(1)};
  TradeoffSolution sol =
      pl_mol(data, {H, H}, G, losses, ScalKind::Linear,
             single_weight({1.0, 0.0}), kTol, 3);
  const Vec teacher = embed_params(*H, *G, sol.teachers[0].params);
  CHECK((sol.entries[0].model.params - teacher).lpNorm<Eigen::Infinity>() <
        1e-6);
}

TEST_CASE("stage-2 basic inequality against embedded teachers") {
  Rng rng(73);
  MultiTaskData data = constant_tasks(0.25, 0.75, 20, 60, rng, 0.1);
  auto H = std::make_shared<GridLipschitzClass>(16, 0.2);
  auto G = std::make_shared<GridLipschitzClass>(16, 1.5);
  std::vector<BregmanLoss> losses = {make_square_loss(1), make_square_loss(1)};
  WeightGrid grid = weight_grid(2, 5);
  TradeoffSolution sol =
      pl_mol(data, {H, H}, G, losses, ScalKind::Linear, grid, kTol, 11);
  std::vector<std::pair<ClassPtr, Model>> teachers = {
      {H, sol.teachers[0]}, {H, sol.teachers[1]}};
  for (const auto& e : sol.entries) {
    Scalarization s{ScalKind::Linear, e.weights};
    const double fitted =
        scalarized_discrepancy(s, losses, *G, e.model, teachers, data);
    for (int k = 0; k < 2; ++k) {
      Model embedded{G->id(), embed_params(*H, *G, sol.teachers[k].params)};
      const double ref =
          scalarized_discrepancy(s, losses, *G, embedded, teachers, data);
      CHECK(fitted <= ref + 1e-7);
    }
  }
}

TEST_CASE("erm_mol with one task is plain ERM") {
  Rng rng(74);
  MultiTaskData data;
  TaskData t;
  t.task_id = 1;
  t.X = Mat(40, 1);
  t.Y = Mat(40, 1);
  for (int i = 0; i < 40; ++i) {
    t.X(i, 0) = rng.uniform();
    t.Y(i, 0) = 0.4 + 0.05 * rng.uniform(-1.0, 1.0);
  }
  data.tasks.push_back(t);
  auto G = std::make_shared<GridLipschitzClass>(8, 0.0);
  TradeoffSolution sol =
      erm_mol(data, G, {make_square_loss(1)}, ScalKind::Linear,
              single_weight({1.0}), kTol, 5);
  const double mean = t.Y.col(0).mean();
  CHECK(sol.entries[0].model.params[0] == doctest::Approx(mean).epsilon(1e-6));
}

TEST_CASE("erm_mol on identical tasks is weight independent") {
  Rng rng(75);
  MultiTaskData data = constant_tasks(0.6, 0.6, 30, 10, rng, 0.08);
  data.tasks[1].X = data.tasks[0].X;
  data.tasks[1].Y = data.tasks[0].Y;
  auto G = std::make_shared<GridLipschitzClass>(8, 0.3);
  std::vector<BregmanLoss> losses = {make_square_loss(1), make_square_loss(1)};
  TradeoffSolution sol = erm_mol(data, G, losses, ScalKind::Linear,
                                 weight_grid(2, 5), kTol, 5);
  for (std::size_t w = 1; w < sol.entries.size(); ++w)
    CHECK((sol.entries[w].model.params - sol.entries[0].model.params).norm() <
          1e-6);
}

TEST_CASE("zero-one pseudo-labeling against brute force on 8 points") {
  Rng rng(76);
  const int M = 8;
  Mat pts(M, 1);
  for (int m = 0; m < M; ++m) pts(m, 0) = m / static_cast<double>(M - 1);
  auto G = std::make_shared<FiniteClass>(pts, std::vector<double>{0.0, 1.0});
  auto Theta = std::make_shared<GridLipschitzClass>(M, 10.0);

  for (int trial = 0; trial < 5; ++trial) {
    Rng sub = rng.derive(trial);
    MultiTaskData data;
    for (int k = 0; k < 2; ++k) {
      TaskData t;
      t.task_id = k + 1;
      const int n = 160, N = 240;
      t.X = Mat(n, 1);
      t.Y = Mat(n, 1);
      t.XU = Mat(N, 1);
      Vec theta(M);
      for (int m = 0; m < M; ++m) theta[m] = sub.uniform(0.05, 0.95);
      for (int i = 0; i < n; ++i) {
        const int m = static_cast<int>(sub.uniform_int(M));
        t.X(i, 0) = pts(m, 0);
        t.Y(i, 0) = sub.bernoulli(theta[m]) ? 1.0 : 0.0;
      }
      for (int i = 0; i < N; ++i)
        t.XU(i, 0) = pts(static_cast<int>(sub.uniform_int(M)), 0);
      data.tasks.push_back(std::move(t));
    }
    Vec lam(2);
    lam << 0.35, 0.65;
    WeightGrid grid;
    grid.K = 2;
    grid.m = 2;
    grid.weights.push_back(WeightVector::make(lam));
    TradeoffSolution sol = pl_mol_zero_one(data, {Theta, Theta}, G,
                                           ScalKind::Linear, grid, kTol, 77);

    // brute force with the raw per-sample discrepancy formula
    std::vector<Vec> theta_hat;
    for (int k = 0; k < 2; ++k)
      theta_hat.push_back(kernels::predict(*Theta, sol.teachers[k].params,
                                           data.tasks[k].XU));
    double best = std::numeric_limits<double>::infinity();
    Vec best_g;
    for (std::size_t c = 0; c < (1u << M); ++c) {
      Vec g = G->candidate(c);
      double val = 0.0;
      for (int k = 0; k < 2; ++k) {
        const auto& t = data.tasks[k];
        double d = 0.0;
        for (int i = 0; i < t.N(); ++i) {
          const double th =
              std::min(1.0, std::max(0.0, theta_hat[k][i]));
          const double hard = th >= 0.5 ? 1.0 : 0.0;
          d += std::abs(2.0 * th - 1.0) *
               std::abs(g[G->point_index(t.XU.row(i))] - hard);
        }
        val += lam[k] * d / t.N();
      }
      if (val < best - 1e-15) {
        best = val;
        best_g = g;
      }
    }
    CHECK((sol.entries[0].model.params - best_g).norm() == 0.0);
    CHECK(sol.entries[0].report.objective == doctest::Approx(best));
  }
}

TEST_CASE("all-ones teacher forces the all-ones classifier") {
  const int M = 4;
  Mat pts(M, 1);
  for (int m = 0; m < M; ++m) pts(m, 0) = m / 3.0;
  auto G = std::make_shared<FiniteClass>(pts, std::vector<double>{0.0, 1.0});
  auto Theta = std::make_shared<GridLipschitzClass>(M, 0.0);
  MultiTaskData data;
  TaskData t;
  t.task_id = 1;
  t.X = Mat(8, 1);
  t.Y = Mat::Ones(8, 1);
  t.XU = Mat(12, 1);
  Rng rng(78);
  for (int i = 0; i < 8; ++i)
    t.X(i, 0) = pts(static_cast<int>(rng.uniform_int(M)), 0);
  for (int i = 0; i < 12; ++i)
    t.XU(i, 0) = pts(i % M, 0);
  data.tasks.push_back(t);
  TradeoffSolution sol = pl_mol_zero_one(data, {Theta}, G, ScalKind::Linear,
                                         single_weight({1.0}), kTol, 5);
  CHECK(sol.entries[0].model.params.minCoeff() == 1.0);
  CHECK(!sol.entries[0].degenerate);
}

TEST_CASE("uninformative teacher degenerates with the first model") {
  const int M = 3;
  Mat pts(M, 1);
  pts << 0.0, 0.5, 1.0;
  auto G = std::make_shared<FiniteClass>(pts, std::vector<double>{0.0, 1.0});
  auto Theta = std::make_shared<GridLipschitzClass>(M, 0.0);
  MultiTaskData data;
  TaskData t;
  t.task_id = 1;
  t.X = Mat(4, 1);
  t.Y = Mat(4, 1);
  t.Y << 1, 0, 1, 0;  // mean 1/2 => constant theta = 1/2
  t.X << 0, 0, 1, 1;
  t.XU = Mat(6, 1);
  for (int i = 0; i < 6; ++i) t.XU(i, 0) = pts(i % M, 0);
  data.tasks.push_back(t);
  TradeoffSolution sol = pl_mol_zero_one(data, {Theta}, G, ScalKind::Linear,
                                         single_weight({1.0}), kTol, 5);
  CHECK(sol.entries[0].degenerate);
  CHECK(sol.entries[0].model.params.maxCoeff() == 0.0);  // lexicographic first
}

TEST_CASE("coin example: inconsistent pseudo-labeling, consistent ERM") {
  Vec lam(2);
  lam << 0.25, 0.75;
  WeightVector w = WeightVector::make(lam);
  int zero_picks = 0;
  for (int seed = 0; seed < 20; ++seed) {
    CoinResult pl = coin_example_pl(10'000, w, 1.0, 2.0 / 5.0, seed);
    CoinResult erm = coin_example_erm(10'000, w, 1.0, 2.0 / 5.0, seed);
    if (pl.yhat_s == 0) {
      ++zero_picks;
      CHECK(pl.excess == doctest::Approx(0.1).epsilon(1e-12));
    }
    CHECK(erm.excess <= 0.02);
  }
  CHECK(zero_picks >= 19);
}

TEST_CASE("coin population rules") {
  Vec half(2);
  half << 0.5, 0.5;
  WeightVector w = WeightVector::make(half);
  // population rule: pick 1 iff a > 1 - b; here 0.9 > 0.6
  CoinResult r = coin_example_erm(40'000, w, 0.9, 0.4, 3);
  CHECK(r.yhat_s == 1);
  // agreeing certain tasks: both stages pick 1, excess 0
  CoinResult both = coin_example_pl(100, w, 1.0, 1.0, 4);
  CHECK(both.yhat_s == 1);
  CHECK(both.excess == doctest::Approx(0.0));
}

TEST_CASE("solution serializes to JSON with models and weights") {
  Rng rng(79);
  MultiTaskData data = constant_tasks(0.2, 0.8, 10, 12, rng, 0.05);
  auto H = std::make_shared<GridLipschitzClass>(4, 0.0);
  auto G = std::make_shared<GridLipschitzClass>(4, 1.0);
  std::vector<BregmanLoss> losses = {make_square_loss(1), make_square_loss(1)};
  TradeoffSolution sol = pl_mol(data, {H, H}, G, losses, ScalKind::Linear,
                                weight_grid(2, 3), kTol, 9);
  sol.config = {{"experiment", "unit"}, {"n", 10}};
  nlohmann::json j = solution_to_json(sol, *G);
  CHECK(j["entries"].size() == 3);
  CHECK(j["teachers"].size() == 2);
  CHECK(j.contains("config_hash"));
  Model back = model_from_json(j["entries"][0]["model"]);
  CHECK(back.params.size() == 4);
}

TEST_CASE("missing unlabeled data is a data error") {
  Rng rng(80);
  MultiTaskData data = constant_tasks(0.2, 0.8, 10, 0, rng);
  data.tasks[0].XU = Mat(0, 1);
  data.tasks[1].XU = Mat(0, 1);
  auto H = std::make_shared<GridLipschitzClass>(4, 0.0);
  auto G = std::make_shared<GridLipschitzClass>(4, 1.0);
  std::vector<BregmanLoss> losses = {make_square_loss(1), make_square_loss(1)};
  CHECK_THROWS_AS(pl_mol(data, {H, H}, G, losses, ScalKind::Linear,
                         weight_grid(2, 3), kTol, 1),
                  DataError);
}
