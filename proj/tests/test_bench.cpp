#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "moltk/bench.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <filesystem>

using namespace moltk;

TEST_CASE("lipschitz generator rejects empty labeled data") {
  CHECK_THROWS_AS(gen_lipschitz_regression(0, 5, 10, 10, 0.3, 0.7, 1),
                  DataError);
}

TEST_CASE("lipschitz covariates pass a chi-square goodness-of-fit test") {
  const int N = 100'000;
  auto [data, spec] = gen_lipschitz_regression(2, 2, N, 4, 0.3, 0.7, 42);

  // equiprobable bin edges by bisection on an independent Simpson CDF
  auto pdf = [](double x) { return 0.7 * std::sin(20.0 * x) + 1.0; };
  auto integral = [&](double hi) {
    const int steps = 2000;
    double acc = 0.0;
    const double h = hi / steps;
    for (int i = 0; i < steps; ++i) {
      const double x0 = i * h, x1 = x0 + h;
      acc += (pdf(x0) + 4.0 * pdf(0.5 * (x0 + x1)) + pdf(x1)) * h / 6.0;
    }
    return acc;
  };
  const double Z = integral(1.0);
  const int B = 20;
  std::vector<double> edges(B + 1, 0.0);
  edges[B] = 1.0;
  for (int k = 1; k < B; ++k) {
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 50; ++it) {
      const double mid = 0.5 * (lo + hi);
      (integral(mid) / Z < static_cast<double>(k) / B ? lo : hi) = mid;
    }
    edges[k] = 0.5 * (lo + hi);
  }
  std::vector<int> counts(B, 0);
  for (int i = 0; i < N; ++i) {
    const double x = data.tasks[0].XU(i, 0);
    const int bin = static_cast<int>(
        std::upper_bound(edges.begin() + 1, edges.end(), x) -
        (edges.begin() + 1));
    counts[std::min(bin, B - 1)]++;
  }
  const double expect = static_cast<double>(N) / B;
  double chi2 = 0.0;
  for (int k = 0; k < B; ++k)
    chi2 += (counts[k] - expect) * (counts[k] - expect) / expect;
  // 0.99 quantile of chi-square with 19 degrees of freedom
  CHECK(chi2 < 36.19087);
}

TEST_CASE("lipschitz labels stay in range and keep the right mean") {
  auto [data, spec] = gen_lipschitz_regression(5'000, 5'000, 4, 4, 0.3, 0.7, 7);
  CHECK(data.tasks[0].Y.minCoeff() >= 0.0);
  CHECK(data.tasks[0].Y.maxCoeff() <= 1.0);
  CHECK(std::abs(data.tasks[0].Y.col(0).mean() - 0.3) < 0.01);
  Vec x(1);
  x << 0.2;
  CHECK(spec.tasks[0].conditional_mean(x) == doctest::Approx(0.3));
}

TEST_CASE("hard logistic geometry: nested supports and region labels") {
  auto [data, spec] = gen_logistic_hard(400, 400, 3);
  for (int k = 0; k < 2; ++k) {
    const double hi = k == 0 ? 1.0 : 0.5;
    CHECK(data.tasks[k].X.minCoeff() >= 0.0);
    CHECK(data.tasks[k].X.maxCoeff() <= hi);
  }
  // task-2 support is inside task-1 support by construction
  CHECK(data.tasks[1].X.maxCoeff() <= data.tasks[0].X.maxCoeff());

  // label mean in task 1's positive region tracks the mean of f*_1 there
  const auto& t = data.tasks[0];
  double label_sum = 0, theta_sum = 0;
  int count = 0;
  for (int i = 0; i < t.n(); ++i) {
    if (t.X(i, 1) <= 0.5) continue;
    Vec x = t.X.row(i).transpose();
    label_sum += t.Y(i, 0);
    theta_sum += spec.tasks[0].conditional_mean(x);
    ++count;
  }
  REQUIRE(count > 50);
  CHECK(std::abs(label_sum / count - theta_sum / count) <
        3.0 / std::sqrt(static_cast<double>(count)));
}

TEST_CASE("zero-one label variant uses the Ber(0.65) strip") {
  auto [data, spec] = gen_logistic_hard(4, 4, 3, true);
  Vec x(2);
  x << 0.1, 0.1;
  CHECK(spec.tasks[1].conditional_mean(x) == doctest::Approx(0.65));
  x << 0.1, 0.4;
  CHECK(spec.tasks[1].conditional_mean(x) == doctest::Approx(0.0));
  x << 0.1, 0.9;
  CHECK(spec.tasks[0].conditional_mean(x) == doctest::Approx(1.0));
}

TEST_CASE("easy logistic mixture moments and link values") {
  auto [data, spec] = gen_logistic_easy(20'000, 4, 11);
  CHECK(std::abs(data.tasks[0].X.col(0).mean() + 0.5) < 0.05);
  Vec zero = Vec::Zero(2);
  CHECK(spec.tasks[0].conditional_mean(zero) ==
        doctest::Approx(1.0 / (1.0 + std::exp(-0.5))));
  Vec half_e1(2);
  half_e1 << 0.5, 0.0;
  CHECK(spec.tasks[0].conditional_mean(half_e1) == doctest::Approx(0.5));
}

TEST_CASE("coin generator moments") {
  MultiTaskData one = gen_coin(1, 0.5, 0.5, 9);
  CHECK(one.tasks[0].n() == 1);
  MultiTaskData sure = gen_coin(50, 1.0, 1.0, 9);
  CHECK(sure.tasks[0].Y.minCoeff() == 1.0);
  const int n = 10'000;
  MultiTaskData big = gen_coin(n, 0.3, 0.8, 10);
  CHECK(std::abs(big.tasks[0].Y.col(0).mean() - 0.3) < 3.0 / std::sqrt(n));
  CHECK(std::abs(big.tasks[1].Y.col(0).mean() - 0.8) < 3.0 / std::sqrt(n));
}

TEST_CASE("l2 linear generator: exact means, eigenvalue floor, zero radius") {
  const int d = 4;
  auto [data, spec] = gen_l2_linear(10'000, 4, d, 0.2, 0.25, 0.0, 5);
  // noise-free labels equal the conditional mean exactly
  for (int i = 0; i < 50; ++i) {
    Vec x = data.tasks[0].X.row(i).transpose();
    CHECK(data.tasks[0].Y(i, 0) ==
          doctest::Approx(spec.tasks[0].conditional_mean(x)).epsilon(1e-12));
  }
  Mat sm = empirical_second_moment(data.tasks[0].X);
  Eigen::SelfAdjointEigenSolver<Mat> es(sm);
  CHECK(es.eigenvalues().minCoeff() >= 0.25 - 0.05);

  auto [dz, specz] = gen_l2_linear(10, 4, d, 0.0, 0.25, 0.0, 5);
  Vec x = dz.tasks[0].X.row(0).transpose();
  CHECK(specz.tasks[0].conditional_mean(x) == doctest::Approx(0.0));

  CHECK_THROWS_AS(gen_l2_linear(8, 8, d, 0.5, 0.3, 0.1, 1), ConfigError);
}

TEST_CASE("rate fits on exact power laws") {
  std::vector<std::pair<double, double>> pts;
  for (double n : {32.0, 64.0, 128.0, 256.0, 512.0})
    pts.emplace_back(n, 3.5 * std::pow(n, -2.0 / 3.0));
  auto [slope, se] = fit_rate(pts);
  CHECK(slope == doctest::Approx(-2.0 / 3.0).epsilon(1e-12));
  CHECK(se <= 1e-12);

  pts.clear();
  for (double n : {16.0, 32.0, 64.0, 128.0}) pts.emplace_back(n, 7.0 / n);
  CHECK(fit_rate(pts).first == doctest::Approx(-1.0).epsilon(1e-12));

  pts.resize(3);
  CHECK_THROWS_AS(fit_rate(pts), RateFitError);
  pts = {{10, 1}, {20, 0.0}, {40, 1}, {80, 1}};
  CHECK_THROWS_AS(fit_rate(pts), RateFitError);
}

TEST_CASE("config validation and TOML subset parsing") {
  ExperimentConfig cfg = default_config("coin_inconsistency");
  CHECK_NOTHROW(cfg.validate());
  cfg.weight_count = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(default_config("nope"), ConfigError);

  ExperimentConfig base = default_config("lipschitz_regression");
  ExperimentConfig got = apply_toml(
      "# comment\n"
      "n_grid = [32, 64]\n"
      "seeds = 3\n"
      "a = 0.25\n"
      "methods = [\"pl_mol\"]\n"
      "zero_one_labels = true\n",
      base);
  CHECK(got.n_grid == std::vector<int>{32, 64});
  CHECK(got.seeds == 3);
  CHECK(got.a == doctest::Approx(0.25));
  CHECK(got.methods == std::vector<std::string>{"pl_mol"});
  CHECK(got.zero_one_labels);
  CHECK_THROWS_AS(apply_toml("nonsense = 1\n", base), ConfigError);
}

TEST_CASE("zero-one regression experiment is deterministic byte for byte") {
  ExperimentConfig cfg = default_config("zero_one_regression");
  cfg.seeds = 3;
  cfg.weight_count = 3;
  const std::vector<ResultRow> r1 = run_experiment(cfg);
  const std::vector<ResultRow> r2 = run_experiment(cfg);
  CHECK(strip_wall_time(rows_to_csv(r1)) == strip_wall_time(rows_to_csv(r2)));
  CHECK(!r1.empty());
  for (const auto& row : r1) {
    CHECK(row.error.empty());
    CHECK(row.excess >= -1e-12);
  }
}

TEST_CASE("small lipschitz run: sane rows, outputs written") {
  ExperimentConfig cfg = default_config("lipschitz_regression");
  cfg.n_grid = {32};
  cfg.N_grid = {256};
  cfg.weight_count = 3;
  cfg.seeds = 2;
  cfg.grid_m = 64;
  cfg.tol = Tolerances{1e-6, 600, 1e-8};
  cfg.out_dir = "build/test_out";
  std::vector<ResultRow> rows = run_experiment(cfg);
  REQUIRE(!rows.empty());
  // 3 methods x 3 weights x 2 seeds
  CHECK(rows.size() == 18);
  for (const auto& r : rows) {
    CHECK(r.error.empty());
    CHECK(r.excess >= -2.0 * cfg.tol.opt_rel_tol - 1e-9);
    CHECK(r.task_excess.minCoeff() >= -1e-9);
  }
  write_outputs(cfg, rows);
  namespace fs = std::filesystem;
  CHECK(fs::exists("build/test_out/lipschitz_regression.csv"));
  CHECK(fs::exists("build/test_out/lipschitz_regression.svg"));
  CHECK(fs::exists("build/test_out/lipschitz_regression_meta.json"));
}

TEST_CASE("coin experiment rows carry the analytic excesses") {
  ExperimentConfig cfg = default_config("coin_inconsistency");
  cfg.seeds = 5;
  cfg.n_grid = {2'000};
  std::vector<ResultRow> rows = run_experiment(cfg);
  CHECK(rows.size() == 15);  // 3 methods x 5 seeds
  for (const auto& r : rows) {
    if (r.method == "pl_mol") {
      CHECK((std::abs(r.excess - 0.1) < 1e-12 || r.excess == 0.0));
    } else {
      CHECK(r.excess <= 0.1 + 1e-12);
    }
  }
}

TEST_CASE("csv escaping and wall-time stripping") {
  ResultRow r;
  r.experiment = "e,1";
  r.method = "m\"x";
  r.weights = "0.5;0.5";
  r.task_excess = Vec::Zero(2);
  const std::string csv = rows_to_csv({r});
  CHECK(csv.find("\"e,1\"") != std::string::npos);
  CHECK(csv.find("\"m\"\"x\"") != std::string::npos);
  const std::string stripped = strip_wall_time(csv);
  CHECK(stripped.find("wall_ms") == std::string::npos);
}
