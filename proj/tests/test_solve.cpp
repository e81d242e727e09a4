#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "moltk/solve.hpp"

#include <cmath>

using namespace moltk;
using kernels::Exec;

namespace {

const Tolerances kTight{};  // spec defaults: 1e-8, 50k iters

Objective least_squares(ClassPtr cls, const Mat& X, const Vec& y,
                        double lo = -10.0, double hi = 10.0) {
  Objective obj;
  obj.cls = std::move(cls);
  obj.terms.push_back(
      make_term(make_square_loss(1, lo, hi), *obj.cls, X, Mat(y)));
  return obj;
}

}  // namespace

TEST_CASE("unconstrained least squares matches the normal equations") {
  Rng rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 60, d = 4;
    Mat X(n, d);
    Vec y(n);
    Vec wtrue(d);
    for (int j = 0; j < d; ++j) wtrue[j] = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) X(i, j) = rng.uniform(-1.0, 1.0);
      y[i] = X.row(i).dot(wtrue) + 0.1 * rng.normal();
    }
    auto cls =
        std::make_shared<LinearClass>(d, 0, Ball::L2, 1e6, Link::Identity);
    FitReport rep = minimize(least_squares(cls, X, y), Model{cls->id(), Vec::Zero(d)},
                             kTight, 0);
    Vec ols = (X.transpose() * X).ldlt().solve(X.transpose() * y);
    CHECK(rep.converged);
    CHECK((rep.model.params - ols).lpNorm<Eigen::Infinity>() < 1e-7);
  }
}

TEST_CASE("data on an exact line is recovered") {
  Mat X(5, 1);
  X << 1, 2, 3, 4, 5;
  Vec y = 0.7 * X.col(0);
  auto cls = std::make_shared<LinearClass>(1, 0, Ball::L2, 1e6, Link::Identity);
  FitReport rep =
      minimize(least_squares(cls, X, y), Model{cls->id(), Vec::Zero(1)}, kTight, 0);
  CHECK(rep.model.params[0] == doctest::Approx(0.7).epsilon(1e-9));
}

TEST_CASE("a constrained minimum is a fixed point") {
  Mat X(3, 1);
  X << 1, 1, 1;
  Vec y(3);
  y << 2, 2, 2;  // optimum on the ball boundary at w = 1
  auto cls = std::make_shared<LinearClass>(1, 0, Ball::L2, 1.0, Link::Identity);
  Vec w1(1);
  w1 << 1.0;
  FitReport rep =
      minimize(least_squares(cls, X, y), Model{cls->id(), w1}, kTight, 0);
  CHECK(rep.converged);
  CHECK(rep.iterations <= 2);
  CHECK(std::abs(rep.model.params[0] - 1.0) <= 1e-9);
}

TEST_CASE("ridge-path KKT: ball-constrained fit lands on the boundary") {
  Rng rng(42);
  const int n = 80, d = 3;
  Mat X(n, d);
  Vec y(n);
  Vec wtrue(d);
  wtrue << 1.0, -0.8, 0.6;  // ||w|| > R
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) X(i, j) = rng.uniform(-1.0, 1.0);
    y[i] = X.row(i).dot(wtrue);
  }
  const double R = 0.5;
  auto cls = std::make_shared<LinearClass>(d, 0, Ball::L2, R, Link::Identity);
  FitReport rep = minimize(least_squares(cls, X, y, -10, 10),
                           Model{cls->id(), Vec::Zero(d)}, kTight, 0);
  CHECK(std::abs(rep.model.params.norm() - R) < 1e-6);
  // KKT oracle: the solution solves (X'X + mu I) w = X'y for some mu >= 0
  Vec r = X.transpose() * (X * rep.model.params - y) * (2.0 / n);
  // gradient must be anti-parallel to w on the boundary
  const double cosang = -r.dot(rep.model.params) / (r.norm() * R);
  CHECK(cosang == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("analytic gradients match central finite differences") {
  Rng rng(43);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int variant = trial % 3;
    ClassPtr cls;
    BregmanLoss loss = make_square_loss(1);
    if (variant == 0)
      cls = std::make_shared<LinearClass>(2, 2, Ball::L2, 2.0, Link::Identity);
    else if (variant == 1) {
      cls = std::make_shared<LinearClass>(2, 1, Ball::L2, 2.0, Link::Sigmoid);
      loss = make_binary_entropy_loss();
    } else
      cls = std::make_shared<GridLipschitzClass>(9, 1.0);

    const int n = 20;
    Mat X(n, cls->input_dim());
    Mat T(n, 1);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < cls->input_dim(); ++j)
        X(i, j) = variant == 2 ? rng.uniform() : rng.uniform(-1.0, 1.0);
      T(i, 0) = rng.uniform(0.1, 0.9);
    }
    Objective obj;
    obj.cls = cls;
    obj.terms.push_back(make_term(loss, *cls, X, T));

    Rng sub = rng.derive(trial);
    Vec w = cls->random_params(sub);
    if (variant == 2) w = 0.25 * w + Vec::Constant(w.size(), 0.4);
    Vec g;
    obj.value_grad(w, g, Exec::Parallel);
    const double h = 1e-5;
    for (int j = 0; j < w.size(); ++j) {
      Vec wp = w, wm = w;
      wp[j] += h;
      wm[j] -= h;
      const double fd =
          (obj.value(wp, Exec::Parallel) - obj.value(wm, Exec::Parallel)) /
          (2 * h);
      if (std::abs(fd) > 1e-8)
        CHECK(std::abs(g[j] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
    ++checked;
  }
  CHECK(checked == 200);
}

TEST_CASE("descent is monotone across accepted steps") {
  Rng rng(44);
  const int n = 50;
  Mat X(n, 2);
  Vec y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = rng.uniform(-1, 1);
    X(i, 1) = rng.uniform(-1, 1);
    y[i] = 0.3 * X(i, 0) - 0.2 * X(i, 1) + 0.05 * rng.normal();
  }
  auto cls = std::make_shared<LinearClass>(2, 0, Ball::L2, 1.0, Link::Identity);
  std::vector<double> trace;
  minimize(least_squares(cls, X, y), Model{cls->id(), Vec::Zero(2)}, kTight, 0,
           Exec::Parallel, &trace);
  for (std::size_t i = 1; i < trace.size(); ++i)
    CHECK(trace[i] <= trace[i - 1] + 1e-12);
}

TEST_CASE("convex objectives reach the same value from two inits") {
  Rng rng(45);
  const int n = 40;
  Mat X(n, 3);
  Vec y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) X(i, j) = rng.uniform(-1, 1);
    y[i] = rng.uniform(0.0, 1.0);
  }
  auto cls = std::make_shared<LinearClass>(3, 0, Ball::L2, 0.7, Link::Identity);
  Objective obj = least_squares(cls, X, y);
  Rng r1 = rng.derive(1), r2 = rng.derive(2);
  FitReport a =
      minimize(obj, Model{cls->id(), cls->random_params(r1)}, kTight, 0);
  FitReport b =
      minimize(obj, Model{cls->id(), cls->random_params(r2)}, kTight, 0);
  CHECK(std::abs(a.objective - b.objective) < 1e-6);
}

TEST_CASE("tchebycheff subgradient descent matches a tiny oracle") {
  // two terms over a single scalar parameter: max of two quadratics
  Mat X(1, 1);
  X << 1.0;
  Mat T0(1, 1), T1(1, 1);
  T0 << 0.0;
  T1 << 1.0;
  auto cls = std::make_shared<LinearClass>(1, 0, Ball::L2, 2.0, Link::Identity);
  Objective obj;
  obj.cls = cls;
  obj.combine = ScalKind::Tchebycheff;
  obj.terms.push_back(make_term(make_square_loss(1, -3, 3), *cls, X, T0, Vec(), 0.5));
  obj.terms.push_back(make_term(make_square_loss(1, -3, 3), *cls, X, T1, Vec(), 0.5));
  // max(0.5 w^2, 0.5 (w-1)^2) is minimized at w = 1/2 with value 1/8
  Tolerances tol{1e-8, 4000, 1e-9};
  FitReport rep = minimize(obj, Model{cls->id(), Vec::Zero(1)}, tol, 0);
  CHECK(rep.model.params[0] == doctest::Approx(0.5).epsilon(0.1));
  CHECK(rep.objective == doctest::Approx(0.125).epsilon(0.05));
}

TEST_CASE("solver surfaces NaN objectives as numerics errors") {
  Mat X(1, 1);
  X << 1.0;
  Mat T(1, 1);
  T << std::numeric_limits<double>::quiet_NaN();
  auto cls = std::make_shared<LinearClass>(1, 0, Ball::L2, 1.0, Link::Identity);
  Objective obj;
  obj.cls = cls;
  obj.terms.push_back(
      make_term(make_square_loss(1, -1e300, 1e300), *cls, X, T));
  CHECK_THROWS_AS(minimize(obj, Model{cls->id(), Vec::Zero(1)}, kTight, 0),
                  NumericsError);
}

TEST_CASE("empirical risk and discrepancy reductions") {
  auto cls = std::make_shared<GridLipschitzClass>(2, 0.0);
  BregmanLoss sq = make_square_loss(1);

  TaskData data;
  data.task_id = 1;
  data.X = Mat::Zero(4, 1);
  data.Y = Mat::Zero(4, 1);
  Model zero{cls->id(), Vec::Zero(2)};
  CHECK(empirical_risk(sq, *cls, zero, data) == doctest::Approx(0.0));

  // teacher == model gives zero discrepancy
  Mat XU = Mat::Zero(10, 1);
  Model c1{cls->id(), Vec::Ones(2)};
  CHECK(empirical_discrepancy(sq, *cls, c1, *cls, c1, XU) ==
        doctest::Approx(0.0));
  // teacher 1 vs model 0: square loss 1 everywhere
  CHECK(empirical_discrepancy(sq, *cls, zero, *cls, c1, XU) ==
        doctest::Approx(1.0));
  // binary entropy with constant teacher/model reduces to one divergence
  BregmanLoss be = make_binary_entropy_loss();
  Model half{cls->id(), Vec::Constant(2, 0.5)};
  Model quarter{cls->id(), Vec::Constant(2, 0.25)};
  Mat XU2 = Mat::Zero(100, 1);
  CHECK(empirical_discrepancy(be, *cls, quarter, *cls, half, XU2) ==
        doctest::Approx(be.divergence1(0.5, 0.25)));
}

TEST_CASE("scalarized discrepancy of constant teachers") {
  auto cls = std::make_shared<GridLipschitzClass>(2, 0.0);
  BregmanLoss sq = make_square_loss(1);
  MultiTaskData data;
  for (int k = 1; k <= 2; ++k) {
    TaskData t;
    t.task_id = k;
    t.X = Mat::Zero(1, 1);
    t.Y = Mat::Zero(1, 1);
    t.XU = Mat::Zero(50, 1);
    data.tasks.push_back(t);
  }
  Model a{cls->id(), Vec::Zero(2)};
  Model b{cls->id(), Vec::Ones(2)};
  Model g{cls->id(), Vec::Constant(2, 0.25)};
  Vec lam(2);
  lam << 0.5, 0.5;
  Scalarization s{ScalKind::Linear, WeightVector::make(lam)};
  const double v = scalarized_discrepancy(
      s, {sq, sq}, *cls, g, {{cls, a}, {cls, b}}, data);
  CHECK(v == doctest::Approx((0.0625 + 0.5625) / 2));
}
