#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "moltk/losses.hpp"

#include <cmath>

using namespace moltk;

namespace {

// interior sample of the loss's effective (clipped) range
double sample_clipped(const BregmanLoss& l, Rng& rng) {
  const double eps = std::max(l.clip_eps, 1e-6);
  return rng.uniform(l.lo + eps, l.hi - eps);
}

}  // namespace

TEST_CASE("square divergence basics") {
  BregmanLoss sq = make_square_loss(1);
  Vec y(1), yh(1);
  y << 1.0;
  yh << 0.5;
  CHECK(sq.divergence(y, yh) == doctest::Approx(0.25));
  CHECK(sq.divergence1(0.3, 0.3) == doctest::Approx(0.0));
}

TEST_CASE("binary entropy identity and near-boundary value") {
  BregmanLoss be = make_binary_entropy_loss();
  CHECK(be.divergence1(0.5, 0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(be.divergence1(1.0 - 1e-12, 0.5) - std::log(2.0)) < 1e-9);
}

TEST_CASE("binary entropy domain and boundary errors") {
  BregmanLoss be = make_binary_entropy_loss();
  CHECK_THROWS_AS(be.divergence1(1.5, 0.5), DomainError);
  CHECK_THROWS_AS(be.divergence1(0.5, 1.0), DomainError);
  // y on the boundary is fine: the potential stays finite
  CHECK(be.divergence1(0.0, 0.5) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("declared constants of the logistic-range entropy loss") {
  const double s1 = 1.0 / (1.0 + std::exp(1.0));   // sigma(-1)
  const double s2 = 1.0 / (1.0 + std::exp(-1.0));  // sigma(1)
  BregmanLoss be = make_binary_entropy_loss(s1);
  CHECK(be.lips == doctest::Approx(3.0 / (2.0 * s1 * s2)));
  CHECK(be.bound == doctest::Approx(-std::log(s1)));
  CHECK(be.mu == doctest::Approx(4.0));
}

TEST_CASE("KL on the simplex: identity case") {
  BregmanLoss kl = make_simplex_kl_loss(2);
  Vec u(2);
  u << 0.5, 0.5;
  CHECK(kl.divergence(u, u) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("zero-one loss") {
  CHECK(zero_one(0, 0) == 0);
  CHECK(zero_one(1, 0) == 1);
  CHECK_THROWS_AS(zero_one(0.5, 1), DomainError);
  // mean over {(1,1),(1,0),(0,0),(0,1)} against the constant predictor 1
  double y[4] = {1, 1, 0, 0};
  double acc = 0;
  for (double v : y) acc += zero_one(v, 1.0);
  CHECK(acc / 4 == doctest::Approx(0.5));
}

TEST_CASE("sampled regularity of every loss") {
  Rng rng(31);
  std::vector<BregmanLoss> losses = {make_square_loss(1),
                                     make_binary_entropy_loss()};
  for (const auto& l : losses) {
    for (int trial = 0; trial < 10'000; ++trial) {
      const double y = sample_clipped(l, rng);
      const double a = sample_clipped(l, rng);
      const double b = sample_clipped(l, rng);
      const double dya = l.divergence1(y, a);
      CHECK(dya >= -1e-14);
      CHECK(l.divergence1(y, y) <= 1e-12);
      CHECK(dya >= 0.5 * l.mu * (y - a) * (y - a) - 1e-12);
      CHECK(std::abs(l.divergence1(y, a) - l.divergence1(y, b)) <=
            l.lips * std::abs(a - b) + 1e-12);
      CHECK(dya <= l.bound + 1e-12);
    }
  }
}

TEST_CASE("sampled regularity of the KL loss on the clipped simplex") {
  Rng rng(32);
  BregmanLoss kl = make_simplex_kl_loss(3, 0.05);
  auto sample_simplex = [&](double eps) {
    Vec v(3);
    for (int j = 0; j < 3; ++j) v[j] = eps + rng.uniform();
    v /= v.sum();
    // re-clip (mixture with uniform keeps coordinates above eps)
    Vec u = Vec::Constant(3, 1.0 / 3.0);
    return Vec(0.7 * v + 0.3 * u);
  };
  for (int trial = 0; trial < 2'000; ++trial) {
    Vec y = sample_simplex(kl.clip_eps);
    Vec a = sample_simplex(kl.clip_eps);
    Vec b = sample_simplex(kl.clip_eps);
    const double dya = kl.divergence(y, a);
    CHECK(dya >= -1e-14);
    CHECK(dya >= 0.5 * kl.mu * (y - a).squaredNorm() - 1e-12);
    CHECK(std::abs(dya - kl.divergence(y, b)) <=
          kl.lips * (a - b).norm() + 1e-12);
    CHECK(dya <= kl.bound + 1e-12);
  }
}

TEST_CASE("generalized Pythagorean identity on random triples") {
  Rng rng(33);
  std::vector<BregmanLoss> losses = {make_square_loss(1),
                                     make_binary_entropy_loss()};
  for (const auto& l : losses) {
    for (int trial = 0; trial < 10'000; ++trial) {
      Vec y(1), z(1), x(1);
      y << sample_clipped(l, rng);
      z << sample_clipped(l, rng);
      x << sample_clipped(l, rng);
      const double lhs = l.divergence(y, x);
      const double rhs = l.divergence(y, z) + l.divergence(z, x) -
                         (y - z).dot(l.grad_potential(x) - l.grad_potential(z));
      CHECK(std::abs(lhs - rhs) < 1e-9);
    }
  }
}
