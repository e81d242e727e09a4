#include "moltk/losses.hpp"

#include <cmath>

namespace moltk {

namespace {

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace

double BregmanLoss::potential1(double y) const {
  switch (kind) {
    case Kind::Square:
      return y * y;
    case Kind::BinaryEntropy:
      return xlogx(y) + xlogx(1.0 - y);
    case Kind::SimplexKL:
      throw UnsupportedError("potential1: KL is vector-valued");
  }
  return 0.0;
}

double BregmanLoss::potential(const Vec& y) const {
  if (y.size() != q) throw DimensionError("potential: label dimension");
  if (kind == Kind::SimplexKL) {
    double s = 0.0;
    for (int j = 0; j < q; ++j) s += xlogx(y[j]);
    return s;
  }
  if (kind == Kind::Square) return y.squaredNorm();
  return potential1(y[0]);
}

Vec BregmanLoss::grad_potential(const Vec& y) const {
  if (y.size() != q) throw DimensionError("grad_potential: label dimension");
  Vec g(q);
  switch (kind) {
    case Kind::Square:
      g = 2.0 * y;
      break;
    case Kind::BinaryEntropy: {
      if (y[0] <= 0.0 || y[0] >= 1.0)
        throw DomainError("grad_potential: unbounded at boundary");
      g[0] = std::log(y[0] / (1.0 - y[0]));
      break;
    }
    case Kind::SimplexKL:
      for (int j = 0; j < q; ++j) {
        if (y[j] <= 0.0)
          throw DomainError("grad_potential: unbounded at boundary");
        g[j] = std::log(y[j]) + 1.0;
      }
      break;
  }
  return g;
}

void BregmanLoss::check_pair1(double y, double yhat) const {
  // The square potential is globally defined (NaN/Inf propagate to the
  // solver's numerics check); entropy needs its domain and an interior
  // second argument, where the potential gradient is finite.
  if (kind == Kind::Square) return;
  if (!in_domain1(y) || !in_domain1(yhat))
    throw DomainError("bregman_divergence: argument outside domain");
  if (kind == Kind::BinaryEntropy && (yhat <= 0.0 || yhat >= 1.0))
    throw DomainError(
        "bregman_divergence: boundary point with unbounded gradient");
}

void BregmanLoss::check_pair(const Vec& y, const Vec& yhat) const {
  if (y.size() != q || yhat.size() != q)
    throw DimensionError("bregman_divergence: label dimension");
  if (kind == Kind::Square) return;
  if (!in_domain(y) || !in_domain(yhat))
    throw DomainError("bregman_divergence: argument outside domain");
  if (kind == Kind::SimplexKL) {
    for (int j = 0; j < q; ++j)
      if (yhat[j] <= 0.0)
        throw DomainError(
            "bregman_divergence: boundary point with unbounded gradient");
  }
}

double BregmanLoss::divergence1(double y, double yhat) const {
  check_pair1(y, yhat);
  switch (kind) {
    case Kind::Square: {
      const double d = y - yhat;
      return d * d;
    }
    case Kind::BinaryEntropy: {
      const double g = std::log(yhat / (1.0 - yhat));
      return xlogx(y) + xlogx(1.0 - y) - xlogx(yhat) - xlogx(1.0 - yhat) -
             g * (y - yhat);
    }
    case Kind::SimplexKL:
      throw UnsupportedError("divergence1: KL is vector-valued");
  }
  return 0.0;
}

double BregmanLoss::divergence(const Vec& y, const Vec& yhat) const {
  if (q == 1 && kind != Kind::SimplexKL) return divergence1(y[0], yhat[0]);
  check_pair(y, yhat);
  return potential(y) - potential(yhat) -
         grad_potential(yhat).dot(y - yhat);
}

double BregmanLoss::grad_second1(double y, double yhat) const {
  switch (kind) {
    case Kind::Square:
      return 2.0 * (yhat - y);
    case Kind::BinaryEntropy:
      return (yhat - y) / (yhat * (1.0 - yhat));
    case Kind::SimplexKL:
      throw UnsupportedError("grad_second1: KL is vector-valued");
  }
  return 0.0;
}

Vec BregmanLoss::grad_second(const Vec& y, const Vec& yhat) const {
  Vec g(q);
  switch (kind) {
    case Kind::Square:
      g = 2.0 * (yhat - y);
      break;
    case Kind::BinaryEntropy:
      g[0] = grad_second1(y[0], yhat[0]);
      break;
    case Kind::SimplexKL:
      for (int j = 0; j < q; ++j) g[j] = (yhat[j] - y[j]) / yhat[j];
      break;
  }
  return g;
}

double BregmanLoss::hess1(double y) const {
  switch (kind) {
    case Kind::Square:
      return 2.0;
    case Kind::BinaryEntropy:
      return 1.0 / (y * (1.0 - y));
    case Kind::SimplexKL:
      throw UnsupportedError("hess1: KL is vector-valued");
  }
  return 0.0;
}

bool BregmanLoss::in_domain1(double y) const {
  if (simplex) return false;
  return y >= lo && y <= hi && std::isfinite(y);
}

bool BregmanLoss::in_domain(const Vec& y) const {
  if (y.size() != q) return false;
  if (simplex) {
    double s = 0.0;
    for (int j = 0; j < q; ++j) {
      if (!(y[j] >= 0.0)) return false;
      s += y[j];
    }
    return std::abs(s - 1.0) <= 1e-9;
  }
  for (int j = 0; j < q; ++j)
    if (!in_domain1(y[j])) return false;
  return true;
}

std::string BregmanLoss::name() const {
  switch (kind) {
    case Kind::Square:
      return "square";
    case Kind::BinaryEntropy:
      return "binary_entropy";
    case Kind::SimplexKL:
      return "simplex_kl";
  }
  return "?";
}

BregmanLoss make_square_loss(int q, double lo, double hi) {
  if (q < 1) throw ConfigError("make_square_loss: q >= 1 required");
  if (!(hi > lo)) throw ConfigError("make_square_loss: empty box");
  BregmanLoss l;
  l.kind = BregmanLoss::Kind::Square;
  l.q = q;
  l.lo = lo;
  l.hi = hi;
  const double diam = std::sqrt(static_cast<double>(q)) * (hi - lo);
  l.mu = 2.0;
  l.hess_bound = 2.0;
  l.lips = 2.0 * diam;
  l.bound = diam * diam;
  return l;
}

BregmanLoss make_binary_entropy_loss(double eps) {
  if (!(eps > 0.0 && eps < 0.5))
    throw ConfigError("make_binary_entropy_loss: eps in (0, 1/2) required");
  BregmanLoss l;
  l.kind = BregmanLoss::Kind::BinaryEntropy;
  l.q = 1;
  l.lo = 0.0;
  l.hi = 1.0;
  l.clip_eps = eps;
  l.mu = 4.0;
  // phi'' <= 1/(eps(1-eps)) on [eps, 1-eps]; Lipschitz constant of a Bregman
  // divergence with nu-smooth potential and M-Lipschitz gradient on a
  // diameter-1 domain is (nu/2 + M) * diam.
  const double m = 1.0 / (eps * (1.0 - eps));
  l.hess_bound = m;
  l.lips = 1.5 * m;
  l.bound = -std::log(eps);
  return l;
}

BregmanLoss make_simplex_kl_loss(int q, double eps) {
  if (q < 2) throw ConfigError("make_simplex_kl_loss: q >= 2 required");
  if (!(eps > 0.0 && eps < 1.0 / q))
    throw ConfigError("make_simplex_kl_loss: eps in (0, 1/q) required");
  BregmanLoss l;
  l.kind = BregmanLoss::Kind::SimplexKL;
  l.q = q;
  l.simplex = true;
  l.clip_eps = eps;
  l.mu = 1.0;  // Pinsker on the simplex
  const double m = 1.0 / eps;
  l.hess_bound = m;
  l.lips = 1.5 * m * std::sqrt(2.0);
  l.bound = std::log(1.0 / eps);
  return l;
}

int zero_one(double y, double yhat) {
  if ((y != 0.0 && y != 1.0) || (yhat != 0.0 && yhat != 1.0))
    throw DomainError("zero_one: arguments must be exactly 0 or 1");
  return y != yhat ? 1 : 0;
}

}  // namespace moltk
