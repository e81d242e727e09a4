#pragma once

#include "moltk/core.hpp"

namespace moltk {

/// A Bregman divergence loss built from a strictly convex potential phi:
///   loss(y, yhat) = phi(y) - phi(yhat) - <grad phi(yhat), y - yhat>.
/// Declared regularity constants (mu, lips, bound, hess_bound) are stored, not
/// inferred; they hold on the clipped effective range [clip_eps, 1-clip_eps]
/// (resp. the clipped simplex) and are validated by sampling in the tests.
/// The divergence itself is defined on the full label domain, with a boundary
/// error where the potential gradient blows up.
struct BregmanLoss {
  enum class Kind { Square, BinaryEntropy, SimplexKL };

  Kind kind = Kind::Square;
  int q = 1;
  double lo = 0.0;  // box domain [lo, hi]^q (Square, BinaryEntropy)
  double hi = 1.0;
  bool simplex = false;    // SimplexKL: domain is the probability simplex
  double clip_eps = 0.0;   // margin on which the declared constants hold

  double mu = 0.0;          // strong convexity of phi
  double lips = 0.0;        // Lipschitz constant of the loss in each argument
  double bound = 0.0;       // uniform bound on the loss
  double hess_bound = 0.0;  // bound on ||grad^2 phi||

  double potential(const Vec& y) const;
  Vec grad_potential(const Vec& y) const;
  double divergence(const Vec& y, const Vec& yhat) const;
  Vec grad_second(const Vec& y, const Vec& yhat) const;  // d/dyhat

  // scalar fast paths (q == 1)
  double potential1(double y) const;
  double divergence1(double y, double yhat) const;
  double grad_second1(double y, double yhat) const;
  /// phi'' evaluated at y (q == 1).
  double hess1(double y) const;

  bool in_domain(const Vec& y) const;
  bool in_domain1(double y) const;

  std::string name() const;

 private:
  void check_pair1(double y, double yhat) const;
  void check_pair(const Vec& y, const Vec& yhat) const;
};

/// Squared loss phi(y) = ||y||_2^2 on the box [lo, hi]^q.
BregmanLoss make_square_loss(int q, double lo = 0.0, double hi = 1.0);

/// Binary entropy potential phi(y) = y log y + (1-y) log(1-y) on [0, 1];
/// constants computed for the clipped range [eps, 1-eps]. The default clip
/// eps = sigma(-1) matches a unit-ball logistic model range.
BregmanLoss make_binary_entropy_loss(double eps = 0.2689414213699951);

/// KL potential phi(y) = sum_j y_j log y_j on the q-simplex, clipped at eps.
BregmanLoss make_simplex_kl_loss(int q, double eps = 1e-3);

/// Zero-one disagreement loss on {0, 1}; not a Bregman loss.
struct ZeroOneLoss {};

/// 1{y != yhat} with exact binary arguments.
int zero_one(double y, double yhat);

}  // namespace moltk
