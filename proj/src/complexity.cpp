#include "moltk/complexity.hpp"

#include "moltk/omp_guard.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace moltk {

namespace {

struct Draw {
  Mat X;       // n x d
  Vec signs;   // n
};

Draw make_draw(const HypothesisClass& cls, int n,
               const CovariateSampler& sampler, Rng rng) {
  Draw d;
  d.X = Mat(n, cls.input_dim());
  d.signs = Vec(n);
  for (int i = 0; i < n; ++i) {
    const Vec x = sampler(rng);
    if (x.size() != cls.input_dim())
      throw DimensionError("rademacher: sampler dimension");
    d.X.row(i) = x.transpose();
    d.signs[i] = rng.rademacher();
  }
  return d;
}

// sup_{h in class} | (1/n) sum_i sigma_i h(x_i) |, one draw
double inner_sup(const HypothesisClass& cls, const Draw& draw) {
  const int n = static_cast<int>(draw.X.rows());
  if (auto* lin = dynamic_cast<const LinearClass*>(&cls)) {
    if (lin->link() != Link::Identity)
      throw UnsupportedError("rademacher: linear class needs identity link");
    Vec v = Vec::Zero(lin->param_dim());
    for (int i = 0; i < n; ++i)
      v += draw.signs[i] * lin->features(draw.X.row(i));
    v /= static_cast<double>(n);
    return lin->ball() == Ball::L2 ? lin->radius() * v.norm()
                                   : lin->radius() * v.lpNorm<Eigen::Infinity>();
  }
  if (auto* grid = dynamic_cast<const GridLipschitzClass*>(&cls)) {
    // linear functional c' params; projected-gradient ascent for +/- c
    const Mat P = grid->prepare(draw.X);
    Vec c = Vec::Zero(grid->param_dim());
    for (int i = 0; i < n; ++i) {
      const int j = static_cast<int>(P(i, 0));
      c[j] += draw.signs[i] * (1.0 - P(i, 1));
      c[j + 1] += draw.signs[i] * P(i, 1);
    }
    c /= static_cast<double>(n);
    const Tolerances tol{};
    double best = 0.0;
    for (int sign = -1; sign <= 1; sign += 2) {
      const Vec dir = sign * c;
      Vec p = grid->project(
          Vec::Constant(grid->param_dim(), 0.5) + dir * 1e3, tol);
      double val = dir.dot(p);
      for (int it = 0; it < 100; ++it) {
        Vec q = grid->project(p + 2.0 * dir, tol);
        const double vq = dir.dot(q);
        if (vq <= val + 1e-14) break;
        p = std::move(q);
        val = vq;
      }
      best = std::max(best, val);
    }
    return best;
  }
  if (auto* fin = dynamic_cast<const FiniteClass*>(&cls)) {
    const Mat P = fin->prepare(draw.X);
    Vec c = Vec::Zero(fin->param_dim());
    for (int i = 0; i < n; ++i)
      c[static_cast<int>(P(i, 0))] += draw.signs[i];
    c /= static_cast<double>(n);
    const std::size_t total = fin->candidate_count();
    double best = 0.0;
    for (std::size_t cand = 0; cand < total; ++cand)
      best = std::max(best, std::abs(c.dot(fin->candidate(cand))));
    return best;
  }
  throw UnsupportedError("rademacher: class kind not supported");
}

// maximize <v, delta> s.t. delta' Sigma delta <= r^2, ||w_c + delta||_2 <= R,
// via dual bisection on the localization multiplier (inner ball multiplier
// solved by bisection as well, both in the eigenbasis of Sigma).
double two_ellipsoid_max(const Vec& v, const Mat& sigma, const Vec& w_c,
                         double R, double r) {
  const int d = static_cast<int>(v.size());
  Eigen::SelfAdjointEigenSolver<Mat> es(sigma);
  const Vec lam = es.eigenvalues().cwiseMax(1e-12);
  const Mat& Q = es.eigenvectors();
  const Vec vt = Q.transpose() * v;
  const Vec wt = Q.transpose() * w_c;

  auto delta_of = [&](double alpha, double beta) {
    Vec dt(d);
    for (int i = 0; i < d; ++i)
      dt[i] = (vt[i] - 2.0 * beta * wt[i]) /
              std::max(2.0 * alpha * lam[i] + 2.0 * beta, 1e-300);
    return dt;  // still in the eigenbasis
  };
  auto ball_norm = [&](const Vec& dt) { return (dt + wt).norm(); };
  auto ell_norm2 = [&](const Vec& dt) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += lam[i] * dt[i] * dt[i];
    return s;
  };

  // inner solve: argmax <v,delta> - alpha (delta' Sigma delta) over the ball
  auto inner = [&](double alpha) {
    Vec dt = delta_of(alpha, 0.0);
    if (alpha > 0.0 && ball_norm(dt) <= R) return dt;
    if (alpha == 0.0) {
      // linear objective over the ball: closed form
      Vec dir = vt.normalized();
      if (vt.norm() == 0.0) dir = Vec::Zero(d);
      return Vec(R * dir - wt);
    }
    double blo = 0.0, bhi = 1.0;
    while (ball_norm(delta_of(alpha, bhi)) > R && bhi < 1e12) bhi *= 2.0;
    for (int it = 0; it < 200; ++it) {
      const double b = 0.5 * (blo + bhi);
      if (ball_norm(delta_of(alpha, b)) > R)
        blo = b;
      else
        bhi = b;
    }
    return delta_of(alpha, bhi);
  };

  // outer bisection on alpha for the localization constraint
  Vec dt = inner(0.0);
  if (ell_norm2(dt) <= r * r) return vt.dot(dt);
  double alo = 0.0, ahi = 1.0;
  while (ell_norm2(inner(ahi)) > r * r && ahi < 1e12) ahi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double a = 0.5 * (alo + ahi);
    if (ell_norm2(inner(a)) > r * r)
      alo = a;
    else
      ahi = a;
  }
  dt = inner(ahi);
  return vt.dot(dt);
}

double inner_sup_localized(const HypothesisClass& cls, const Model& center,
                           double radius, const TaskNorm& norm,
                           const Draw& draw) {
  if (radius <= 0.0) return 0.0;
  const int n = static_cast<int>(draw.X.rows());
  if (auto* lin = dynamic_cast<const LinearClass*>(&cls)) {
    if (lin->link() != Link::Identity || lin->ball() != Ball::L2)
      throw UnsupportedError(
          "localized rademacher: identity-link l2 linear classes only");
    if (norm.sigma.rows() != lin->param_dim())
      throw DimensionError("localized rademacher: norm matrix size");
    Vec v = Vec::Zero(lin->param_dim());
    for (int i = 0; i < n; ++i)
      v += draw.signs[i] * lin->features(draw.X.row(i));
    v /= static_cast<double>(n);
    const double plus = two_ellipsoid_max(v, norm.sigma, center.params,
                                          lin->radius(), radius);
    const double minus = two_ellipsoid_max(-v, norm.sigma, center.params,
                                           lin->radius(), radius);
    return std::max(plus, minus);
  }
  if (auto* fin = dynamic_cast<const FiniteClass*>(&cls)) {
    if (norm.node_weights.size() != fin->param_dim())
      throw DimensionError("localized rademacher: node weight size");
    const Mat P = fin->prepare(draw.X);
    Vec c = Vec::Zero(fin->param_dim());
    for (int i = 0; i < n; ++i)
      c[static_cast<int>(P(i, 0))] += draw.signs[i];
    c /= static_cast<double>(n);
    const std::size_t total = fin->candidate_count();
    double best = 0.0;
    for (std::size_t cand = 0; cand < total; ++cand) {
      const Vec g = fin->candidate(cand);
      const Vec diff = g - center.params;
      double dist2 = 0.0;
      for (int m = 0; m < diff.size(); ++m)
        dist2 += norm.node_weights[m] * diff[m] * diff[m];
      if (dist2 > radius * radius) continue;
      best = std::max(best, std::abs(c.dot(diff)));
    }
    return best;
  }
  throw UnsupportedError("localized rademacher: class kind not supported");
}

ComplexityEstimate summarize(const ClassPtr& cls, int n, const Vec& values) {
  ComplexityEstimate est;
  est.class_id = cls->id();
  est.n = n;
  est.mc_draws = static_cast<int>(values.size());
  est.value = values.mean();
  const double var =
      (values.array() - est.value).square().sum() /
      std::max(1, est.mc_draws - 1);
  est.std_error = std::sqrt(var / est.mc_draws);
  return est;
}

}  // namespace

ComplexityEstimate rademacher_estimate(const ClassPtr& cls, int n,
                                       const CovariateSampler& sampler,
                                       int mc_draws, std::uint64_t seed,
                                       kernels::Exec exec) {
  if (n < 1 || mc_draws < 2)
    throw ConfigError("rademacher_estimate: need n >= 1, mc_draws >= 2");
  Rng base(seed);
  Vec values(mc_draws);
  if (exec == kernels::Exec::Serial) {
    for (int t = 0; t < mc_draws; ++t)
      values[t] = inner_sup(*cls, make_draw(*cls, n, sampler, base.derive(t)));
  } else {
    detail::OmpGuard guard;
#pragma omp parallel for schedule(dynamic)
    for (int t = 0; t < mc_draws; ++t)
      guard.run([&] {
        values[t] = inner_sup(*cls, make_draw(*cls, n, sampler, base.derive(t)));
      });
    guard.rethrow();
  }
  return summarize(cls, n, values);
}

ComplexityEstimate localized_rademacher(const ClassPtr& cls,
                                        const Model& center, double radius,
                                        const TaskNorm& norm, int n,
                                        const CovariateSampler& sampler,
                                        int mc_draws, std::uint64_t seed,
                                        kernels::Exec exec) {
  if (n < 1 || mc_draws < 2)
    throw ConfigError("localized_rademacher: need n >= 1, mc_draws >= 2");
  Rng base(seed);
  Vec values(mc_draws);
  if (exec == kernels::Exec::Serial) {
    for (int t = 0; t < mc_draws; ++t)
      values[t] = inner_sup_localized(
          *cls, center, radius, norm,
          make_draw(*cls, n, sampler, base.derive(t)));
  } else {
    detail::OmpGuard guard;
#pragma omp parallel for schedule(dynamic)
    for (int t = 0; t < mc_draws; ++t)
      guard.run([&] {
        values[t] = inner_sup_localized(
            *cls, center, radius, norm,
            make_draw(*cls, n, sampler, base.derive(t)));
      });
    guard.rethrow();
  }
  return summarize(cls, n, values);
}

namespace {

double class_diameter(const HypothesisClass& cls, const Model& center,
                      const TaskNorm& norm) {
  if (auto* lin = dynamic_cast<const LinearClass*>(&cls)) {
    Eigen::SelfAdjointEigenSolver<Mat> es(norm.sigma);
    const double lmax = es.eigenvalues().maxCoeff();
    return (lin->radius() + center.params.norm()) * std::sqrt(std::max(
               lmax, 0.0)) * 2.0;
  }
  if (auto* fin = dynamic_cast<const FiniteClass*>(&cls)) {
    const double span = fin->outputs().back() - fin->outputs().front() +
                        center.params.cwiseAbs().maxCoeff() +
                        std::abs(fin->outputs().back());
    return 2.0 * span * std::sqrt(norm.node_weights.sum());
  }
  throw UnsupportedError("critical_radius: class kind not supported");
}

}  // namespace

CriticalRadius critical_radius(const ClassPtr& cls, const Model& center,
                               const TaskNorm& norm, int n,
                               const CovariateSampler& sampler,
                               const McConfig& cfg) {
  // common random numbers: each radius is evaluated on the same draws, so
  // the per-draw suprema (hence the averages) are monotone in r
  Rng base(cfg.seed);
  std::vector<Draw> draws(cfg.mc_draws);
  for (int t = 0; t < cfg.mc_draws; ++t)
    draws[t] = make_draw(*cls, n, sampler, base.derive(t));

  CriticalRadius out;
  auto estimate_at = [&](double r) {
    Vec values(cfg.mc_draws);
    if (cfg.exec == kernels::Exec::Serial) {
      for (int t = 0; t < cfg.mc_draws; ++t)
        values[t] = inner_sup_localized(*cls, center, r, norm, draws[t]);
    } else {
      detail::OmpGuard guard;
#pragma omp parallel for schedule(dynamic)
      for (int t = 0; t < cfg.mc_draws; ++t)
        guard.run([&] {
          values[t] = inner_sup_localized(*cls, center, r, norm, draws[t]);
        });
      guard.rethrow();
    }
    ComplexityEstimate est = summarize(cls, n, values);
    out.estimates.emplace_back(r, est.value, est.std_error);
    return est;
  };

  double hi = class_diameter(*cls, center, norm);
  if (hi <= 0.0) hi = 1.0;
  // expand if the fixed point is not bracketed yet
  for (int guard = 0; guard < 60 && estimate_at(hi).value > hi * hi; ++guard)
    hi *= 2.0;
  // geometric scan down for the last crossing of r^2 with the estimate;
  // discrete classes have a flat zero stretch near 0, so the plain infimum
  // would be vacuous there
  double lo = 0.0;
  double upper = hi;
  for (double r = 0.5 * hi; r > hi * 1e-9; r *= 0.5) {
    if (estimate_at(r).value > r * r) {
      lo = r;
      break;
    }
    upper = r;
  }
  if (lo == 0.0) {
    out.r_star = 0.0;
    out.bracket_lo = 0.0;
    out.bracket_hi = upper;
    return out;
  }
  hi = upper;
  while (hi - lo > cfg.bracket_rel_width * hi) {
    const double mid = 0.5 * (lo + hi);
    if (estimate_at(mid).value > mid * mid)
      lo = mid;
    else
      hi = mid;
  }
  out.r_star = 0.5 * (lo + hi);
  out.bracket_lo = lo;
  out.bracket_hi = hi;

  // Lemma-style consistency: r -> estimate(r)/r must be non-increasing
  // within 3 combined standard errors along the evaluated radii
  std::vector<std::tuple<double, double, double>> pts = out.estimates;
  std::sort(pts.begin(), pts.end());
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const auto& [r0, v0, s0] = pts[i - 1];
    const auto& [r1, v1, s1] = pts[i];
    if (r0 <= 0.0 || r1 <= 0.0) continue;
    if (v1 / r1 > v0 / r0 + 3.0 * (s0 / r0 + s1 / r1))
      throw EstimatorError(
          "critical_radius: localized estimate violates the non-increasing "
          "r -> R(r)/r property beyond 3 standard errors");
  }
  return out;
}

CriticalRadius sup_critical_radius(const ClassPtr& cls,
                                   const std::vector<Model>& centers,
                                   const TaskNorm& norm, int n,
                                   const CovariateSampler& sampler,
                                   const McConfig& cfg) {
  if (centers.empty()) throw ConfigError("sup_critical_radius: no centers");
  CriticalRadius best;
  best.r_star = -1.0;
  for (const auto& c : centers) {
    CriticalRadius r = critical_radius(cls, c, norm, n, sampler, cfg);
    if (r.r_star > best.r_star) best = std::move(r);
  }
  return best;
}

TaskNorm estimate_task_norm(const ClassPtr& cls,
                            const CovariateSampler& sampler, int probes,
                            std::uint64_t seed) {
  TaskNorm norm;
  Rng rng(seed);
  if (auto* lin = dynamic_cast<const LinearClass*>(cls.get())) {
    Mat F(probes, lin->param_dim());
    for (int i = 0; i < probes; ++i)
      F.row(i) = lin->features(sampler(rng)).transpose();
    norm.sigma = empirical_second_moment(F);
    return norm;
  }
  if (auto* fin = dynamic_cast<const FiniteClass*>(cls.get())) {
    Vec w = Vec::Zero(fin->param_dim());
    for (int i = 0; i < probes; ++i)
      w[fin->point_index(sampler(rng))] += 1.0 / probes;
    norm.node_weights = w;
    return norm;
  }
  throw UnsupportedError("estimate_task_norm: class kind not supported");
}

}  // namespace moltk
