#pragma once

#include "moltk/kernels.hpp"

#include <functional>

namespace moltk {

/// Draws one covariate vector per call from the task's marginal.
using CovariateSampler = std::function<Vec(Rng&)>;

struct ComplexityEstimate {
  double value = 0.0;
  int mc_draws = 0;
  double std_error = 0.0;
  std::string class_id;
  int n = 0;
};

struct CriticalRadius {
  double r_star = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  /// (r, estimate, std error) along the bisection path.
  std::vector<std::tuple<double, double, double>> estimates;
};

/// Norm carrier for localization: ||f_w - f_c||^2 = (w-c)' Sigma (w-c) for
/// linear classes, sum_m weights_m (g_m - c_m)^2 for finite tabular classes.
struct TaskNorm {
  Mat sigma;
  Vec node_weights;
};

struct McConfig {
  int mc_draws = 200;
  std::uint64_t seed = 0;
  kernels::Exec exec = kernels::Exec::Parallel;
  double bracket_rel_width = 1e-3;
};

/// Monte-Carlo estimate of the Rademacher complexity
///   E sup_h |1/n sum_i sigma_i h(X_i)|.
/// Inner suprema: identity-link linear classes exactly via the dual ball
/// norm; grid classes by projected-gradient inner maximization; finite
/// classes by enumeration.
ComplexityEstimate rademacher_estimate(const ClassPtr& cls, int n,
                                       const CovariateSampler& sampler,
                                       int mc_draws, std::uint64_t seed,
                                       kernels::Exec exec =
                                           kernels::Exec::Parallel);

/// Localized variant over (class - center) intersected with the task-norm
/// ball of the given radius. Identity-link l2 linear classes solve the
/// two-ellipsoid inner maximization by dual bisection; finite classes filter
/// by enumeration.
ComplexityEstimate localized_rademacher(const ClassPtr& cls,
                                        const Model& center, double radius,
                                        const TaskNorm& norm, int n,
                                        const CovariateSampler& sampler,
                                        int mc_draws, std::uint64_t seed,
                                        kernels::Exec exec =
                                            kernels::Exec::Parallel);

/// Bisection for the fixed point r^2 = R(class(r)), run with common random
/// numbers across radii so the per-draw suprema are monotone in r. The
/// non-increasing r -> R(r)/r property certifies the bracket; a violation
/// beyond 3 standard errors raises an estimator-inconsistency error.
CriticalRadius critical_radius(const ClassPtr& cls, const Model& center,
                               const TaskNorm& norm, int n,
                               const CovariateSampler& sampler,
                               const McConfig& cfg);

/// Worst-case radius over a finite set of centers (e.g. trade-off minimizers
/// under teachers drawn from H); a lower bound of the supremum form.
CriticalRadius sup_critical_radius(const ClassPtr& cls,
                                   const std::vector<Model>& centers,
                                   const TaskNorm& norm, int n,
                                   const CovariateSampler& sampler,
                                   const McConfig& cfg);

/// Second moment of the class's feature map under the sampler (linear
/// classes), or uniform node weights (finite classes); probe-sampled.
TaskNorm estimate_task_norm(const ClassPtr& cls,
                            const CovariateSampler& sampler, int probes,
                            std::uint64_t seed);

}  // namespace moltk
