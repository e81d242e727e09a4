#pragma once

#include "moltk/solve.hpp"

#include <functional>
#include <optional>

namespace moltk {

using ModelFn = std::function<double(const Vec&)>;

/// Population quantities on [0,1] use a fixed trapezoid grid, deliberately
/// finer than any hypothesis grid so metric error stays an order below class
/// discretization error.
inline constexpr int kOracleGridSize = 4096;
const Vec& oracle_grid();
const Vec& oracle_trapezoid();  // trapezoid weights for the grid, sum 1

struct LabelAtom {
  double y;
  double prob;
};

/// One task's population: covariate law (a density on the oracle grid or a
/// finite support), the conditional label mean theta(x) (which is the Bayes
/// model for Bregman losses and induces the Bayes classifier for the zero-one
/// loss), the task loss, and optionally a full conditional label distribution
/// for risk computations by enumeration.
struct TaskPopulation {
  enum class Support { Grid1D, Finite };

  Support support = Support::Grid1D;
  Vec grid_pdf;  // density at the oracle nodes (Grid1D)
  Mat points;    // M x d support points (Finite)
  Vec probs;     // point probabilities (Finite)
  std::vector<std::vector<LabelAtom>> label_dist;  // per point (optional)
  ModelFn conditional_mean;
  std::optional<BregmanLoss> loss;  // nullopt => zero-one loss
  double bayes_risk = std::numeric_limits<double>::quiet_NaN();

  bool zero_one() const { return !loss.has_value(); }
  void validate() const;
};

struct PopulationSpec {
  std::vector<TaskPopulation> tasks;

  int K() const { return static_cast<int>(tasks.size()); }
  void validate() const;
};

/// A function on [0,1] stored at the oracle nodes; evaluation interpolates.
struct GridFunction {
  Vec values;
  bool degenerate = false;

  double operator()(double x) const;
  ModelFn fn() const;
};

struct FrontPoint {
  WeightVector weights;
  Vec excess;
  double value;
};

/// Excess-risk vectors over a weight grid; negativity beyond tolerance flags
/// a metric bug.
struct ParetoFrontEstimate {
  std::vector<FrontPoint> points;
  void validate() const;
};

/// E_k(f) for every task. Bregman tasks use the discrepancy identity
/// E_k(f) = d_k(f; f*_k) directly; zero-one tasks use the conditional-mean
/// form E[|2 theta - 1| |f - 1{theta >= 1/2}|].
Vec population_excess_risks(const PopulationSpec& spec, const ModelFn& f);

/// Population risk by full enumeration over the conditional label
/// distribution (finite support with label_dist only). This is the
/// independent route used to cross-check the Bregman identity.
double population_risk(const PopulationSpec& spec, int k, const ModelFn& f);
/// Excess risk via the risk route: R_k(f) - R_k(bayes classifier/mean).
double population_excess_via_risk(const PopulationSpec& spec, int k,
                                  const ModelFn& f);

double population_tradeoff(const PopulationSpec& spec, const Scalarization& s,
                           const ModelFn& f);

/// The pointwise minimizer of a linear trade-off over all functions when all
/// tasks share one Bregman potential:
///   g_s(x) = sum_k lambda_k p_k(x) f*_k(x) / sum_k lambda_k p_k(x).
/// Where the denominator vanishes the value is unconstrained; the unweighted
/// mean is returned there and the result is flagged degenerate.
GridFunction pointwise_tradeoff_optimum(const PopulationSpec& spec,
                                        const WeightVector& lambda);

/// Exact trade-off minimizer over a finite class by enumeration; ties break
/// to the lexicographically smallest parameter vector.
std::pair<Model, double> finite_tradeoff_minimizer(const PopulationSpec& spec,
                                                   const FiniteClass& G,
                                                   const Scalarization& s);

/// s(E_1(f),...,E_K(f)) minus a reference infimum. May be slightly negative
/// within the reference's own tolerance.
double excess_s_tradeoff(const PopulationSpec& spec, const Scalarization& s,
                         const ModelFn& f, double reference_value);

/// High-budget numerical reference: minimizes the population trade-off over a
/// class via the quadrature objective with iter_mult x iterations and the
/// given number of restarts.
FitReport population_fit(const PopulationSpec& spec, const Scalarization& s,
                         const ClassPtr& cls, const Tolerances& tol,
                         std::uint64_t seed, int iter_mult = 10,
                         int restarts = 10);

/// First-order optimality residual of g for a linear trade-off:
///   min over directions g' of
///   <sum_k lambda_k p_k phi_k''(g)(g - f*_k), g' - g> (quadrature).
/// Nonnegative (within tolerance) certifies optimality among the tested
/// directions.
double variational_residual(const PopulationSpec& spec,
                            const WeightVector& lambda, const ModelFn& g,
                            const std::vector<ModelFn>& directions);

// --- spec construction helpers -------------------------------------------

/// Grid task from density and conditional-mean callables on [0,1].
TaskPopulation make_grid_task(const std::function<double(double)>& pdf,
                              const std::function<double(double)>& mean,
                              BregmanLoss loss,
                              double bayes_risk =
                                  std::numeric_limits<double>::quiet_NaN());

/// Finite task; conditional means are derived from the label distribution.
TaskPopulation make_finite_task(Mat points, Vec probs,
                                std::vector<std::vector<LabelAtom>> label_dist,
                                std::optional<BregmanLoss> loss);

}  // namespace moltk
