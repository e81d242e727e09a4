#pragma once

#include "moltk/solve.hpp"

namespace moltk {

struct TradeoffEntry {
  WeightVector weights;
  Model model;
  FitReport report;
  bool degenerate = false;
};

/// Output of the multi-objective learners: one fitted model per grid weight,
/// plus the stage-1 teachers for the pseudo-labeling path.
struct TradeoffSolution {
  ScalKind kind = ScalKind::Linear;
  std::vector<TradeoffEntry> entries;
  std::vector<Model> teachers;  // pseudo-labeling only
  std::uint64_t seed = 0;
  nlohmann::json config;
};

struct MolOptions {
  /// Restarts for possibly non-convex fits (sigmoid links use 5).
  int restarts = 1;
  /// Stage two reuses the labeled covariates as extra unlabeled data.
  bool reuse_labeled_covariates = false;
  kernels::Exec exec = kernels::Exec::Parallel;
};

/// Pseudo-labeling: per-task empirical risk minimization over H_k on labeled
/// data, then per-scalarization minimization of the empirical scalarized
/// discrepancy against the teachers' pseudo-labels on unlabeled data.
/// Pseudo-labels are computed once per task and shared across the grid; stage
/// two is warm-started at the weight-averaged embedded teachers.
TradeoffSolution pl_mol(const MultiTaskData& data,
                        const std::vector<ClassPtr>& H, const ClassPtr& G,
                        const std::vector<BregmanLoss>& losses, ScalKind kind,
                        const WeightGrid& S, const Tolerances& tol,
                        std::uint64_t seed, const MolOptions& opt = {});

/// Supervised baseline: per scalarization, minimizes the scalarized *raw*
/// empirical risks over G on labeled data only.
TradeoffSolution erm_mol(const MultiTaskData& data, const ClassPtr& G,
                         const std::vector<BregmanLoss>& losses, ScalKind kind,
                         const WeightGrid& S, const Tolerances& tol,
                         std::uint64_t seed, const MolOptions& opt = {});

/// Zero-one-loss variants route to exhaustive enumeration over a finite
/// class. Ties break to the lexicographically smallest parameter vector.
TradeoffSolution erm_mol_zero_one(const MultiTaskData& data,
                                  const std::shared_ptr<const FiniteClass>& G,
                                  ScalKind kind, const WeightGrid& S);

/// Pseudo-labeling for the zero-one loss: stage one fits regression teachers
/// theta_k by squared-loss ERM over Theta_k, stage two minimizes the
/// empirical zero-one discrepancy sum_i |2 theta - 1| 1{g != 1{theta >= 1/2}}
/// over the finite class G by enumeration. An all-ties objective (e.g. an
/// uninformative teacher at 1/2) returns the lexicographically first model
/// with the degenerate flag set.
TradeoffSolution pl_mol_zero_one(const MultiTaskData& data,
                                 const std::vector<ClassPtr>& Theta,
                                 const std::shared_ptr<const FiniteClass>& G,
                                 ScalKind kind, const WeightGrid& S,
                                 const Tolerances& tol, std::uint64_t seed,
                                 const MolOptions& opt = {});

struct CoinResult {
  int yhat_s = 0;
  double excess = 0.0;
};

/// The single-point two-coin construction: n Bernoulli labels per task,
/// zero-one PL-MOL on the domain {x0} (unlabeled data has no effect there),
/// and the population excess trade-off of the returned label in closed form.
CoinResult coin_example_pl(int n, const WeightVector& lambda, double p1,
                           double p2, std::uint64_t seed);

/// The consistent baseline on the same draws: scalarized empirical zero-one
/// risk minimization over {0, 1}.
CoinResult coin_example_erm(int n, const WeightVector& lambda, double p1,
                            double p2, std::uint64_t seed);

nlohmann::json solution_to_json(const TradeoffSolution& sol,
                                const HypothesisClass& cls);

}  // namespace moltk
