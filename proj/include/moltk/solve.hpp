#pragma once

#include "moltk/kernels.hpp"
#include "moltk/scalarize.hpp"

namespace moltk {

/// One weighted data term of an empirical objective: mean (or quadrature)
/// loss of the fitted model against fixed targets. Targets are labels or
/// pseudo-labels that were computed once and cached; `w` is an optional
/// per-sample weight vector (quadrature or confidence weights) summing to ~1.
struct ObjectiveTerm {
  BregmanLoss loss;
  Mat X;
  Mat P;  // class-prepared evaluation cache of X
  Mat T;
  Vec w;
  double weight = 1.0;
};

/// Builds a term and its prepared cache in one go.
ObjectiveTerm make_term(BregmanLoss loss, const HypothesisClass& cls, Mat X,
                        Mat T, Vec w = Vec(), double weight = 1.0);

/// Empirical objective: scalarized combination of the term values over one
/// hypothesis class. Linear combines by weighted sum, Tchebycheff by weighted
/// max (minimized by subgradient steps).
struct Objective {
  std::vector<ObjectiveTerm> terms;
  ClassPtr cls;
  ScalKind combine = ScalKind::Linear;

  void validate() const;
  Vec term_values(const Vec& params, kernels::Exec exec) const;
  double value(const Vec& params, kernels::Exec exec) const;
  double value_grad(const Vec& params, Vec& grad, kernels::Exec exec) const;
};

struct FitReport {
  Model model;
  double objective = 0.0;
  int iterations = 0;
  double grad_map_norm = 0.0;
  bool converged = false;
};

double empirical_risk(const BregmanLoss& loss, const HypothesisClass& cls,
                      const Model& model, const TaskData& data,
                      kernels::Exec exec = kernels::Exec::Parallel);

/// Mean loss of the model's predictions against the teacher's pseudo-labels
/// on the unlabeled covariates.
double empirical_discrepancy(const BregmanLoss& loss,
                             const HypothesisClass& cls, const Model& model,
                             const HypothesisClass& teacher_cls,
                             const Model& teacher, const Mat& XU,
                             kernels::Exec exec = kernels::Exec::Parallel);

double scalarized_discrepancy(
    const Scalarization& s, const std::vector<BregmanLoss>& losses,
    const HypothesisClass& cls, const Model& model,
    const std::vector<std::pair<ClassPtr, Model>>& teachers,
    const MultiTaskData& data, kernels::Exec exec = kernels::Exec::Parallel);

/// Projected gradient descent with Armijo backtracking (halving, initial step
/// 1) for smooth objectives; projected subgradient with diminishing steps for
/// Tchebycheff objectives (argmax term's gradient, ties to the lowest index).
/// Deterministic given (init, seed). Terminates on the gradient-map criterion
/// ||theta - project(theta - grad)|| <= opt_rel_tol * (1 + |objective|).
FitReport minimize(const Objective& obj, const Model& init,
                   const Tolerances& tol, std::uint64_t seed,
                   kernels::Exec exec = kernels::Exec::Parallel,
                   std::vector<double>* trace = nullptr);

/// Best of `restarts` runs: the given init plus restarts-1 random feasible
/// inits drawn from the class with recorded sub-seeds of `seed`.
FitReport fit_with_restarts(const Objective& obj, const Model& init,
                            const Tolerances& tol, std::uint64_t seed,
                            int restarts,
                            kernels::Exec exec = kernels::Exec::Parallel);

}  // namespace moltk
