#pragma once

#include "moltk/core.hpp"

#include <json.hpp>

#include <functional>
#include <memory>

namespace moltk {

/// A scalar-output hypothesis class with a convex constraint set. Every class
/// supplies evaluation, the gradient of the output in the parameters,
/// Euclidean projection onto its constraint set, and a membership predicate
/// derived from the projection.
class HypothesisClass {
 public:
  virtual ~HypothesisClass() = default;

  virtual std::string id() const = 0;
  virtual int param_dim() const = 0;
  virtual int input_dim() const = 0;

  virtual double evaluate(const Vec& params,
                          const Eigen::Ref<const Vec>& x) const = 0;
  /// d evaluate / d params at x.
  virtual void param_gradient(const Vec& params, const Eigen::Ref<const Vec>& x,
                              Vec& grad) const = 0;

  /// Per-dataset evaluation cache for the kernels (rows of X are samples).
  /// prepare() is called once per dataset; eval_prepared/grad_axpy_prepared
  /// then run without re-deriving features. grad_axpy accumulates
  /// a * d evaluate / d params into acc, touching only nonzero entries.
  virtual Mat prepare(const Mat& X) const;
  virtual double eval_prepared(const Vec& params, const Mat& P, int row) const;
  virtual void grad_axpy_prepared(const Vec& params, const Mat& P, int row,
                                  double a, Vec& acc) const;

  virtual Vec project(Vec raw, const Tolerances& tol) const = 0;
  /// A feasible parameter vector drawn uniformly-ish from the constraint set;
  /// used for solver restarts and complexity teacher draws.
  virtual Vec random_params(Rng& rng) const;

  bool member(const Vec& params, const Tolerances& tol) const;

  virtual nlohmann::json descriptor() const = 0;
};

using ClassPtr = std::shared_ptr<const HypothesisClass>;

enum class Ball { L1, L2 };
enum class Link { Identity, Sigmoid };

/// All monomials of x of total degree <= degree in graded lexicographic
/// order; p = C(d + degree, degree). Degree order is ascending, ties broken
/// lexicographically with x1 > x2 > ... (so d=2, degree=2 gives
/// 1, x1, x2, x1^2, x1 x2, x2^2).
Vec polynomial_features(const Eigen::Ref<const Vec>& x, int degree);
int polynomial_feature_count(int d, int degree);

/// Constrained (generalized) linear models: w in an l1/l2 ball of the feature
/// space, with an identity or sigmoid link. degree == 0 means the identity
/// feature map Phi(x) = x; degree >= 1 expands to all polynomial features up
/// to that degree (including the constant).
class LinearClass final : public HypothesisClass {
 public:
  LinearClass(int d, int degree, Ball ball, double radius, Link link,
              double clip = 1e-6);

  std::string id() const override;
  int param_dim() const override { return p_; }
  int input_dim() const override { return d_; }
  double evaluate(const Vec& params,
                  const Eigen::Ref<const Vec>& x) const override;
  void param_gradient(const Vec& params, const Eigen::Ref<const Vec>& x,
                      Vec& grad) const override;
  Mat prepare(const Mat& X) const override;
  double eval_prepared(const Vec& params, const Mat& P, int row) const override;
  void grad_axpy_prepared(const Vec& params, const Mat& P, int row, double a,
                          Vec& acc) const override;
  Vec project(Vec raw, const Tolerances& tol) const override;
  Vec random_params(Rng& rng) const override;
  nlohmann::json descriptor() const override;

  Vec features(const Eigen::Ref<const Vec>& x) const;
  int degree() const { return degree_; }
  Ball ball() const { return ball_; }
  double radius() const { return radius_; }
  Link link() const { return link_; }
  double clip() const { return clip_; }

 private:
  int d_, degree_, p_;
  Ball ball_;
  double radius_;
  Link link_;
  double clip_;
};

/// Piecewise-linear functions on a uniform grid over [0, 1] with values in
/// [0, 1] and adjacent slopes bounded by the Lipschitz constant. The
/// projection onto the box intersected with the pairwise slope sets is
/// computed exactly by a chain dynamic program over convex value functions;
/// a cyclic-Dykstra reference implementation is kept for cross-checking.
class GridLipschitzClass final : public HypothesisClass {
 public:
  GridLipschitzClass(int grid_size, double lipschitz, double lo = 0.0,
                     double hi = 1.0);

  std::string id() const override;
  int param_dim() const override { return m_; }
  int input_dim() const override { return 1; }
  double evaluate(const Vec& params,
                  const Eigen::Ref<const Vec>& x) const override;
  void param_gradient(const Vec& params, const Eigen::Ref<const Vec>& x,
                      Vec& grad) const override;
  Mat prepare(const Mat& X) const override;
  double eval_prepared(const Vec& params, const Mat& P, int row) const override;
  void grad_axpy_prepared(const Vec& params, const Mat& P, int row, double a,
                          Vec& acc) const override;
  Vec project(Vec raw, const Tolerances& tol) const override;
  Vec random_params(Rng& rng) const override;
  nlohmann::json descriptor() const override;

  int grid_size() const { return m_; }
  double lipschitz() const { return lc_; }
  double slope_cap() const { return lc_ / static_cast<double>(m_ - 1); }
  /// Largest violation of the box and slope constraints.
  double constraint_violation(const Vec& params) const;
  /// Reference projection: cyclic Dykstra over the box and slope sets.
  Vec project_dykstra(Vec raw, const Tolerances& tol) const;

 private:
  int m_;
  double lc_, lo_, hi_;
};

/// Finite tabular class: one output per domain point, outputs from a finite
/// set. Enumeration-friendly; param_gradient is unsupported (zero-one fitting
/// routes through enumeration instead of the gradient solver).
class FiniteClass final : public HypothesisClass {
 public:
  FiniteClass(Mat points, std::vector<double> outputs);

  std::string id() const override;
  int param_dim() const override { return static_cast<int>(points_.rows()); }
  int input_dim() const override { return static_cast<int>(points_.cols()); }
  double evaluate(const Vec& params,
                  const Eigen::Ref<const Vec>& x) const override;
  void param_gradient(const Vec&, const Eigen::Ref<const Vec>&,
                      Vec&) const override;
  Mat prepare(const Mat& X) const override;
  double eval_prepared(const Vec& params, const Mat& P, int row) const override;
  Vec project(Vec raw, const Tolerances& tol) const override;
  Vec random_params(Rng& rng) const override;
  nlohmann::json descriptor() const override;

  const Mat& points() const { return points_; }
  const std::vector<double>& outputs() const { return outputs_; }
  int point_index(const Eigen::Ref<const Vec>& x) const;
  std::size_t candidate_count() const;
  /// The c-th assignment in lexicographic parameter order (point 0 most
  /// significant, outputs ascending).
  Vec candidate(std::size_t c) const;

 private:
  Mat points_;
  std::vector<double> outputs_;  // sorted ascending
};

/// Lossless parameter embedding for nested classes (H subset of G): linear
/// into higher-degree linear with the same link/ball, grid-Lipschitz into a
/// larger Lipschitz constant, finite into finite with a superset of outputs.
Vec embed_params(const HypothesisClass& from, const HypothesisClass& to,
                 const Vec& params);

std::function<double(const Vec&)> model_fn(ClassPtr cls, Model model);

nlohmann::json model_to_json(const HypothesisClass& cls, const Model& m);
Model model_from_json(const nlohmann::json& j);
ClassPtr class_from_descriptor(const nlohmann::json& j);

}  // namespace moltk
