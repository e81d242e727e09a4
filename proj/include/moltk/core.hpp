#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace moltk {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error taxonomy shared by all modules. Contracts below say which one an
// operation throws; everything derives from std::runtime_error so callers can
// catch broadly.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnsupportedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BudgetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ProjectionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EstimatorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RateFitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Optimization knobs threaded explicitly through every solver call.
struct Tolerances {
  double opt_rel_tol = 1e-8;
  int max_iters = 50'000;
  double constraint_tol = 1e-9;

  void validate() const {
    if (opt_rel_tol <= 0 || max_iters <= 0 || constraint_tol <= 0)
      throw ConfigError("Tolerances must be positive");
  }
};

/// Counter-based deterministic random stream (splitmix64 output function).
/// The i-th draw is a pure function of (key, i), so streams can be split per
/// worker with derive() and never share state. Same seed => bitwise-identical
/// sequence on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix(seed ^ 0x5851f42d4c957f2dULL)) {}

  std::uint64_t next_u64() {
    ++ctr_;
    return mix(key_ + ctr_ * 0x9e3779b97f4a7c15ULL);
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    // modulo bias is < 2^-40 for every n used here (n << 2^24)
    return next_u64() % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  int rademacher() { return (next_u64() & 1u) ? 1 : -1; }

  /// Standard normal via Box-Muller; consumes exactly two uniforms per call.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    return r * std::cos(6.283185307179586476925286766559 * u2);
  }

  /// Independent child stream identified by `tag`; deterministic in (key, tag).
  Rng derive(std::uint64_t tag) const {
    Rng child(0);
    child.key_ = mix(key_ ^ mix(tag + 0x632be59bd9b4e019ULL));
    child.ctr_ = 0;
    return child;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_ = 0;
  std::uint64_t ctr_ = 0;
};

/// Simplex weight vector lambda. Construction rejects negative entries and
/// off-simplex sums; renormalization happens only when asked for explicitly.
struct WeightVector {
  Vec lambda;

  static WeightVector make(Vec lam, bool renormalize = false);

  int K() const { return static_cast<int>(lambda.size()); }
};

/// A concrete parameter vector; meaning and feasibility are defined by the
/// owning hypothesis class (identified by class_ref).
struct Model {
  std::string class_ref;
  Vec params;
};

/// One task's data: labeled pairs, unlabeled covariates. Rows are samples.
struct TaskData {
  Mat X;   // n x d labeled covariates
  Mat Y;   // n x q labels
  Mat XU;  // N x d unlabeled covariates
  int task_id = 0;

  int n() const { return static_cast<int>(X.rows()); }
  int N() const { return static_cast<int>(XU.rows()); }
  int d() const {
    return static_cast<int>(X.rows() > 0 ? X.cols() : XU.cols());
  }
  int q() const { return static_cast<int>(Y.cols()); }

  void validate() const;
};

struct MultiTaskData {
  std::vector<TaskData> tasks;

  int K() const { return static_cast<int>(tasks.size()); }
  void validate() const;
};

/// (1/n) sum_i x_i x_i^T, symmetrized. Rows of X are samples.
Mat empirical_second_moment(const Mat& X);

}  // namespace moltk
