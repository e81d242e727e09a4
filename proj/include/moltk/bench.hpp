#pragma once

#include "moltk/complexity.hpp"
#include "moltk/mol.hpp"
#include "moltk/oracle.hpp"

namespace moltk {

/// Everything a desk-scale experiment run needs; mirrored by the TOML config
/// file and the CLI flags.
struct ExperimentConfig {
  std::string experiment;  // lipschitz_regression, logistic_hard,
                           // logistic_easy, coin_inconsistency,
                           // l2_linear_regression, zero_one_regression
  std::vector<int> n_grid = {32};
  std::vector<int> N_grid = {4096};
  int weight_count = 21;  // lattice points for weight_grid(2, m)
  int seeds = 10;
  std::uint64_t seed_base = 1;
  Tolerances tol{1e-6, 2000, 1e-9};  // experiment-grade solver budget
  std::string out_dir = "out";
  bool zero_one_labels = false;
  std::vector<std::string> methods = {"pl_mol", "erm_mol_H", "erm_mol_G"};

  // lipschitz_regression
  double a = 0.4775, b = 0.5225;
  double LH = 0.2, LG = 0.5;
  int grid_m = 256;
  // coin_inconsistency
  double coin_p1 = 1.0, coin_p2 = 0.4;
  std::vector<double> coin_lambda = {0.25, 0.75};
  // l2_linear_regression
  int l2_d = 4;
  double l2_R = 0.25, l2_kappa = 0.25, l2_noise = 0.1;
  // logistic experiments
  int logistic_degree = 5;
  double logistic_radius = 20.0;
  int sigmoid_restarts = 5;

  kernels::Exec exec = kernels::Exec::Parallel;

  void validate() const;
  nlohmann::json to_json() const;
};

struct ResultRow {
  std::string experiment;
  std::string method;   // pl_mol | erm_mol_H | erm_mol_G
  std::string weights;  // lambda entries joined by ';'
  int n = 0;
  int N = 0;
  std::uint64_t seed = 0;
  double excess = std::numeric_limits<double>::quiet_NaN();
  Vec task_excess;  // per-task excess risks
  double wall_ms = 0.0;
  std::string error;  // non-empty when the row was aborted
};

// --- data generators -------------------------------------------------------

/// Two constant regression tasks on [0,1] with the anti-correlated sine
/// densities; labels carry uniform noise on [-0.1, 0.1] clipped to [0,1],
/// and the spec carries the exact clipped-noise conditional means.
std::pair<MultiTaskData, PopulationSpec> gen_lipschitz_regression(
    int n1, int n2, int N1, int N2, double a, double b, std::uint64_t seed);

/// Two 2-D logistic tasks with rectangular supports, task 2 nested inside
/// task 1, opposing decision boundaries in the shared bottom strip. The
/// zero-one label variant makes task 1 noiseless and task 2 Ber(0.65) in its
/// positive region.
std::pair<MultiTaskData, PopulationSpec> gen_logistic_hard(
    int n, int N, std::uint64_t seed, bool zero_one_labels = false);

/// Two Gaussian-mixture logistic tasks with opposing linear boundaries.
std::pair<MultiTaskData, PopulationSpec> gen_logistic_easy(int n, int N,
                                                           std::uint64_t seed);

/// n Bernoulli labels per task at the single point x0 = 0.
MultiTaskData gen_coin(int n, double p1, double p2, std::uint64_t seed);

/// Linear regression with covariates on the sphere of radius sqrt(kappa d)
/// (second moment kappa I), ||w*_k|| = R and centered bounded noise.
std::pair<MultiTaskData, PopulationSpec> gen_l2_linear(int n, int N, int d,
                                                       double R, double kappa,
                                                       double noise,
                                                       std::uint64_t seed);

/// Binary tasks on an 8-point domain with tabular regression teachers.
std::pair<MultiTaskData, PopulationSpec> gen_zero_one_regression(
    int n, int N, std::uint64_t seed);

// --- harness ---------------------------------------------------------------

/// Runs the configured experiment over every (n, N, seed) cell and method,
/// scoring each fitted model against the population oracle. Rows are sorted
/// by (method, weights, n, N, seed) regardless of scheduling; a module error
/// aborts the row with a recorded reason, not the run.
std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg);

std::string rows_to_csv(const std::vector<ResultRow>& rows);
/// Drops the wall-time column (the one excluded from determinism checks).
std::string strip_wall_time(const std::string& csv);
/// Writes <experiment>.csv, <experiment>.svg and <experiment>_meta.json.
void write_outputs(const ExperimentConfig& cfg,
                   const std::vector<ResultRow>& rows);

/// Least-squares slope of log(median excess) against log(group size).
/// Returns (slope, standard error).
std::pair<double, double> fit_rate(
    const std::vector<std::pair<double, double>>& size_and_median);

/// Convenience: group rows by n or N for one method/weight and fit the rate.
std::pair<double, double> fit_rate_rows(const std::vector<ResultRow>& rows,
                                        const std::string& group_col,
                                        const std::string& method,
                                        const std::string& weights);

// --- config plumbing -------------------------------------------------------

ExperimentConfig default_config(const std::string& experiment);
/// Minimal TOML subset: `key = value` lines with ints, floats, bools,
/// strings, and flat numeric/string arrays; section headers are ignored.
ExperimentConfig apply_toml(const std::string& text, ExperimentConfig base);

std::string svg_line_chart(
    const std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>>&
        series,
    const std::string& x_label, const std::string& y_label, bool log_log);

}  // namespace moltk
