#include "moltk/bench.hpp"

#include "moltk/omp_guard.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace moltk {

using kernels::Exec;

// ---------------------------------------------------------------------------
// config

void ExperimentConfig::validate() const {
  if (experiment.empty()) throw ConfigError("config: experiment id required");
  if (n_grid.empty() || N_grid.empty())
    throw ConfigError("config: empty sample-size grid");
  if (seeds < 1) throw ConfigError("config: seed count >= 1");
  if (weight_count < 2) throw ConfigError("config: weight grid needs m >= 2");
  if (methods.empty()) throw ConfigError("config: no methods selected");
  tol.validate();
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["experiment"] = experiment;
  j["n_grid"] = n_grid;
  j["N_grid"] = N_grid;
  j["weight_count"] = weight_count;
  j["seeds"] = seeds;
  j["seed_base"] = seed_base;
  j["opt_rel_tol"] = tol.opt_rel_tol;
  j["max_iters"] = tol.max_iters;
  j["constraint_tol"] = tol.constraint_tol;
  j["zero_one_labels"] = zero_one_labels;
  j["methods"] = methods;
  j["a"] = a;
  j["b"] = b;
  j["LH"] = LH;
  j["LG"] = LG;
  j["grid_m"] = grid_m;
  j["coin_p1"] = coin_p1;
  j["coin_p2"] = coin_p2;
  j["coin_lambda"] = coin_lambda;
  j["l2_d"] = l2_d;
  j["l2_R"] = l2_R;
  j["l2_kappa"] = l2_kappa;
  j["l2_noise"] = l2_noise;
  j["logistic_degree"] = logistic_degree;
  j["logistic_radius"] = logistic_radius;
  j["sigmoid_restarts"] = sigmoid_restarts;
  j["label_noise"] = "uniform(-0.1,0.1) clipped to the label range";
  return j;
}

ExperimentConfig default_config(const std::string& experiment) {
  ExperimentConfig cfg;
  cfg.experiment = experiment;
  if (experiment == "lipschitz_regression") {
    cfg.n_grid = {32};
    cfg.N_grid = {4096};
  } else if (experiment == "coin_inconsistency") {
    cfg.n_grid = {10'000};
    cfg.N_grid = {0};
    cfg.seeds = 20;
  } else if (experiment == "logistic_hard") {
    cfg.n_grid = {25};
    cfg.N_grid = {300};
    cfg.weight_count = 5;
  } else if (experiment == "logistic_easy") {
    cfg.n_grid = {24};
    cfg.N_grid = {400};
    cfg.weight_count = 5;
  } else if (experiment == "l2_linear_regression") {
    cfg.n_grid = {256};
    cfg.N_grid = {1024};
    cfg.weight_count = 5;
  } else if (experiment == "zero_one_regression") {
    cfg.n_grid = {160};
    cfg.N_grid = {240};
    cfg.weight_count = 5;
  } else {
    throw ConfigError("unknown experiment: " + experiment);
  }
  return cfg;
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  const auto b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

std::vector<std::string> split_array(std::string body) {
  std::vector<std::string> items;
  std::string cur;
  for (char c : body) {
    if (c == ',') {
      items.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) items.push_back(trim(cur));
  return items;
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
    return s.substr(1, s.size() - 2);
  return s;
}

}  // namespace

ExperimentConfig apply_toml(const std::string& text, ExperimentConfig cfg) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;  // sections are flat
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config file: expected key = value: " + line);
    const std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));

    auto as_int_list = [&val]() {
      std::vector<int> out;
      for (const auto& item : split_array(val.substr(1, val.size() - 2)))
        out.push_back(std::stoi(item));
      return out;
    };
    auto as_str_list = [&val]() {
      std::vector<std::string> out;
      for (const auto& item : split_array(val.substr(1, val.size() - 2)))
        out.push_back(unquote(item));
      return out;
    };
    auto as_double_list = [&val]() {
      std::vector<double> out;
      for (const auto& item : split_array(val.substr(1, val.size() - 2)))
        out.push_back(std::stod(item));
      return out;
    };

    if (key == "experiment") cfg.experiment = unquote(val);
    else if (key == "n_grid") cfg.n_grid = as_int_list();
    else if (key == "N_grid") cfg.N_grid = as_int_list();
    else if (key == "weight_count") cfg.weight_count = std::stoi(val);
    else if (key == "seeds") cfg.seeds = std::stoi(val);
    else if (key == "seed_base") cfg.seed_base = std::stoull(val);
    else if (key == "opt_rel_tol") cfg.tol.opt_rel_tol = std::stod(val);
    else if (key == "max_iters") cfg.tol.max_iters = std::stoi(val);
    else if (key == "constraint_tol") cfg.tol.constraint_tol = std::stod(val);
    else if (key == "out_dir") cfg.out_dir = unquote(val);
    else if (key == "zero_one_labels") cfg.zero_one_labels = (val == "true");
    else if (key == "methods") cfg.methods = as_str_list();
    else if (key == "a") cfg.a = std::stod(val);
    else if (key == "b") cfg.b = std::stod(val);
    else if (key == "LH") cfg.LH = std::stod(val);
    else if (key == "LG") cfg.LG = std::stod(val);
    else if (key == "grid_m") cfg.grid_m = std::stoi(val);
    else if (key == "coin_p1") cfg.coin_p1 = std::stod(val);
    else if (key == "coin_p2") cfg.coin_p2 = std::stod(val);
    else if (key == "coin_lambda") cfg.coin_lambda = as_double_list();
    else if (key == "l2_d") cfg.l2_d = std::stoi(val);
    else if (key == "l2_R") cfg.l2_R = std::stod(val);
    else if (key == "l2_kappa") cfg.l2_kappa = std::stod(val);
    else if (key == "l2_noise") cfg.l2_noise = std::stod(val);
    else if (key == "logistic_degree") cfg.logistic_degree = std::stoi(val);
    else if (key == "logistic_radius") cfg.logistic_radius = std::stod(val);
    else if (key == "sigmoid_restarts") cfg.sigmoid_restarts = std::stoi(val);
    else throw ConfigError("config file: unknown key " + key);
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// generators

namespace {

// mean of clip(c + U(-w, w), 0, 1)
double clipped_uniform_mean(double c, double w) {
  const double lo = c - w, hi = c + w;
  const double a = std::max(0.0, lo), b = std::min(1.0, hi);
  double m = 0.0;
  if (b > a) m += (b * b - a * a) / (4.0 * w);
  if (hi > 1.0) m += (hi - 1.0) / (2.0 * w);
  return m;
}

// inverse-CDF sampler over a density on the oracle grid
struct GridSampler {
  Vec nodes;
  Vec cdf;

  explicit GridSampler(const Vec& pdf) {
    nodes = oracle_grid();
    const int n = static_cast<int>(nodes.size());
    cdf = Vec(n);
    cdf[0] = 0.0;
    const double h = 1.0 / (n - 1);
    for (int i = 1; i < n; ++i)
      cdf[i] = cdf[i - 1] + 0.5 * h * (pdf[i - 1] + pdf[i]);
    cdf /= cdf[n - 1];
  }

  double operator()(Rng& rng) const {
    const double u = rng.uniform();
    int lo = 0, hi = static_cast<int>(nodes.size()) - 1;
    while (hi - lo > 1) {
      const int mid = (lo + hi) / 2;
      if (cdf[mid] <= u)
        lo = mid;
      else
        hi = mid;
    }
    const double seg = cdf[hi] - cdf[lo];
    const double t = seg > 0.0 ? (u - cdf[lo]) / seg : 0.5;
    return nodes[lo] + t * (nodes[hi] - nodes[lo]);
  }
};

}  // namespace

std::pair<MultiTaskData, PopulationSpec> gen_lipschitz_regression(
    int n1, int n2, int N1, int N2, double a, double b, std::uint64_t seed) {
  if (n1 < 1 || n2 < 1) throw DataError("gen_lipschitz: labeled n >= 1");
  const double noise_w = 0.1;
  PopulationSpec spec;
  spec.tasks.push_back(make_grid_task(
      [](double x) { return 0.7 * std::sin(20.0 * x) + 1.0; },
      [a, noise_w](double) { return clipped_uniform_mean(a, noise_w); },
      make_square_loss(1)));
  spec.tasks.push_back(make_grid_task(
      [](double x) { return 1.0 - 0.7 * std::sin(20.0 * x); },
      [b, noise_w](double) { return clipped_uniform_mean(b, noise_w); },
      make_square_loss(1)));

  MultiTaskData data;
  Rng rng = Rng(seed).derive(0x11b5);
  const double consts[2] = {a, b};
  const int ns[2] = {n1, n2};
  const int Ns[2] = {N1, N2};
  for (int k = 0; k < 2; ++k) {
    GridSampler sampler(spec.tasks[k].grid_pdf);
    Rng stream = rng.derive(k);
    TaskData t;
    t.task_id = k + 1;
    t.X = Mat(ns[k], 1);
    t.Y = Mat(ns[k], 1);
    t.XU = Mat(Ns[k], 1);
    for (int i = 0; i < ns[k]; ++i) {
      t.X(i, 0) = sampler(stream);
      const double y = consts[k] + stream.uniform(-noise_w, noise_w);
      t.Y(i, 0) = std::min(1.0, std::max(0.0, y));
    }
    for (int i = 0; i < Ns[k]; ++i) t.XU(i, 0) = sampler(stream);
    data.tasks.push_back(std::move(t));
  }
  return {std::move(data), std::move(spec)};
}

namespace {

// piecewise conditional means of the nested-rectangles classification setup
struct HardSetup {
  // task 1 support [0,1]^2, boundary at x2 = 0.5; task 2 support [0,0.5]^2,
  // boundary at x2 = 0.25 with the opposite orientation (disagreement in the
  // shared bottom-left strip)
  bool zero_one = false;

  double theta1(const Vec& x) const {
    if (zero_one) return x[1] > 0.5 ? 1.0 : 0.0;
    return 1.0 / (1.0 + std::exp(-8.0 * (x[1] - 0.5)));
  }
  double theta2(const Vec& x) const {
    if (zero_one) return x[1] <= 0.25 ? 0.65 : 0.0;
    return 1.0 / (1.0 + std::exp(-8.0 * (0.25 - x[1])));
  }
};

TaskPopulation rect_grid_task(double x1_hi, double x2_hi,
                              const std::function<double(const Vec&)>& theta,
                              std::optional<BregmanLoss> loss) {
  const int g = 64;
  Mat pts(g * g, 2);
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j) {
      pts(i * g + j, 0) = (i + 0.5) / g * x1_hi;
      pts(i * g + j, 1) = (j + 0.5) / g * x2_hi;
    }
  Vec probs = Vec::Constant(g * g, 1.0 / (g * g));
  TaskPopulation t;
  t.support = TaskPopulation::Support::Finite;
  t.points = std::move(pts);
  t.probs = std::move(probs);
  t.conditional_mean = theta;
  t.loss = std::move(loss);
  t.validate();
  return t;
}

}  // namespace

std::pair<MultiTaskData, PopulationSpec> gen_logistic_hard(
    int n, int N, std::uint64_t seed, bool zero_one_labels) {
  HardSetup setup{zero_one_labels};
  PopulationSpec spec;
  spec.tasks.push_back(rect_grid_task(
      1.0, 1.0, [setup](const Vec& x) { return setup.theta1(x); },
      make_binary_entropy_loss()));
  spec.tasks.push_back(rect_grid_task(
      0.5, 0.5, [setup](const Vec& x) { return setup.theta2(x); },
      make_binary_entropy_loss()));

  MultiTaskData data;
  Rng rng = Rng(seed).derive(0x1051);
  const double hi[2] = {1.0, 0.5};
  for (int k = 0; k < 2; ++k) {
    Rng stream = rng.derive(k);
    TaskData t;
    t.task_id = k + 1;
    t.X = Mat(n, 2);
    t.Y = Mat(n, 1);
    t.XU = Mat(N, 2);
    for (int i = 0; i < n; ++i) {
      Vec x(2);
      x << stream.uniform(0.0, hi[k]), stream.uniform(0.0, hi[k]);
      t.X.row(i) = x.transpose();
      const double theta = k == 0 ? setup.theta1(x) : setup.theta2(x);
      t.Y(i, 0) = stream.bernoulli(theta) ? 1.0 : 0.0;
    }
    for (int i = 0; i < N; ++i) {
      t.XU(i, 0) = stream.uniform(0.0, hi[k]);
      t.XU(i, 1) = stream.uniform(0.0, hi[k]);
    }
    data.tasks.push_back(std::move(t));
  }
  return {std::move(data), std::move(spec)};
}

std::pair<MultiTaskData, PopulationSpec> gen_logistic_easy(int n, int N,
                                                           std::uint64_t seed) {
  auto theta = [](int task, const Vec& x) {
    const double z = (task == 0 ? -x[0] : x[0]) + 0.5;
    return 1.0 / (1.0 + std::exp(-z));
  };
  auto sample_x = [](int task, Rng& rng) {
    Vec x(2);
    x << rng.normal(), rng.normal();
    if (rng.bernoulli(0.5)) x[0] += task == 0 ? -1.0 : 1.0;
    return x;
  };

  // the population is a fixed Monte-Carlo discretization of the mixture,
  // shared across data seeds
  PopulationSpec spec;
  for (int k = 0; k < 2; ++k) {
    Rng mc(0x9e11 + k);
    const int M = 4096;
    Mat pts(M, 2);
    for (int m = 0; m < M; ++m) pts.row(m) = sample_x(k, mc).transpose();
    TaskPopulation t;
    t.support = TaskPopulation::Support::Finite;
    t.points = std::move(pts);
    t.probs = Vec::Constant(M, 1.0 / M);
    t.conditional_mean = [k, theta](const Vec& x) { return theta(k, x); };
    t.loss = make_binary_entropy_loss();
    t.validate();
    spec.tasks.push_back(std::move(t));
  }

  MultiTaskData data;
  Rng rng = Rng(seed).derive(0x1057);
  for (int k = 0; k < 2; ++k) {
    Rng stream = rng.derive(k);
    TaskData t;
    t.task_id = k + 1;
    t.X = Mat(n, 2);
    t.Y = Mat(n, 1);
    t.XU = Mat(N, 2);
    for (int i = 0; i < n; ++i) {
      const Vec x = sample_x(k, stream);
      t.X.row(i) = x.transpose();
      t.Y(i, 0) = stream.bernoulli(theta(k, x)) ? 1.0 : 0.0;
    }
    for (int i = 0; i < N; ++i)
      t.XU.row(i) = sample_x(k, stream).transpose();
    data.tasks.push_back(std::move(t));
  }
  return {std::move(data), std::move(spec)};
}

MultiTaskData gen_coin(int n, double p1, double p2, std::uint64_t seed) {
  if (!(p1 >= 0.0 && p1 <= 1.0 && p2 >= 0.0 && p2 <= 1.0))
    throw DomainError("gen_coin: probabilities in [0,1]");
  MultiTaskData data;
  Rng rng = Rng(seed).derive(0xc014);
  const double ps[2] = {p1, p2};
  for (int k = 0; k < 2; ++k) {
    TaskData t;
    t.task_id = k + 1;
    t.X = Mat::Zero(n, 1);
    t.Y = Mat(n, 1);
    Rng stream = rng.derive(k);
    for (int i = 0; i < n; ++i) t.Y(i, 0) = stream.bernoulli(ps[k]) ? 1.0 : 0.0;
    t.XU = Mat::Zero(1, 1);
    data.tasks.push_back(std::move(t));
  }
  return data;
}

std::pair<MultiTaskData, PopulationSpec> gen_l2_linear(int n, int N, int d,
                                                       double R, double kappa,
                                                       double noise,
                                                       std::uint64_t seed) {
  if (!(R <= kappa && kappa <= 1.0))
    throw ConfigError("gen_l2_linear: need R <= kappa <= 1");
  if (kappa * d > 1.0)
    throw ConfigError("gen_l2_linear: kappa * d <= 1 so covariates fit B_2");
  if (R + noise > 1.0)
    throw ConfigError("gen_l2_linear: R + noise <= 1 keeps labels in [-1,1]");
  const double rho = std::sqrt(kappa * d);

  auto sphere = [d, rho](Rng& rng) {
    Vec x(d);
    for (int i = 0; i < d; ++i) x[i] = rng.normal();
    return Vec(rho * x / std::max(x.norm(), 1e-300));
  };

  // ground-truth directions are part of the population, fixed across seeds
  std::vector<Vec> wstar(2);
  for (int k = 0; k < 2; ++k) {
    Rng wrng(0x77aa + k);
    Vec w(d);
    for (int i = 0; i < d; ++i) w[i] = wrng.normal();
    wstar[k] = R * w / std::max(w.norm(), 1e-300);
  }

  PopulationSpec spec;
  {
    Rng mc(0x5712);
    const int M = 8192;
    Mat pts(M, d);
    for (int m = 0; m < M; ++m) pts.row(m) = sphere(mc).transpose();
    for (int k = 0; k < 2; ++k) {
      TaskPopulation t;
      t.support = TaskPopulation::Support::Finite;
      t.points = pts;
      t.probs = Vec::Constant(M, 1.0 / M);
      Vec w = wstar[k];
      t.conditional_mean = [w](const Vec& x) { return w.dot(x); };
      t.loss = make_square_loss(1, -1.0, 1.0);
      t.validate();
      spec.tasks.push_back(std::move(t));
    }
  }

  MultiTaskData data;
  Rng rng = Rng(seed).derive(0x12f1);
  for (int k = 0; k < 2; ++k) {
    Rng stream = rng.derive(k);
    TaskData t;
    t.task_id = k + 1;
    t.X = Mat(n, d);
    t.Y = Mat(n, 1);
    t.XU = Mat(N, d);
    for (int i = 0; i < n; ++i) {
      const Vec x = sphere(stream);
      t.X.row(i) = x.transpose();
      t.Y(i, 0) = wstar[k].dot(x) + stream.uniform(-noise, noise);
    }
    for (int i = 0; i < N; ++i) t.XU.row(i) = sphere(stream).transpose();
    data.tasks.push_back(std::move(t));
  }
  return {std::move(data), std::move(spec)};
}

std::pair<MultiTaskData, PopulationSpec> gen_zero_one_regression(
    int n, int N, std::uint64_t seed) {
  const int M = 8;
  Mat pts(M, 1);
  for (int m = 0; m < M; ++m) pts(m, 0) = m / static_cast<double>(M - 1);

  // fixed tabular means and point distributions define the population
  PopulationSpec spec;
  std::vector<Vec> thetas(2), probs(2);
  for (int k = 0; k < 2; ++k) {
    Rng fixed(0x0ddc + k);
    Vec theta(M), p(M);
    for (int m = 0; m < M; ++m) {
      theta[m] = fixed.uniform(0.1, 0.9);
      p[m] = fixed.uniform(0.5, 1.5);
    }
    p /= p.sum();
    thetas[k] = theta;
    probs[k] = p;
    std::vector<std::vector<LabelAtom>> ld;
    for (int m = 0; m < M; ++m)
      ld.push_back({LabelAtom{1.0, theta[m]}, LabelAtom{0.0, 1.0 - theta[m]}});
    spec.tasks.push_back(make_finite_task(pts, p, ld, std::nullopt));
  }

  MultiTaskData data;
  Rng rng = Rng(seed).derive(0x01ee);
  for (int k = 0; k < 2; ++k) {
    Rng stream = rng.derive(k);
    auto draw_point = [&](Rng& r) {
      const double u = r.uniform();
      double acc = 0.0;
      for (int m = 0; m < M; ++m) {
        acc += probs[k][m];
        if (u < acc) return m;
      }
      return M - 1;
    };
    TaskData t;
    t.task_id = k + 1;
    t.X = Mat(n, 1);
    t.Y = Mat(n, 1);
    t.XU = Mat(N, 1);
    for (int i = 0; i < n; ++i) {
      const int m = draw_point(stream);
      t.X(i, 0) = pts(m, 0);
      t.Y(i, 0) = stream.bernoulli(thetas[k][m]) ? 1.0 : 0.0;
    }
    for (int i = 0; i < N; ++i) t.XU(i, 0) = pts(draw_point(stream), 0);
    data.tasks.push_back(std::move(t));
  }
  return {std::move(data), std::move(spec)};
}

// ---------------------------------------------------------------------------
// harness

namespace {

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct Refs {
  WeightGrid grid;
  std::vector<double> value;  // inf of the trade-off over G, per weight
};

void score_entries(std::vector<ResultRow>& rows, const ExperimentConfig& cfg,
                   const PopulationSpec& spec, const Refs& refs,
                   const ClassPtr& cls, const TradeoffSolution& sol,
                   const std::string& method, int n, int N, std::uint64_t seed,
                   double wall_ms) {
  for (std::size_t w = 0; w < sol.entries.size(); ++w) {
    const auto& e = sol.entries[w];
    ResultRow row;
    row.experiment = cfg.experiment;
    row.method = method;
    row.weights = weights_to_string(e.weights);
    row.n = n;
    row.N = N;
    row.seed = seed;
    row.wall_ms = wall_ms;
    const ModelFn f = model_fn(cls, e.model);
    row.task_excess = population_excess_risks(spec, f);
    Scalarization s{sol.kind, e.weights};
    row.excess = scalarize(s, row.task_excess) - refs.value[w];
    rows.push_back(std::move(row));
  }
}

ResultRow error_row(const ExperimentConfig& cfg, const std::string& method,
                    int n, int N, std::uint64_t seed, const std::string& why) {
  ResultRow row;
  row.experiment = cfg.experiment;
  row.method = method;
  row.weights = "*";
  row.n = n;
  row.N = N;
  row.seed = seed;
  row.task_excess = Vec::Zero(2);
  row.error = why;
  return row;
}

struct Cell {
  int n, N;
  std::uint64_t seed;
};

std::vector<Cell> make_cells(const ExperimentConfig& cfg) {
  std::vector<Cell> cells;
  for (int n : cfg.n_grid)
    for (int N : cfg.N_grid)
      for (int s = 0; s < cfg.seeds; ++s)
        cells.push_back(Cell{n, N, cfg.seed_base + static_cast<std::uint64_t>(s)});
  return cells;
}

bool wants(const ExperimentConfig& cfg, const std::string& method) {
  return std::find(cfg.methods.begin(), cfg.methods.end(), method) !=
         cfg.methods.end();
}

std::vector<ResultRow> run_coin(const ExperimentConfig& cfg) {
  Vec lam(2);
  lam << cfg.coin_lambda.at(0), cfg.coin_lambda.at(1);
  const WeightVector w = WeightVector::make(lam);
  const double ps[2] = {cfg.coin_p1, cfg.coin_p2};
  auto task_excess = [&](int y) {
    Vec e(2);
    for (int k = 0; k < 2; ++k) {
      const double bayes = ps[k] >= 0.5 ? 1.0 : 0.0;
      e[k] = std::abs(2.0 * ps[k] - 1.0) * std::abs(y - bayes);
    }
    return e;
  };

  std::vector<ResultRow> rows;
  for (const Cell& c : make_cells(cfg)) {
    for (const std::string& method : cfg.methods) {
      const double t0 = now_ms();
      CoinResult r = method == "pl_mol"
                         ? coin_example_pl(c.n, w, ps[0], ps[1], c.seed)
                         : coin_example_erm(c.n, w, ps[0], ps[1], c.seed);
      ResultRow row;
      row.experiment = cfg.experiment;
      row.method = method;
      row.weights = weights_to_string(w);
      row.n = c.n;
      row.N = 0;
      row.seed = c.seed;
      row.excess = r.excess;
      row.task_excess = task_excess(r.yhat_s);
      row.wall_ms = now_ms() - t0;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<ResultRow> run_zero_one_regression(const ExperimentConfig& cfg) {
  const PopulationSpec spec = gen_zero_one_regression(8, 8, cfg.seed_base).second;
  const int M = 8;
  Mat pts = spec.tasks[0].points;
  auto G = std::make_shared<FiniteClass>(pts, std::vector<double>{0.0, 1.0});
  auto Theta = std::make_shared<GridLipschitzClass>(M, 10.0);
  const WeightGrid grid = weight_grid(2, cfg.weight_count);

  Refs refs;
  refs.grid = grid;
  for (const auto& lam : grid.weights) {
    Scalarization s{ScalKind::Linear, lam};
    refs.value.push_back(finite_tradeoff_minimizer(spec, *G, s).second);
  }

  std::vector<ResultRow> rows;
  for (const Cell& c : make_cells(cfg)) {
    MultiTaskData data = gen_zero_one_regression(c.n, c.N, c.seed).first;
    for (const std::string& method : cfg.methods) {
      if (method == "erm_mol_H") continue;  // no separate H class here
      const double t0 = now_ms();
      try {
        TradeoffSolution sol =
            method == "pl_mol"
                ? pl_mol_zero_one(data, {Theta, Theta}, G, ScalKind::Linear,
                                  grid, cfg.tol, c.seed)
                : erm_mol_zero_one(data, G, ScalKind::Linear, grid);
        score_entries(rows, cfg, spec, refs, G, sol, method, c.n, c.N, c.seed,
                      now_ms() - t0);
      } catch (const std::exception& ex) {
        rows.push_back(error_row(cfg, method, c.n, c.N, c.seed, ex.what()));
      }
    }
  }
  return rows;
}

struct GradientSetup {
  ClassPtr H;
  ClassPtr G;
  std::vector<BregmanLoss> losses;
  PopulationSpec spec;
  Refs refs;
  int restarts = 1;
  std::function<MultiTaskData(int, int, std::uint64_t)> gen;
};

std::vector<ResultRow> run_gradient_experiment(const ExperimentConfig& cfg,
                                               const GradientSetup& setup) {
  const std::vector<Cell> cells = make_cells(cfg);
  struct Job {
    Cell cell;
    std::string method;
  };
  std::vector<Job> jobs;
  for (const Cell& c : cells)
    for (const std::string& m :
         {std::string("pl_mol"), std::string("erm_mol_H"),
          std::string("erm_mol_G")})
      if (wants(cfg, m)) jobs.push_back(Job{c, m});

  std::vector<std::vector<ResultRow>> buckets(jobs.size());
  detail::OmpGuard guard;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    guard.run([&, j] {
      const auto& [c, method] = jobs[j];
      const double t0 = now_ms();
      try {
        MultiTaskData data = setup.gen(c.n, c.N, c.seed);
        MolOptions opt;
        opt.restarts = setup.restarts;
        opt.exec = cfg.exec;
        TradeoffSolution sol;
        if (method == "pl_mol")
          sol = pl_mol(data, {setup.H, setup.H}, setup.G, setup.losses,
                       ScalKind::Linear, setup.refs.grid, cfg.tol, c.seed, opt);
        else if (method == "erm_mol_H")
          sol = erm_mol(data, setup.H, setup.losses, ScalKind::Linear,
                        setup.refs.grid, cfg.tol, c.seed, opt);
        else
          sol = erm_mol(data, setup.G, setup.losses, ScalKind::Linear,
                        setup.refs.grid, cfg.tol, c.seed, opt);
        const ClassPtr& cls = method == "erm_mol_H" ? setup.H : setup.G;
        score_entries(buckets[j], cfg, setup.spec, setup.refs, cls, sol,
                      method, c.n, c.N, c.seed, now_ms() - t0);
      } catch (const std::exception& ex) {
        buckets[j].push_back(
            error_row(cfg, method, c.n, c.N, c.seed, ex.what()));
      }
    });
  }
  guard.rethrow();
  std::vector<ResultRow> rows;
  for (auto& b : buckets)
    for (auto& r : b) rows.push_back(std::move(r));
  return rows;
}

GradientSetup lipschitz_setup(const ExperimentConfig& cfg) {
  GradientSetup s;
  s.H = std::make_shared<GridLipschitzClass>(cfg.grid_m, cfg.LH);
  s.G = std::make_shared<GridLipschitzClass>(cfg.grid_m, cfg.LG);
  s.losses = {make_square_loss(1), make_square_loss(1)};
  s.spec = gen_lipschitz_regression(1, 1, 1, 1, cfg.a, cfg.b, 0).second;
  s.restarts = 1;  // convex
  const double a = cfg.a, b = cfg.b;
  s.gen = [a, b](int n, int N, std::uint64_t seed) {
    return gen_lipschitz_regression(n, n, N, N, a, b, seed).first;
  };

  s.refs.grid = weight_grid(2, cfg.weight_count);
  for (const auto& lam : s.refs.grid.weights) {
    Scalarization sc{ScalKind::Linear, lam};
    GridFunction g = pointwise_tradeoff_optimum(s.spec, lam);
    // if the pointwise optimum is Lipschitz-feasible it is the infimum over
    // G; otherwise fall back to a high-budget numerical fit
    double max_slope = 0.0;
    for (int j = 0; j + 1 < kOracleGridSize; ++j)
      max_slope = std::max(max_slope,
                           std::abs(g.values[j + 1] - g.values[j]) *
                               (kOracleGridSize - 1));
    if (max_slope <= cfg.LG * (1.0 - 1e-6)) {
      s.refs.value.push_back(population_tradeoff(s.spec, sc, g.fn()));
    } else {
      FitReport fit = population_fit(s.spec, sc, s.G, cfg.tol, 0x5ef5, 10, 3);
      s.refs.value.push_back(fit.objective);
    }
  }
  return s;
}

GradientSetup logistic_setup(const ExperimentConfig& cfg, bool hard) {
  GradientSetup s;
  s.H = std::make_shared<LinearClass>(2, 1, Ball::L2, cfg.logistic_radius,
                                      Link::Sigmoid);
  s.G = std::make_shared<LinearClass>(2, hard ? cfg.logistic_degree : 3,
                                      Ball::L2, cfg.logistic_radius,
                                      Link::Sigmoid);
  s.losses = {make_binary_entropy_loss(), make_binary_entropy_loss()};
  s.restarts = cfg.sigmoid_restarts;
  const bool zo = cfg.zero_one_labels;
  if (hard) {
    s.spec = gen_logistic_hard(1, 1, 0, zo).second;
    s.gen = [zo](int n, int N, std::uint64_t seed) {
      return gen_logistic_hard(n, N, seed, zo).first;
    };
  } else {
    s.spec = gen_logistic_easy(1, 1, 0).second;
    s.gen = [](int n, int N, std::uint64_t seed) {
      return gen_logistic_easy(n, N, seed).first;
    };
  }
  s.refs.grid = weight_grid(2, cfg.weight_count);
  for (const auto& lam : s.refs.grid.weights) {
    Scalarization sc{ScalKind::Linear, lam};
    FitReport fit = population_fit(s.spec, sc, s.G, cfg.tol, 0x5ef5, 2, 2);
    s.refs.value.push_back(fit.objective);
  }
  return s;
}

GradientSetup l2_linear_setup(const ExperimentConfig& cfg) {
  GradientSetup s;
  s.H = std::make_shared<LinearClass>(cfg.l2_d, 0, Ball::L2, cfg.l2_R,
                                      Link::Identity);
  s.G = std::make_shared<LinearClass>(cfg.l2_d, 0, Ball::L2, 1.0,
                                      Link::Identity);
  s.losses = {make_square_loss(1, -1.0, 1.0), make_square_loss(1, -1.0, 1.0)};
  s.restarts = 1;
  const int d = cfg.l2_d;
  const double R = cfg.l2_R, kappa = cfg.l2_kappa, noise = cfg.l2_noise;
  s.spec = gen_l2_linear(1, 1, d, R, kappa, noise, 0).second;
  s.gen = [d, R, kappa, noise](int n, int N, std::uint64_t seed) {
    return gen_l2_linear(n, N, d, R, kappa, noise, seed).first;
  };
  s.refs.grid = weight_grid(2, cfg.weight_count);
  for (const auto& lam : s.refs.grid.weights) {
    Scalarization sc{ScalKind::Linear, lam};
    // shared second moment: the minimizer is the weight-averaged w*
    Vec wlam = Vec::Zero(d);
    for (int k = 0; k < 2; ++k) {
      Vec wk(d);
      Vec probe = Vec::Zero(d);
      // recover w*_k from the spec's conditional mean on basis vectors
      for (int i = 0; i < d; ++i) {
        probe.setZero();
        probe[i] = 1.0;
        wk[i] = s.spec.tasks[k].conditional_mean(probe);
      }
      wlam += lam.lambda[k] * wk;
    }
    s.refs.value.push_back(population_tradeoff(
        s.spec, sc, [wlam](const Vec& x) { return wlam.dot(x); }));
  }
  return s;
}

}  // namespace

std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<ResultRow> rows;
  if (cfg.experiment == "coin_inconsistency") {
    rows = run_coin(cfg);
  } else if (cfg.experiment == "zero_one_regression") {
    rows = run_zero_one_regression(cfg);
  } else if (cfg.experiment == "lipschitz_regression") {
    rows = run_gradient_experiment(cfg, lipschitz_setup(cfg));
  } else if (cfg.experiment == "logistic_hard") {
    rows = run_gradient_experiment(cfg, logistic_setup(cfg, true));
  } else if (cfg.experiment == "logistic_easy") {
    rows = run_gradient_experiment(cfg, logistic_setup(cfg, false));
  } else if (cfg.experiment == "l2_linear_regression") {
    rows = run_gradient_experiment(cfg, l2_linear_setup(cfg));
  } else {
    throw ConfigError("unknown experiment: " + cfg.experiment);
  }
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a,
                                         const ResultRow& b) {
    return std::tie(a.method, a.weights, a.n, a.N, a.seed) <
           std::tie(b.method, b.weights, b.n, b.N, b.seed);
  });
  return rows;
}

// ---------------------------------------------------------------------------
// CSV / SVG / rates

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string rows_to_csv(const std::vector<ResultRow>& rows) {
  std::string out =
      "experiment,method,weights,n,N,seed,excess_s_tradeoff,excess_1,"
      "excess_2,error,wall_ms\n";
  for (const auto& r : rows) {
    out += csv_escape(r.experiment) + ',' + csv_escape(r.method) + ',' +
           csv_escape(r.weights) + ',' + std::to_string(r.n) + ',' +
           std::to_string(r.N) + ',' + std::to_string(r.seed) + ',' +
           fmt17(r.excess) + ',' +
           fmt17(r.task_excess.size() > 0 ? r.task_excess[0] : 0.0) + ',' +
           fmt17(r.task_excess.size() > 1 ? r.task_excess[1] : 0.0) + ',' +
           csv_escape(r.error) + ',' + fmt17(r.wall_ms) + '\n';
  }
  return out;
}

std::string strip_wall_time(const std::string& csv) {
  std::string out;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    const auto pos = line.rfind(',');
    out += (pos == std::string::npos ? line : line.substr(0, pos)) + '\n';
  }
  return out;
}

std::pair<double, double> fit_rate(
    const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 4)
    throw RateFitError("fit_rate: need at least 4 sample sizes");
  const int k = static_cast<int>(pts.size());
  double sx = 0, sy = 0;
  for (const auto& [n, med] : pts) {
    if (!(n > 0.0) || !(med > 0.0))
      throw RateFitError("fit_rate: non-positive sizes or medians");
    sx += std::log(n);
    sy += std::log(med);
  }
  const double mx = sx / k, my = sy / k;
  double sxx = 0, sxy = 0;
  for (const auto& [n, med] : pts) {
    const double dx = std::log(n) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(med) - my);
  }
  const double slope = sxy / sxx;
  double rss = 0;
  for (const auto& [n, med] : pts) {
    const double pred = my + slope * (std::log(n) - mx);
    const double resid = std::log(med) - pred;
    rss += resid * resid;
  }
  const double se = std::sqrt(rss / std::max(1, k - 2) / sxx);
  return {slope, se};
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) throw RateFitError("median of an empty group");
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size();
  return k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

}  // namespace

std::pair<double, double> fit_rate_rows(const std::vector<ResultRow>& rows,
                                        const std::string& group_col,
                                        const std::string& method,
                                        const std::string& weights) {
  std::map<int, std::vector<double>> groups;
  for (const auto& r : rows) {
    if (r.method != method || !r.error.empty()) continue;
    if (!weights.empty() && r.weights != weights) continue;
    groups[group_col == "N" ? r.N : r.n].push_back(r.excess);
  }
  std::vector<std::pair<double, double>> pts;
  for (auto& [size, excesses] : groups)
    pts.emplace_back(static_cast<double>(size), median(std::move(excesses)));
  return fit_rate(pts);
}

std::string svg_line_chart(
    const std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>>&
        series,
    const std::string& x_label, const std::string& y_label, bool log_log) {
  const int W = 640, Hh = 440, ml = 70, mr = 20, mt = 20, mb = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  auto tx = [log_log](double v) { return log_log ? std::log10(v) : v; };
  for (const auto& [name, pts] : series)
    for (const auto& [x, y] : pts) {
      if (log_log && (x <= 0 || y <= 0)) continue;
      xmin = std::min(xmin, tx(x));
      xmax = std::max(xmax, tx(x));
      ymin = std::min(ymin, tx(y));
      ymax = std::max(ymax, tx(y));
    }
  if (xmin > xmax) {
    xmin = 0;
    xmax = 1;
    ymin = 0;
    ymax = 1;
  }
  if (xmax - xmin < 1e-12) xmax = xmin + 1;
  if (ymax - ymin < 1e-12) ymax = ymin + 1;
  auto px = [&](double x) {
    return ml + (tx(x) - xmin) / (xmax - xmin) * (W - ml - mr);
  };
  auto py = [&](double y) {
    return Hh - mb - (tx(y) - ymin) / (ymax - ymin) * (Hh - mt - mb);
  };
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e"};
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W
      << "' height='" << Hh << "'>\n";
  svg << "<rect width='100%' height='100%' fill='white'/>\n";
  svg << "<line x1='" << ml << "' y1='" << Hh - mb << "' x2='" << W - mr
      << "' y2='" << Hh - mb << "' stroke='black'/>\n";
  svg << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='"
      << Hh - mb << "' stroke='black'/>\n";
  svg << "<text x='" << (W / 2) << "' y='" << Hh - 12
      << "' text-anchor='middle' font-size='13'>" << x_label
      << (log_log ? " (log10)" : "") << "</text>\n";
  svg << "<text x='16' y='" << (Hh / 2)
      << "' text-anchor='middle' font-size='13' transform='rotate(-90 16 "
      << (Hh / 2) << ")'>" << y_label << (log_log ? " (log10)" : "")
      << "</text>\n";
  int ci = 0;
  for (const auto& [name, pts] : series) {
    const char* color = colors[ci % 5];
    std::ostringstream poly;
    for (const auto& [x, y] : pts) {
      if (log_log && (x <= 0 || y <= 0)) continue;
      poly << px(x) << ',' << py(y) << ' ';
      svg << "<circle cx='" << px(x) << "' cy='" << py(y)
          << "' r='3' fill='" << color << "'/>\n";
    }
    svg << "<polyline points='" << poly.str() << "' fill='none' stroke='"
        << color << "' stroke-width='1.5'/>\n";
    svg << "<text x='" << W - mr - 150 << "' y='" << (mt + 16 + 16 * ci)
        << "' font-size='12' fill='" << color << "'>" << name << "</text>\n";
    ++ci;
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_outputs(const ExperimentConfig& cfg,
                   const std::vector<ResultRow>& rows) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  const std::string stem = cfg.out_dir + "/" + cfg.experiment;
  {
    std::ofstream f(stem + ".csv", std::ios::binary);
    f << rows_to_csv(rows);
  }
  {
    nlohmann::json meta;
    meta["config"] = cfg.to_json();
    meta["rows"] = rows.size();
    std::ofstream f(stem + "_meta.json", std::ios::binary);
    f << meta.dump(2) << '\n';
  }
  // median excess against the swept size, per method (convenience plot)
  const bool sweep_n = cfg.n_grid.size() >= cfg.N_grid.size();
  std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>>
      series;
  for (const std::string& method : cfg.methods) {
    std::map<int, std::vector<double>> groups;
    for (const auto& r : rows) {
      if (r.method != method || !r.error.empty()) continue;
      groups[sweep_n ? r.n : r.N].push_back(r.excess);
    }
    std::vector<std::pair<double, double>> pts;
    for (auto& [size, ex] : groups) {
      std::sort(ex.begin(), ex.end());
      const double med = ex.size() % 2
                             ? ex[ex.size() / 2]
                             : 0.5 * (ex[ex.size() / 2 - 1] + ex[ex.size() / 2]);
      pts.emplace_back(size, med);
    }
    if (!pts.empty()) series.emplace_back(method, std::move(pts));
  }
  std::ofstream f(stem + ".svg", std::ios::binary);
  f << svg_line_chart(series, sweep_n ? "n" : "N", "median excess s-trade-off",
                      true);
}

}  // namespace moltk
