#include "moltk/oracle.hpp"

#include <cmath>

namespace moltk {

const Vec& oracle_grid() {
  static const Vec nodes = [] {
    Vec v(kOracleGridSize);
    for (int i = 0; i < kOracleGridSize; ++i)
      v[i] = static_cast<double>(i) / (kOracleGridSize - 1);
    return v;
  }();
  return nodes;
}

const Vec& oracle_trapezoid() {
  static const Vec w = [] {
    Vec v = Vec::Constant(kOracleGridSize, 1.0 / (kOracleGridSize - 1));
    v[0] *= 0.5;
    v[kOracleGridSize - 1] *= 0.5;
    return v;
  }();
  return w;
}

void TaskPopulation::validate() const {
  if (support == Support::Grid1D) {
    if (grid_pdf.size() != kOracleGridSize)
      throw ConfigError("TaskPopulation: density must live on the oracle grid");
    if (grid_pdf.minCoeff() < 0.0)
      throw DomainError("TaskPopulation: negative density");
    if (std::abs(grid_pdf.dot(oracle_trapezoid()) - 1.0) > 1e-9)
      throw DomainError("TaskPopulation: density does not integrate to 1");
  } else {
    if (points.rows() == 0 || probs.size() != points.rows())
      throw ConfigError("TaskPopulation: bad finite support");
    if (probs.minCoeff() < 0.0 || std::abs(probs.sum() - 1.0) > 1e-9)
      throw DomainError("TaskPopulation: point probabilities must sum to 1");
    if (!label_dist.empty() &&
        label_dist.size() != static_cast<std::size_t>(points.rows()))
      throw ConfigError("TaskPopulation: label_dist size mismatch");
  }
  if (!conditional_mean) throw ConfigError("TaskPopulation: missing mean");
}

void PopulationSpec::validate() const {
  if (tasks.empty()) throw ConfigError("PopulationSpec: no tasks");
  for (const auto& t : tasks) t.validate();
}

double GridFunction::operator()(double x) const {
  const int n = static_cast<int>(values.size());
  const double t = std::min(1.0, std::max(0.0, x)) * (n - 1);
  const int i = std::min(static_cast<int>(t), n - 2);
  const double w = t - i;
  return (1.0 - w) * values[i] + w * values[i + 1];
}

ModelFn GridFunction::fn() const {
  return [g = *this](const Vec& x) { return g(x[0]); };
}

void ParetoFrontEstimate::validate() const {
  for (const auto& p : points)
    if (p.excess.minCoeff() < -1e-9)
      throw NumericsError("ParetoFrontEstimate: negative excess risk");
}

namespace {

double grid_excess(const TaskPopulation& t, const ModelFn& f) {
  const Vec& nodes = oracle_grid();
  const Vec& tw = oracle_trapezoid();
  double acc = 0.0;
  Vec x(1);
  for (int j = 0; j < kOracleGridSize; ++j) {
    const double w = tw[j] * t.grid_pdf[j];
    if (w == 0.0) continue;
    x[0] = nodes[j];
    const double theta = t.conditional_mean(x);
    const double fx = f(x);
    if (t.zero_one()) {
      const double bayes = theta >= 0.5 ? 1.0 : 0.0;
      acc += w * std::abs(2.0 * theta - 1.0) * std::abs(fx - bayes);
    } else {
      acc += w * t.loss->divergence1(theta, fx);
    }
  }
  return acc;
}

double finite_excess(const TaskPopulation& t, const ModelFn& f) {
  double acc = 0.0;
  for (int m = 0; m < t.points.rows(); ++m) {
    const double w = t.probs[m];
    if (w == 0.0) continue;
    const Vec x = t.points.row(m).transpose();
    const double theta = t.conditional_mean(x);
    const double fx = f(x);
    if (t.zero_one()) {
      const double bayes = theta >= 0.5 ? 1.0 : 0.0;
      acc += w * std::abs(2.0 * theta - 1.0) * std::abs(fx - bayes);
    } else {
      acc += w * t.loss->divergence1(theta, fx);
    }
  }
  return acc;
}

}  // namespace

Vec population_excess_risks(const PopulationSpec& spec, const ModelFn& f) {
  Vec e(spec.K());
  for (int k = 0; k < spec.K(); ++k) {
    const auto& t = spec.tasks[k];
    e[k] = t.support == TaskPopulation::Support::Grid1D ? grid_excess(t, f)
                                                        : finite_excess(t, f);
  }
  return e;
}

double population_risk(const PopulationSpec& spec, int k, const ModelFn& f) {
  const auto& t = spec.tasks.at(k);
  if (t.support != TaskPopulation::Support::Finite || t.label_dist.empty())
    throw UnsupportedError(
        "population_risk: needs a finite support with label distributions");
  double acc = 0.0;
  for (int m = 0; m < t.points.rows(); ++m) {
    const Vec x = t.points.row(m).transpose();
    const double fx = f(x);
    for (const auto& atom : t.label_dist[m]) {
      const double l = t.zero_one() ? zero_one(atom.y, fx)
                                    : t.loss->divergence1(atom.y, fx);
      acc += t.probs[m] * atom.prob * l;
    }
  }
  return acc;
}

double population_excess_via_risk(const PopulationSpec& spec, int k,
                                  const ModelFn& f) {
  const auto& t = spec.tasks.at(k);
  ModelFn bayes;
  if (t.zero_one())
    bayes = [&t](const Vec& x) {
      return t.conditional_mean(x) >= 0.5 ? 1.0 : 0.0;
    };
  else
    bayes = t.conditional_mean;
  return population_risk(spec, k, f) - population_risk(spec, k, bayes);
}

double population_tradeoff(const PopulationSpec& spec, const Scalarization& s,
                           const ModelFn& f) {
  return scalarize(s, population_excess_risks(spec, f));
}

GridFunction pointwise_tradeoff_optimum(const PopulationSpec& spec,
                                        const WeightVector& lambda) {
  const int K = spec.K();
  if (lambda.K() != K)
    throw DimensionError("pointwise_tradeoff_optimum: weight length");
  for (const auto& t : spec.tasks) {
    if (t.zero_one() || t.support != TaskPopulation::Support::Grid1D)
      throw UnsupportedError(
          "pointwise_tradeoff_optimum: grid-supported Bregman tasks only");
    if (t.loss->kind != spec.tasks[0].loss->kind ||
        t.loss->q != spec.tasks[0].loss->q)
      throw UnsupportedError(
          "pointwise_tradeoff_optimum: tasks must share one potential");
  }
  GridFunction g;
  g.values = Vec(kOracleGridSize);
  const Vec& nodes = oracle_grid();
  Vec x(1);
  for (int j = 0; j < kOracleGridSize; ++j) {
    x[0] = nodes[j];
    double num = 0.0, den = 0.0, mean = 0.0;
    for (int k = 0; k < K; ++k) {
      const double fk = spec.tasks[k].conditional_mean(x);
      const double wk = lambda.lambda[k] * spec.tasks[k].grid_pdf[j];
      num += wk * fk;
      den += wk;
      mean += fk / K;
    }
    if (den <= 0.0) {
      g.values[j] = mean;
      g.degenerate = true;
    } else {
      g.values[j] = num / den;
    }
  }
  return g;
}

std::pair<Model, double> finite_tradeoff_minimizer(const PopulationSpec& spec,
                                                   const FiniteClass& G,
                                                   const Scalarization& s) {
  const int K = spec.K();
  const int M = G.param_dim();
  const auto& outputs = G.outputs();
  for (const auto& t : spec.tasks) {
    if (t.support != TaskPopulation::Support::Finite)
      throw UnsupportedError("finite_tradeoff_minimizer: finite support only");
    if (t.points.rows() != M || (t.points - G.points()).cwiseAbs().maxCoeff() > 1e-9)
      throw DimensionError(
          "finite_tradeoff_minimizer: spec support must match the class domain");
  }
  // pointwise excess contributions: contrib[k](m, o)
  std::vector<Mat> contrib(K, Mat::Zero(M, static_cast<int>(outputs.size())));
  for (int k = 0; k < K; ++k) {
    const auto& t = spec.tasks[k];
    for (int m = 0; m < M; ++m) {
      const Vec x = t.points.row(m).transpose();
      const double theta = t.conditional_mean(x);
      for (std::size_t o = 0; o < outputs.size(); ++o) {
        double c;
        if (t.zero_one()) {
          const double bayes = theta >= 0.5 ? 1.0 : 0.0;
          c = std::abs(2.0 * theta - 1.0) * std::abs(outputs[o] - bayes);
        } else {
          c = t.loss->divergence1(theta, outputs[o]);
        }
        contrib[k](m, static_cast<int>(o)) = t.probs[m] * c;
      }
    }
  }
  const std::size_t total = G.candidate_count();
  Vec excess(K);
  double best_val = std::numeric_limits<double>::infinity();
  Vec best_params;
  std::vector<int> digits(M, 0);
  for (std::size_t c = 0; c < total; ++c) {
    for (int k = 0; k < K; ++k) {
      double e = 0.0;
      for (int m = 0; m < M; ++m) e += contrib[k](m, digits[m]);
      excess[k] = e;
    }
    const double val = scalarize(s, excess);
    if (val < best_val) {
      best_val = val;
      best_params = G.candidate(c);
    }
    // lexicographic increment (last point fastest)
    for (int m = M - 1; m >= 0; --m) {
      if (++digits[m] < static_cast<int>(outputs.size())) break;
      digits[m] = 0;
    }
  }
  return {Model{G.id(), std::move(best_params)}, best_val};
}

double excess_s_tradeoff(const PopulationSpec& spec, const Scalarization& s,
                         const ModelFn& f, double reference_value) {
  if (!std::isfinite(reference_value))
    throw ConfigError("excess_s_tradeoff: missing reference value");
  return population_tradeoff(spec, s, f) - reference_value;
}

FitReport population_fit(const PopulationSpec& spec, const Scalarization& s,
                         const ClassPtr& cls, const Tolerances& tol,
                         std::uint64_t seed, int iter_mult, int restarts) {
  Objective obj;
  obj.cls = cls;
  obj.combine = s.kind;
  for (int k = 0; k < spec.K(); ++k) {
    const auto& t = spec.tasks[k];
    if (t.zero_one())
      throw UnsupportedError("population_fit: Bregman tasks only");
    Mat X;
    Vec w;
    if (t.support == TaskPopulation::Support::Grid1D) {
      X = Mat(kOracleGridSize, 1);
      X.col(0) = oracle_grid();
      w = oracle_trapezoid().cwiseProduct(t.grid_pdf);
    } else {
      X = t.points;
      w = t.probs;
    }
    Mat T(X.rows(), 1);
    Vec x(X.cols());
    for (int i = 0; i < X.rows(); ++i) {
      x = X.row(i).transpose();
      T(i, 0) = t.conditional_mean(x);
    }
    obj.terms.push_back(make_term(*t.loss, *cls, std::move(X), std::move(T),
                                  std::move(w), s.weights.lambda[k]));
  }
  Tolerances budget = tol;
  budget.max_iters = tol.max_iters * iter_mult;
  Model init{cls->id(), cls->project(Vec::Zero(cls->param_dim()), tol)};
  FitReport rep = fit_with_restarts(obj, init, budget, seed, restarts);
  double value = 0.0;
  {
    // report the unscaled trade-off value of the fitted model
    const ModelFn f = model_fn(cls, rep.model);
    value = population_tradeoff(spec, s, f);
  }
  rep.objective = value;
  return rep;
}

double variational_residual(const PopulationSpec& spec,
                            const WeightVector& lambda, const ModelFn& g,
                            const std::vector<ModelFn>& directions) {
  const int K = spec.K();
  if (lambda.K() != K) throw DimensionError("variational_residual: weights");
  for (const auto& t : spec.tasks)
    if (t.zero_one() || t.support != TaskPopulation::Support::Grid1D)
      throw UnsupportedError(
          "variational_residual: grid-supported Bregman tasks only");
  const Vec& nodes = oracle_grid();
  const Vec& tw = oracle_trapezoid();
  // gradient field sum_k lambda_k p_k phi_k''(g)(g - f*_k), node by node
  Vec field(kOracleGridSize), gvals(kOracleGridSize);
  Vec x(1);
  for (int j = 0; j < kOracleGridSize; ++j) {
    x[0] = nodes[j];
    const double gx = g(x);
    gvals[j] = gx;
    double acc = 0.0;
    for (int k = 0; k < K; ++k) {
      const auto& t = spec.tasks[k];
      acc += lambda.lambda[k] * t.grid_pdf[j] * t.loss->hess1(gx) *
             (gx - t.conditional_mean(x));
    }
    field[j] = acc;
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& dir : directions) {
    double ip = 0.0;
    for (int j = 0; j < kOracleGridSize; ++j) {
      x[0] = nodes[j];
      ip += tw[j] * field[j] * (dir(x) - gvals[j]);
    }
    best = std::min(best, ip);
  }
  return best;
}

TaskPopulation make_grid_task(const std::function<double(double)>& pdf,
                              const std::function<double(double)>& mean,
                              BregmanLoss loss, double bayes_risk) {
  TaskPopulation t;
  t.support = TaskPopulation::Support::Grid1D;
  t.grid_pdf = Vec(kOracleGridSize);
  const Vec& nodes = oracle_grid();
  for (int j = 0; j < kOracleGridSize; ++j) t.grid_pdf[j] = pdf(nodes[j]);
  // The trapezoid grid is the actual population measure, so the density is
  // normalized on it; this also absorbs analytic densities that are only
  // approximately normalized on [0,1].
  t.grid_pdf /= t.grid_pdf.dot(oracle_trapezoid());
  t.conditional_mean = [mean](const Vec& x) { return mean(x[0]); };
  t.loss = std::move(loss);
  t.bayes_risk = bayes_risk;
  t.validate();
  return t;
}

TaskPopulation make_finite_task(Mat points, Vec probs,
                                std::vector<std::vector<LabelAtom>> label_dist,
                                std::optional<BregmanLoss> loss) {
  TaskPopulation t;
  t.support = TaskPopulation::Support::Finite;
  t.points = std::move(points);
  t.probs = std::move(probs);
  t.label_dist = std::move(label_dist);
  t.loss = std::move(loss);
  // conditional mean from the label atoms
  Mat pts = t.points;
  std::vector<std::vector<LabelAtom>> atoms = t.label_dist;
  t.conditional_mean = [pts, atoms](const Vec& x) {
    for (int m = 0; m < pts.rows(); ++m) {
      if ((pts.row(m).transpose() - x).lpNorm<Eigen::Infinity>() <= 1e-9) {
        double mu = 0.0;
        for (const auto& a : atoms[m]) mu += a.y * a.prob;
        return mu;
      }
    }
    throw DomainError("TaskPopulation: point not in finite support");
  };
  t.validate();
  return t;
}

}  // namespace moltk
