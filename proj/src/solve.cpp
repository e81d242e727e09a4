#include "moltk/solve.hpp"

#include <cmath>

namespace moltk {

using kernels::Exec;

ObjectiveTerm make_term(BregmanLoss loss, const HypothesisClass& cls, Mat X,
                        Mat T, Vec w, double weight) {
  ObjectiveTerm t;
  t.loss = std::move(loss);
  t.P = cls.prepare(X);
  t.X = std::move(X);
  t.T = std::move(T);
  t.w = std::move(w);
  t.weight = weight;
  return t;
}

void Objective::validate() const {
  if (terms.empty()) throw ConfigError("Objective: at least one term");
  if (!cls) throw ConfigError("Objective: missing class");
  for (const auto& t : terms) {
    if (t.weight < 0.0) throw ConfigError("Objective: negative term weight");
    if (t.X.rows() == 0) throw DataError("Objective: empty term data");
    if (t.P.rows() != t.X.rows())
      throw ConfigError("Objective: term cache missing (use make_term)");
  }
}

Vec Objective::term_values(const Vec& params, Exec exec) const {
  Vec v(static_cast<int>(terms.size()));
  for (std::size_t j = 0; j < terms.size(); ++j)
    v[static_cast<int>(j)] = kernels::weighted_loss_sum(
        terms[j].loss, *cls, params, terms[j].P, terms[j].T, terms[j].w, exec);
  return v;
}

double Objective::value(const Vec& params, Exec exec) const {
  const Vec v = term_values(params, exec);
  if (combine == ScalKind::Tchebycheff) {
    double best = terms[0].weight * v[0];
    for (std::size_t j = 1; j < terms.size(); ++j)
      best = std::max(best, terms[j].weight * v[static_cast<int>(j)]);
    return best;
  }
  double s = 0.0;
  for (std::size_t j = 0; j < terms.size(); ++j)
    s += terms[j].weight * v[static_cast<int>(j)];
  return s;
}

double Objective::value_grad(const Vec& params, Vec& grad, Exec exec) const {
  const int p = cls->param_dim();
  if (combine == ScalKind::Tchebycheff) {
    // subgradient of the max: the argmax term's gradient, lowest index first
    const Vec v = term_values(params, exec);
    int kstar = 0;
    double best = terms[0].weight * v[0];
    for (std::size_t j = 1; j < terms.size(); ++j) {
      const double cand = terms[j].weight * v[static_cast<int>(j)];
      if (cand > best) {
        best = cand;
        kstar = static_cast<int>(j);
      }
    }
    Vec g(p);
    kernels::weighted_loss_sum_grad(terms[kstar].loss, *cls, params,
                                    terms[kstar].P, terms[kstar].T,
                                    terms[kstar].w, g, exec);
    grad = terms[kstar].weight * g;
    return best;
  }
  double total = 0.0;
  grad = Vec::Zero(p);
  Vec g(p);
  for (const auto& t : terms) {
    total += t.weight * kernels::weighted_loss_sum_grad(t.loss, *cls, params,
                                                        t.P, t.T, t.w, g, exec);
    grad += t.weight * g;
  }
  return total;
}

double empirical_risk(const BregmanLoss& loss, const HypothesisClass& cls,
                      const Model& model, const TaskData& data, Exec exec) {
  if (data.n() == 0) throw DataError("empirical_risk: no labeled data");
  return kernels::weighted_loss_sum(loss, cls, model.params,
                                    cls.prepare(data.X), data.Y, Vec(), exec);
}

double empirical_discrepancy(const BregmanLoss& loss,
                             const HypothesisClass& cls, const Model& model,
                             const HypothesisClass& teacher_cls,
                             const Model& teacher, const Mat& XU, Exec exec) {
  if (XU.rows() == 0) throw DataError("empirical_discrepancy: no data");
  const Vec pseudo = kernels::predict(teacher_cls, teacher.params, XU, exec);
  return kernels::weighted_loss_sum(loss, cls, model.params, cls.prepare(XU),
                                    pseudo, Vec(), exec);
}

double scalarized_discrepancy(
    const Scalarization& s, const std::vector<BregmanLoss>& losses,
    const HypothesisClass& cls, const Model& model,
    const std::vector<std::pair<ClassPtr, Model>>& teachers,
    const MultiTaskData& data, Exec exec) {
  const int K = data.K();
  if (static_cast<int>(teachers.size()) != K || s.K() != K ||
      static_cast<int>(losses.size()) != K)
    throw DimensionError("scalarized_discrepancy: K mismatch");
  Vec d(K);
  for (int k = 0; k < K; ++k)
    d[k] = empirical_discrepancy(losses[k], cls, model, *teachers[k].first,
                                 teachers[k].second, data.tasks[k].XU, exec);
  return scalarize(s, d);
}

namespace {

void check_finite(double f, const Vec& g) {
  if (!std::isfinite(f)) throw NumericsError("minimize: non-finite objective");
  for (int i = 0; i < g.size(); ++i)
    if (!std::isfinite(g[i]))
      throw NumericsError("minimize: non-finite gradient");
}

FitReport minimize_smooth(const Objective& obj, Vec params,
                          const Tolerances& tol, Exec exec,
                          std::vector<double>* trace) {
  const double armijo = 1e-4;
  FitReport rep;
  double f = 0.0;
  Vec g;
  int iter = 0;
  // the first search starts at step 1; later searches warm-start at twice
  // the last accepted step so badly scaled objectives do not pay a full
  // halving cascade every iteration
  double t_start = 1.0;
  for (; iter < tol.max_iters; ++iter) {
    f = obj.value_grad(params, g, exec);
    check_finite(f, g);
    if (trace) trace->push_back(f);
    Vec cand = obj.cls->project(params - g, tol);
    const double gm = (params - cand).norm();
    rep.grad_map_norm = gm;
    if (gm <= tol.opt_rel_tol * (1.0 + std::abs(f))) {
      rep.converged = true;
      break;
    }
    double t = t_start;
    bool accepted = false;
    Vec trial = t == 1.0 ? std::move(cand) : obj.cls->project(params - t * g, tol);
    for (int ls = 0; ls < 80; ++ls) {
      if (ls > 0) trial = obj.cls->project(params - t * g, tol);
      const double ftrial = obj.value(trial, exec);
      const double dec = (trial - params).squaredNorm();
      if (ftrial < f - (armijo / t) * dec || (dec == 0.0 && ftrial <= f)) {
        params = std::move(trial);
        f = ftrial;
        accepted = true;
        t_start = 2.0 * t;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;  // no descent direction left at this scale
  }
  rep.iterations = iter;
  rep.objective = f;
  rep.model = Model{obj.cls->id(), std::move(params)};
  return rep;
}

FitReport minimize_tchebycheff(const Objective& obj, Vec params,
                               const Tolerances& tol, Exec exec,
                               std::vector<double>* trace) {
  FitReport rep;
  Vec best_params = params;
  double best_f = std::numeric_limits<double>::infinity();
  Vec g;
  int iter = 0;
  for (; iter < tol.max_iters; ++iter) {
    const double f = obj.value_grad(params, g, exec);
    check_finite(f, g);
    if (trace) trace->push_back(f);
    if (f < best_f) {
      best_f = f;
      best_params = params;
    }
    Vec cand = obj.cls->project(params - g, tol);
    const double gm = (params - cand).norm();
    if (gm <= tol.opt_rel_tol * (1.0 + std::abs(f))) break;
    const double step = 1.0 / std::sqrt(static_cast<double>(iter + 1));
    params = obj.cls->project(params - step * g, tol);
  }
  // report the best visited point with its gradient map
  const double f = obj.value_grad(best_params, g, exec);
  Vec cand = obj.cls->project(best_params - g, tol);
  rep.grad_map_norm = (best_params - cand).norm();
  rep.converged = rep.grad_map_norm <= tol.opt_rel_tol * (1.0 + std::abs(f));
  rep.iterations = iter;
  rep.objective = f;
  rep.model = Model{obj.cls->id(), std::move(best_params)};
  return rep;
}

}  // namespace

FitReport minimize(const Objective& obj, const Model& init,
                   const Tolerances& tol, std::uint64_t seed, Exec exec,
                   std::vector<double>* trace) {
  obj.validate();
  tol.validate();
  (void)seed;  // smooth/subgradient paths are deterministic in the init
  Vec params = obj.cls->project(init.params, tol);
  if (obj.combine == ScalKind::Tchebycheff)
    return minimize_tchebycheff(obj, std::move(params), tol, exec, trace);
  return minimize_smooth(obj, std::move(params), tol, exec, trace);
}

FitReport fit_with_restarts(const Objective& obj, const Model& init,
                            const Tolerances& tol, std::uint64_t seed,
                            int restarts, Exec exec) {
  FitReport best = minimize(obj, init, tol, seed, exec);
  Rng rng = Rng(seed).derive(0x7e57a7);
  for (int r = 1; r < restarts; ++r) {
    Rng sub = rng.derive(static_cast<std::uint64_t>(r));
    Model m{obj.cls->id(), obj.cls->random_params(sub)};
    FitReport rep = minimize(obj, m, tol, seed, exec);
    if (rep.objective < best.objective) best = std::move(rep);
  }
  return best;
}

}  // namespace moltk
