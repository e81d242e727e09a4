#include "moltk/mol.hpp"

#include "moltk/omp_guard.hpp"

#include <cmath>

namespace moltk {

using kernels::Exec;

namespace {

void check_k(const MultiTaskData& data, std::size_t h, std::size_t l, int sk) {
  const int K = data.K();
  if (static_cast<int>(h) != K || static_cast<int>(l) != K || sk != K)
    throw DimensionError("mol: per-task argument count must match K");
}

Scalarization entry_s(ScalKind kind, const WeightVector& w) {
  return Scalarization{kind, w};
}

/// err[m][o] tables for zero-one enumeration: weighted disagreement mass at
/// point m when predicting outputs()[o].
using ErrTable = std::vector<Mat>;  // one M x O matrix per task

Vec enumerate_min(const FiniteClass& G, const ErrTable& err,
                  const Scalarization& s, bool* degenerate,
                  double* value_out = nullptr) {
  const int K = static_cast<int>(err.size());
  const int M = G.param_dim();
  const int O = static_cast<int>(G.outputs().size());
  const std::size_t total = G.candidate_count();
  Vec risks(K);
  double best = std::numeric_limits<double>::infinity();
  bool tie = false;
  Vec best_params;
  std::vector<int> digits(M, 0);
  for (std::size_t c = 0; c < total; ++c) {
    for (int k = 0; k < K; ++k) {
      double r = 0.0;
      for (int m = 0; m < M; ++m) r += err[k](m, digits[m]);
      risks[k] = r;
    }
    const double val = scalarize(s, risks);
    if (val < best - 1e-15) {
      best = val;
      best_params = G.candidate(c);
      tie = false;
    } else if (val <= best + 1e-15) {
      tie = true;
    }
    for (int m = M - 1; m >= 0; --m) {
      if (++digits[m] < O) break;
      digits[m] = 0;
    }
  }
  if (degenerate) *degenerate = tie;
  if (value_out) *value_out = best;
  return best_params;
}

ErrTable empirical_zero_one_tables(const MultiTaskData& data,
                                   const FiniteClass& G) {
  const int K = data.K();
  const int M = G.param_dim();
  const int O = static_cast<int>(G.outputs().size());
  ErrTable err(K, Mat::Zero(M, O));
  for (int k = 0; k < K; ++k) {
    const auto& t = data.tasks[k];
    if (t.n() == 0) throw DataError("mol: empty labeled data");
    const double inv_n = 1.0 / t.n();
    for (int i = 0; i < t.n(); ++i) {
      const int m = G.point_index(t.X.row(i));
      const double y = t.Y(i, 0);
      for (int o = 0; o < O; ++o)
        err[k](m, o) += inv_n * zero_one(y, G.outputs()[o]);
    }
  }
  return err;
}

}  // namespace

TradeoffSolution pl_mol(const MultiTaskData& data,
                        const std::vector<ClassPtr>& H, const ClassPtr& G,
                        const std::vector<BregmanLoss>& losses, ScalKind kind,
                        const WeightGrid& S, const Tolerances& tol,
                        std::uint64_t seed, const MolOptions& opt) {
  data.validate();
  check_k(data, H.size(), losses.size(), data.K());
  if (S.weights.empty()) throw ConfigError("pl_mol: empty weight grid");
  const int K = data.K();
  for (const auto& t : data.tasks) {
    if (t.n() == 0) throw DataError("pl_mol: labeled data required per task");
    if (t.N() == 0) throw DataError("pl_mol: unlabeled data required per task");
  }

  TradeoffSolution sol;
  sol.kind = kind;
  sol.seed = seed;
  Rng rng(seed);

  // stage 1: per-task ERM teachers, fit independently (and in parallel)
  std::vector<Model> teachers(K);
  detail::OmpGuard guard1;
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < K; ++k) {
    guard1.run([&, k] {
      Objective obj;
      obj.cls = H[k];
      obj.terms.push_back(
          make_term(losses[k], *H[k], data.tasks[k].X, data.tasks[k].Y));
      Model init{H[k]->id(),
                 H[k]->project(Vec::Zero(H[k]->param_dim()), tol)};
      teachers[k] = fit_with_restarts(obj, init, tol,
                                      rng.derive(100 + k).next_u64(),
                                      opt.restarts, opt.exec)
                        .model;
    });
  }
  guard1.rethrow();

  // pseudo-labels and prepared caches, once per task, shared across weights
  std::vector<ObjectiveTerm> base(K);
  std::vector<Vec> embedded(K);
  for (int k = 0; k < K; ++k) {
    Mat X = data.tasks[k].XU;
    if (opt.reuse_labeled_covariates) {
      Mat both(X.rows() + data.tasks[k].X.rows(), X.cols());
      both << X, data.tasks[k].X;
      X = std::move(both);
    }
    const Vec pseudo = kernels::predict(*H[k], teachers[k].params, X, opt.exec);
    base[k] = make_term(losses[k], *G, std::move(X), Mat(pseudo));
    embedded[k] = embed_params(*H[k], *G, teachers[k].params);
  }

  // stage 2: one fit per scalarization, warm-started at the weighted
  // embedded teachers
  sol.entries.resize(S.size());
  detail::OmpGuard guard2;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t w = 0; w < S.size(); ++w) {
    guard2.run([&, w] {
      const WeightVector& lam = S.weights[w];
      Objective obj;
      obj.cls = G;
      obj.combine = kind;
      for (int k = 0; k < K; ++k) {
        ObjectiveTerm term = base[k];
        term.weight = lam.lambda[k];
        obj.terms.push_back(std::move(term));
      }
      Vec warm = Vec::Zero(G->param_dim());
      for (int k = 0; k < K; ++k) warm += lam.lambda[k] * embedded[k];
      FitReport rep =
          fit_with_restarts(obj, Model{G->id(), G->project(warm, tol)}, tol,
                            rng.derive(200 + w).next_u64(), opt.restarts,
                            opt.exec);
      sol.entries[w] = TradeoffEntry{lam, rep.model, std::move(rep), false};
    });
  }
  guard2.rethrow();
  sol.teachers = std::move(teachers);
  return sol;
}

TradeoffSolution erm_mol(const MultiTaskData& data, const ClassPtr& G,
                         const std::vector<BregmanLoss>& losses, ScalKind kind,
                         const WeightGrid& S, const Tolerances& tol,
                         std::uint64_t seed, const MolOptions& opt) {
  data.validate();
  if (static_cast<int>(losses.size()) != data.K())
    throw DimensionError("erm_mol: losses per task");
  if (S.weights.empty()) throw ConfigError("erm_mol: empty weight grid");
  const int K = data.K();
  for (const auto& t : data.tasks)
    if (t.n() == 0) throw DataError("erm_mol: labeled data required per task");

  TradeoffSolution sol;
  sol.kind = kind;
  sol.seed = seed;
  Rng rng(seed);

  std::vector<ObjectiveTerm> base(K);
  for (int k = 0; k < K; ++k)
    base[k] = make_term(losses[k], *G, data.tasks[k].X, data.tasks[k].Y);

  sol.entries.resize(S.size());
  detail::OmpGuard guard;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t w = 0; w < S.size(); ++w) {
    guard.run([&, w] {
      const WeightVector& lam = S.weights[w];
      Objective obj;
      obj.cls = G;
      obj.combine = kind;
      for (int k = 0; k < K; ++k) {
        ObjectiveTerm term = base[k];
        term.weight = lam.lambda[k];
        obj.terms.push_back(std::move(term));
      }
      Model init{G->id(), G->project(Vec::Zero(G->param_dim()), tol)};
      FitReport rep = fit_with_restarts(obj, init, tol,
                                        rng.derive(300 + w).next_u64(),
                                        opt.restarts, opt.exec);
      sol.entries[w] = TradeoffEntry{lam, rep.model, std::move(rep), false};
    });
  }
  guard.rethrow();
  return sol;
}

TradeoffSolution erm_mol_zero_one(const MultiTaskData& data,
                                  const std::shared_ptr<const FiniteClass>& G,
                                  ScalKind kind, const WeightGrid& S) {
  data.validate();
  if (S.weights.empty())
    throw ConfigError("erm_mol_zero_one: empty weight grid");
  const ErrTable err = empirical_zero_one_tables(data, *G);
  TradeoffSolution sol;
  sol.kind = kind;
  for (const auto& lam : S.weights) {
    bool degenerate = false;
    TradeoffEntry e;
    Vec params = enumerate_min(*G, err, entry_s(kind, lam), &degenerate,
                               &e.report.objective);
    e.weights = lam;
    e.model = Model{G->id(), std::move(params)};
    e.report.model = e.model;
    e.report.converged = true;
    e.degenerate = degenerate;
    sol.entries.push_back(std::move(e));
  }
  return sol;
}

TradeoffSolution pl_mol_zero_one(const MultiTaskData& data,
                                 const std::vector<ClassPtr>& Theta,
                                 const std::shared_ptr<const FiniteClass>& G,
                                 ScalKind kind, const WeightGrid& S,
                                 const Tolerances& tol, std::uint64_t seed,
                                 const MolOptions& opt) {
  data.validate();
  check_k(data, Theta.size(), Theta.size(), data.K());
  const int K = data.K();
  for (const auto& t : data.tasks)
    for (int i = 0; i < t.n(); ++i)
      if (t.Y(i, 0) != 0.0 && t.Y(i, 0) != 1.0)
        throw DomainError("pl_mol_zero_one: labels must be binary");

  TradeoffSolution sol;
  sol.kind = kind;
  sol.seed = seed;
  Rng rng(seed);

  // stage 1: squared-loss regression teachers over Theta_k
  const BregmanLoss sq = make_square_loss(1);
  std::vector<Model> thetas(K);
  for (int k = 0; k < K; ++k) {
    Objective obj;
    obj.cls = Theta[k];
    obj.terms.push_back(
        make_term(sq, *Theta[k], data.tasks[k].X, data.tasks[k].Y));
    Model init{Theta[k]->id(),
               Theta[k]->project(Vec::Constant(Theta[k]->param_dim(), 0.5),
                                 tol)};
    thetas[k] = fit_with_restarts(obj, init, tol,
                                  rng.derive(400 + k).next_u64(), opt.restarts,
                                  opt.exec)
                    .model;
  }

  // stage 2 tables: weighted disagreement with the thresholded teacher
  const int M = G->param_dim();
  const int O = static_cast<int>(G->outputs().size());
  ErrTable err(K, Mat::Zero(M, O));
  for (int k = 0; k < K; ++k) {
    const auto& t = data.tasks[k];
    if (t.N() == 0)
      throw DataError("pl_mol_zero_one: unlabeled data required per task");
    const Vec theta_hat =
        kernels::predict(*Theta[k], thetas[k].params, t.XU, opt.exec);
    const double inv_n = 1.0 / t.N();
    for (int i = 0; i < t.N(); ++i) {
      const int m = G->point_index(t.XU.row(i));
      const double th = std::min(1.0, std::max(0.0, theta_hat[i]));
      const double conf = std::abs(2.0 * th - 1.0);
      const double hard = th >= 0.5 ? 1.0 : 0.0;
      for (int o = 0; o < O; ++o)
        err[k](m, o) += inv_n * conf * std::abs(G->outputs()[o] - hard);
    }
  }

  for (const auto& lam : S.weights) {
    bool degenerate = false;
    TradeoffEntry e;
    Vec params = enumerate_min(*G, err, entry_s(kind, lam), &degenerate,
                               &e.report.objective);
    e.weights = lam;
    e.model = Model{G->id(), std::move(params)};
    e.report.model = e.model;
    e.report.converged = true;
    e.degenerate = degenerate;
    sol.entries.push_back(std::move(e));
  }
  sol.teachers = std::move(thetas);
  return sol;
}

namespace {

MultiTaskData coin_data(int n, double p1, double p2, std::uint64_t seed) {
  Rng rng = Rng(seed).derive(0xc014);
  MultiTaskData data;
  const double ps[2] = {p1, p2};
  for (int k = 0; k < 2; ++k) {
    TaskData t;
    t.task_id = k + 1;
    t.X = Mat::Zero(n, 1);
    t.Y = Mat(n, 1);
    Rng stream = rng.derive(k);
    for (int i = 0; i < n; ++i) t.Y(i, 0) = stream.bernoulli(ps[k]) ? 1.0 : 0.0;
    t.XU = Mat::Zero(1, 1);  // unlabeled data has no effect on {x0}
    data.tasks.push_back(std::move(t));
  }
  return data;
}

double coin_population_excess(int y, const WeightVector& lam, double p1,
                              double p2) {
  auto raw = [&](double v) {
    return lam.lambda[0] * ((1.0 - v) * p1 + v * (1.0 - p1)) +
           lam.lambda[1] * ((1.0 - v) * p2 + v * (1.0 - p2));
  };
  return raw(y) - std::min(raw(0.0), raw(1.0));
}

}  // namespace

CoinResult coin_example_pl(int n, const WeightVector& lambda, double p1,
                           double p2, std::uint64_t seed) {
  if (!(p1 >= 0.0 && p1 <= 1.0 && p2 >= 0.0 && p2 <= 1.0))
    throw DomainError("coin_example_pl: probabilities in [0,1]");
  MultiTaskData data = coin_data(n, p1, p2, seed);
  auto G = std::make_shared<FiniteClass>(Mat::Zero(1, 1),
                                         std::vector<double>{0.0, 1.0});
  // stage 1: per-task zero-one ERM over {0,1} by enumeration
  const ErrTable err = empirical_zero_one_tables(data, *G);
  std::vector<Model> teachers;
  for (int k = 0; k < 2; ++k) {
    Vec ek = Vec::Zero(2);
    ek[k] = 1.0;
    Scalarization s{ScalKind::Linear, WeightVector::make(ek)};
    teachers.push_back(Model{G->id(), enumerate_min(*G, err, s, nullptr)});
  }
  // stage 2: minimize the scalarized zero-one discrepancy to the teachers on
  // the single-point domain
  ErrTable disc(2, Mat::Zero(1, 2));
  for (int k = 0; k < 2; ++k)
    for (int o = 0; o < 2; ++o)
      disc[k](0, o) = zero_one(teachers[k].params[0], G->outputs()[o]);
  Scalarization s{ScalKind::Linear, lambda};
  const Vec params = enumerate_min(*G, disc, s, nullptr);
  const int yhat = static_cast<int>(params[0]);
  return CoinResult{yhat, coin_population_excess(yhat, lambda, p1, p2)};
}

CoinResult coin_example_erm(int n, const WeightVector& lambda, double p1,
                            double p2, std::uint64_t seed) {
  MultiTaskData data = coin_data(n, p1, p2, seed);
  auto G = std::make_shared<FiniteClass>(Mat::Zero(1, 1),
                                         std::vector<double>{0.0, 1.0});
  const ErrTable err = empirical_zero_one_tables(data, *G);
  Scalarization s{ScalKind::Linear, lambda};
  const Vec params = enumerate_min(*G, err, s, nullptr);
  const int yhat = static_cast<int>(params[0]);
  return CoinResult{yhat, coin_population_excess(yhat, lambda, p1, p2)};
}

nlohmann::json solution_to_json(const TradeoffSolution& sol,
                                const HypothesisClass& cls) {
  nlohmann::json j;
  j["kind"] = sol.kind == ScalKind::Linear ? "linear" : "tchebycheff";
  j["seed"] = sol.seed;
  j["config"] = sol.config;
  // stable fingerprint of the configuration snapshot (FNV-1a)
  const std::string cfg = sol.config.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : cfg) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  j["config_hash"] = h;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : sol.entries) {
    nlohmann::json je;
    je["weights"] = std::vector<double>(
        e.weights.lambda.data(), e.weights.lambda.data() + e.weights.K());
    je["model"] = model_to_json(cls, e.model);
    je["objective"] = e.report.objective;
    je["converged"] = e.report.converged;
    je["degenerate"] = e.degenerate;
    entries.push_back(std::move(je));
  }
  j["entries"] = std::move(entries);
  nlohmann::json teachers = nlohmann::json::array();
  for (const auto& t : sol.teachers) {
    nlohmann::json jt;
    jt["class_ref"] = t.class_ref;
    jt["params"] =
        std::vector<double>(t.params.data(), t.params.data() + t.params.size());
    teachers.push_back(std::move(jt));
  }
  j["teachers"] = std::move(teachers);
  return j;
}

}  // namespace moltk
