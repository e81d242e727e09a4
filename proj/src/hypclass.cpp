#include "moltk/hypclass.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace moltk {

using json = nlohmann::json;

bool HypothesisClass::member(const Vec& params, const Tolerances& tol) const {
  if (params.size() != param_dim()) return false;
  Vec proj = project(params, tol);
  return (proj - params).norm() <= tol.constraint_tol;
}

Vec HypothesisClass::random_params(Rng& rng) const {
  Vec raw(param_dim());
  for (int i = 0; i < raw.size(); ++i) raw[i] = rng.uniform(-1.0, 1.0);
  return project(std::move(raw), Tolerances{});
}

Mat HypothesisClass::prepare(const Mat& X) const { return X; }

double HypothesisClass::eval_prepared(const Vec& params, const Mat& P,
                                      int row) const {
  return evaluate(params, P.row(row));
}

void HypothesisClass::grad_axpy_prepared(const Vec& params, const Mat& P,
                                         int row, double a, Vec& acc) const {
  Vec g(param_dim());
  param_gradient(params, P.row(row), g);
  acc += a * g;
}

// ---------------------------------------------------------------------------
// polynomial features

int polynomial_feature_count(int d, int degree) {
  if (degree == 0) return d;  // identity map
  // C(d + degree, degree)
  long long p = 1;
  for (int i = 1; i <= degree; ++i) p = p * (d + i) / i;
  return static_cast<int>(p);
}

namespace {

void monomials_rec(const Eigen::Ref<const Vec>& x, int pos, int remaining,
                   double prefix, Vec& out, int& idx) {
  if (pos == x.size() - 1) {
    out[idx++] = prefix * std::pow(x[pos], remaining);
    return;
  }
  for (int e = remaining; e >= 0; --e)
    monomials_rec(x, pos + 1, remaining - e, prefix * std::pow(x[pos], e), out,
                  idx);
}

}  // namespace

Vec polynomial_features(const Eigen::Ref<const Vec>& x, int degree) {
  if (degree < 0) throw ConfigError("polynomial_features: degree >= 0");
  if (degree == 0) return x;
  const int d = static_cast<int>(x.size());
  Vec out(polynomial_feature_count(d, degree));
  int idx = 0;
  for (int g = 0; g <= degree; ++g) monomials_rec(x, 0, g, 1.0, out, idx);
  return out;
}

// ---------------------------------------------------------------------------
// LinearClass

LinearClass::LinearClass(int d, int degree, Ball ball, double radius, Link link,
                         double clip)
    : d_(d),
      degree_(degree),
      p_(polynomial_feature_count(d, degree)),
      ball_(ball),
      radius_(radius),
      link_(link),
      clip_(clip) {
  if (d < 1 || degree < 0 || radius <= 0.0)
    throw ConfigError("LinearClass: bad configuration");
  if (clip_ < 0.0 || clip_ >= 0.5) throw ConfigError("LinearClass: bad clip");
}

Vec LinearClass::features(const Eigen::Ref<const Vec>& x) const {
  if (x.size() != d_) throw DimensionError("LinearClass: input dimension");
  return polynomial_features(x, degree_);
}

double LinearClass::evaluate(const Vec& params,
                             const Eigen::Ref<const Vec>& x) const {
  if (params.size() != p_) throw DimensionError("LinearClass: param dimension");
  const double z = features(x).dot(params);
  if (link_ == Link::Identity) return z;
  const double s = 1.0 / (1.0 + std::exp(-z));
  return std::min(1.0 - clip_, std::max(clip_, s));
}

void LinearClass::param_gradient(const Vec& params,
                                 const Eigen::Ref<const Vec>& x,
                                 Vec& grad) const {
  grad = features(x);
  if (link_ == Link::Sigmoid) {
    const double z = grad.dot(params);
    const double s = 1.0 / (1.0 + std::exp(-z));
    grad *= s * (1.0 - s);
  }
}

Mat LinearClass::prepare(const Mat& X) const {
  Mat F(X.rows(), p_);
  for (int i = 0; i < X.rows(); ++i)
    F.row(i) = features(X.row(i)).transpose();
  return F;
}

double LinearClass::eval_prepared(const Vec& params, const Mat& P,
                                  int row) const {
  const double z = P.row(row).dot(params);
  if (link_ == Link::Identity) return z;
  const double s = 1.0 / (1.0 + std::exp(-z));
  return std::min(1.0 - clip_, std::max(clip_, s));
}

void LinearClass::grad_axpy_prepared(const Vec& params, const Mat& P, int row,
                                     double a, Vec& acc) const {
  if (link_ == Link::Sigmoid) {
    const double z = P.row(row).dot(params);
    const double s = 1.0 / (1.0 + std::exp(-z));
    a *= s * (1.0 - s);
  }
  acc += a * P.row(row).transpose();
}

namespace {

// Euclidean projection onto the l1 ball of the given radius (sort-based).
Vec project_l1(Vec v, double radius) {
  const double norm1 = v.cwiseAbs().sum();
  if (norm1 <= radius) return v;
  Vec u = v.cwiseAbs();
  std::sort(u.data(), u.data() + u.size(), std::greater<double>());
  double cssv = 0.0, theta = 0.0;
  int rho = 0;
  for (int i = 0; i < u.size(); ++i) {
    cssv += u[i];
    const double t = (cssv - radius) / static_cast<double>(i + 1);
    if (u[i] > t) {
      rho = i + 1;
      theta = t;
    }
  }
  (void)rho;
  for (int i = 0; i < v.size(); ++i) {
    const double mag = std::max(std::abs(v[i]) - theta, 0.0);
    v[i] = v[i] >= 0.0 ? mag : -mag;
  }
  return v;
}

}  // namespace

Vec LinearClass::project(Vec raw, const Tolerances&) const {
  if (raw.size() != p_) throw DimensionError("LinearClass: param dimension");
  if (ball_ == Ball::L2) {
    const double n = raw.norm();
    if (n > radius_) raw *= radius_ / n;
    return raw;
  }
  return project_l1(std::move(raw), radius_);
}

Vec LinearClass::random_params(Rng& rng) const {
  // uniform in the ball: direction x radius x u^(1/p)
  Vec g(p_);
  for (int i = 0; i < p_; ++i) g[i] = rng.normal();
  if (ball_ == Ball::L2) {
    g /= std::max(g.norm(), 1e-300);
    const double r =
        radius_ * std::pow(rng.uniform(), 1.0 / static_cast<double>(p_));
    return r * g;
  }
  Vec raw(p_);
  for (int i = 0; i < p_; ++i) raw[i] = rng.uniform(-radius_, radius_);
  return project_l1(std::move(raw), radius_);
}

std::string LinearClass::id() const {
  std::ostringstream os;
  os << "linear:d=" << d_ << ",deg=" << degree_
     << ",ball=" << (ball_ == Ball::L1 ? "l1" : "l2") << ",R=" << radius_
     << ",link=" << (link_ == Link::Identity ? "id" : "sigmoid");
  return os.str();
}

json LinearClass::descriptor() const {
  return json{{"type", "linear"},
              {"d", d_},
              {"degree", degree_},
              {"ball", ball_ == Ball::L1 ? "l1" : "l2"},
              {"radius", radius_},
              {"link", link_ == Link::Identity ? "identity" : "sigmoid"},
              {"clip", clip_}};
}

// ---------------------------------------------------------------------------
// GridLipschitzClass

GridLipschitzClass::GridLipschitzClass(int grid_size, double lipschitz,
                                       double lo, double hi)
    : m_(grid_size), lc_(lipschitz), lo_(lo), hi_(hi) {
  if (m_ < 2 || lc_ < 0.0 || !(hi_ > lo_))
    throw ConfigError("GridLipschitzClass: bad configuration");
}

double GridLipschitzClass::evaluate(const Vec& params,
                                    const Eigen::Ref<const Vec>& x) const {
  if (params.size() != m_)
    throw DimensionError("GridLipschitzClass: param dimension");
  if (x.size() != 1) throw DimensionError("GridLipschitzClass: input is 1-D");
  const double t = std::min(1.0, std::max(0.0, x[0])) * (m_ - 1);
  const int i = std::min(static_cast<int>(t), m_ - 2);
  const double w = t - i;
  return (1.0 - w) * params[i] + w * params[i + 1];
}

void GridLipschitzClass::param_gradient(const Vec&,
                                        const Eigen::Ref<const Vec>& x,
                                        Vec& grad) const {
  grad = Vec::Zero(m_);
  const double t = std::min(1.0, std::max(0.0, x[0])) * (m_ - 1);
  const int i = std::min(static_cast<int>(t), m_ - 2);
  const double w = t - i;
  grad[i] = 1.0 - w;
  grad[i + 1] = w;
}

Mat GridLipschitzClass::prepare(const Mat& X) const {
  if (X.cols() != 1) throw DimensionError("GridLipschitzClass: input is 1-D");
  Mat P(X.rows(), 2);
  for (int r = 0; r < X.rows(); ++r) {
    const double t = std::min(1.0, std::max(0.0, X(r, 0))) * (m_ - 1);
    const int i = std::min(static_cast<int>(t), m_ - 2);
    P(r, 0) = static_cast<double>(i);
    P(r, 1) = t - i;
  }
  return P;
}

double GridLipschitzClass::eval_prepared(const Vec& params, const Mat& P,
                                         int row) const {
  const int i = static_cast<int>(P(row, 0));
  const double w = P(row, 1);
  return (1.0 - w) * params[i] + w * params[i + 1];
}

void GridLipschitzClass::grad_axpy_prepared(const Vec&, const Mat& P, int row,
                                            double a, Vec& acc) const {
  const int i = static_cast<int>(P(row, 0));
  const double w = P(row, 1);
  acc[i] += a * (1.0 - w);
  acc[i + 1] += a * w;
}

double GridLipschitzClass::constraint_violation(const Vec& params) const {
  double viol = 0.0;
  const double cap = slope_cap();
  for (int i = 0; i < m_; ++i) {
    viol = std::max(viol, lo_ - params[i]);
    viol = std::max(viol, params[i] - hi_);
  }
  for (int i = 0; i + 1 < m_; ++i)
    viol = std::max(viol, std::abs(params[i + 1] - params[i]) - cap);
  return viol;
}

namespace {

// one linear piece of a nondecreasing derivative; pieces may jump upward at
// junctions (the value functions are convex but not C^1 once a stage argmin
// clamps at the box)
struct DerivSeg {
  double x0, x1, d0, d1;

  double at(double t) const {
    if (x1 <= x0) return d0;
    const double w = (t - x0) / (x1 - x0);
    return (1.0 - w) * d0 + w * d1;
  }
};

void clip_shift(const std::vector<DerivSeg>& segs, double lo, double hi,
                double delta, std::vector<DerivSeg>& out) {
  if (hi <= lo) return;
  for (const auto& s : segs) {
    const double a = std::max(s.x0, lo);
    const double b = std::min(s.x1, hi);
    if (b <= a) continue;
    out.push_back(DerivSeg{a + delta, b + delta, s.at(a), s.at(b)});
  }
}

}  // namespace

Vec GridLipschitzClass::project(Vec raw, const Tolerances&) const {
  if (raw.size() != m_)
    throw DimensionError("GridLipschitzClass: param dimension");
  const double cap = slope_cap();

  // Exact projection by dynamic programming over the chain. The stage value
  // functions V_i(t) = min over feasible prefixes ending at v_i = t of
  // (1/2) sum_{j<=i} (v_j - raw_j)^2 are convex on the box, so their
  // derivatives are nondecreasing and piecewise linear; the sliding-window
  // minimum over |v_{i+1} - v_i| <= cap shifts the negative part right by
  // cap, the positive part left by cap, and flattens in between, and each
  // data term adds the line (t - raw_i).
  std::vector<DerivSeg> segs = {DerivSeg{lo_, hi_, 0.0, 0.0}}, next;
  std::vector<double> stage_argmin(m_);

  auto argmin_on_box = [&]() {
    for (const auto& s : segs) {
      if (s.d0 >= 0.0) return s.x0;  // includes upward jumps at junctions
      if (s.d1 > 0.0)
        return s.x0 + (s.x1 - s.x0) * (-s.d0) / (s.d1 - s.d0);
    }
    return hi_;
  };

  for (int i = 0; i < m_; ++i) {
    if (i > 0) {
      const double mstar = stage_argmin[i - 1];
      const double f0 = std::max(lo_, mstar - cap);
      const double f1 = std::min(hi_, mstar + cap);
      next.clear();
      clip_shift(segs, lo_ + cap, mstar, -cap, next);
      if (f1 > f0) next.push_back(DerivSeg{f0, f1, 0.0, 0.0});
      clip_shift(segs, mstar, hi_ - cap, cap, next);
      segs.swap(next);
      if (segs.empty()) segs.push_back(DerivSeg{lo_, hi_, 0.0, 0.0});
    }
    for (auto& s : segs) {
      s.d0 += s.x0 - raw[i];
      s.d1 += s.x1 - raw[i];
    }
    stage_argmin[i] = argmin_on_box();
  }

  Vec out(m_);
  out[m_ - 1] = stage_argmin[m_ - 1];
  for (int i = m_ - 2; i >= 0; --i)
    out[i] = std::min(std::max(stage_argmin[i], out[i + 1] - cap),
                      out[i + 1] + cap);
  return out;
}

Vec GridLipschitzClass::project_dykstra(Vec raw, const Tolerances& tol) const {
  if (raw.size() != m_)
    throw DimensionError("GridLipschitzClass: param dimension");
  const double cap = slope_cap();
  // textbook cyclic Dykstra over the box and the m-1 pairwise slope sets;
  // slow on long chains, kept as the reference the exact DP projection is
  // tested against
  Vec v = std::move(raw);
  Vec box_corr = Vec::Zero(m_);
  Mat pair_corr = Mat::Zero(m_ - 1, 2);
  Vec prev = v;
  for (int cycle = 0; cycle < tol.max_iters; ++cycle) {
    {
      Vec y = v + box_corr;
      Vec proj = y.cwiseMax(lo_).cwiseMin(hi_);
      box_corr = y - proj;
      v = std::move(proj);
    }
    for (int i = 0; i + 1 < m_; ++i) {
      double a = v[i] + pair_corr(i, 0);
      double b = v[i + 1] + pair_corr(i, 1);
      double pa = a, pb = b;
      const double diff = b - a;
      if (diff > cap) {
        const double shift = 0.5 * (diff - cap);
        pa = a + shift;
        pb = b - shift;
      } else if (diff < -cap) {
        const double shift = 0.5 * (-cap - diff);
        pa = a - shift;
        pb = b + shift;
      }
      pair_corr(i, 0) = a - pa;
      pair_corr(i, 1) = b - pb;
      v[i] = pa;
      v[i + 1] = pb;
    }
    // feasibility alone is not enough: Dykstra iterates can pass through the
    // set long before the correction terms settle
    if (constraint_violation(v) <= tol.constraint_tol &&
        (v - prev).lpNorm<Eigen::Infinity>() <= 0.01 * tol.constraint_tol)
      return v;
    prev = v;
  }
  throw ProjectionError("GridLipschitzClass: Dykstra did not converge");
}

Vec GridLipschitzClass::random_params(Rng& rng) const {
  Vec raw(m_);
  for (int i = 0; i < m_; ++i) raw[i] = rng.uniform(lo_, hi_);
  return project(std::move(raw), Tolerances{});
}

std::string GridLipschitzClass::id() const {
  std::ostringstream os;
  os << "grid:m=" << m_ << ",L=" << lc_;
  return os.str();
}

json GridLipschitzClass::descriptor() const {
  return json{{"type", "grid_lipschitz"},
              {"m", m_},
              {"lipschitz", lc_},
              {"lo", lo_},
              {"hi", hi_}};
}

// ---------------------------------------------------------------------------
// FiniteClass

FiniteClass::FiniteClass(Mat points, std::vector<double> outputs)
    : points_(std::move(points)), outputs_(std::move(outputs)) {
  if (points_.rows() < 1 || outputs_.size() < 1)
    throw ConfigError("FiniteClass: empty domain or output set");
  std::sort(outputs_.begin(), outputs_.end());
  outputs_.erase(std::unique(outputs_.begin(), outputs_.end()),
                 outputs_.end());
}

int FiniteClass::point_index(const Eigen::Ref<const Vec>& x) const {
  if (x.size() != points_.cols())
    throw DimensionError("FiniteClass: input dimension");
  for (int m = 0; m < points_.rows(); ++m)
    if ((points_.row(m).transpose() - x).lpNorm<Eigen::Infinity>() <= 1e-9)
      return m;
  throw DomainError("FiniteClass: point not in domain");
}

double FiniteClass::evaluate(const Vec& params,
                             const Eigen::Ref<const Vec>& x) const {
  if (params.size() != param_dim())
    throw DimensionError("FiniteClass: param dimension");
  return params[point_index(x)];
}

void FiniteClass::param_gradient(const Vec&, const Eigen::Ref<const Vec>&,
                                 Vec&) const {
  throw UnsupportedError("FiniteClass: discrete class has no gradient");
}

Mat FiniteClass::prepare(const Mat& X) const {
  Mat P(X.rows(), 1);
  for (int r = 0; r < X.rows(); ++r)
    P(r, 0) = static_cast<double>(point_index(X.row(r)));
  return P;
}

double FiniteClass::eval_prepared(const Vec& params, const Mat& P,
                                  int row) const {
  return params[static_cast<int>(P(row, 0))];
}

Vec FiniteClass::project(Vec raw, const Tolerances&) const {
  if (raw.size() != param_dim())
    throw DimensionError("FiniteClass: param dimension");
  for (int i = 0; i < raw.size(); ++i) {
    double best = outputs_[0];
    double bd = std::abs(raw[i] - best);
    for (double o : outputs_) {
      const double d = std::abs(raw[i] - o);
      if (d < bd) {
        bd = d;
        best = o;
      }
    }
    raw[i] = best;
  }
  return raw;
}

Vec FiniteClass::random_params(Rng& rng) const {
  Vec p(param_dim());
  for (int i = 0; i < p.size(); ++i)
    p[i] = outputs_[rng.uniform_int(outputs_.size())];
  return p;
}

std::size_t FiniteClass::candidate_count() const {
  const double bits =
      points_.rows() * std::log2(static_cast<double>(outputs_.size()));
  if (bits > 20.0)
    throw BudgetError("FiniteClass: enumeration budget exceeded (> 2^20)");
  std::size_t c = 1;
  for (int i = 0; i < points_.rows(); ++i) c *= outputs_.size();
  return c;
}

Vec FiniteClass::candidate(std::size_t c) const {
  const int M = param_dim();
  const std::size_t O = outputs_.size();
  Vec p(M);
  for (int m = M - 1; m >= 0; --m) {
    p[m] = outputs_[c % O];
    c /= O;
  }
  return p;
}

std::string FiniteClass::id() const {
  std::ostringstream os;
  os << "finite:M=" << points_.rows() << ",O=" << outputs_.size();
  return os.str();
}

json FiniteClass::descriptor() const {
  json pts = json::array();
  for (int m = 0; m < points_.rows(); ++m) {
    json row = json::array();
    for (int j = 0; j < points_.cols(); ++j) row.push_back(points_(m, j));
    pts.push_back(row);
  }
  return json{{"type", "finite"}, {"points", pts}, {"outputs", outputs_}};
}

// ---------------------------------------------------------------------------
// nesting, serialization

Vec embed_params(const HypothesisClass& from, const HypothesisClass& to,
                 const Vec& params) {
  if (&from == &to) return params;
  if (auto* lf = dynamic_cast<const LinearClass*>(&from)) {
    auto* lt = dynamic_cast<const LinearClass*>(&to);
    if (!lt || lf->input_dim() != lt->input_dim() || lf->link() != lt->link() ||
        lf->ball() != lt->ball() || lf->radius() > lt->radius() + 1e-12)
      throw UnsupportedError("embed_params: classes are not nested");
    Vec out = Vec::Zero(lt->param_dim());
    if (lf->degree() == 0) {
      if (lt->degree() < 1)
        throw UnsupportedError("embed_params: classes are not nested");
      // identity features map onto the degree-1 monomials, which sit right
      // after the constant in graded-lex order
      out.segment(1, lf->input_dim()) = params;
    } else {
      if (lf->degree() > lt->degree())
        throw UnsupportedError("embed_params: classes are not nested");
      // lower-degree monomials are a prefix of the higher-degree ordering
      out.head(lf->param_dim()) = params;
    }
    return out;
  }
  if (auto* gf = dynamic_cast<const GridLipschitzClass*>(&from)) {
    auto* gt = dynamic_cast<const GridLipschitzClass*>(&to);
    if (!gt || gf->grid_size() != gt->grid_size() ||
        gf->lipschitz() > gt->lipschitz() + 1e-12)
      throw UnsupportedError("embed_params: classes are not nested");
    return params;
  }
  if (auto* ff = dynamic_cast<const FiniteClass*>(&from)) {
    auto* ft = dynamic_cast<const FiniteClass*>(&to);
    if (!ft || ff->points().rows() != ft->points().rows() ||
        (ff->points() - ft->points()).norm() > 1e-12)
      throw UnsupportedError("embed_params: classes are not nested");
    return params;
  }
  throw UnsupportedError("embed_params: unknown class pair");
}

std::function<double(const Vec&)> model_fn(ClassPtr cls, Model model) {
  return [cls, model = std::move(model)](const Vec& x) {
    return cls->evaluate(model.params, x);
  };
}

json model_to_json(const HypothesisClass& cls, const Model& m) {
  json j;
  j["class"] = cls.descriptor();
  j["params"] = std::vector<double>(m.params.data(),
                                    m.params.data() + m.params.size());
  return j;
}

Model model_from_json(const json& j) {
  const auto& arr = j.at("params");
  Vec p(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) p[i] = arr[i].get<double>();
  ClassPtr cls = class_from_descriptor(j.at("class"));
  return Model{cls->id(), std::move(p)};
}

ClassPtr class_from_descriptor(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "linear") {
    return std::make_shared<LinearClass>(
        j.at("d").get<int>(), j.at("degree").get<int>(),
        j.at("ball").get<std::string>() == "l1" ? Ball::L1 : Ball::L2,
        j.at("radius").get<double>(),
        j.at("link").get<std::string>() == "identity" ? Link::Identity
                                                      : Link::Sigmoid,
        j.value("clip", 1e-6));
  }
  if (type == "grid_lipschitz") {
    return std::make_shared<GridLipschitzClass>(
        j.at("m").get<int>(), j.at("lipschitz").get<double>(),
        j.value("lo", 0.0), j.value("hi", 1.0));
  }
  if (type == "finite") {
    const auto& pts = j.at("points");
    const int M = static_cast<int>(pts.size());
    const int d = static_cast<int>(pts.at(0).size());
    Mat points(M, d);
    for (int m = 0; m < M; ++m)
      for (int c = 0; c < d; ++c) points(m, c) = pts[m][c].get<double>();
    return std::make_shared<FiniteClass>(
        std::move(points), j.at("outputs").get<std::vector<double>>());
  }
  throw ConfigError("class_from_descriptor: unknown type " + type);
}

}  // namespace moltk
