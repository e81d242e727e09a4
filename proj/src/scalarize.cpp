#include "moltk/scalarize.hpp"

#include <cmath>
#include <cstdio>

namespace moltk {

double scalarize(const Scalarization& s, const Vec& v) {
  const int K = s.K();
  if (v.size() != K) throw DimensionError("scalarize: length mismatch");
  const Vec& lam = s.weights.lambda;
  if (s.kind == ScalKind::Tchebycheff) {
    double best = lam[0] * v[0];
    for (int k = 1; k < K; ++k) best = std::max(best, lam[k] * v[k]);
    return best;
  }
  // Neumaier-compensated sum keeps the linear scalarization within a couple
  // of ulps, which the Eq.-style algebraic contracts are tested against.
  double sum = 0.0, comp = 0.0;
  for (int k = 0; k < K; ++k) {
    const double term = lam[k] * v[k];
    const double t = sum + term;
    if (std::abs(sum) >= std::abs(term))
      comp += (sum - t) + term;
    else
      comp += (term - t) + sum;
    sum = t;
  }
  return sum + comp;
}

namespace {

void lattice_rec(int K, int denom, int pos, int remaining, std::vector<int>& c,
                 std::vector<WeightVector>& out) {
  if (pos == K - 1) {
    c[pos] = remaining;
    Vec lam(K);
    for (int k = 0; k < K; ++k)
      lam[k] = static_cast<double>(c[k]) / static_cast<double>(denom);
    out.push_back(WeightVector::make(std::move(lam)));
    return;
  }
  for (int v = 0; v <= remaining; ++v) {
    c[pos] = v;
    lattice_rec(K, denom, pos + 1, remaining - v, c, out);
  }
}

}  // namespace

WeightGrid weight_grid(int K, int m) {
  if (K < 1) throw ConfigError("weight_grid: K >= 1 required");
  if (m < 2) throw ConfigError("weight_grid: m >= 2 required");
  WeightGrid g;
  g.K = K;
  g.m = m;
  if (K == 1) {
    Vec one(1);
    one[0] = 1.0;
    g.weights.push_back(WeightVector::make(one));
    return g;
  }
  std::vector<int> c(K, 0);
  lattice_rec(K, m - 1, 0, m - 1, c, g.weights);
  return g;
}

std::string weights_to_string(const WeightVector& w) {
  std::string out;
  char buf[40];
  for (int k = 0; k < w.K(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", w.lambda[k]);
    if (k) out += ';';
    out += buf;
  }
  return out;
}

}  // namespace moltk
