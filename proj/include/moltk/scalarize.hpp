#pragma once

#include "moltk/core.hpp"

namespace moltk {

enum class ScalKind { Linear, Tchebycheff };

/// A scalarization s: R^K -> R; linear uses sum_k lambda_k v_k, Tchebycheff
/// uses max_k lambda_k v_k. In every trade-off code path these are applied to
/// excess risks or discrepancies, never raw risks.
struct Scalarization {
  ScalKind kind = ScalKind::Linear;
  WeightVector weights;

  int K() const { return weights.K(); }
};

double scalarize(const Scalarization& s, const Vec& v);

/// Finite discretization of the scalarization family S: all simplex lattice
/// points with denominator m-1 (includes every vertex).
struct WeightGrid {
  std::vector<WeightVector> weights;
  int K = 0;
  int m = 0;

  std::size_t size() const { return weights.size(); }
};

WeightGrid weight_grid(int K, int m);

std::string weights_to_string(const WeightVector& w);

}  // namespace moltk
