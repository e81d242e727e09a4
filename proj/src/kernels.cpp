#include "moltk/kernels.hpp"

#include "moltk/omp_guard.hpp"

#include <cmath>

namespace moltk::kernels {

namespace {

int block_count(int n) { return (n + kBlock - 1) / kBlock; }

using detail::OmpGuard;

double sample_weight(const Vec& w, int i, int n) {
  return w.size() == 0 ? 1.0 / static_cast<double>(n) : w[i];
}

void check_inputs(const HypothesisClass& cls, const Vec& params, const Mat& P,
                  int t_rows) {
  if (P.rows() == 0) throw DataError("kernel: empty data");
  if (P.rows() != t_rows) throw DimensionError("kernel: target row mismatch");
  if (params.size() != cls.param_dim())
    throw DimensionError("kernel: param dimension");
}

}  // namespace

Vec predict_prepared(const HypothesisClass& cls, const Vec& params,
                     const Mat& P, Exec exec) {
  if (params.size() != cls.param_dim())
    throw DimensionError("predict: param dimension");
  const int n = static_cast<int>(P.rows());
  Vec out(n);
  if (exec == Exec::Serial || n <= kBlock) {
    for (int i = 0; i < n; ++i) out[i] = cls.eval_prepared(params, P, i);
    return out;
  }
  OmpGuard guard;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i)
    guard.run([&] { out[i] = cls.eval_prepared(params, P, i); });
  guard.rethrow();
  return out;
}

Vec predict(const HypothesisClass& cls, const Vec& params, const Mat& X,
            Exec exec) {
  return predict_prepared(cls, params, cls.prepare(X), exec);
}

double weighted_loss_sum(const BregmanLoss& loss, const HypothesisClass& cls,
                         const Vec& params, const Mat& P, const Mat& T,
                         const Vec& w, Exec exec) {
  check_inputs(cls, params, P, static_cast<int>(T.rows()));
  if (T.cols() != 1)
    throw UnsupportedError("kernel: scalar-output classes require q == 1");
  const int n = static_cast<int>(P.rows());

  auto block_sum = [&](int begin, int end) {
    double acc = 0.0;
    for (int i = begin; i < end; ++i) {
      const double yhat = cls.eval_prepared(params, P, i);
      acc += sample_weight(w, i, n) * loss.divergence1(T(i, 0), yhat);
    }
    return acc;
  };

  if (exec == Exec::Serial) return block_sum(0, n);

  const int nb = block_count(n);
  if (nb == 1) return block_sum(0, n);  // identical reduction order
  Vec partial(nb);
  OmpGuard guard;
#pragma omp parallel for schedule(static)
  for (int b = 0; b < nb; ++b)
    guard.run([&] {
      partial[b] = block_sum(b * kBlock, std::min(n, (b + 1) * kBlock));
    });
  guard.rethrow();
  double total = 0.0;
  for (int b = 0; b < nb; ++b) total += partial[b];
  return total;
}

double weighted_loss_sum_grad(const BregmanLoss& loss,
                              const HypothesisClass& cls, const Vec& params,
                              const Mat& P, const Mat& T, const Vec& w,
                              Vec& grad_out, Exec exec) {
  check_inputs(cls, params, P, static_cast<int>(T.rows()));
  if (T.cols() != 1)
    throw UnsupportedError("kernel: scalar-output classes require q == 1");
  const int n = static_cast<int>(P.rows());
  const int p = cls.param_dim();

  auto block_sum = [&](int begin, int end, Vec& gacc) {
    double acc = 0.0;
    for (int i = begin; i < end; ++i) {
      const double yhat = cls.eval_prepared(params, P, i);
      const double wi = sample_weight(w, i, n);
      acc += wi * loss.divergence1(T(i, 0), yhat);
      cls.grad_axpy_prepared(params, P, i, wi * loss.grad_second1(T(i, 0), yhat),
                             gacc);
    }
    return acc;
  };

  if (exec == Exec::Serial) {
    grad_out = Vec::Zero(p);
    return block_sum(0, n, grad_out);
  }

  const int nb = block_count(n);
  if (nb == 1) {
    grad_out = Vec::Zero(p);
    return block_sum(0, n, grad_out);
  }
  Vec partial(nb);
  Mat partial_grad = Mat::Zero(nb, p);
  OmpGuard guard;
#pragma omp parallel for schedule(static)
  for (int b = 0; b < nb; ++b)
    guard.run([&] {
      Vec gacc = Vec::Zero(p);
      partial[b] = block_sum(b * kBlock, std::min(n, (b + 1) * kBlock), gacc);
      partial_grad.row(b) = gacc.transpose();
    });
  guard.rethrow();
  double total = 0.0;
  grad_out = Vec::Zero(p);
  for (int b = 0; b < nb; ++b) {
    total += partial[b];
    grad_out += partial_grad.row(b).transpose();
  }
  return total;
}

double weighted_zero_one_sum(const HypothesisClass& cls, const Vec& params,
                             const Mat& P, const Vec& targets, const Vec& w,
                             Exec exec) {
  check_inputs(cls, params, P, static_cast<int>(targets.size()));
  const int n = static_cast<int>(P.rows());

  auto block_sum = [&](int begin, int end) {
    double acc = 0.0;
    for (int i = begin; i < end; ++i) {
      const double yhat = cls.eval_prepared(params, P, i);
      acc += sample_weight(w, i, n) * zero_one(targets[i], yhat);
    }
    return acc;
  };

  if (exec == Exec::Serial || block_count(n) == 1) return block_sum(0, n);

  const int nb = block_count(n);
  Vec partial(nb);
  OmpGuard guard;
#pragma omp parallel for schedule(static)
  for (int b = 0; b < nb; ++b)
    guard.run([&] {
      partial[b] = block_sum(b * kBlock, std::min(n, (b + 1) * kBlock));
    });
  guard.rethrow();
  double total = 0.0;
  for (int b = 0; b < nb; ++b) total += partial[b];
  return total;
}

}  // namespace moltk::kernels
