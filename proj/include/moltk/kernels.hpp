#pragma once

#include "moltk/hypclass.hpp"
#include "moltk/losses.hpp"

namespace moltk::kernels {

/// Execution policy for the data-parallel kernels. Parallel kernels reduce
/// over fixed-size blocks and combine partial sums in index order, so the
/// result is independent of the number of OpenMP threads; the serial twins
/// use a plain left-to-right loop and are kept as the reference the tests
/// compare against (agreement within rounding, not bitwise).
enum class Exec { Serial, Parallel };

inline constexpr int kBlock = 512;

/// Predictions of a scalar-output class on the rows of X.
Vec predict(const HypothesisClass& cls, const Vec& params, const Mat& X,
            Exec exec = Exec::Parallel);

/// Predictions given a prepared cache P = cls.prepare(X).
Vec predict_prepared(const HypothesisClass& cls, const Vec& params,
                     const Mat& P, Exec exec = Exec::Parallel);

/// sum_i w_i * loss(t_i, f(x_i)) over a prepared dataset; empty w means
/// uniform 1/n. Targets are the first column of T.
double weighted_loss_sum(const BregmanLoss& loss, const HypothesisClass& cls,
                         const Vec& params, const Mat& P, const Mat& T,
                         const Vec& w, Exec exec = Exec::Parallel);

/// Same sum plus its gradient in the parameters.
double weighted_loss_sum_grad(const BregmanLoss& loss,
                              const HypothesisClass& cls, const Vec& params,
                              const Mat& P, const Mat& T, const Vec& w,
                              Vec& grad_out, Exec exec = Exec::Parallel);

/// sum_i w_i * 1{f(x_i) != t_i} for exact binary predictions/targets.
double weighted_zero_one_sum(const HypothesisClass& cls, const Vec& params,
                             const Mat& P, const Vec& targets, const Vec& w,
                             Exec exec = Exec::Parallel);

}  // namespace moltk::kernels
