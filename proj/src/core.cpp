#include "moltk/core.hpp"

#include <cmath>

namespace moltk {

WeightVector WeightVector::make(Vec lam, bool renormalize) {
  if (lam.size() == 0) throw DimensionError("WeightVector: empty");
  for (int i = 0; i < lam.size(); ++i) {
    if (!(lam[i] >= 0.0))
      throw DomainError("WeightVector: negative or NaN entry");
  }
  const double s = lam.sum();
  if (renormalize) {
    if (s <= 0.0) throw DomainError("WeightVector: cannot renormalize zero sum");
    lam /= s;
  } else if (std::abs(s - 1.0) > 1e-12) {
    throw DomainError("WeightVector: entries must sum to 1 within 1e-12");
  }
  return WeightVector{std::move(lam)};
}

void TaskData::validate() const {
  if (X.rows() != Y.rows())
    throw DimensionError("TaskData: labeled covariate/label count mismatch");
  if (X.rows() > 0 && XU.rows() > 0 && X.cols() != XU.cols())
    throw DimensionError("TaskData: labeled/unlabeled dimension mismatch");
  if (X.rows() == 0 && XU.rows() == 0)
    throw DataError("TaskData: no covariates at all");
}

void MultiTaskData::validate() const {
  if (tasks.empty()) throw DataError("MultiTaskData: no tasks");
  for (int k = 0; k < K(); ++k) {
    tasks[k].validate();
    if (tasks[k].task_id != k + 1)
      throw DataError("MultiTaskData: task_ids must be 1..K with no gaps");
  }
  const int q = tasks[0].q();
  for (const auto& t : tasks)
    if (t.Y.rows() > 0 && t.q() != q)
      throw DimensionError("MultiTaskData: inconsistent label dimension");
}

Mat empirical_second_moment(const Mat& X) {
  if (X.rows() == 0) throw DimensionError("empirical_second_moment: empty data");
  Mat m = (X.transpose() * X) / static_cast<double>(X.rows());
  return 0.5 * (m + m.transpose());
}

}  // namespace moltk
