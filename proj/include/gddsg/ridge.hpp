#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "gddsg/types.hpp"

namespace gddsg {

/// Held-out rows used to score candidate regularization strengths.
struct CalibrationSet {
  Matrix features;  // N x M projected rows
  std::vector<ClassId> labels;
  // Set when these rows were also accumulated into the model. Their
  // contribution is then subtracted before each candidate solve, so the
  // residual is measured on rows the candidate weights never saw.
  bool in_model = false;
};

/// Incremental closed-form ridge classifier for one class group.
///
/// Keeps the Gram matrix sum(h h^T) and the per-class target sums
/// sum(h y^T). The weights (Gram + lambda I)^{-1} targets are solved lazily
/// and cached until the next update or lambda change.
class GroupModel {
 public:
  GroupModel(GroupId id, std::size_t feature_dim, double lambda);

  /// Restores a model from persisted pieces. Validates shapes.
  static GroupModel restore(GroupId id, Matrix gram, Matrix targets,
                            std::vector<ClassId> class_order, std::size_t sample_count,
                            double lambda, std::optional<Matrix> weights);

  GroupId id() const { return id_; }
  std::size_t feature_dim() const { return static_cast<std::size_t>(gram_.rows()); }
  const Matrix& gram() const { return gram_; }
  const Matrix& targets() const { return targets_; }
  const std::vector<ClassId>& class_order() const { return class_order_; }
  std::size_t sample_count() const { return sample_count_; }
  double lambda() const { return lambda_; }
  bool has_class(ClassId c) const { return column_.contains(c); }
  /// Column index of class `c`; throws ArgumentError when unknown.
  std::size_t column(ClassId c) const;

  /// Accumulates a batch (one row per sample). Labels must be in `members`.
  /// Classes that appear in `labels` without a column yet get a zero column
  /// first, in `members` order.
  void update(const Eigen::Ref<const Matrix>& features, std::span<const ClassId> labels,
              std::span<const ClassId> members);

  /// Throws ArgumentError unless lambda > 0. Drops the cached weights.
  void set_lambda(double lambda);

  /// Solves for the weights with the current lambda and caches them.
  const Matrix& refresh_weights();
  bool weights_ready() const { return weights_.has_value(); }
  /// Cached weights; throws StateError if stale.
  const Matrix& weights() const;

  /// h^T W[:, column(c)] for every class, using the cached weights.
  std::map<ClassId, double> score(const Eigen::Ref<const Vector>& h) const;
  /// Same for a single class.
  double score(const Eigen::Ref<const Vector>& h, ClassId c) const;

 private:
  GroupId id_;
  Matrix gram_;
  Matrix targets_;
  std::vector<ClassId> class_order_;
  std::map<ClassId, std::size_t> column_;
  std::size_t sample_count_ = 0;
  double lambda_;
  std::optional<Matrix> weights_;
};

/// (gram + lambda I)^{-1} targets via a Cholesky solve.
/// Throws ArgumentError for lambda <= 0 and NumericError for non-finite input
/// or a failed factorization.
Matrix solve_ridge(const Matrix& gram, const Matrix& targets, double lambda);

/// Weights of `model` at its current lambda (no caching).
Matrix solve_weights(const GroupModel& model);

/// Squared Frobenius residual ||Y - H W||^2 of `weights` on a calibration set,
/// with Y one-hot over the model's class columns.
double calibration_residual(const GroupModel& model, const Matrix& weights,
                            const CalibrationSet& calib);

/// Pool element with the smallest calibration residual; ties go to the
/// smaller lambda. Throws ArgumentError for an empty pool or calibration set.
double select_lambda(const GroupModel& model, const CalibrationSet& calib,
                     std::span<const double> pool);

/// Candidate pool {10^k : k = -3..3}.
std::vector<double> default_lambda_pool();

}  // namespace gddsg
