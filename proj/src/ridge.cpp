#include "gddsg/ridge.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gddsg/errors.hpp"

namespace gddsg {

GroupModel::GroupModel(GroupId id, std::size_t feature_dim, double lambda)
    : id_(id),
      gram_(Matrix::Zero(static_cast<Eigen::Index>(feature_dim), static_cast<Eigen::Index>(feature_dim))),
      targets_(static_cast<Eigen::Index>(feature_dim), 0),
      lambda_(lambda) {
  if (feature_dim == 0) throw ArgumentError("GroupModel: feature dimension must be positive");
  if (!(lambda > 0.0)) throw ArgumentError("GroupModel: lambda must be positive");
}

GroupModel GroupModel::restore(GroupId id, Matrix gram, Matrix targets,
                               std::vector<ClassId> class_order, std::size_t sample_count,
                               double lambda, std::optional<Matrix> weights) {
  GroupModel m(id, static_cast<std::size_t>(gram.rows()), lambda);
  if (gram.rows() != gram.cols()) throw ConsistencyError("restored gram is not square");
  if (targets.rows() != gram.rows() ||
      targets.cols() != static_cast<Eigen::Index>(class_order.size())) {
    throw ConsistencyError("restored targets shape does not match gram/class list");
  }
  if (weights && (weights->rows() != targets.rows() || weights->cols() != targets.cols())) {
    throw ConsistencyError("restored weights shape does not match targets");
  }
  m.gram_ = std::move(gram);
  m.targets_ = std::move(targets);
  for (std::size_t i = 0; i < class_order.size(); ++i) {
    if (!m.column_.emplace(class_order[i], i).second) {
      throw ConsistencyError("restored class list has duplicates");
    }
  }
  m.class_order_ = std::move(class_order);
  m.sample_count_ = sample_count;
  m.weights_ = std::move(weights);
  return m;
}

std::size_t GroupModel::column(ClassId c) const {
  auto it = column_.find(c);
  if (it == column_.end()) {
    throw ArgumentError("class " + std::to_string(c) + " has no column in group " +
                        std::to_string(id_));
  }
  return it->second;
}

void GroupModel::update(const Eigen::Ref<const Matrix>& features, std::span<const ClassId> labels,
                        std::span<const ClassId> members) {
  if (features.rows() != static_cast<Eigen::Index>(labels.size())) {
    throw ArgumentError("update: feature rows and labels differ in count");
  }
  if (features.cols() != gram_.rows()) {
    throw ArgumentError("update: features have " + std::to_string(features.cols()) +
                        " columns, expected " + std::to_string(gram_.rows()));
  }
  if (!features.allFinite()) throw NumericError("update: non-finite features");
  for (ClassId y : labels) {
    if (std::find(members.begin(), members.end(), y) == members.end()) {
      throw AssignmentError("class " + std::to_string(y) + " does not belong to group " +
                            std::to_string(id_));
    }
  }

  // Zero-pad a column for every member class seen for the first time.
  std::vector<ClassId> fresh;
  for (ClassId m : members) {
    if (!column_.contains(m) && std::find(labels.begin(), labels.end(), m) != labels.end()) {
      fresh.push_back(m);
    }
  }
  if (!fresh.empty()) {
    const Eigen::Index old_cols = targets_.cols();
    targets_.conservativeResize(Eigen::NoChange, old_cols + static_cast<Eigen::Index>(fresh.size()));
    targets_.rightCols(static_cast<Eigen::Index>(fresh.size())).setZero();
    for (ClassId c : fresh) {
      column_.emplace(c, class_order_.size());
      class_order_.push_back(c);
    }
  }

  gram_.selfadjointView<Eigen::Lower>().rankUpdate(features.transpose());
  // Mirror the lower triangle so gram_ stays exactly symmetric.
  for (Eigen::Index j = 1; j < gram_.cols(); ++j) {
    for (Eigen::Index i = 0; i < j; ++i) gram_(i, j) = gram_(j, i);
  }
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    targets_.col(static_cast<Eigen::Index>(column_.at(labels[r]))) += features.row(r).transpose();
  }
  sample_count_ += labels.size();
  weights_.reset();
}

void GroupModel::set_lambda(double lambda) {
  if (!(lambda > 0.0)) throw ArgumentError("lambda must be positive");
  if (lambda != lambda_) weights_.reset();
  lambda_ = lambda;
}

const Matrix& GroupModel::refresh_weights() {
  if (!weights_) weights_ = solve_ridge(gram_, targets_, lambda_);
  return *weights_;
}

const Matrix& GroupModel::weights() const {
  if (!weights_) throw StateError("group " + std::to_string(id_) + ": weights are stale");
  return *weights_;
}

std::map<ClassId, double> GroupModel::score(const Eigen::Ref<const Vector>& h) const {
  const Matrix& w = weights();
  if (h.size() != w.rows()) throw ArgumentError("score: feature length mismatch");
  const Vector s = w.transpose() * h;
  std::map<ClassId, double> out;
  for (std::size_t i = 0; i < class_order_.size(); ++i) {
    out.emplace(class_order_[i], s[static_cast<Eigen::Index>(i)]);
  }
  return out;
}

double GroupModel::score(const Eigen::Ref<const Vector>& h, ClassId c) const {
  const Matrix& w = weights();
  if (h.size() != w.rows()) throw ArgumentError("score: feature length mismatch");
  return h.dot(w.col(static_cast<Eigen::Index>(column(c))));
}

Matrix solve_ridge(const Matrix& gram, const Matrix& targets, double lambda) {
  if (!(lambda > 0.0)) throw ArgumentError("solve: lambda must be positive");
  if (!gram.allFinite() || !targets.allFinite()) {
    throw NumericError("solve: non-finite entries in gram or targets");
  }
  Matrix a = gram;
  a.diagonal().array() += lambda;
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NumericError("solve: gram + lambda I is not positive definite");
  }
  Matrix w = llt.solve(targets);
  if (!w.allFinite()) throw NumericError("solve: non-finite solution");
  return w;
}

Matrix solve_weights(const GroupModel& model) {
  return solve_ridge(model.gram(), model.targets(), model.lambda());
}

double calibration_residual(const GroupModel& model, const Matrix& weights,
                            const CalibrationSet& calib) {
  Matrix residual = calib.features * weights;
  residual = -residual;
  for (std::size_t r = 0; r < calib.labels.size(); ++r) {
    residual(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(model.column(calib.labels[r]))) += 1.0;
  }
  return residual.squaredNorm();
}

double select_lambda(const GroupModel& model, const CalibrationSet& calib,
                     std::span<const double> pool) {
  if (pool.empty()) throw ArgumentError("select_lambda: empty candidate pool");
  if (calib.labels.empty()) throw ArgumentError("select_lambda: empty calibration set");
  if (calib.features.rows() != static_cast<Eigen::Index>(calib.labels.size()) ||
      calib.features.cols() != static_cast<Eigen::Index>(model.feature_dim())) {
    throw ArgumentError("select_lambda: calibration set has the wrong shape");
  }
  for (double l : pool) {
    if (!(l > 0.0)) throw ArgumentError("select_lambda: pool entries must be positive");
  }
  for (ClassId c : calib.labels) model.column(c);

  Matrix gram = model.gram();
  Matrix targets = model.targets();
  if (calib.in_model) {
    gram.selfadjointView<Eigen::Lower>().rankUpdate(calib.features.transpose(), -1.0);
    for (Eigen::Index j = 1; j < gram.cols(); ++j) {
      for (Eigen::Index i = 0; i < j; ++i) gram(i, j) = gram(j, i);
    }
    for (std::size_t r = 0; r < calib.labels.size(); ++r) {
      targets.col(static_cast<Eigen::Index>(model.column(calib.labels[r]))) -=
          calib.features.row(static_cast<Eigen::Index>(r)).transpose();
    }
  }

  double best_lambda = 0.0;
  double best_residual = std::numeric_limits<double>::infinity();
  for (double l : pool) {
    const double res = calibration_residual(model, solve_ridge(gram, targets, l), calib);
    if (res < best_residual || (res == best_residual && l < best_lambda)) {
      best_residual = res;
      best_lambda = l;
    }
  }
  return best_lambda;
}

std::vector<double> default_lambda_pool() {
  std::vector<double> pool;
  for (int k = -3; k <= 3; ++k) pool.push_back(std::pow(10.0, k));
  return pool;
}

}  // namespace gddsg
