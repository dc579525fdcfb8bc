#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gddsg/types.hpp"

namespace gddsg {

/// Per-class test accuracy after every task. Task indices are 0-based.
class AccuracyLedger {
 public:
  /// Declares task `t`'s new classes. Tasks must be declared in order.
  void begin_task(std::size_t t, std::span<const ClassId> classes);
  /// Records accuracy in [0, 1] of class `c` after task `t`.
  void record(ClassId c, std::size_t t, double accuracy);

  bool has(ClassId c, std::size_t t) const { return acc_.contains({c, t}); }
  double at(ClassId c, std::size_t t) const;
  std::size_t num_tasks() const { return class_counts_.size(); }
  const std::map<ClassId, std::size_t>& first_task() const { return first_task_; }
  const std::vector<std::size_t>& class_counts_per_task() const { return class_counts_; }

  /// Mean per-class accuracy (percent) over classes seen by task `t`.
  double mean_accuracy(std::size_t t) const;
  /// True when every class seen by task `t` has an entry at `t`.
  bool complete_through(std::size_t t) const;

  nlohmann::json to_json() const;
  static AccuracyLedger from_json(const nlohmann::json& j);

 private:
  std::map<std::pair<ClassId, std::size_t>, double> acc_;
  std::map<ClassId, std::size_t> first_task_;
  std::vector<std::size_t> class_counts_;
};

/// A_N: mean final accuracy over every class seen in `num_tasks` tasks,
/// each class weighted equally, in percent.
double final_average_accuracy(const AccuracyLedger& ledger, std::size_t num_tasks);

/// F_N: mean over classes of (accuracy after the class's first task minus
/// final accuracy), in percent. Positive means accuracy was lost.
double forgetting(const AccuracyLedger& ledger, std::size_t num_tasks);

/// {"A_N", "F_N", "per_task": [mean accuracy after each task]}.
nlohmann::json metrics_report(const AccuracyLedger& ledger, std::size_t num_tasks);

/// Mean-accuracy curves (percent) of the same stream under R class orders:
/// curves[r][t].
struct OrderRunSet {
  std::vector<std::vector<double>> curves;

  void write_csv(const std::filesystem::path& path) const;
};

struct OpdReport {
  std::vector<double> opd;
  double mopd = 0.0;
  double aopd = 0.0;

  nlohmann::json to_json() const;
};

/// OPD_t = max_r - min_r of curves[r][t]; MOPD = max_t OPD_t; AOPD = mean_t.
/// Throws ArgumentError for fewer than two orders or ragged curves.
OpdReport opd_metrics(const OrderRunSet& runs);

}  // namespace gddsg
