#include "gddsg/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>

#include "gddsg/errors.hpp"

namespace gddsg {

using nlohmann::json;

void AccuracyLedger::begin_task(std::size_t t, std::span<const ClassId> classes) {
  if (t != class_counts_.size()) {
    throw ArgumentError("ledger: task " + std::to_string(t) + " declared out of order");
  }
  for (ClassId c : classes) {
    if (!first_task_.emplace(c, t).second) {
      throw ArgumentError("ledger: class " + std::to_string(c) + " declared twice");
    }
  }
  class_counts_.push_back(classes.size());
}

void AccuracyLedger::record(ClassId c, std::size_t t, double accuracy) {
  auto it = first_task_.find(c);
  if (it == first_task_.end()) throw ArgumentError("ledger: unknown class " + std::to_string(c));
  if (t < it->second || t >= class_counts_.size()) {
    throw ArgumentError("ledger: class " + std::to_string(c) + " cannot have accuracy at task " +
                        std::to_string(t));
  }
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw ArgumentError("ledger: accuracy outside [0, 1]");
  acc_[{c, t}] = accuracy;
}

double AccuracyLedger::at(ClassId c, std::size_t t) const {
  auto it = acc_.find({c, t});
  if (it == acc_.end()) {
    throw StateError("ledger: no accuracy for class " + std::to_string(c) + " at task " +
                     std::to_string(t));
  }
  return it->second;
}

bool AccuracyLedger::complete_through(std::size_t t) const {
  for (const auto& [c, t0] : first_task_) {
    if (t0 <= t && !has(c, t)) return false;
  }
  return true;
}

double AccuracyLedger::mean_accuracy(std::size_t t) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [c, t0] : first_task_) {
    if (t0 > t) continue;
    sum += at(c, t);
    ++n;
  }
  if (n == 0) throw StateError("ledger: no classes seen by task " + std::to_string(t));
  return 100.0 * sum / static_cast<double>(n);
}

json AccuracyLedger::to_json() const {
  json entries = json::array();
  for (const auto& [key, a] : acc_) entries.push_back({key.first, key.second, a});
  json first = json::array();
  for (const auto& [c, t] : first_task_) first.push_back({c, t});
  return {{"class_counts_per_task", class_counts_}, {"first_task", first}, {"acc", entries}};
}

AccuracyLedger AccuracyLedger::from_json(const json& j) {
  AccuracyLedger l;
  try {
    l.class_counts_ = j.at("class_counts_per_task").get<std::vector<std::size_t>>();
    for (const auto& e : j.at("first_task")) l.first_task_.emplace(e.at(0).get<ClassId>(), e.at(1).get<std::size_t>());
    for (const auto& e : j.at("acc")) {
      l.acc_[{e.at(0).get<ClassId>(), e.at(1).get<std::size_t>()}] = e.at(2).get<double>();
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("ledger: ") + e.what());
  }
  return l;
}

namespace {

void require_complete(const AccuracyLedger& ledger, std::size_t num_tasks) {
  if (num_tasks == 0 || num_tasks > ledger.num_tasks()) {
    throw StateError("ledger covers " + std::to_string(ledger.num_tasks()) + " tasks, asked for " +
                     std::to_string(num_tasks));
  }
  if (!ledger.complete_through(num_tasks - 1)) {
    throw StateError("ledger is incomplete at task " + std::to_string(num_tasks - 1));
  }
}

}  // namespace

double final_average_accuracy(const AccuracyLedger& ledger, std::size_t num_tasks) {
  require_complete(ledger, num_tasks);
  return ledger.mean_accuracy(num_tasks - 1);
}

double forgetting(const AccuracyLedger& ledger, std::size_t num_tasks) {
  require_complete(ledger, num_tasks);
  const std::size_t last = num_tasks - 1;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [c, t0] : ledger.first_task()) {
    if (t0 > last) continue;
    // Drop from the class's first evaluation to the final one.
    sum += ledger.at(c, t0) - ledger.at(c, last);
    ++n;
  }
  return 100.0 * sum / static_cast<double>(n);
}

json metrics_report(const AccuracyLedger& ledger, std::size_t num_tasks) {
  json per_task = json::array();
  for (std::size_t t = 0; t < num_tasks; ++t) per_task.push_back(ledger.mean_accuracy(t));
  return {{"A_N", final_average_accuracy(ledger, num_tasks)},
          {"F_N", forgetting(ledger, num_tasks)},
          {"per_task", per_task}};
}

void OrderRunSet::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string());
  out << "order";
  const std::size_t tasks = curves.empty() ? 0 : curves.front().size();
  for (std::size_t t = 0; t < tasks; ++t) out << ",task_" << t;
  out << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t r = 0; r < curves.size(); ++r) {
    out << r;
    for (double v : curves[r]) out << ',' << v;
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

json OpdReport::to_json() const { return {{"opd", opd}, {"mopd", mopd}, {"aopd", aopd}}; }

OpdReport opd_metrics(const OrderRunSet& runs) {
  if (runs.curves.size() < 2) throw ArgumentError("opd_metrics: need at least two orders");
  const std::size_t tasks = runs.curves.front().size();
  if (tasks == 0) throw ArgumentError("opd_metrics: curves are empty");
  for (const auto& c : runs.curves) {
    if (c.size() != tasks) throw ArgumentError("opd_metrics: orders disagree on the task count");
  }
  OpdReport r;
  for (std::size_t t = 0; t < tasks; ++t) {
    double lo = runs.curves.front()[t];
    double hi = lo;
    for (const auto& c : runs.curves) {
      lo = std::min(lo, c[t]);
      hi = std::max(hi, c[t]);
    }
    r.opd.push_back(hi - lo);
  }
  r.mopd = *std::max_element(r.opd.begin(), r.opd.end());
  double sum = 0.0;
  for (double v : r.opd) sum += v;
  r.aopd = sum / static_cast<double>(tasks);
  return r;
}

}  // namespace gddsg
