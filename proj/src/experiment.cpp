#include "gddsg/experiment.hpp"

#include <algorithm>
#include <map>
#include <random>

#include "gddsg/errors.hpp"

namespace gddsg {

namespace {

Matrix stack_rows(const std::vector<const Matrix*>& parts, std::size_t dim) {
  Eigen::Index rows = 0;
  for (const Matrix* m : parts) rows += m->rows();
  Matrix out(rows, static_cast<Eigen::Index>(dim));
  Eigen::Index at = 0;
  for (const Matrix* m : parts) {
    out.middleRows(at, m->rows()) = *m;
    at += m->rows();
  }
  return out;
}

// Splits records per class, keeping file order inside each class.
std::map<ClassId, std::vector<const EmbeddingRecord*>> by_class(std::span<const EmbeddingRecord> recs) {
  std::map<ClassId, std::vector<const EmbeddingRecord*>> out;
  for (const auto& r : recs) out[r.class_id].push_back(&r);
  return out;
}

void append_task(TaskStream& s, const std::vector<ClassId>& classes,
                 const std::map<ClassId, std::vector<const EmbeddingRecord*>>& train,
                 const std::map<ClassId, std::vector<const EmbeddingRecord*>>& test) {
  auto build = [&](const std::map<ClassId, std::vector<const EmbeddingRecord*>>& src, Matrix& x,
                   std::vector<ClassId>& y) {
    std::vector<EmbeddingRecord> recs;
    for (ClassId c : classes) {
      auto it = src.find(c);
      if (it == src.end()) continue;
      for (const auto* r : it->second) recs.push_back(*r);
    }
    auto [m, labels] = to_matrix(recs);
    if (recs.empty()) m.resize(0, static_cast<Eigen::Index>(s.dim));
    x = std::move(m);
    y = std::move(labels);
  };
  s.classes.push_back(classes);
  s.train_x.emplace_back();
  s.train_y.emplace_back();
  s.test_x.emplace_back();
  s.test_y.emplace_back();
  build(train, s.train_x.back(), s.train_y.back());
  build(test, s.test_x.back(), s.test_y.back());
}

}  // namespace

TaskStream load_stream(const TaskManifest& manifest) {
  TaskStream s;
  s.dim = manifest.dim;
  for (std::size_t t = 0; t < manifest.tasks.size(); ++t) {
    const auto train = load_task_records(manifest, t, Split::train);
    const auto test = load_task_records(manifest, t, Split::test);
    append_task(s, manifest.tasks[t].classes, by_class(train), by_class(test));
  }
  return s;
}

TaskStream make_stream(std::size_t dim, std::span<const std::vector<ClassId>> task_classes,
                       std::span<const EmbeddingRecord> train, std::span<const EmbeddingRecord> test) {
  TaskStream s;
  s.dim = dim;
  const auto tr = by_class(train);
  const auto te = by_class(test);
  for (const auto& classes : task_classes) append_task(s, classes, tr, te);
  return s;
}

TaskStream reorder_stream(const TaskStream& stream, std::uint64_t seed) {
  std::vector<ClassId> all;
  std::map<ClassId, std::size_t> source_task;
  for (std::size_t t = 0; t < stream.num_tasks(); ++t) {
    for (ClassId c : stream.classes[t]) {
      all.push_back(c);
      source_task[c] = t;
    }
  }
  std::sort(all.begin(), all.end());
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);

  // Rows per class, copied out of their original task.
  auto rows_of = [&](const std::vector<Matrix>& xs, const std::vector<std::vector<ClassId>>& ys, ClassId c) {
    const std::size_t t = source_task.at(c);
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < ys[t].size(); ++i) {
      if (ys[t][i] == c) idx.push_back(static_cast<Eigen::Index>(i));
    }
    Matrix out(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(stream.dim));
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = xs[t].row(idx[i]);
    return out;
  };

  TaskStream out;
  out.dim = stream.dim;
  std::size_t next = 0;
  for (std::size_t t = 0; t < stream.num_tasks(); ++t) {
    std::vector<ClassId> classes(all.begin() + static_cast<std::ptrdiff_t>(next),
                                 all.begin() + static_cast<std::ptrdiff_t>(next + stream.classes[t].size()));
    next += classes.size();
    std::vector<Matrix> train_parts, test_parts;
    std::vector<ClassId> train_y, test_y;
    for (ClassId c : classes) {
      train_parts.push_back(rows_of(stream.train_x, stream.train_y, c));
      train_y.insert(train_y.end(), static_cast<std::size_t>(train_parts.back().rows()), c);
      test_parts.push_back(rows_of(stream.test_x, stream.test_y, c));
      test_y.insert(test_y.end(), static_cast<std::size_t>(test_parts.back().rows()), c);
    }
    std::vector<const Matrix*> tp, sp;
    for (const auto& m : train_parts) tp.push_back(&m);
    for (const auto& m : test_parts) sp.push_back(&m);
    out.classes.push_back(std::move(classes));
    out.train_x.push_back(stack_rows(tp, stream.dim));
    out.train_y.push_back(std::move(train_y));
    out.test_x.push_back(stack_rows(sp, stream.dim));
    out.test_y.push_back(std::move(test_y));
  }
  return out;
}

void evaluate_task(const GddsgState& state, const TaskStream& stream, std::size_t t,
                   AccuracyLedger& ledger) {
  std::vector<const Matrix*> parts;
  std::vector<ClassId> labels;
  for (std::size_t k = 0; k <= t; ++k) {
    parts.push_back(&stream.test_x[k]);
    labels.insert(labels.end(), stream.test_y[k].begin(), stream.test_y[k].end());
  }
  if (labels.empty()) throw ArgumentError("evaluate_task: no held-out samples");
  const auto acc = per_class_accuracy(state, stack_rows(parts, stream.dim), labels);
  for (std::size_t k = 0; k <= t; ++k) {
    for (ClassId c : stream.classes[k]) {
      auto it = acc.find(c);
      if (it == acc.end()) {
        throw ArgumentError("evaluate_task: class " + std::to_string(c) + " has no held-out samples");
      }
      ledger.record(c, t, it->second);
    }
  }
}

void continue_stream(StreamRun& run, const TaskStream& stream, const TaskCallback& on_task) {
  for (std::size_t t = run.state.tasks_seen; t < stream.num_tasks(); ++t) {
    const auto report = train_task(run.state, stream.classes[t], stream.train_x[t], stream.train_y[t]);
    run.ledger.begin_task(t, stream.classes[t]);
    evaluate_task(run.state, stream, t, run.ledger);
    run.group_counts.push_back(report.num_groups);
    if (on_task) on_task(t, report, run);
  }
}

StreamRun run_stream(const TaskStream& stream, const GddsgConfig& config, const TaskCallback& on_task) {
  StreamRun run{GddsgState(config, stream.dim), {}, {}};
  continue_stream(run, stream, on_task);
  return run;
}

OrdersResult run_orders(const TaskStream& stream, const GddsgConfig& config,
                        std::span<const std::uint64_t> order_seeds) {
  if (order_seeds.size() < 2) throw ArgumentError("run_orders: need at least two orders");
  OrdersResult out;
  for (std::uint64_t seed : order_seeds) {
    const StreamRun run = run_stream(reorder_stream(stream, seed), config);
    std::vector<double> curve;
    for (std::size_t t = 0; t < stream.num_tasks(); ++t) curve.push_back(run.ledger.mean_accuracy(t));
    out.runs.curves.push_back(std::move(curve));
    out.final_accuracy.push_back(final_average_accuracy(run.ledger, stream.num_tasks()));
  }
  out.report = opd_metrics(out.runs);
  return out;
}

}  // namespace gddsg
