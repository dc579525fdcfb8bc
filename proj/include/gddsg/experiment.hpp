#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gddsg/dataset.hpp"
#include "gddsg/metrics.hpp"
#include "gddsg/pipeline.hpp"

namespace gddsg {

/// A task stream held in memory: per task, its classes plus train and
/// held-out test rows.
struct TaskStream {
  std::size_t dim = 0;
  std::vector<std::vector<ClassId>> classes;
  std::vector<Matrix> train_x;
  std::vector<std::vector<ClassId>> train_y;
  std::vector<Matrix> test_x;
  std::vector<std::vector<ClassId>> test_y;

  std::size_t num_tasks() const { return classes.size(); }
};

/// Loads every task of a manifest. Each task must declare a test file.
TaskStream load_stream(const TaskManifest& manifest);

/// Builds a stream from in-memory records; `task_classes` lists each task's classes.
TaskStream make_stream(std::size_t dim, std::span<const std::vector<ClassId>> task_classes,
                       std::span<const EmbeddingRecord> train, std::span<const EmbeddingRecord> test);

/// Same classes and samples, but the class-to-task assignment is shuffled
/// with `seed` while every task keeps its size.
TaskStream reorder_stream(const TaskStream& stream, std::uint64_t seed);

/// Evaluates `state` on the test rows of tasks 0..t and records per-class
/// accuracy at task t.
void evaluate_task(const GddsgState& state, const TaskStream& stream, std::size_t t,
                   AccuracyLedger& ledger);

struct StreamRun {
  GddsgState state;
  AccuracyLedger ledger;
  std::vector<std::size_t> group_counts;  // after each task
};

using TaskCallback = std::function<void(std::size_t task, const TaskTrainReport&, const StreamRun&)>;

/// Trains tasks [run.state.tasks_seen, T) in order, evaluating after each.
void continue_stream(StreamRun& run, const TaskStream& stream, const TaskCallback& on_task = {});

/// Fresh run over the whole stream.
StreamRun run_stream(const TaskStream& stream, const GddsgConfig& config,
                     const TaskCallback& on_task = {});

struct OrdersResult {
  OrderRunSet runs;
  OpdReport report;
  std::vector<double> final_accuracy;  // A_N per order
};

/// Runs the stream once per seed (class order shuffled by that seed) and
/// computes OPD statistics over the mean-accuracy curves.
OrdersResult run_orders(const TaskStream& stream, const GddsgConfig& config,
                        std::span<const std::uint64_t> order_seeds);

}  // namespace gddsg
