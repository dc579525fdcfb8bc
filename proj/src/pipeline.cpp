#include "gddsg/pipeline.hpp"

#include <algorithm>
#include <random>
#include <set>

#include <spdlog/spdlog.h>

#include "gddsg/binary_io.hpp"
#include "gddsg/errors.hpp"
#include "parallel.hpp"

namespace gddsg {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(CentroidSpace s) { return s == CentroidSpace::projected ? "projected" : "raw"; }

CentroidSpace parse_centroid_space(const std::string& s) {
  if (s == "projected") return CentroidSpace::projected;
  if (s == "raw") return CentroidSpace::raw;
  throw ArgumentError("unknown centroid space '" + s + "'");
}

void GddsgConfig::validate() const {
  if (proj_dim == 0) throw ArgumentError("proj_dim must be >= 1");
  if (lambda_pool.empty()) throw ArgumentError("lambda pool is empty");
  for (double l : lambda_pool) {
    if (!(l > 0.0) || !std::isfinite(l)) throw ArgumentError("lambda pool entries must be positive");
  }
  if (reservoir_cap == 0) throw ArgumentError("reservoir cap must be >= 1");
  if (k_neighbors == 0 || k_neighbors % 2 == 0) {
    throw ArgumentError("k_neighbors must be odd and positive");
  }
  if (threads == 0) throw ArgumentError("threads must be >= 1");
}

json to_json(const GddsgConfig& c) {
  return {{"proj_dim", c.proj_dim},
          {"seed", c.seed},
          {"activation", to_string(c.activation)},
          {"metric", to_string(c.metric)},
          {"policy", to_string(c.policy)},
          {"lambda_pool", c.lambda_pool},
          {"reservoir_cap", c.reservoir_cap},
          {"k_neighbors", c.k_neighbors},
          {"vote", to_string(c.vote)},
          {"centroid_space", to_string(c.centroid_space)},
          {"grouping_enabled", c.grouping_enabled},
          {"joint_argmax", c.joint_argmax}};
}

GddsgConfig config_from_json(const json& j) {
  GddsgConfig c;
  try {
    c.proj_dim = j.at("proj_dim").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.activation = parse_activation(j.at("activation").get<std::string>());
    c.metric = parse_distance_metric(j.at("metric").get<std::string>());
    c.policy = parse_group_choice_policy(j.at("policy").get<std::string>());
    c.lambda_pool = j.at("lambda_pool").get<std::vector<double>>();
    c.reservoir_cap = j.at("reservoir_cap").get<std::size_t>();
    c.k_neighbors = j.at("k_neighbors").get<std::size_t>();
    c.vote = parse_vote_rule(j.at("vote").get<std::string>());
    c.centroid_space = parse_centroid_space(j.at("centroid_space").get<std::string>());
    c.grouping_enabled = j.at("grouping_enabled").get<bool>();
    c.joint_argmax = j.at("joint_argmax").get<bool>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

GddsgState::GddsgState(GddsgConfig cfg, std::size_t input_dim)
    : config((cfg.validate(), std::move(cfg))),
      projection(init_projection(input_dim, config.proj_dim, config.seed, config.activation)),
      identifier(config.k_neighbors, config.vote) {}

std::map<ClassId, Matrix> GddsgState::reservoir_features() const {
  std::map<ClassId, Matrix> out;
  for (const auto& [c, rows] : reservoirs) {
    out.emplace(c, config.centroid_space == CentroidSpace::projected ? projection.expand_batch(rows)
                                                                     : rows);
  }
  return out;
}

void GddsgState::check_invariants() const {
  std::set<GroupId> table_groups;
  for (const auto& [g, members] : table.members) table_groups.insert(g);
  std::set<GroupId> model_groups;
  for (const auto& [g, m] : models) model_groups.insert(g);
  if (table_groups != model_groups) throw ConsistencyError("model groups differ from table groups");

  for (const auto& [c, g] : table.group_of) {
    if (!class_stats.contains(c)) throw ConsistencyError("class " + std::to_string(c) + " has no stats");
    if (!reservoirs.contains(c)) throw ConsistencyError("class " + std::to_string(c) + " has no reservoir");
    if (std::find(registry.ids().begin(), registry.ids().end(), c) == registry.ids().end()) {
      throw ConsistencyError("class " + std::to_string(c) + " is not registered");
    }
    std::size_t housing = 0;
    for (const auto& [gid, m] : models) housing += m.has_class(c);
    if (housing != 1 || !models.at(g).has_class(c)) {
      throw ConsistencyError("class " + std::to_string(c) + " is not housed in exactly its group");
    }
  }
  if (registry.size() != table.group_of.size()) {
    throw ConsistencyError("registry and table disagree on class count");
  }
}

namespace {

Matrix select_rows(const Eigen::Ref<const Matrix>& m, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

std::vector<Eigen::Index> reservoir_rows(std::size_t n, std::size_t cap, std::uint64_t seed,
                                         ClassId c) {
  std::vector<Eigen::Index> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<Eigen::Index>(i);
  if (n <= cap) return all;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), c};
  std::mt19937_64 rng(seq);
  std::vector<Eigen::Index> picked;
  picked.reserve(cap);
  std::sample(all.begin(), all.end(), std::back_inserter(picked), cap, rng);
  return picked;
}

}  // namespace

TaskTrainReport train_task(GddsgState& state, std::span<const ClassId> classes,
                           const Eigen::Ref<const Matrix>& features,
                           std::span<const ClassId> labels) {
  const auto& cfg = state.config;
  if (classes.empty()) throw ArgumentError("train_task: task has no classes");
  if (features.rows() != static_cast<Eigen::Index>(labels.size())) {
    throw ArgumentError("train_task: feature rows and labels differ in count");
  }
  if (features.cols() != static_cast<Eigen::Index>(state.input_dim())) {
    throw ArgumentError("train_task: inputs have length " + std::to_string(features.cols()) +
                        ", expected " + std::to_string(state.input_dim()));
  }
  if (!features.allFinite()) throw NumericError("train_task: non-finite inputs");

  std::vector<ClassId> task_classes(classes.begin(), classes.end());
  std::sort(task_classes.begin(), task_classes.end());
  if (std::adjacent_find(task_classes.begin(), task_classes.end()) != task_classes.end()) {
    throw AssignmentError("train_task: class listed twice");
  }
  std::map<ClassId, std::vector<Eigen::Index>> rows_of;
  for (ClassId c : task_classes) {
    if (state.table.contains(c)) {
      throw AssignmentError("train_task: class " + std::to_string(c) + " was seen in an earlier task");
    }
    rows_of[c];
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = rows_of.find(labels[i]);
    if (it == rows_of.end()) {
      throw ArgumentError("train_task: sample labelled " + std::to_string(labels[i]) +
                          " is not in the task's class list");
    }
    it->second.push_back(static_cast<Eigen::Index>(i));
  }
  for (const auto& [c, rows] : rows_of) {
    if (rows.empty()) throw ArgumentError("train_task: class " + std::to_string(c) + " has no samples");
  }

  const Matrix h = state.projection.expand_batch(features);
  const Matrix raw = cfg.centroid_space == CentroidSpace::raw ? Matrix(features) : Matrix();
  const Matrix& space = cfg.centroid_space == CentroidSpace::projected ? h : raw;

  std::vector<ClassStats> new_stats;
  for (const auto& [c, rows] : rows_of) {
    new_stats.push_back(compute_class_stats(c, select_rows(space, rows), cfg.metric));
  }

  TaskTrainReport report;
  if (cfg.grouping_enabled) {
    auto assigned = assign_task_classes(state.table, state.class_stats, new_stats, cfg.policy, cfg.metric);
    state.table = std::move(assigned.table);
    report.assignments = std::move(assigned.assignments);
  } else {
    if (state.table.members.empty()) state.table.create_group();
    const GroupId shared = state.table.members.begin()->first;
    for (ClassId c : task_classes) {
      state.table.assign(c, shared);
      report.assignments.emplace_back(c, shared);
    }
  }

  for (auto& s : new_stats) {
    state.registry.add(s.class_id, s.centroid);
    state.class_stats.emplace(s.class_id, std::move(s));
  }
  for (const auto& [c, rows] : rows_of) {
    std::vector<Eigen::Index> kept;
    for (Eigen::Index i : reservoir_rows(rows.size(), cfg.reservoir_cap, cfg.seed, c)) {
      kept.push_back(rows[static_cast<std::size_t>(i)]);
    }
    state.reservoirs.emplace(c, select_rows(features, kept));
  }

  std::vector<GroupId> affected;
  for (const auto& [c, g] : report.assignments) {
    if (std::find(affected.begin(), affected.end(), g) == affected.end()) affected.push_back(g);
  }
  std::sort(affected.begin(), affected.end());
  for (GroupId g : affected) {
    state.models.try_emplace(g, g, cfg.proj_dim, cfg.lambda_pool.front());
  }

  // Groups are independent; each worker only touches its own GroupModel.
  std::vector<double> chosen(affected.size());
  detail::parallel_for(affected.size(), cfg.threads, [&](std::size_t i) {
    const GroupId g = affected[i];
    GroupModel& model = state.models.at(g);
    const auto& members = state.table.members.at(g);

    std::vector<Eigen::Index> rows;
    for (std::size_t r = 0; r < labels.size(); ++r) {
      if (state.table.group_of.at(labels[r]) == g) rows.push_back(static_cast<Eigen::Index>(r));
    }
    std::vector<ClassId> batch_labels;
    batch_labels.reserve(rows.size());
    for (auto r : rows) batch_labels.push_back(labels[static_cast<std::size_t>(r)]);
    model.update(select_rows(h, rows), batch_labels, members);

    CalibrationSet calib;
    calib.in_model = true;
    Eigen::Index total = 0;
    for (ClassId c : members) total += state.reservoirs.at(c).rows();
    calib.features.resize(total, static_cast<Eigen::Index>(cfg.proj_dim));
    Eigen::Index at = 0;
    for (ClassId c : members) {
      const Matrix& res = state.reservoirs.at(c);
      calib.features.middleRows(at, res.rows()) = state.projection.expand_batch(res);
      calib.labels.insert(calib.labels.end(), static_cast<std::size_t>(res.rows()), c);
      at += res.rows();
    }
    const double lambda = select_lambda(model, calib, cfg.lambda_pool);
    model.set_lambda(lambda);
    model.refresh_weights();
    chosen[i] = lambda;
  });
  for (std::size_t i = 0; i < affected.size(); ++i) report.lambdas[affected[i]] = chosen[i];

  state.identifier.fit(rebuild_meta_dataset(state.reservoir_features(), state.registry, state.table, cfg.metric));
  ++state.tasks_seen;
  report.num_groups = state.table.num_groups();
  spdlog::debug("task {}: {} classes, {} groups total", state.tasks_seen - 1, task_classes.size(),
                report.num_groups);
  return report;
}

TaskTrainReport train_task(GddsgState& state, std::span<const ClassId> classes,
                           std::span<const EmbeddingRecord> records) {
  auto [x, labels] = to_matrix(records);
  if (records.empty()) x.resize(0, static_cast<Eigen::Index>(state.input_dim()));
  return train_task(state, classes, x, labels);
}

namespace {

Prediction predict_projected(const GddsgState& state, const Eigen::Ref<const Vector>& x,
                             const Eigen::Ref<const Vector>& h) {
  Prediction out;
  if (state.config.joint_argmax) {
    bool first = true;
    double best = 0.0;
    for (const auto& [g, model] : state.models) {
      for (const auto& [c, s] : model.score(h)) {
        out.scores.emplace(c, s);
      }
    }
    for (const auto& [c, s] : out.scores) {
      if (first || s > best) {
        first = false;
        best = s;
        out.class_id = c;
      }
    }
    out.group_id = state.table.group_of.at(out.class_id);
    return out;
  }

  const bool projected = state.config.centroid_space == CentroidSpace::projected;
  const Vector rho = meta_feature(projected ? h : x, state.registry, state.config.metric);
  out.group_id = state.identifier.predict(rho);
  out.scores = state.models.at(out.group_id).score(h);
  bool first = true;
  double best = 0.0;
  // std::map iterates ascending, so strict > keeps the smaller id on ties.
  for (const auto& [c, s] : out.scores) {
    if (first || s > best) {
      first = false;
      best = s;
      out.class_id = c;
    }
  }
  return out;
}

}  // namespace

Prediction predict(const GddsgState& state, const Eigen::Ref<const Vector>& x) {
  if (state.tasks_seen == 0) throw StateError("predict: model has not been trained");
  if (x.size() != static_cast<Eigen::Index>(state.input_dim())) {
    throw ArgumentError("predict: input has length " + std::to_string(x.size()) + ", expected " +
                        std::to_string(state.input_dim()));
  }
  return predict_projected(state, x, state.projection.expand(x));
}

std::vector<Prediction> predict_batch(const GddsgState& state, const Eigen::Ref<const Matrix>& x) {
  if (state.tasks_seen == 0) throw StateError("predict: model has not been trained");
  if (x.cols() != static_cast<Eigen::Index>(state.input_dim())) {
    throw ArgumentError("predict: inputs have length " + std::to_string(x.cols()) + ", expected " +
                        std::to_string(state.input_dim()));
  }
  const Matrix h = state.projection.expand_batch(x);
  std::vector<Prediction> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    out.push_back(predict_projected(state, x.row(r).transpose(), h.row(r).transpose()));
  }
  return out;
}

std::map<ClassId, double> per_class_accuracy(const GddsgState& state,
                                             const Eigen::Ref<const Matrix>& x,
                                             std::span<const ClassId> labels) {
  if (x.rows() != static_cast<Eigen::Index>(labels.size())) {
    throw ArgumentError("per_class_accuracy: rows and labels differ in count");
  }
  const auto preds = predict_batch(state, x);
  std::map<ClassId, std::pair<std::size_t, std::size_t>> tally;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& [hit, total] = tally[labels[i]];
    hit += preds[i].class_id == labels[i];
    ++total;
  }
  std::map<ClassId, double> acc;
  for (const auto& [c, t] : tally) acc[c] = static_cast<double>(t.first) / static_cast<double>(t.second);
  return acc;
}

namespace {

std::string group_file(GroupId g, const char* what) {
  return "group_" + std::to_string(g) + "_" + what + ".gdm";
}

}  // namespace

void save_state(const GddsgState& state, const fs::path& dir) {
  fs::create_directories(dir);

  json members = json::array();
  for (const auto& [g, cls] : state.table.members) members.push_back({{"group", g}, {"classes", cls}});

  json stats = json::array();
  for (ClassId c : state.registry.ids()) {
    const auto& s = state.class_stats.at(c);
    stats.push_back({{"class", c}, {"mean_radius", s.mean_radius}, {"count", s.count}});
  }

  json groups = json::array();
  for (const auto& [g, m] : state.models) {
    groups.push_back({{"id", g},
                      {"lambda", m.lambda()},
                      {"classes", m.class_order()},
                      {"sample_count", m.sample_count()},
                      {"has_weights", m.weights_ready()}});
    write_matrix_file(dir / group_file(g, "gram"), m.gram());
    write_matrix_file(dir / group_file(g, "targets"), m.targets());
    if (m.weights_ready()) write_matrix_file(dir / group_file(g, "weights"), m.weights());
  }

  json reservoirs = json::array();
  Eigen::Index total = 0;
  for (const auto& [c, rows] : state.reservoirs) {
    reservoirs.push_back({{"class", c}, {"rows", rows.rows()}});
    total += rows.rows();
  }
  Matrix stacked(total, static_cast<Eigen::Index>(state.input_dim()));
  Eigen::Index at = 0;
  for (const auto& [c, rows] : state.reservoirs) {
    stacked.middleRows(at, rows.rows()) = rows;
    at += rows.rows();
  }

  json doc = {{"format", "gddsg-state"},
              {"version", kStateVersion},
              {"config", to_json(state.config)},
              {"input_dim", state.input_dim()},
              {"tasks_seen", state.tasks_seen},
              {"next_group_id", state.table.next_group_id},
              {"groups_members", std::move(members)},
              {"class_stats", std::move(stats)},
              {"groups", std::move(groups)},
              {"reservoirs", std::move(reservoirs)}};

  write_matrix_file(dir / "projection.gdm", state.projection.weights());
  Matrix centroids = state.registry.empty() ? Matrix(0, 0) : state.registry.centroids();
  write_matrix_file(dir / "centroids.gdm", centroids);
  write_matrix_file(dir / "reservoirs.gdm", stacked);
  binio::write_file(dir / "state.json", doc.dump(2) + "\n");
}

GddsgState load_state(const fs::path& dir) {
  const fs::path meta = dir / "state.json";
  if (!fs::exists(meta)) throw MissingFileError("no state.json in " + dir.string());
  json doc;
  try {
    doc = json::parse(binio::read_file(meta));
  } catch (const json::parse_error& e) {
    throw FormatError(meta.string() + ": " + e.what());
  }
  if (doc.value("format", "") != "gddsg-state") throw FormatError(meta.string() + ": not a model state");
  const int version = doc.value("version", -1);
  if (version != kStateVersion) {
    throw VersionError(meta.string() + ": state version " + std::to_string(version) +
                       " is not supported (expected " + std::to_string(kStateVersion) + ")");
  }

  try {
    GddsgConfig cfg = config_from_json(doc.at("config"));
    const auto input_dim = doc.at("input_dim").get<std::size_t>();
    GddsgState state(cfg, input_dim);

    Matrix w = read_matrix_file(dir / "projection.gdm");
    if (w.rows() != static_cast<Eigen::Index>(input_dim) ||
        w.cols() != static_cast<Eigen::Index>(cfg.proj_dim)) {
      throw ConsistencyError("projection.gdm has the wrong shape");
    }
    state.projection = RandomProjection(std::move(w), cfg.activation, cfg.seed);
    state.tasks_seen = doc.at("tasks_seen").get<std::size_t>();

    for (const auto& e : doc.at("groups_members")) {
      const auto g = e.at("group").get<GroupId>();
      state.table.members[g];
      for (ClassId c : e.at("classes").get<std::vector<ClassId>>()) state.table.assign(c, g);
    }
    state.table.next_group_id = doc.at("next_group_id").get<GroupId>();

    const Matrix centroids = read_matrix_file(dir / "centroids.gdm");
    const auto& stats = doc.at("class_stats");
    if (static_cast<Eigen::Index>(stats.size()) != centroids.rows()) {
      throw ConsistencyError("centroids.gdm row count does not match class_stats");
    }
    for (std::size_t i = 0; i < stats.size(); ++i) {
      ClassStats s;
      s.class_id = stats[i].at("class").get<ClassId>();
      s.mean_radius = stats[i].at("mean_radius").get<double>();
      s.count = stats[i].at("count").get<std::size_t>();
      s.centroid = centroids.row(static_cast<Eigen::Index>(i)).transpose();
      state.registry.add(s.class_id, s.centroid);
      state.class_stats.emplace(s.class_id, std::move(s));
    }

    for (const auto& e : doc.at("groups")) {
      const auto g = e.at("id").get<GroupId>();
      std::optional<Matrix> weights;
      if (e.at("has_weights").get<bool>()) weights = read_matrix_file(dir / group_file(g, "weights"));
      state.models.emplace(
          g, GroupModel::restore(g, read_matrix_file(dir / group_file(g, "gram")),
                                 read_matrix_file(dir / group_file(g, "targets")),
                                 e.at("classes").get<std::vector<ClassId>>(),
                                 e.at("sample_count").get<std::size_t>(),
                                 e.at("lambda").get<double>(), std::move(weights)));
    }

    const Matrix stacked = read_matrix_file(dir / "reservoirs.gdm");
    Eigen::Index at = 0;
    for (const auto& e : doc.at("reservoirs")) {
      const auto rows = e.at("rows").get<Eigen::Index>();
      if (at + rows > stacked.rows() || stacked.cols() != static_cast<Eigen::Index>(input_dim)) {
        throw ConsistencyError("reservoirs.gdm is smaller than its metadata claims");
      }
      state.reservoirs.emplace(e.at("class").get<ClassId>(), stacked.middleRows(at, rows));
      at += rows;
    }
    if (at != stacked.rows()) throw ConsistencyError("reservoirs.gdm has unclaimed rows");

    state.check_invariants();
    if (state.tasks_seen > 0) {
      state.identifier.fit(rebuild_meta_dataset(state.reservoir_features(), state.registry,
                                                state.table, cfg.metric));
    }
    return state;
  } catch (const json::exception& e) {
    throw FormatError(meta.string() + ": " + e.what());
  }
}

}  // namespace gddsg
