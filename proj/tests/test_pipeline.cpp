#include <doctest.h>

#include <fstream>

#include <json.hpp>

#include "gddsg/binary_io.hpp"
#include "gddsg/errors.hpp"
#include "gddsg/experiment.hpp"
#include "gddsg/pipeline.hpp"
#include "support/test_util.hpp"

using namespace gddsg;
using gddsg::testing::TempDir;

namespace {

GddsgConfig small_config(std::uint64_t seed = 1) {
  GddsgConfig c;
  c.proj_dim = 96;
  c.seed = seed;
  c.reservoir_cap = 10;
  c.k_neighbors = 5;
  return c;
}

std::vector<Vector> spread_centers(std::size_t n, std::size_t dim, double scale) {
  std::vector<Vector> c(n, Vector::Zero(static_cast<Eigen::Index>(dim)));
  for (std::size_t i = 0; i < n; ++i) c[i][static_cast<Eigen::Index>(i % dim)] = scale * (1.0 + static_cast<double>(i / dim));
  return c;
}

std::vector<ClassId> iota_ids(ClassId first, std::size_t n) {
  std::vector<ClassId> ids(n);
  std::iota(ids.begin(), ids.end(), first);
  return ids;
}

void check_groups_dissimilar(const GddsgState& s) {
  for (const auto& [g, members] : s.table.members) {
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = i + 1; j < members.size(); ++j) {
        CHECK(are_dissimilar(s.class_stats.at(members[i]), s.class_stats.at(members[j]),
                             s.config.metric));
      }
    }
  }
}

std::map<std::string, std::string> dir_bytes(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    out[e.path().filename().string()] = binio::read_file(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("config validation and JSON round trip") {
  GddsgConfig c = small_config(9);
  c.policy = GroupChoicePolicy::min_mean_distance;
  c.lambda_pool = {0.5, 2.0};
  c.vote = VoteRule::majority;
  c.centroid_space = CentroidSpace::raw;
  const auto back = config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK_NOTHROW(c.validate());

  GddsgConfig bad = c;
  bad.k_neighbors = 4;
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
  bad = c;
  bad.lambda_pool = {1.0, -1.0};
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
  bad = c;
  bad.proj_dim = 0;
  CHECK_THROWS_AS(bad.validate(), ArgumentError);
}

TEST_CASE("single well-separated task forms one group and fits its training data") {
  const auto centers = spread_centers(6, 10, 12.0);
  const auto recs = gddsg::testing::clusters(centers, 40, 1.0, 3);
  GddsgState state(small_config(), 10);
  const auto report = train_task(state, iota_ids(0, 6), recs);
  CHECK(report.num_groups == 1);
  CHECK(state.table.num_groups() == 1);
  CHECK_NOTHROW(state.check_invariants());

  const auto [x, y] = to_matrix(recs);
  const auto acc = per_class_accuracy(state, x, y);
  double total = 0.0;
  for (const auto& [c, a] : acc) total += a;
  CHECK(total / acc.size() >= 0.99);

  // Oracle: one global ridge classifier on the same projected features.
  const double lambda = state.models.begin()->second.lambda();
  const Matrix h = state.projection.expand_batch(x);
  Matrix onehot = Matrix::Zero(h.rows(), 6);
  for (Eigen::Index i = 0; i < h.rows(); ++i) onehot(i, y[i]) = 1.0;
  const Matrix a = h.transpose() * h + lambda * Matrix::Identity(h.cols(), h.cols());
  const Matrix theta = a.inverse() * (h.transpose() * onehot);
  const auto preds = predict_batch(state, x);
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    const Eigen::RowVectorXd s = h.row(i) * theta;
    Eigen::Index best;
    s.maxCoeff(&best);
    CHECK(preds[i].class_id == static_cast<ClassId>(best));
    for (ClassId c = 0; c < 6; ++c) {
      CHECK(std::abs(preds[i].scores.at(c) - s[c]) <= 1e-8 * std::max(1.0, std::abs(s[c])));
    }
  }
}

TEST_CASE("an overlapping task leaves the old group untouched") {
  std::vector<Vector> centers = spread_centers(4, 8, 15.0);
  // Classes 2 and 3 sit on top of class 0.
  centers[2] = centers[0];
  centers[2][5] = 0.2;
  centers[3] = centers[0];
  centers[3][6] = 0.2;
  auto recs = gddsg::testing::clusters(centers, 40, 1.0, 5);
  std::vector<EmbeddingRecord> first, second;
  for (auto& r : recs) (r.class_id < 2 ? first : second).push_back(r);

  GddsgState state(small_config(), 8);
  train_task(state, std::vector<ClassId>{0, 1}, first);
  REQUIRE(state.table.num_groups() == 1);
  const GroupId g0 = state.table.group_of.at(0);
  const Matrix gram = state.models.at(g0).gram();
  const Matrix targets = state.models.at(g0).targets();

  const auto report = train_task(state, std::vector<ClassId>{2, 3}, second);
  CHECK(state.table.num_groups() >= 2);
  CHECK(state.table.group_of.at(2) != g0);
  CHECK(state.table.group_of.at(3) != g0);
  CHECK(state.table.group_of.at(2) != state.table.group_of.at(3));
  CHECK(!report.lambdas.contains(g0));
  CHECK((state.models.at(g0).gram().array() == gram.array()).all());
  CHECK((state.models.at(g0).targets().array() == targets.array()).all());
  CHECK_NOTHROW(state.check_invariants());
  check_groups_dissimilar(state);
  CHECK(state.tasks_seen == 2);
}

TEST_CASE("training rejects malformed tasks") {
  const auto recs = gddsg::testing::clusters(spread_centers(2, 4, 10.0), 5, 1.0, 1);
  GddsgState state(small_config(), 4);
  CHECK_THROWS_AS(train_task(state, std::vector<ClassId>{0, 1, 2}, recs), ArgumentError);
  CHECK_THROWS_AS(train_task(state, std::vector<ClassId>{0}, recs), ArgumentError);
  train_task(state, std::vector<ClassId>{0, 1}, recs);
  CHECK_THROWS_AS(train_task(state, std::vector<ClassId>{0, 1}, recs), AssignmentError);
  CHECK_THROWS_AS(train_task(state, std::vector<ClassId>{}, recs), ArgumentError);
}

TEST_CASE("prediction contract") {
  GddsgState fresh(small_config(), 4);
  CHECK_THROWS_AS(predict(fresh, Vector::Zero(4)), StateError);

  SUBCASE("one class, one group") {
    const auto recs = gddsg::testing::clusters({Vector::Ones(4)}, 8, 1.0, 2, std::vector<ClassId>{7});
    GddsgState s(small_config(), 4);
    train_task(s, std::vector<ClassId>{7}, recs);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 20; ++i) {
      const auto p = predict(s, gddsg::testing::random_matrix(4, 1, rng, 20.0).col(0));
      CHECK(p.class_id == 7);
    }
    CHECK_THROWS_AS(predict(s, Vector::Zero(5)), ArgumentError);
  }
  SUBCASE("predicted class always belongs to the predicted group") {
    auto centers = spread_centers(6, 6, 10.0);
    centers[3] = centers[0];
    centers[4] = centers[1];
    const auto recs = gddsg::testing::clusters(centers, 20, 1.0, 4);
    std::vector<EmbeddingRecord> a, b;
    for (const auto& r : recs) (r.class_id < 3 ? a : b).push_back(r);
    GddsgState s(small_config(), 6);
    train_task(s, std::vector<ClassId>{0, 1, 2}, a);
    train_task(s, std::vector<ClassId>{3, 4, 5}, b);
    REQUIRE(s.table.num_groups() > 1);
    std::mt19937_64 rng(5);
    const Matrix q = gddsg::testing::random_matrix(100, 6, rng, 8.0);
    for (const auto& p : predict_batch(s, q)) {
      const auto& members = s.table.members.at(p.group_id);
      CHECK(std::find(members.begin(), members.end(), p.class_id) != members.end());
      for (const auto& [c, score] : p.scores) CHECK(s.table.group_of.at(c) == p.group_id);
    }
    // Classes with a cluster of their own come back with their labels.
    const auto [x, y] = to_matrix(recs);
    const auto acc = per_class_accuracy(s, x, y);
    CHECK(acc.at(2) >= 0.9);
    CHECK(acc.at(5) >= 0.9);
  }
}

TEST_CASE("state save/load round trip") {
  auto centers = spread_centers(6, 6, 10.0);
  centers[4] = centers[0];
  const auto recs = gddsg::testing::clusters(centers, 25, 1.0, 8);
  std::vector<EmbeddingRecord> a, b;
  for (const auto& r : recs) (r.class_id < 3 ? a : b).push_back(r);
  GddsgState s(small_config(4), 6);
  train_task(s, std::vector<ClassId>{0, 1, 2}, a);
  train_task(s, std::vector<ClassId>{3, 4, 5}, b);

  TempDir dir("state");
  save_state(s, dir.path());
  const GddsgState back = load_state(dir.path());
  CHECK(back.tasks_seen == s.tasks_seen);
  CHECK(back.table.group_of == s.table.group_of);
  CHECK(back.table.members == s.table.members);
  CHECK(back.registry.ids() == s.registry.ids());
  CHECK((back.projection.weights().array() == s.projection.weights().array()).all());
  for (const auto& [g, m] : s.models) {
    const auto& o = back.models.at(g);
    CHECK(o.lambda() == m.lambda());
    CHECK((o.gram().array() == m.gram().array()).all());
    CHECK((o.targets().array() == m.targets().array()).all());
    CHECK(o.class_order() == m.class_order());
  }
  std::mt19937_64 rng(6);
  const Matrix q = gddsg::testing::random_matrix(100, 6, rng, 8.0);
  const auto p1 = predict_batch(s, q);
  const auto p2 = predict_batch(back, q);
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i].class_id == p2[i].class_id);
    CHECK(p1[i].group_id == p2[i].group_id);
    CHECK(p1[i].scores == p2[i].scores);
  }

  // Saving the loaded state reproduces the same bytes.
  TempDir again("state_again");
  save_state(back, again.path());
  CHECK(dir_bytes(dir.path()) == dir_bytes(again.path()));

  SUBCASE("empty directory") {
    TempDir empty("state_empty");
    CHECK_THROWS_AS(load_state(empty.path()), MissingFileError);
  }
  SUBCASE("tampered matrix header") {
    std::string bytes = binio::read_file(dir / "projection.gdm");
    bytes[1] = 'X';
    binio::write_file(dir / "projection.gdm", bytes);
    CHECK_THROWS_AS(load_state(dir.path()), FormatError);
  }
  SUBCASE("missing matrix file") {
    std::filesystem::remove(dir / "centroids.gdm");
    CHECK_THROWS_AS(load_state(dir.path()), MissingFileError);
  }
  SUBCASE("version mismatch") {
    nlohmann::json doc = nlohmann::json::parse(binio::read_file(dir / "state.json"));
    doc["version"] = kStateVersion + 1;
    binio::write_file(dir / "state.json", doc.dump());
    CHECK_THROWS_AS(load_state(dir.path()), VersionError);
  }
}

TEST_CASE("training is deterministic and independent of the thread count") {
  auto centers = spread_centers(8, 6, 10.0);
  centers[5] = centers[1];
  centers[6] = centers[2];
  const auto recs = gddsg::testing::clusters(centers, 30, 1.0, 9);
  std::vector<EmbeddingRecord> a, b;
  for (const auto& r : recs) (r.class_id < 4 ? a : b).push_back(r);
  auto run = [&](std::size_t threads, const std::filesystem::path& out) {
    GddsgConfig c = small_config(2);
    c.threads = threads;
    GddsgState s(c, 6);
    train_task(s, iota_ids(0, 4), a);
    train_task(s, iota_ids(4, 4), b);
    save_state(s, out);
  };
  TempDir d1("det1"), d2("det2"), d3("det3");
  run(1, d1.path());
  run(1, d2.path());
  run(4, d3.path());
  CHECK(dir_bytes(d1.path()) == dir_bytes(d2.path()));
  CHECK(dir_bytes(d1.path()) == dir_bytes(d3.path()));
}

TEST_CASE("raw centroid space and joint argmax are usable") {
  auto centers = spread_centers(4, 5, 10.0);
  centers[3] = centers[0];
  const auto recs = gddsg::testing::clusters(centers, 20, 1.0, 10);
  std::vector<EmbeddingRecord> a, b;
  for (const auto& r : recs) (r.class_id < 2 ? a : b).push_back(r);
  GddsgConfig c = small_config();
  c.centroid_space = CentroidSpace::raw;
  c.joint_argmax = true;
  GddsgState s(c, 5);
  train_task(s, std::vector<ClassId>{0, 1}, a);
  train_task(s, std::vector<ClassId>{2, 3}, b);
  CHECK(s.class_stats.at(0).centroid.size() == 5);
  CHECK_NOTHROW(s.check_invariants());
  const auto p = predict(s, centers[1]);
  CHECK(p.scores.size() == 4);
  CHECK(p.group_id == s.table.group_of.at(p.class_id));
}

TEST_CASE("grouping can be switched off") {
  auto centers = spread_centers(4, 5, 10.0);
  centers[3] = centers[0];
  const auto recs = gddsg::testing::clusters(centers, 20, 1.0, 11);
  std::vector<EmbeddingRecord> a, b;
  for (const auto& r : recs) (r.class_id < 2 ? a : b).push_back(r);
  GddsgConfig c = small_config();
  c.grouping_enabled = false;
  GddsgState s(c, 5);
  train_task(s, std::vector<ClassId>{0, 1}, a);
  train_task(s, std::vector<ClassId>{2, 3}, b);
  CHECK(s.table.num_groups() == 1);
}

TEST_CASE("stream helpers") {
  const auto centers = spread_centers(6, 6, 10.0);
  const auto train = gddsg::testing::clusters(centers, 15, 1.0, 12);
  const auto test = gddsg::testing::clusters(centers, 5, 1.0, 13);
  const std::vector<std::vector<ClassId>> tasks{{0, 1}, {2, 3, 4, 5}};
  const auto stream = make_stream(6, tasks, train, test);
  CHECK(stream.num_tasks() == 2);
  CHECK(stream.train_x[1].rows() == 60);
  CHECK(stream.test_y[0].size() == 10);

  const auto shuffled = reorder_stream(stream, 3);
  CHECK(shuffled.classes[0].size() == 2);
  CHECK(shuffled.classes[1].size() == 4);
  std::vector<ClassId> all;
  for (const auto& t : shuffled.classes) all.insert(all.end(), t.begin(), t.end());
  std::sort(all.begin(), all.end());
  CHECK(all == iota_ids(0, 6));
  CHECK(reorder_stream(stream, 3).classes == shuffled.classes);

  const auto run = run_stream(stream, small_config());
  CHECK(run.ledger.num_tasks() == 2);
  CHECK(run.group_counts.size() == 2);
  CHECK(final_average_accuracy(run.ledger, 2) >= 95.0);

  const std::vector<std::uint64_t> seeds{1, 2};
  const auto orders = run_orders(stream, small_config(), seeds);
  CHECK(orders.final_accuracy.size() == 2);
  CHECK(orders.report.mopd >= orders.report.aopd);
}
