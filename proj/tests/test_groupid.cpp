#include <doctest.h>

#include <algorithm>
#include <fstream>

#include "gddsg/errors.hpp"
#include "gddsg/groupid.hpp"
#include "support/test_util.hpp"

using namespace gddsg;

TEST_CASE("meta-features are distances to the registry centroids") {
  ClassRegistry reg;
  reg.add(4, Vector{{0.0, 0.0}});
  reg.add(1, Vector{{3.0, 4.0}});
  CHECK(reg.ids() == std::vector<ClassId>{4, 1});
  const Vector rho = meta_feature(Vector{{0.0, 0.0}}, reg);
  CHECK(rho[0] == 0.0);
  CHECK(rho[1] == doctest::Approx(5.0));
  CHECK(meta_feature(Vector{{3.0, 4.0}}, reg)[1] == 0.0);
  CHECK_THROWS_AS(meta_feature(Vector::Zero(3), reg), ArgumentError);
  CHECK_THROWS_AS(meta_feature(Vector::Zero(2), ClassRegistry{}), StateError);
  CHECK_THROWS_AS(reg.add(4, Vector::Zero(2)), ArgumentError);
  CHECK_THROWS_AS(reg.add(5, Vector::Zero(3)), ArgumentError);
}

TEST_CASE("meta-features match a scalar distance loop") {
  std::mt19937_64 rng(10);
  ClassRegistry reg;
  const Matrix c = gddsg::testing::random_matrix(9, 20, rng, 3.0);
  for (Eigen::Index i = 0; i < 9; ++i) reg.add(static_cast<ClassId>(i), c.row(i).transpose());
  for (int trial = 0; trial < 20; ++trial) {
    const Vector h = gddsg::testing::random_matrix(20, 1, rng).col(0);
    const Vector rho = meta_feature(h, reg);
    for (Eigen::Index i = 0; i < 9; ++i) {
      double s = 0.0;
      for (Eigen::Index d = 0; d < 20; ++d) s += (h[d] - c(i, d)) * (h[d] - c(i, d));
      CHECK(std::abs(rho[i] - std::sqrt(s)) <= 1e-12 * std::max(1.0, std::sqrt(s)));
    }
  }
}

TEST_CASE("meta dataset rebuild") {
  std::mt19937_64 rng(1);
  ClassRegistry reg;
  GroupTable table;
  const GroupId g0 = table.create_group();
  const GroupId g1 = table.create_group();
  reg.add(0, Vector::Zero(4));
  reg.add(1, Vector::Ones(4));
  table.assign(0, g0);
  table.assign(1, g1);
  std::map<ClassId, Matrix> samples{{0, gddsg::testing::random_matrix(3, 4, rng)},
                                    {1, gddsg::testing::random_matrix(3, 4, rng)}};
  auto data = rebuild_meta_dataset(samples, reg, table);
  CHECK(data.size() == 6);
  CHECK(data.rho.cols() == 2);
  CHECK(std::count(data.labels.begin(), data.labels.end(), g0) == 3);
  CHECK(std::count(data.labels.begin(), data.labels.end(), g1) == 3);

  reg.add(2, Vector::Constant(4, 2.0));
  table.assign(2, g0);
  samples.emplace(2, gddsg::testing::random_matrix(2, 4, rng));
  data = rebuild_meta_dataset(samples, reg, table);
  CHECK(data.size() == 8);
  CHECK(data.rho.cols() == 3);
  std::size_t row = 0;
  for (const auto& [c, x] : samples) {
    for (Eigen::Index i = 0; i < x.rows(); ++i, ++row) {
      CHECK(data.labels[row] == table.group_of.at(c));
      CHECK((data.rho.row(row).transpose() - meta_feature(x.row(i).transpose(), reg)).norm() == 0.0);
    }
  }

  samples.emplace(3, gddsg::testing::random_matrix(1, 4, rng));
  CHECK_THROWS_AS(rebuild_meta_dataset(samples, reg, table), ConsistencyError);
}

TEST_CASE("meta dataset CSV export") {
  gddsg::testing::TempDir dir("meta_csv");
  MetaDataset d;
  d.rho = Matrix(2, 2);
  d.rho << 0.1, 2.0, 3.5, 0.0;
  d.labels = {0, 4};
  d.write_csv(dir / "m.csv");
  std::ifstream in(dir / "m.csv");
  std::string header, first, second;
  std::getline(in, header);
  std::getline(in, first);
  std::getline(in, second);
  CHECK(header == "rho_0,rho_1,group");
  CHECK(std::stod(first.substr(0, first.find(','))) == 0.1);
  CHECK(second.substr(second.rfind(',') + 1) == "4");
}

TEST_CASE("k-NN prediction rules") {
  MetaDataset d;
  d.rho = Matrix(5, 1);
  d.rho << 0.0, 1.0, 2.0, 10.0, 11.0;
  d.labels = {2, 2, 5, 5, 5};

  SUBCASE("exact match with k=1") {
    GroupIdentifier id(1, VoteRule::majority);
    id.fit(d);
    CHECK(id.predict(Vector::Constant(1, 2.0)) == 5);
    CHECK(id.predict(Vector::Constant(1, 0.0)) == 2);
  }
  SUBCASE("majority over {2,2,5}") {
    GroupIdentifier id(3, VoteRule::majority);
    id.fit(d);
    CHECK(id.predict(Vector::Constant(1, 0.9)) == 2);
  }
  SUBCASE("vote ties go to the smaller group") {
    MetaDataset t;
    t.rho = Matrix(2, 1);
    t.rho << -1.0, 1.0;
    t.labels = {7, 3};
    GroupIdentifier id(3, VoteRule::distance_weighted);
    id.fit(t);
    CHECK(id.predict(Vector::Constant(1, 0.0)) == 3);
  }
  SUBCASE("errors") {
    GroupIdentifier id(3);
    CHECK_THROWS_AS(id.predict(Vector::Zero(1)), StateError);
    id.fit(d);
    CHECK_THROWS_AS(id.predict(Vector::Zero(2)), ArgumentError);
    CHECK_THROWS_AS(GroupIdentifier(4), ArgumentError);
    CHECK_THROWS_AS(GroupIdentifier(0), ArgumentError);
  }
}

TEST_CASE("row order never changes predictions") {
  std::mt19937_64 rng(12);
  MetaDataset d;
  d.rho = gddsg::testing::random_matrix(60, 3, rng);
  std::uniform_int_distribution<GroupId> g(0, 3);
  for (int i = 0; i < 60; ++i) d.labels.push_back(g(rng));
  // Duplicate some rows so distance ties actually occur.
  d.rho.row(7) = d.rho.row(3);
  d.rho.row(8) = d.rho.row(3);

  std::vector<Eigen::Index> perm(60);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  MetaDataset p;
  p.rho = d.rho(perm, Eigen::all);
  for (auto i : perm) p.labels.push_back(d.labels[i]);

  for (auto vote : {VoteRule::majority, VoteRule::distance_weighted}) {
    GroupIdentifier a(5, vote), b(5, vote);
    a.fit(d);
    b.fit(p);
    for (int q = 0; q < 100; ++q) {
      const Vector x = gddsg::testing::random_matrix(3, 1, rng).col(0);
      CHECK(a.predict(x) == b.predict(x));
    }
    CHECK(a.predict(d.rho.row(3).transpose()) == b.predict(d.rho.row(3).transpose()));
  }
}

TEST_CASE("vote rules agree on exact matches of duplicated rows") {
  std::mt19937_64 rng(13);
  MetaDataset d;
  const Matrix base = gddsg::testing::random_matrix(10, 4, rng);
  d.rho = Matrix(30, 4);
  for (int i = 0; i < 30; ++i) {
    d.rho.row(i) = base.row(i % 10);
    d.labels.push_back(static_cast<GroupId>(i % 10 % 3));
  }
  GroupIdentifier maj(3, VoteRule::majority), wt(3, VoteRule::distance_weighted);
  maj.fit(d);
  wt.fit(d);
  for (int i = 0; i < 10; ++i) {
    CHECK(maj.predict(base.row(i).transpose()) == wt.predict(base.row(i).transpose()));
    CHECK(maj.predict(base.row(i).transpose()) == d.labels[i]);
  }
}
