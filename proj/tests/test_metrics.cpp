#include <doctest.h>

#include <fstream>

#include "gddsg/errors.hpp"
#include "gddsg/metrics.hpp"
#include "support/test_util.hpp"

using namespace gddsg;

namespace {

// Tasks of the given sizes with consecutive class ids.
AccuracyLedger ledger_with(const std::vector<std::size_t>& sizes) {
  AccuracyLedger l;
  ClassId next = 0;
  for (std::size_t t = 0; t < sizes.size(); ++t) {
    std::vector<ClassId> cls(sizes[t]);
    for (auto& c : cls) c = next++;
    l.begin_task(t, cls);
  }
  return l;
}

}  // namespace

TEST_CASE("final average accuracy") {
  SUBCASE("perfect") {
    auto l = ledger_with({2});
    l.record(0, 0, 1.0);
    l.record(1, 0, 1.0);
    CHECK(final_average_accuracy(l, 1) == 100.0);
  }
  SUBCASE("two classes") {
    auto l = ledger_with({2});
    l.record(0, 0, 1.0);
    l.record(1, 0, 0.5);
    CHECK(final_average_accuracy(l, 1) == 75.0);
  }
  SUBCASE("every class weighs the same regardless of task size") {
    auto l = ledger_with({1, 3});
    l.record(0, 0, 1.0);
    l.record(0, 1, 1.0);
    for (ClassId c = 1; c < 4; ++c) l.record(c, 1, 0.0);
    CHECK(final_average_accuracy(l, 2) == doctest::Approx(25.0));
  }
  SUBCASE("incomplete ledger") {
    auto l = ledger_with({1, 1});
    l.record(0, 0, 1.0);
    l.record(1, 1, 1.0);
    CHECK_THROWS_AS(final_average_accuracy(l, 2), StateError);
    CHECK_THROWS_AS(forgetting(l, 2), StateError);
    CHECK_THROWS_AS(final_average_accuracy(l, 3), StateError);
  }
}

TEST_CASE("forgetting is a positive drop") {
  SUBCASE("stable") {
    auto l = ledger_with({1, 1});
    l.record(0, 0, 0.7);
    l.record(0, 1, 0.7);
    l.record(1, 1, 0.9);
    CHECK(forgetting(l, 2) == 0.0);
  }
  SUBCASE("one class loses 0.2") {
    auto l = ledger_with({1, 1});
    l.record(0, 0, 1.0);
    l.record(0, 1, 0.8);
    l.record(1, 1, 1.0);
    CHECK(forgetting(l, 2) == doctest::Approx(10.0));
  }
}

TEST_CASE("metrics agree with a direct summation on random ledgers") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> size(1, 6);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::size_t> sizes(1 + trial % 5);
    for (auto& s : sizes) s = size(rng);
    auto l = ledger_with(sizes);
    const std::size_t T = sizes.size();
    std::map<ClassId, std::pair<double, double>> first_last;
    ClassId c0 = 0;
    for (std::size_t t0 = 0; t0 < T; ++t0) {
      for (std::size_t k = 0; k < sizes[t0]; ++k, ++c0) {
        for (std::size_t t = t0; t < T; ++t) {
          const double a = u(rng);
          l.record(c0, t, a);
          if (t == t0) first_last[c0].first = a;
          if (t == T - 1) first_last[c0].second = a;
        }
      }
    }
    double acc = 0.0, drop = 0.0;
    for (const auto& [c, fl] : first_last) {
      acc += fl.second;
      drop += fl.first - fl.second;
    }
    const double n = static_cast<double>(first_last.size());
    CHECK(final_average_accuracy(l, T) == doctest::Approx(100.0 * acc / n).epsilon(1e-12));
    CHECK(forgetting(l, T) == doctest::Approx(100.0 * drop / n).epsilon(1e-12));

    // Relabelling classes leaves both metrics unchanged.
    AccuracyLedger relabeled;
    ClassId next = 0;
    std::map<ClassId, ClassId> map;
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<ClassId> cls;
      for (std::size_t k = 0; k < sizes[t]; ++k, ++next) {
        map[next] = 1000 - next;
        cls.push_back(map[next]);
      }
      relabeled.begin_task(t, cls);
    }
    for (const auto& [c, t0] : l.first_task()) {
      for (std::size_t t = t0; t < T; ++t) relabeled.record(map.at(c), t, l.at(c, t));
    }
    CHECK(final_average_accuracy(relabeled, T) == doctest::Approx(final_average_accuracy(l, T)));
    CHECK(forgetting(relabeled, T) == doctest::Approx(forgetting(l, T)));
  }
}

TEST_CASE("ledger bookkeeping and JSON") {
  auto l = ledger_with({2, 1});
  CHECK_THROWS_AS(l.record(2, 0, 0.5), ArgumentError);
  CHECK_THROWS_AS(l.record(0, 0, 1.5), ArgumentError);
  CHECK_THROWS_AS(l.record(9, 0, 0.5), ArgumentError);
  CHECK_THROWS_AS(l.begin_task(5, std::vector<ClassId>{7}), ArgumentError);
  CHECK_THROWS_AS(l.at(0, 0), StateError);
  l.record(0, 0, 0.5);
  l.record(1, 0, 1.0);
  CHECK(l.mean_accuracy(0) == doctest::Approx(75.0));
  CHECK(l.complete_through(0));
  CHECK_FALSE(l.complete_through(1));
  CHECK(l.class_counts_per_task() == std::vector<std::size_t>{2, 1});
  const auto back = AccuracyLedger::from_json(l.to_json());
  CHECK(back.to_json() == l.to_json());
  CHECK(back.at(1, 0) == 1.0);

  l.record(0, 1, 0.25);
  l.record(1, 1, 1.0);
  l.record(2, 1, 1.0);
  const auto report = metrics_report(l, 2);
  CHECK(report["A_N"].get<double>() == doctest::Approx(75.0));
  CHECK(report["F_N"].get<double>() == doctest::Approx(25.0 / 3.0));
  CHECK(report["per_task"].size() == 2);
}

TEST_CASE("order disparity metrics") {
  SUBCASE("identical orders") {
    OrderRunSet r{{{90, 85, 80}, {90, 85, 80}}};
    const auto o = opd_metrics(r);
    CHECK(o.opd == std::vector<double>{0, 0, 0});
    CHECK(o.mopd == 0.0);
    CHECK(o.aopd == 0.0);
  }
  SUBCASE("first-task gap") {
    OrderRunSet r{{{90}, {80}}};
    CHECK(opd_metrics(r).opd.front() == 10.0);
  }
  SUBCASE("max and mean") {
    OrderRunSet r{{{100, 90, 80}, {90, 94, 81}, {95, 92, 80.5}}};
    const auto o = opd_metrics(r);
    CHECK(o.opd[0] == doctest::Approx(10.0));
    CHECK(o.opd[1] == doctest::Approx(4.0));
    CHECK(o.opd[2] == doctest::Approx(1.0));
    CHECK(o.mopd == doctest::Approx(10.0));
    CHECK(o.aopd == doctest::Approx(5.0));
    const auto j = o.to_json();
    CHECK(j.contains("opd"));
    CHECK(j.contains("mopd"));
    CHECK(j.contains("aopd"));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(opd_metrics(OrderRunSet{{{1.0}}}), ArgumentError);
    CHECK_THROWS_AS(opd_metrics(OrderRunSet{{{1.0, 2.0}, {1.0}}}), ArgumentError);
  }
  SUBCASE("random run sets") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    for (int trial = 0; trial < 30; ++trial) {
      OrderRunSet r;
      for (int k = 0; k < 2; ++k) {
        std::vector<double> curve(5);
        for (auto& v : curve) v = u(rng);
        r.curves.push_back(curve);
      }
      auto before = opd_metrics(r);
      CHECK(before.mopd >= before.aopd);
      CHECK(before.aopd >= 0.0);
      std::vector<double> extra(5);
      for (auto& v : extra) v = u(rng);
      r.curves.push_back(extra);
      const auto after = opd_metrics(r);
      for (std::size_t t = 0; t < 5; ++t) CHECK(after.opd[t] >= before.opd[t]);
    }
  }
}

TEST_CASE("order curves CSV has one row per order") {
  gddsg::testing::TempDir dir("opd_csv");
  OrderRunSet r{{{1.5, 2.0}, {3.0, 4.25}}};
  r.write_csv(dir / "c.csv");
  std::ifstream in(dir / "c.csv");
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() == 3);
  CHECK(lines[2].find("4.25") != std::string::npos);
}
