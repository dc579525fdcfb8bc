#include "gddsg/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "gddsg/errors.hpp"

namespace gddsg {

void TheoryParams::validate() const {
  if (w_stars.empty()) throw ArgumentError("theory: at least one task is required");
  if (n < 1) throw DomainError("theory: n must be >= 1");
  if (p < n + 2) {
    throw DomainError("theory: requires p >= n + 2 (p=" + std::to_string(p) +
                      ", n=" + std::to_string(n) + ")");
  }
  if (!(sigma >= 0.0)) throw DomainError("theory: sigma must be >= 0");
  for (const auto& w : w_stars) {
    if (w.size() != static_cast<Eigen::Index>(p)) {
      throw DomainError("theory: every w* must have p = " + std::to_string(p) + " components");
    }
  }
}

namespace {

double noise_scale(const TheoryParams& tp) {
  const double p = static_cast<double>(tp.p);
  const double n = static_cast<double>(tp.n);
  return p * tp.sigma * tp.sigma / (p - n - 1.0);
}

}  // namespace

double expected_forgetting(const TheoryParams& params) {
  params.validate();
  const std::size_t T = params.num_tasks();
  if (T < 2) throw ArgumentError("expected_forgetting: needs at least two tasks");
  const double r = params.ratio();
  const double rT = std::pow(r, static_cast<double>(T));
  const double noise = noise_scale(params);

  double total = 0.0;
  for (std::size_t i = 1; i <= T - 1; ++i) {
    const Vector& wi = params.w_stars[i - 1];
    const double ri = std::pow(r, static_cast<double>(i));
    double term = (rT - ri) * wi.squaredNorm();
    for (std::size_t j = i + 1; j <= T; ++j) {
      const double c_ij = (1.0 - r) * (std::pow(r, static_cast<double>(T - i)) -
                                       std::pow(r, static_cast<double>(j - i)) +
                                       std::pow(r, static_cast<double>(T - j)));
      term += c_ij * (params.w_stars[j - 1] - wi).squaredNorm();
    }
    term += noise * (ri - rT);
    total += term;
  }
  return total / static_cast<double>(T - 1);
}

double expected_generalization(const TheoryParams& params) {
  params.validate();
  const std::size_t T = params.num_tasks();
  const double r = params.ratio();
  const double rT = std::pow(r, static_cast<double>(T));
  const double t = static_cast<double>(T);

  double norms = 0.0;
  for (std::size_t i = 1; i <= T - 1; ++i) norms += params.w_stars[i - 1].squaredNorm();

  double gaps = 0.0;
  for (std::size_t i = 1; i <= T; ++i) {
    double inner = 0.0;
    for (std::size_t k = 1; k <= T; ++k) {
      inner += (params.w_stars[k - 1] - params.w_stars[i - 1]).squaredNorm();
    }
    gaps += std::pow(r, static_cast<double>(T - i)) * inner;
  }
  return rT / t * norms + (1.0 - r) / t * gaps + noise_scale(params) * (1.0 - rT);
}

double sum_sq_distances(std::span<const Vector> w_stars) {
  double s = 0.0;
  for (const auto& a : w_stars) {
    for (const auto& b : w_stars) s += (a - b).squaredNorm();
  }
  return s;
}

namespace {

// exponent * log(base), with 0^0 = 1 and 0^e = 0 for e > 0.
double log_power(double base, double exponent, double log_base) {
  if (exponent == 0.0) return 0.0;
  if (base == 0.0) return -std::numeric_limits<double>::infinity();
  return exponent * log_base;
}

}  // namespace

double brooks_probability(const BrooksParams& bp) {
  if (bp.num_classes < 2) throw ArgumentError("brooks_probability: N must be >= 2");
  if (!(bp.p_sim >= 0.0 && bp.p_sim <= 1.0)) {
    throw ArgumentError("brooks_probability: p must lie in [0, 1]");
  }
  const double n = static_cast<double>(bp.num_classes);
  const double p = bp.p_sim;
  const double log_p = p > 0.0 ? std::log(p) : 0.0;
  const double log_q = p < 1.0 ? std::log1p(-p) : 0.0;
  // (1-p)^(N^2-2N) underflows long before the product matters, so the
  // whole first term is formed as one exponent.
  const double first = std::exp(log_power(p, 2.0 * n, log_p) + log_power(1.0 - p, n * n - 2.0 * n, log_q));
  const double second = std::exp(log_power(p, 0.5 * n * (n - 1.0), log_p));
  double prob = 1.0 - first - second;
  if (prob < 0.0 && prob > -1e-12) prob = 0.0;
  if (prob > 1.0 && prob < 1.0 + 1e-12) prob = 1.0;
  return prob;
}

namespace {

double population_variance(std::vector<double> values) {
  // Sorting first makes the result independent of evaluation order.
  std::sort(values.begin(), values.end());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return var / static_cast<double>(values.size());
}

}  // namespace

nlohmann::json PermutationStudy::to_json() const {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& row : rows) {
    table.push_back({{"order", row.order}, {"E_F", row.forgetting}, {"E_G", row.generalization}});
  }
  return {{"var_E_F", var_forgetting},
          {"var_E_G", var_generalization},
          {"sum_sq_distances", sum_sq_distances},
          {"exhaustive", exhaustive},
          {"table", std::move(table)}};
}

PermutationStudy permutation_study_over(const TheoryParams& params,
                                        std::span<const std::vector<std::size_t>> orders) {
  params.validate();
  const std::size_t T = params.num_tasks();
  if (orders.empty()) throw ArgumentError("permutation study: no orders given");
  PermutationStudy study;
  std::vector<double> fs;
  std::vector<double> gs;
  for (const auto& order : orders) {
    std::vector<std::size_t> check = order;
    std::sort(check.begin(), check.end());
    for (std::size_t i = 0; i < check.size(); ++i) {
      if (check[i] != i || check.size() != T) throw ArgumentError("permutation study: invalid order");
    }
    TheoryParams permuted = params;
    for (std::size_t k = 0; k < T; ++k) permuted.w_stars[k] = params.w_stars[order[k]];
    PermutationRow row{order, expected_forgetting(permuted), expected_generalization(permuted)};
    fs.push_back(row.forgetting);
    gs.push_back(row.generalization);
    study.rows.push_back(std::move(row));
  }
  study.var_forgetting = population_variance(fs);
  study.var_generalization = population_variance(gs);
  study.sum_sq_distances = sum_sq_distances(params.w_stars);
  return study;
}

PermutationStudy permutation_variance_study(const TheoryParams& params, const StudyOptions& options) {
  params.validate();
  const std::size_t T = params.num_tasks();
  std::vector<std::vector<std::size_t>> orders;
  std::vector<std::size_t> order(T);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const bool exhaustive = !options.samples;
  if (exhaustive) {
    if (T > options.max_exhaustive_tasks) {
      throw ArgumentError("permutation study: T = " + std::to_string(T) +
                          " exceeds the exhaustive limit; give a sample count");
    }
    do {
      orders.push_back(order);
    } while (std::next_permutation(order.begin(), order.end()));
  } else {
    if (*options.samples == 0) throw ArgumentError("permutation study: sample count must be >= 1");
    std::mt19937_64 rng(options.seed);
    for (std::size_t s = 0; s < *options.samples; ++s) {
      std::shuffle(order.begin(), order.end(), rng);
      orders.push_back(order);
    }
  }
  PermutationStudy study = permutation_study_over(params, orders);
  study.exhaustive = exhaustive;
  return study;
}

}  // namespace gddsg
