#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "gddsg/types.hpp"

namespace gddsg {

/// Linear-model quantities for the closed-form order-sensitivity
/// expectations: per-task optimal parameters, samples per task n,
/// parameter count p and noise level sigma.
struct TheoryParams {
  std::vector<Vector> w_stars;
  std::size_t n = 1;
  std::size_t p = 3;
  double sigma = 0.0;

  std::size_t num_tasks() const { return w_stars.size(); }
  /// Overparameterization ratio r = 1 - n/p.
  double ratio() const { return 1.0 - static_cast<double>(n) / static_cast<double>(p); }
  /// Throws DomainError unless p >= n + 2, n >= 1, sigma >= 0 and every w*
  /// has p components; ArgumentError when there are no tasks.
  void validate() const;
};

/// Expected forgetting E[F_T] for T >= 2 tasks (ArgumentError otherwise).
double expected_forgetting(const TheoryParams& params);

/// Expected generalization error E[G_T] for T >= 1 tasks.
double expected_generalization(const TheoryParams& params);

/// sum over all ordered pairs (i, j) of ||w_i - w_j||^2.
double sum_sq_distances(std::span<const Vector> w_stars);

struct BrooksParams {
  std::size_t num_classes = 2;  // N
  double p_sim = 0.0;           // probability that two classes are similar
};

/// 1 - p^{2N} (1-p)^{N^2-2N} - p^{N(N-1)/2}, with powers taken in log space.
/// Rounding excursions outside [0, 1] smaller than 1e-12 are clamped.
double brooks_probability(const BrooksParams& bp);

struct PermutationRow {
  std::vector<std::size_t> order;  // order[k] = original index of the k-th task
  double forgetting = 0.0;
  double generalization = 0.0;
};

struct PermutationStudy {
  std::vector<PermutationRow> rows;
  double var_forgetting = 0.0;
  double var_generalization = 0.0;
  double sum_sq_distances = 0.0;
  bool exhaustive = false;

  nlohmann::json to_json() const;
};

struct StudyOptions {
  std::size_t max_exhaustive_tasks = 6;
  // Number of uniformly sampled permutations; required above the limit.
  std::optional<std::size_t> samples;
  std::uint64_t seed = 0;
};

/// Evaluates both expectations under every task order (T! of them) when
/// T <= max_exhaustive_tasks and no sample count is given, otherwise under
/// `samples` random orders. Variances are population variances.
PermutationStudy permutation_variance_study(const TheoryParams& params,
                                            const StudyOptions& options = {});

/// Same, over an explicit list of orders.
PermutationStudy permutation_study_over(const TheoryParams& params,
                                        std::span<const std::vector<std::size_t>> orders);

}  // namespace gddsg
