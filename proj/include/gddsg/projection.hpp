#pragma once

#include <cstdint>
#include <string>

#include "gddsg/types.hpp"

namespace gddsg {

enum class Activation { relu, identity };

std::string to_string(Activation a);
Activation parse_activation(const std::string& s);

/// Frozen random feature expansion h(x) = g(x^T W), W in R^{L x M}.
class RandomProjection {
 public:
  /// Wraps an existing weight matrix (used when restoring a saved state).
  RandomProjection(Matrix weights, Activation activation, std::uint64_t seed);

  std::size_t input_dim() const { return static_cast<std::size_t>(weights_.rows()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(weights_.cols()); }
  const Matrix& weights() const { return weights_; }
  Activation activation() const { return activation_; }
  std::uint64_t seed() const { return seed_; }

  /// Expands one input of length L into a vector of length M.
  Vector expand(const Eigen::Ref<const Vector>& x) const;

  /// Expands a row-per-sample N x L matrix into N x M.
  Matrix expand_batch(const Eigen::Ref<const Matrix>& x) const;

 private:
  Matrix weights_;
  Activation activation_;
  std::uint64_t seed_;
};

/// Samples W with i.i.d. standard normal entries from a generator seeded by
/// `seed`. Same (L, M, seed) always yields the same W.
RandomProjection init_projection(std::size_t input_dim, std::size_t output_dim, std::uint64_t seed,
                                 Activation activation = Activation::relu);

}  // namespace gddsg
