#include "gddsg/projection.hpp"

#include <random>

#include "gddsg/errors.hpp"

namespace gddsg {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw ArgumentError("unknown activation '" + s + "'");
}

RandomProjection::RandomProjection(Matrix weights, Activation activation, std::uint64_t seed)
    : weights_(std::move(weights)), activation_(activation), seed_(seed) {
  if (weights_.rows() == 0 || weights_.cols() == 0) {
    throw ArgumentError("projection dimensions must be positive");
  }
  if (!weights_.allFinite()) throw NumericError("projection weights contain non-finite values");
}

Vector RandomProjection::expand(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != weights_.rows()) {
    throw ArgumentError("expand: input has length " + std::to_string(x.size()) + ", expected " +
                        std::to_string(weights_.rows()));
  }
  Vector h = weights_.transpose() * x;
  if (activation_ == Activation::relu) h = h.cwiseMax(0.0);
  return h;
}

Matrix RandomProjection::expand_batch(const Eigen::Ref<const Matrix>& x) const {
  if (x.cols() != weights_.rows()) {
    throw ArgumentError("expand_batch: rows have length " + std::to_string(x.cols()) +
                        ", expected " + std::to_string(weights_.rows()));
  }
  Matrix h = x * weights_;
  if (activation_ == Activation::relu) h = h.cwiseMax(0.0);
  return h;
}

RandomProjection init_projection(std::size_t input_dim, std::size_t output_dim,
                                 std::uint64_t seed, Activation activation) {
  if (input_dim == 0 || output_dim == 0) {
    throw ArgumentError("init_projection: dimensions must be >= 1");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix w(static_cast<Eigen::Index>(input_dim), static_cast<Eigen::Index>(output_dim));
  // Row-major fill so the draw sequence does not depend on Eigen's storage order.
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = normal(rng);
  }
  return RandomProjection(std::move(w), activation, seed);
}

}  // namespace gddsg
