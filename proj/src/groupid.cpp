#include "gddsg/groupid.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>

#include "gddsg/errors.hpp"

namespace gddsg {

void ClassRegistry::add(ClassId id, Vector centroid) {
  if (std::find(ids_.begin(), ids_.end(), id) != ids_.end()) {
    throw ArgumentError("registry already holds class " + std::to_string(id));
  }
  if (!ids_.empty() && centroid.size() != centroids_.cols()) {
    throw ArgumentError("registry centroid length mismatch");
  }
  if (ids_.empty()) centroids_.resize(0, centroid.size());
  centroids_.conservativeResize(centroids_.rows() + 1, Eigen::NoChange);
  centroids_.row(centroids_.rows() - 1) = centroid.transpose();
  ids_.push_back(id);
}

Vector meta_feature(const Eigen::Ref<const Vector>& h, const ClassRegistry& registry,
                    DistanceMetric metric) {
  if (registry.empty()) throw StateError("meta_feature: registry is empty");
  const Matrix& c = registry.centroids();
  if (h.size() != c.cols()) {
    throw ArgumentError("meta_feature: feature has length " + std::to_string(h.size()) +
                        ", centroids have " + std::to_string(c.cols()));
  }
  Vector rho(c.rows());
  for (Eigen::Index i = 0; i < c.rows(); ++i) rho[i] = distance(h, c.row(i).transpose(), metric);
  return rho;
}

void MetaDataset::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string());
  for (Eigen::Index j = 0; j < rho.cols(); ++j) out << "rho_" << j << ',';
  out << "group\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    for (Eigen::Index j = 0; j < rho.cols(); ++j) out << rho(static_cast<Eigen::Index>(r), j) << ',';
    out << labels[r] << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

MetaDataset rebuild_meta_dataset(const std::map<ClassId, Matrix>& samples,
                                 const ClassRegistry& registry, const GroupTable& table,
                                 DistanceMetric metric) {
  std::size_t rows = 0;
  for (const auto& [c, m] : samples) {
    if (!table.contains(c)) {
      throw ConsistencyError("stored samples of class " + std::to_string(c) + " have no group");
    }
    if (std::find(registry.ids().begin(), registry.ids().end(), c) == registry.ids().end()) {
      throw ConsistencyError("stored samples of class " + std::to_string(c) + " are not registered");
    }
    rows += static_cast<std::size_t>(m.rows());
  }
  MetaDataset out;
  out.rho.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(registry.size()));
  out.labels.reserve(rows);
  Eigen::Index r = 0;
  for (const auto& [c, m] : samples) {
    const GroupId g = table.group_of.at(c);
    for (Eigen::Index i = 0; i < m.rows(); ++i, ++r) {
      out.rho.row(r) = meta_feature(m.row(i).transpose(), registry, metric).transpose();
      out.labels.push_back(g);
    }
  }
  return out;
}

std::string to_string(VoteRule v) {
  return v == VoteRule::majority ? "majority" : "distance_weighted";
}

VoteRule parse_vote_rule(const std::string& s) {
  if (s == "majority") return VoteRule::majority;
  if (s == "distance_weighted" || s == "weighted") return VoteRule::distance_weighted;
  throw ArgumentError("unknown vote rule '" + s + "'");
}

GroupIdentifier::GroupIdentifier(std::size_t k_neighbors, VoteRule vote)
    : k_(k_neighbors), vote_(vote) {
  if (k_ == 0 || k_ % 2 == 0) throw ArgumentError("k_neighbors must be odd and positive");
}

void GroupIdentifier::fit(MetaDataset data) {
  if (data.rho.rows() != static_cast<Eigen::Index>(data.labels.size())) {
    throw ArgumentError("meta dataset rows and labels differ in count");
  }
  data_ = std::move(data);
}

GroupId GroupIdentifier::predict(const Eigen::Ref<const Vector>& rho) const {
  if (data_.size() == 0) throw StateError("group identifier has no training rows");
  if (rho.size() != data_.rho.cols()) {
    throw ArgumentError("predict_group: meta-feature has length " + std::to_string(rho.size()) +
                        ", identifier expects " + std::to_string(data_.rho.cols()));
  }
  struct Neighbor {
    double dist2;
    GroupId group;
  };
  std::vector<Neighbor> all(data_.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    all[i] = {(data_.rho.row(static_cast<Eigen::Index>(i)).transpose() - rho).squaredNorm(),
              data_.labels[i]};
  }
  const std::size_t k = std::min(k_, all.size());
  auto closer = [](const Neighbor& a, const Neighbor& b) {
    return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.group < b.group);
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), closer);

  std::map<GroupId, double> votes;
  for (std::size_t i = 0; i < k; ++i) {
    votes[all[i].group] +=
        vote_ == VoteRule::majority ? 1.0 : 1.0 / (std::sqrt(all[i].dist2) + 1e-12);
  }
  GroupId best = votes.begin()->first;
  double best_votes = votes.begin()->second;
  for (const auto& [g, v] : votes) {
    if (v > best_votes) {
      best = g;
      best_votes = v;
    }
  }
  return best;
}

}  // namespace gddsg
