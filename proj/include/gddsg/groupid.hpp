#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gddsg/grouping.hpp"
#include "gddsg/types.hpp"

namespace gddsg {

/// Class prototypes in arrival order. The order fixes the coordinates of
/// every meta-feature vector.
class ClassRegistry {
 public:
  /// Throws ArgumentError on a duplicate id or a centroid of a different length.
  void add(ClassId id, Vector centroid);

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  const std::vector<ClassId>& ids() const { return ids_; }
  /// One centroid per row, in registry order.
  const Matrix& centroids() const { return centroids_; }

 private:
  std::vector<ClassId> ids_;
  Matrix centroids_;
};

/// Distances from `h` to every registered centroid, in registry order.
Vector meta_feature(const Eigen::Ref<const Vector>& h, const ClassRegistry& registry,
                    DistanceMetric metric = DistanceMetric::euclidean);

struct MetaDataset {
  Matrix rho;  // one meta-feature vector per row
  std::vector<GroupId> labels;

  std::size_t size() const { return labels.size(); }
  /// Header rho_0..rho_{k-1},group; values printed round-trip exact.
  void write_csv(const std::filesystem::path& path) const;
};

/// One row per stored sample, labelled with the owning class's group.
/// `samples` maps each class to its stored rows in the registry's space.
MetaDataset rebuild_meta_dataset(const std::map<ClassId, Matrix>& samples,
                                 const ClassRegistry& registry, const GroupTable& table,
                                 DistanceMetric metric = DistanceMetric::euclidean);

enum class VoteRule { majority, distance_weighted };

std::string to_string(VoteRule v);
VoteRule parse_vote_rule(const std::string& s);

/// k-nearest-neighbour group classifier over meta-features.
class GroupIdentifier {
 public:
  explicit GroupIdentifier(std::size_t k_neighbors = 11, VoteRule vote = VoteRule::distance_weighted);

  void fit(MetaDataset data);

  /// Euclidean k-NN vote in meta-feature space. Uses min(k, rows) neighbours.
  /// Ties in distance prefer the smaller group label and ties in the vote
  /// prefer the smaller group id, so row order never matters.
  GroupId predict(const Eigen::Ref<const Vector>& rho) const;

  std::size_t k_neighbors() const { return k_; }
  VoteRule vote() const { return vote_; }
  const MetaDataset& data() const { return data_; }

 private:
  std::size_t k_;
  VoteRule vote_;
  MetaDataset data_;
};

}  // namespace gddsg
