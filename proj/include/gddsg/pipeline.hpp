#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gddsg/dataset.hpp"
#include "gddsg/groupid.hpp"
#include "gddsg/grouping.hpp"
#include "gddsg/projection.hpp"
#include "gddsg/ridge.hpp"
#include "gddsg/types.hpp"

namespace gddsg {

/// Where class centroids (and therefore thresholds and meta-features) live.
enum class CentroidSpace { projected, raw };

std::string to_string(CentroidSpace s);
CentroidSpace parse_centroid_space(const std::string& s);

struct GddsgConfig {
  std::size_t proj_dim = 1000;
  std::uint64_t seed = 0;
  Activation activation = Activation::relu;
  DistanceMetric metric = DistanceMetric::euclidean;
  GroupChoicePolicy policy = GroupChoicePolicy::max_mean_distance;
  std::vector<double> lambda_pool = default_lambda_pool();
  std::size_t reservoir_cap = 20;
  std::size_t k_neighbors = 11;
  VoteRule vote = VoteRule::distance_weighted;
  CentroidSpace centroid_space = CentroidSpace::projected;
  // When false every class lands in one shared group (ablation).
  bool grouping_enabled = true;
  // Experimental: argmax over every group's scores instead of two-stage.
  bool joint_argmax = false;
  std::size_t threads = 1;

  /// Throws ArgumentError on an invalid knob.
  void validate() const;
};

nlohmann::json to_json(const GddsgConfig& c);
GddsgConfig config_from_json(const nlohmann::json& j);

/// Everything a trained model needs: projection, groups, per-group ridge
/// heads, class prototypes, per-class reservoirs and the group identifier.
struct GddsgState {
  GddsgState(GddsgConfig config, std::size_t input_dim);

  GddsgConfig config;
  RandomProjection projection;
  GroupTable table;
  std::map<ClassId, ClassStats> class_stats;
  ClassRegistry registry;
  std::map<GroupId, GroupModel> models;
  GroupIdentifier identifier;
  // Raw input rows kept per class; used for lambda calibration and for
  // rebuilding the meta dataset whenever the registry grows.
  std::map<ClassId, Matrix> reservoirs;
  std::size_t tasks_seen = 0;

  std::size_t input_dim() const { return projection.input_dim(); }
  /// Reservoir rows mapped into the centroid space.
  std::map<ClassId, Matrix> reservoir_features() const;
  /// Throws ConsistencyError if the cross-structure invariants are broken.
  void check_invariants() const;
};

struct TaskTrainReport {
  std::vector<std::pair<ClassId, GroupId>> assignments;
  std::map<GroupId, double> lambdas;  // affected groups only
  std::size_t num_groups = 0;
};

/// Trains one task: `features` holds raw inputs one per row, `labels` their
/// classes, `classes` the task's (unseen) class list.
TaskTrainReport train_task(GddsgState& state, std::span<const ClassId> classes,
                           const Eigen::Ref<const Matrix>& features,
                           std::span<const ClassId> labels);

TaskTrainReport train_task(GddsgState& state, std::span<const ClassId> classes,
                           std::span<const EmbeddingRecord> records);

struct Prediction {
  ClassId class_id = 0;
  GroupId group_id = 0;
  std::map<ClassId, double> scores;  // classes of the chosen group (all groups in joint mode)
};

/// Two-stage inference: identify the group from meta-features, then take the
/// best-scoring class inside it (ties to the smaller class id).
Prediction predict(const GddsgState& state, const Eigen::Ref<const Vector>& x);

/// Row-wise predict over a raw feature matrix.
std::vector<Prediction> predict_batch(const GddsgState& state, const Eigen::Ref<const Matrix>& x);

/// Fraction of correctly classified samples per class.
std::map<ClassId, double> per_class_accuracy(const GddsgState& state,
                                             const Eigen::Ref<const Matrix>& x,
                                             std::span<const ClassId> labels);

inline constexpr int kStateVersion = 1;

/// Writes state.json plus one GDM1 file per matrix into `dir`.
void save_state(const GddsgState& state, const std::filesystem::path& dir);

/// Inverse of save_state. Throws MissingFileError, VersionError, FormatError.
GddsgState load_state(const std::filesystem::path& dir);

}  // namespace gddsg
