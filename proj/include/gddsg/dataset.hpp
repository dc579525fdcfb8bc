#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "gddsg/types.hpp"

namespace gddsg {

/// One backbone embedding and its label.
struct EmbeddingRecord {
  ClassId class_id = 0;
  std::vector<float> vector;

  bool operator==(const EmbeddingRecord&) const = default;
};

struct EmbeddingFile {
  std::uint32_t dim = 0;
  std::vector<EmbeddingRecord> records;
};

inline constexpr std::string_view kEmbeddingMagic = "GDE1";
inline constexpr std::uint32_t kEmbeddingVersion = 1;

/// Serializes records in GDE1 layout. Output bytes depend only on the inputs.
/// Throws DimensionMismatchError if a record's length differs from `dim`.
void write_embedding_file(const std::filesystem::path& path, std::uint32_t dim,
                          std::span<const EmbeddingRecord> records);

/// Parses a GDE1 file, rejecting bad magic, unknown versions, truncated
/// payloads, trailing bytes and non-finite components.
EmbeddingFile read_embedding_file(const std::filesystem::path& path);

struct TaskEntry {
  std::uint32_t id = 0;
  std::vector<ClassId> classes;
  std::filesystem::path file;
  // Held-out evaluation split; optional in the JSON.
  std::optional<std::filesystem::path> test_file;
};

/// Ordered stream of tasks with disjoint class sets. File paths are stored
/// resolved against the manifest's directory.
struct TaskManifest {
  std::uint32_t dim = 0;
  std::uint64_t seed = 0;
  std::vector<TaskEntry> tasks;

  std::size_t num_classes() const;
};

/// Checks task-id contiguity and class disjointness; throws ContiguityError
/// or DisjointnessError.
void validate_manifest(const TaskManifest& manifest);

/// Reads and validates a manifest. Referenced files must exist.
TaskManifest load_manifest(const std::filesystem::path& path);

/// Writes `manifest` as JSON with file paths relative to the manifest directory.
void save_manifest(const std::filesystem::path& path, const TaskManifest& manifest);

enum class Split { train, test };

/// Loads one task's records and checks they match the manifest: vector length
/// equals `dim` and every label belongs to the task's class list.
std::vector<EmbeddingRecord> load_task_records(const TaskManifest& manifest, std::size_t task_index,
                                               Split split);

struct SyntheticSpec {
  std::uint32_t num_classes = 10;
  std::uint32_t num_tasks = 1;
  std::uint32_t dim = 32;
  std::uint32_t per_class_samples = 100;
  std::uint32_t test_per_class = 50;
  double center_scale = 20.0;
  double within_std = 1.0;
  // Pairs whose second class is centred next to the first one.
  std::vector<std::pair<ClassId, ClassId>> similarity_pairs;
  // Offset between paired centres as a fraction of within_std; must be < 1.
  double similar_offset = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Cluster centres for a synthetic spec: uniform on the sphere of radius
/// center_scale, with similarity pairs displaced by similar_offset*within_std.
std::vector<Vector> synthetic_centers(const SyntheticSpec& spec);

/// Draws `per_class` isotropic Gaussian samples around each centre, in class
/// order. Class ids are the indices into `centers` unless `ids` is given.
std::vector<EmbeddingRecord> sample_gaussian_clusters(std::span<const Vector> centers,
                                                      std::size_t per_class, double within_std,
                                                      std::uint64_t seed,
                                                      std::span<const ClassId> ids = {});

/// Generates a complete task stream under `out_dir`: one train and one test
/// GDE1 file per task plus manifest.json. Classes are split into num_tasks
/// contiguous blocks. Deterministic per spec.
TaskManifest generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

/// Converts records into a row-per-sample matrix and parallel label list.
std::pair<Matrix, std::vector<ClassId>> to_matrix(std::span<const EmbeddingRecord> records);

}  // namespace gddsg
