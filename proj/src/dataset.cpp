#include "gddsg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>

#include <json.hpp>

#include "gddsg/binary_io.hpp"
#include "gddsg/errors.hpp"

namespace gddsg {

namespace fs = std::filesystem;
using nlohmann::json;

void write_embedding_file(const fs::path& path, std::uint32_t dim,
                          std::span<const EmbeddingRecord> records) {
  binio::Writer w;
  w.bytes(kEmbeddingMagic);
  w.u32(kEmbeddingVersion);
  w.u32(dim);
  w.u64(records.size());
  for (const auto& rec : records) {
    if (rec.vector.size() != dim) {
      throw DimensionMismatchError("record of class " + std::to_string(rec.class_id) + " has " +
                                   std::to_string(rec.vector.size()) + " components, expected " +
                                   std::to_string(dim));
    }
    w.u32(rec.class_id);
    for (float v : rec.vector) w.f32(v);
  }
  binio::write_file(path, w.data());
}

EmbeddingFile read_embedding_file(const fs::path& path) {
  const std::string raw = binio::read_file(path);
  binio::Reader r(raw);
  if (r.remaining() < kEmbeddingMagic.size() || r.bytes(kEmbeddingMagic.size()) != kEmbeddingMagic) {
    throw BadMagicError(path.string() + ": not a GDE1 embedding file");
  }
  const std::uint32_t version = r.u32();
  if (version != kEmbeddingVersion) {
    throw VersionError(path.string() + ": unsupported GDE1 version " + std::to_string(version));
  }
  EmbeddingFile out;
  out.dim = r.u32();
  const std::uint64_t count = r.u64();
  const std::uint64_t record_bytes = 4 + 4 * static_cast<std::uint64_t>(out.dim);
  if (count > r.remaining() / record_bytes) {
    throw TruncatedError(path.string() + ": declares " + std::to_string(count) +
                         " records but payload holds " +
                         std::to_string(r.remaining() / record_bytes));
  }
  out.records.resize(count);
  for (auto& rec : out.records) {
    rec.class_id = r.u32();
    rec.vector.resize(out.dim);
    for (float& v : rec.vector) {
      v = r.f32();
      if (!std::isfinite(v)) {
        throw NonFiniteError(path.string() + ": non-finite component in record of class " +
                             std::to_string(rec.class_id));
      }
    }
  }
  if (r.remaining() != 0) {
    throw FormatError(path.string() + ": trailing bytes after last record");
  }
  return out;
}

std::size_t TaskManifest::num_classes() const {
  std::size_t n = 0;
  for (const auto& t : tasks) n += t.classes.size();
  return n;
}

void validate_manifest(const TaskManifest& manifest) {
  if (manifest.dim == 0) throw ManifestError("manifest dim must be positive");
  if (manifest.tasks.empty()) throw ManifestError("manifest has no tasks");
  std::map<ClassId, std::uint32_t> owner;
  for (std::size_t i = 0; i < manifest.tasks.size(); ++i) {
    const auto& task = manifest.tasks[i];
    if (task.id != i) {
      throw ContiguityError("task ids must be 0..T-1 in order; position " + std::to_string(i) +
                            " has id " + std::to_string(task.id));
    }
    if (task.classes.empty()) {
      throw ManifestError("task " + std::to_string(task.id) + " lists no classes");
    }
    for (ClassId c : task.classes) {
      auto [it, inserted] = owner.emplace(c, task.id);
      if (!inserted) {
        throw DisjointnessError("class " + std::to_string(c) + " appears in tasks " +
                                std::to_string(it->second) + " and " + std::to_string(task.id));
      }
    }
  }
}

TaskManifest load_manifest(const fs::path& path) {
  const std::string raw = binio::read_file(path);
  json doc;
  try {
    doc = json::parse(raw);
  } catch (const json::parse_error& e) {
    throw ManifestError(path.string() + ": invalid JSON: " + e.what());
  }
  const fs::path base = path.parent_path();
  TaskManifest m;
  try {
    m.dim = doc.at("dim").get<std::uint32_t>();
    m.seed = doc.at("seed").get<std::uint64_t>();
    for (const auto& t : doc.at("tasks")) {
      TaskEntry e;
      e.id = t.at("id").get<std::uint32_t>();
      e.classes = t.at("classes").get<std::vector<ClassId>>();
      e.file = base / t.at("file").get<std::string>();
      if (t.contains("test_file")) e.test_file = base / t.at("test_file").get<std::string>();
      m.tasks.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw ManifestError(path.string() + ": schema error: " + e.what());
  }
  validate_manifest(m);
  for (const auto& t : m.tasks) {
    if (!fs::exists(t.file)) throw MissingFileError("task file not found: " + t.file.string());
    if (t.test_file && !fs::exists(*t.test_file)) {
      throw MissingFileError("test file not found: " + t.test_file->string());
    }
  }
  return m;
}

void save_manifest(const fs::path& path, const TaskManifest& manifest) {
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  auto rel = [&](const fs::path& p) { return p.lexically_relative(base).generic_string(); };
  json tasks = json::array();
  for (const auto& t : manifest.tasks) {
    json e = {{"id", t.id}, {"classes", t.classes}, {"file", rel(t.file)}};
    if (t.test_file) e["test_file"] = rel(*t.test_file);
    tasks.push_back(std::move(e));
  }
  json doc = {{"dim", manifest.dim}, {"seed", manifest.seed}, {"tasks", std::move(tasks)}};
  binio::write_file(path, doc.dump(2) + "\n");
}

std::vector<EmbeddingRecord> load_task_records(const TaskManifest& manifest,
                                               std::size_t task_index, Split split) {
  if (task_index >= manifest.tasks.size()) {
    throw ArgumentError("task index " + std::to_string(task_index) + " out of range");
  }
  const auto& task = manifest.tasks[task_index];
  if (split == Split::test && !task.test_file) {
    throw ManifestError("task " + std::to_string(task.id) + " declares no test_file");
  }
  const fs::path& file = split == Split::train ? task.file : *task.test_file;
  EmbeddingFile ef = read_embedding_file(file);
  if (ef.dim != manifest.dim) {
    throw DimensionMismatchError(file.string() + ": dim " + std::to_string(ef.dim) +
                                 " does not match manifest dim " + std::to_string(manifest.dim));
  }
  const std::set<ClassId> allowed(task.classes.begin(), task.classes.end());
  for (const auto& rec : ef.records) {
    if (!allowed.contains(rec.class_id)) {
      throw ManifestError(file.string() + ": class " + std::to_string(rec.class_id) +
                          " is not listed for task " + std::to_string(task.id));
    }
  }
  return std::move(ef.records);
}

void SyntheticSpec::validate() const {
  if (num_classes < 1) throw ArgumentError("num_classes must be >= 1");
  if (num_tasks < 1 || num_tasks > num_classes) {
    throw ArgumentError("num_tasks must be in [1, num_classes]");
  }
  if (dim < 1) throw ArgumentError("dim must be >= 1");
  if (per_class_samples < 1) throw ArgumentError("per_class_samples must be >= 1");
  if (!(center_scale > 0.0)) throw ArgumentError("center_scale must be positive");
  if (!(within_std > 0.0)) throw ArgumentError("within_std must be positive");
  if (!(similar_offset >= 0.0 && similar_offset < 1.0)) {
    throw ArgumentError("similar_offset must be in [0, 1)");
  }
  for (auto [a, b] : similarity_pairs) {
    if (a >= num_classes || b >= num_classes || a == b) {
      throw ArgumentError("invalid similarity pair (" + std::to_string(a) + ", " +
                          std::to_string(b) + ")");
    }
  }
}

namespace {

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

Vector random_unit(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vector v(dim);
  do {
    for (auto& x : v) x = normal(rng);
  } while (v.norm() == 0.0);
  return v / v.norm();
}

}  // namespace

std::vector<Vector> synthetic_centers(const SyntheticSpec& spec) {
  spec.validate();
  auto rng = stream_rng(spec.seed, 0);
  std::vector<Vector> centers;
  centers.reserve(spec.num_classes);
  for (std::uint32_t c = 0; c < spec.num_classes; ++c) {
    centers.push_back(spec.center_scale * random_unit(spec.dim, rng));
  }
  for (auto [a, b] : spec.similarity_pairs) {
    centers[b] = centers[a] + spec.similar_offset * spec.within_std * random_unit(spec.dim, rng);
  }
  return centers;
}

std::vector<EmbeddingRecord> sample_gaussian_clusters(std::span<const Vector> centers,
                                                      std::size_t per_class, double within_std,
                                                      std::uint64_t seed,
                                                      std::span<const ClassId> ids) {
  if (!ids.empty() && ids.size() != centers.size()) {
    throw ArgumentError("ids and centers differ in length");
  }
  auto rng = stream_rng(seed, 1);
  std::normal_distribution<double> normal(0.0, within_std);
  std::vector<EmbeddingRecord> out;
  out.reserve(centers.size() * per_class);
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const ClassId id = ids.empty() ? static_cast<ClassId>(c) : ids[c];
    for (std::size_t s = 0; s < per_class; ++s) {
      EmbeddingRecord rec{id, std::vector<float>(centers[c].size())};
      for (Eigen::Index d = 0; d < centers[c].size(); ++d) {
        rec.vector[d] = static_cast<float>(centers[c][d] + normal(rng));
      }
      out.push_back(std::move(rec));
    }
  }
  return out;
}

TaskManifest generate_synthetic(const SyntheticSpec& spec, const fs::path& out_dir) {
  const auto centers = synthetic_centers(spec);
  fs::create_directories(out_dir);

  TaskManifest m;
  m.dim = spec.dim;
  m.seed = spec.seed;
  for (std::uint32_t t = 0; t < spec.num_tasks; ++t) {
    const std::uint32_t lo = static_cast<std::uint32_t>(std::uint64_t{t} * spec.num_classes / spec.num_tasks);
    const std::uint32_t hi = static_cast<std::uint32_t>(std::uint64_t{t + 1} * spec.num_classes / spec.num_tasks);
    TaskEntry e;
    e.id = t;
    for (ClassId c = lo; c < hi; ++c) e.classes.push_back(c);
    std::span<const Vector> task_centers(centers.data() + lo, hi - lo);

    // Train and test draws use disjoint seed streams per task.
    auto train = sample_gaussian_clusters(task_centers, spec.per_class_samples, spec.within_std,
                                          spec.seed * 1000003ULL + 2ULL * t, e.classes);
    e.file = out_dir / ("task_" + std::to_string(t) + "_train.gde");
    write_embedding_file(e.file, spec.dim, train);
    if (spec.test_per_class > 0) {
      auto test = sample_gaussian_clusters(task_centers, spec.test_per_class, spec.within_std,
                                           spec.seed * 1000003ULL + 2ULL * t + 1, e.classes);
      e.test_file = out_dir / ("task_" + std::to_string(t) + "_test.gde");
      write_embedding_file(*e.test_file, spec.dim, test);
    }
    m.tasks.push_back(std::move(e));
  }
  save_manifest(out_dir / "manifest.json", m);
  return m;
}

std::pair<Matrix, std::vector<ClassId>> to_matrix(std::span<const EmbeddingRecord> records) {
  const Eigen::Index dim = records.empty() ? 0 : static_cast<Eigen::Index>(records.front().vector.size());
  Matrix x(static_cast<Eigen::Index>(records.size()), dim);
  std::vector<ClassId> labels;
  labels.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (static_cast<Eigen::Index>(records[i].vector.size()) != dim) {
      throw DimensionMismatchError("records have inconsistent vector lengths");
    }
    for (Eigen::Index d = 0; d < dim; ++d) x(static_cast<Eigen::Index>(i), d) = records[i].vector[d];
    labels.push_back(records[i].class_id);
  }
  return {std::move(x), std::move(labels)};
}

}  // namespace gddsg
