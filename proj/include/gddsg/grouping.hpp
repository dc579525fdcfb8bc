#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gddsg/types.hpp"

namespace gddsg {

enum class DistanceMetric { euclidean, manhattan, cosine };

std::string to_string(DistanceMetric m);
DistanceMetric parse_distance_metric(const std::string& s);

/// d(a, b) under `metric`. Throws ArgumentError on length mismatch.
double distance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                DistanceMetric metric = DistanceMetric::euclidean);

/// Per-class centroid and mean sample-to-centroid distance.
struct ClassStats {
  ClassId class_id = 0;
  Vector centroid;
  double mean_radius = 0.0;
  std::size_t count = 0;
};

/// `samples` holds one sample per row. Throws ArgumentError when empty.
ClassStats compute_class_stats(ClassId class_id, const Eigen::Ref<const Matrix>& samples,
                               DistanceMetric metric = DistanceMetric::euclidean);

/// Larger of the two classes' mean radii.
double adaptive_threshold(const ClassStats& a, const ClassStats& b);

/// True iff the centroid distance strictly exceeds adaptive_threshold(a, b).
bool are_dissimilar(const ClassStats& a, const ClassStats& b,
                    DistanceMetric metric = DistanceMetric::euclidean);

/// Undirected graph over class ids; an edge joins two similar classes.
/// Edges are stored as (smaller id, larger id).
struct SimGraph {
  std::set<ClassId> vertices;
  std::set<std::pair<ClassId, ClassId>> edges;

  void add_vertex(ClassId v) { vertices.insert(v); }
  /// Throws ArgumentError on self-loops or unknown endpoints.
  void add_edge(ClassId a, ClassId b);
  bool has_edge(ClassId a, ClassId b) const;

  std::map<ClassId, std::vector<ClassId>> adjacency() const;
  std::size_t degree(ClassId v) const;
  std::size_t max_degree() const;

  nlohmann::json to_json() const;
};

/// One vertex per class, an edge wherever are_dissimilar is false.
SimGraph build_simgraph(std::span<const ClassStats> stats,
                        DistanceMetric metric = DistanceMetric::euclidean);

struct Coloring {
  std::map<ClassId, std::uint32_t> color_of;
  std::uint32_t num_colors = 0;

  bool is_proper(const SimGraph& g) const;
};

/// Vertices in descending degree order, ties by ascending class id.
std::vector<ClassId> degree_order(const SimGraph& g);

/// Greedy Welsh-Powell coloring: walk degree_order(g) and give each vertex
/// the smallest color unused by its already-colored neighbours.
Coloring welsh_powell(const SimGraph& g);

/// max_i min(deg(v'_i) + 1, i) over the degree-descending order (1-based i).
std::size_t welsh_powell_bound(const SimGraph& g);

/// Class-to-group assignment. Both maps are kept consistent by assign().
struct GroupTable {
  std::map<ClassId, GroupId> group_of;
  std::map<GroupId, std::vector<ClassId>> members;
  GroupId next_group_id = 0;

  GroupId create_group();
  /// Throws AssignmentError if the class already has a group or `g` is unknown.
  void assign(ClassId c, GroupId g);
  bool contains(ClassId c) const { return group_of.contains(c); }
  std::size_t num_groups() const { return members.size(); }
};

/// How to pick among several groups a new class may join.
enum class GroupChoicePolicy {
  max_mean_distance,  // farthest on average; the default
  min_mean_distance,  // literal arg-min of the group-choice formula
};

std::string to_string(GroupChoicePolicy p);
GroupChoicePolicy parse_group_choice_policy(const std::string& s);

struct TaskAssignment {
  GroupTable table;
  std::vector<std::pair<ClassId, GroupId>> assignments;  // ascending class id
  SimGraph leftover_graph;
  Coloring leftover_coloring;
};

/// Places one task's new classes. Each class (ascending id) joins the best
/// existing group it is dissimilar to in full, where "existing" includes
/// groups populated earlier in the same call; classes that fit nowhere are
/// grouped by coloring their SimGraph, one new group per color.
TaskAssignment assign_task_classes(const GroupTable& table,
                                   const std::map<ClassId, ClassStats>& existing_stats,
                                   std::span<const ClassStats> new_stats,
                                   GroupChoicePolicy policy = GroupChoicePolicy::max_mean_distance,
                                   DistanceMetric metric = DistanceMetric::euclidean);

}  // namespace gddsg
