#include "gddsg/grouping.hpp"

#include <algorithm>
#include <limits>

#include "gddsg/errors.hpp"

namespace gddsg {

std::string to_string(DistanceMetric m) {
  switch (m) {
    case DistanceMetric::euclidean: return "euclidean";
    case DistanceMetric::manhattan: return "manhattan";
    case DistanceMetric::cosine: return "cosine";
  }
  return "euclidean";
}

DistanceMetric parse_distance_metric(const std::string& s) {
  if (s == "euclidean") return DistanceMetric::euclidean;
  if (s == "manhattan") return DistanceMetric::manhattan;
  if (s == "cosine") return DistanceMetric::cosine;
  throw ArgumentError("unknown distance metric '" + s + "'");
}

double distance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                DistanceMetric metric) {
  if (a.size() != b.size()) {
    throw ArgumentError("distance: vectors have lengths " + std::to_string(a.size()) + " and " +
                        std::to_string(b.size()));
  }
  switch (metric) {
    case DistanceMetric::euclidean: return (a - b).norm();
    case DistanceMetric::manhattan: return (a - b).lpNorm<1>();
    case DistanceMetric::cosine: {
      const double na = a.norm();
      const double nb = b.norm();
      if (na == 0.0 || nb == 0.0) return 1.0;
      return 1.0 - a.dot(b) / (na * nb);
    }
  }
  return 0.0;
}

ClassStats compute_class_stats(ClassId class_id, const Eigen::Ref<const Matrix>& samples,
                               DistanceMetric metric) {
  if (samples.rows() == 0) {
    throw ArgumentError("compute_class_stats: class " + std::to_string(class_id) +
                        " has no samples");
  }
  ClassStats s;
  s.class_id = class_id;
  s.count = static_cast<std::size_t>(samples.rows());
  s.centroid = samples.colwise().mean().transpose();
  double total = 0.0;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    total += distance(samples.row(i).transpose(), s.centroid, metric);
  }
  s.mean_radius = total / static_cast<double>(samples.rows());
  return s;
}

double adaptive_threshold(const ClassStats& a, const ClassStats& b) {
  if (a.centroid.size() != b.centroid.size()) {
    throw ArgumentError("adaptive_threshold: stats live in different spaces");
  }
  return std::max(a.mean_radius, b.mean_radius);
}

bool are_dissimilar(const ClassStats& a, const ClassStats& b, DistanceMetric metric) {
  const double eta = adaptive_threshold(a, b);
  return distance(a.centroid, b.centroid, metric) > eta;
}

void SimGraph::add_edge(ClassId a, ClassId b) {
  if (a == b) throw ArgumentError("SimGraph: self-loop on " + std::to_string(a));
  if (!vertices.contains(a) || !vertices.contains(b)) {
    throw ArgumentError("SimGraph: edge endpoint is not a vertex");
  }
  edges.emplace(std::min(a, b), std::max(a, b));
}

bool SimGraph::has_edge(ClassId a, ClassId b) const {
  return edges.contains({std::min(a, b), std::max(a, b)});
}

std::map<ClassId, std::vector<ClassId>> SimGraph::adjacency() const {
  std::map<ClassId, std::vector<ClassId>> adj;
  for (ClassId v : vertices) adj[v];
  for (auto [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  return adj;
}

std::size_t SimGraph::degree(ClassId v) const {
  std::size_t d = 0;
  for (auto [a, b] : edges) d += (a == v) + (b == v);
  return d;
}

std::size_t SimGraph::max_degree() const {
  std::size_t best = 0;
  for (const auto& [v, nbrs] : adjacency()) best = std::max(best, nbrs.size());
  return best;
}

nlohmann::json SimGraph::to_json() const {
  nlohmann::json e = nlohmann::json::array();
  for (auto [a, b] : edges) e.push_back({a, b});
  return {{"vertices", vertices}, {"edges", std::move(e)}};
}

SimGraph build_simgraph(std::span<const ClassStats> stats, DistanceMetric metric) {
  SimGraph g;
  for (const auto& s : stats) {
    if (!g.vertices.insert(s.class_id).second) {
      throw ArgumentError("build_simgraph: duplicate class id " + std::to_string(s.class_id));
    }
  }
  for (std::size_t i = 0; i < stats.size(); ++i) {
    for (std::size_t j = i + 1; j < stats.size(); ++j) {
      if (!are_dissimilar(stats[i], stats[j], metric)) g.add_edge(stats[i].class_id, stats[j].class_id);
    }
  }
  return g;
}

bool Coloring::is_proper(const SimGraph& g) const {
  for (auto [a, b] : g.edges) {
    auto ia = color_of.find(a);
    auto ib = color_of.find(b);
    if (ia == color_of.end() || ib == color_of.end() || ia->second == ib->second) return false;
  }
  return true;
}

std::vector<ClassId> degree_order(const SimGraph& g) {
  const auto adj = g.adjacency();
  std::vector<ClassId> order(g.vertices.begin(), g.vertices.end());
  // Vertices are already ascending, so a stable sort keeps the id tie-break.
  std::stable_sort(order.begin(), order.end(), [&](ClassId a, ClassId b) {
    return adj.at(a).size() > adj.at(b).size();
  });
  return order;
}

Coloring welsh_powell(const SimGraph& g) {
  const auto adj = g.adjacency();
  Coloring out;
  std::vector<char> used;
  for (ClassId v : degree_order(g)) {
    used.assign(out.num_colors + 1, 0);
    for (ClassId u : adj.at(v)) {
      if (auto it = out.color_of.find(u); it != out.color_of.end()) used[it->second] = 1;
    }
    const auto color = static_cast<std::uint32_t>(std::find(used.begin(), used.end(), 0) - used.begin());
    out.color_of[v] = color;
    out.num_colors = std::max(out.num_colors, color + 1);
  }
  return out;
}

std::size_t welsh_powell_bound(const SimGraph& g) {
  if (g.vertices.empty()) throw ArgumentError("welsh_powell_bound: empty graph");
  const auto adj = g.adjacency();
  const auto order = degree_order(g);
  std::size_t bound = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    bound = std::max(bound, std::min(adj.at(order[i]).size() + 1, i + 1));
  }
  return bound;
}

GroupId GroupTable::create_group() {
  const GroupId g = next_group_id++;
  members[g];
  return g;
}

void GroupTable::assign(ClassId c, GroupId g) {
  if (group_of.contains(c)) {
    throw AssignmentError("class " + std::to_string(c) + " is already assigned to group " +
                          std::to_string(group_of.at(c)));
  }
  auto it = members.find(g);
  if (it == members.end()) throw AssignmentError("unknown group " + std::to_string(g));
  it->second.push_back(c);
  group_of.emplace(c, g);
}

std::string to_string(GroupChoicePolicy p) {
  return p == GroupChoicePolicy::max_mean_distance ? "maxdist" : "eq5";
}

GroupChoicePolicy parse_group_choice_policy(const std::string& s) {
  if (s == "maxdist") return GroupChoicePolicy::max_mean_distance;
  if (s == "eq5") return GroupChoicePolicy::min_mean_distance;
  throw ArgumentError("unknown group-choice policy '" + s + "' (expected maxdist or eq5)");
}

TaskAssignment assign_task_classes(const GroupTable& table,
                                   const std::map<ClassId, ClassStats>& existing_stats,
                                   std::span<const ClassStats> new_stats,
                                   GroupChoicePolicy policy, DistanceMetric metric) {
  std::vector<const ClassStats*> ordered;
  std::set<ClassId> seen_new;
  for (const auto& s : new_stats) {
    if (table.contains(s.class_id)) {
      throw ArgumentError("class " + std::to_string(s.class_id) + " is already grouped");
    }
    if (!seen_new.insert(s.class_id).second) {
      throw ArgumentError("class " + std::to_string(s.class_id) + " listed twice in one task");
    }
    ordered.push_back(&s);
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const ClassStats* a, const ClassStats* b) { return a->class_id < b->class_id; });

  TaskAssignment out{table, {}, {}, {}};
  std::map<ClassId, const ClassStats*> stats_of;
  for (const auto& [id, s] : existing_stats) stats_of.emplace(id, &s);
  for (const auto& [c, g] : table.group_of) {
    if (!stats_of.contains(c)) {
      throw ConsistencyError("no class stats for grouped class " + std::to_string(c));
    }
  }

  std::vector<ClassStats> leftovers;
  for (const ClassStats* s : ordered) {
    bool found = false;
    GroupId best_group = 0;
    double best_score = 0.0;
    for (const auto& [g, members] : out.table.members) {
      if (members.empty()) continue;
      double total = 0.0;
      bool eligible = true;
      for (ClassId m : members) {
        const ClassStats& other = *stats_of.at(m);
        if (!are_dissimilar(*s, other, metric)) {
          eligible = false;
          break;
        }
        total += distance(s->centroid, other.centroid, metric);
      }
      if (!eligible) continue;
      const double mean = total / static_cast<double>(members.size());
      // Strict comparison keeps the smallest group id on ties.
      const bool better = !found || (policy == GroupChoicePolicy::max_mean_distance
                                         ? mean > best_score
                                         : mean < best_score);
      if (better) {
        found = true;
        best_group = g;
        best_score = mean;
      }
    }
    if (found) {
      out.table.assign(s->class_id, best_group);
      out.assignments.emplace_back(s->class_id, best_group);
      stats_of.emplace(s->class_id, s);
    } else {
      leftovers.push_back(*s);
    }
  }

  if (!leftovers.empty()) {
    out.leftover_graph = build_simgraph(leftovers, metric);
    out.leftover_coloring = welsh_powell(out.leftover_graph);
    std::vector<GroupId> color_group;
    for (std::uint32_t c = 0; c < out.leftover_coloring.num_colors; ++c) {
      color_group.push_back(out.table.create_group());
    }
    for (const auto& s : leftovers) {
      const GroupId g = color_group[out.leftover_coloring.color_of.at(s.class_id)];
      out.table.assign(s.class_id, g);
      out.assignments.emplace_back(s.class_id, g);
    }
    std::sort(out.assignments.begin(), out.assignments.end());
  }
  return out;
}

}  // namespace gddsg
