#include "qss/clustering.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "qss/csv.hpp"
#include "qss/error.hpp"

namespace qss {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    ss += d * d;
  }
  return ss;
}

std::vector<double> mean_of(std::span<const StatePoint> points,
                            std::span<const std::size_t> members) {
  std::vector<double> c(points[members.front()].dimension(), 0.0);
  for (std::size_t m : members)
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += points[m].coords[i];
  for (auto& v : c) v /= static_cast<double>(members.size());
  return c;
}

double mean_distance_to(std::span<const StatePoint> points, std::span<const std::size_t> members,
                        std::span<const double> center) {
  double sum = 0.0;
  for (std::size_t m : members) sum += distance(points[m].coords, center);
  return sum / static_cast<double>(members.size());
}

struct LloydResult {
  std::vector<unsigned char> labels;
  std::array<std::vector<double>, 2> centers;
  double ssq = 0.0;
};

LloydResult lloyd(std::span<const StatePoint> points, std::span<const std::size_t> subset,
                  std::size_t seed_a, std::size_t seed_b) {
  const std::size_t n = subset.size();
  const std::size_t d = points[subset.front()].dimension();
  LloydResult r;
  r.labels.assign(n, 2);
  r.centers[0] = points[seed_a].coords;
  r.centers[1] = points[seed_b].coords;

  for (std::size_t iter = 0; iter < kmeans_max_iterations; ++iter) {
    bool changed = false;
    std::array<std::size_t, 2> sizes{0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = points[subset[i]].coords;
      const unsigned char lab =
          squared_distance(p, r.centers[1]) < squared_distance(p, r.centers[0]) ? 1 : 0;
      changed = changed || lab != r.labels[i];
      r.labels[i] = lab;
      ++sizes[lab];
    }
    for (unsigned char empty = 0; empty < 2; ++empty) {
      if (sizes[empty] != 0) continue;
      // Hand the point farthest from the other center to the empty cluster.
      std::size_t far = 0;
      double best = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double dd = squared_distance(points[subset[i]].coords, r.centers[1 - empty]);
        if (dd > best) {
          best = dd;
          far = i;
        }
      }
      r.labels[far] = empty;
      ++sizes[empty];
      --sizes[1 - empty];
      changed = true;
    }
    for (int c = 0; c < 2; ++c) r.centers[c].assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k) r.centers[r.labels[i]][k] += points[subset[i]].coords[k];
    for (int c = 0; c < 2; ++c)
      for (auto& v : r.centers[c]) v /= static_cast<double>(sizes[c]);
    if (!changed) break;
  }
  for (std::size_t i = 0; i < n; ++i)
    r.ssq += squared_distance(points[subset[i]].coords, r.centers[r.labels[i]]);
  return r;
}

std::pair<std::size_t, std::size_t> farthest_pair(std::span<const StatePoint> points,
                                                  std::span<const std::size_t> subset) {
  std::pair<std::size_t, std::size_t> best{subset[0], subset[0]};
  double best_d = -1.0;
  for (std::size_t i = 0; i < subset.size(); ++i)
    for (std::size_t j = i + 1; j < subset.size(); ++j) {
      const double dd = squared_distance(points[subset[i]].coords, points[subset[j]].coords);
      if (dd > best_d) {
        best_d = dd;
        best = {subset[i], subset[j]};
      }
    }
  return best;
}

std::size_t node_depth(const ClusterModel& model, std::size_t node) {
  std::size_t depth = 0;
  while (model.tree[node].parent) {
    node = *model.tree[node].parent;
    ++depth;
  }
  return depth;
}

void dump_node(const ClusterModel& model, std::size_t node, std::size_t depth,
               const std::map<std::size_t, std::size_t>& leaf_cluster, std::ostringstream& out) {
  const auto& n = model.tree[node];
  out << std::string(2 * depth, ' ') << "node " << node << " members=" << n.members.size()
      << " mean_distance=" << csv::format(n.mean_distance);
  if (const auto it = leaf_cluster.find(node); it != leaf_cluster.end())
    out << " cluster=" << it->second;
  if (n.frozen) out << " frozen";
  out << '\n';
  if (n.children)
    for (std::size_t c : *n.children) dump_node(model, c, depth + 1, leaf_cluster, out);
}

std::vector<std::size_t> parse_ids(std::istringstream& in) {
  std::vector<std::size_t> ids;
  std::size_t v;
  while (in >> v) ids.push_back(v);
  return ids;
}

}  // namespace

std::vector<std::size_t> ClusterModel::live_ids() const {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < clusters.size(); ++i)
    if (clusters[i].live) ids.push_back(i);
  return ids;
}

std::size_t ClusterModel::live_count() const { return live_ids().size(); }

const Cluster& ClusterModel::live(std::size_t id) const {
  if (id >= clusters.size() || !clusters[id].live)
    throw UnknownClusterError("cluster " + std::to_string(id) + " is not a live cluster");
  return clusters[id];
}

std::size_t ClusterModel::lowest_common_ancestor(std::span<const std::size_t> nodes) const {
  std::size_t lca = nodes.front();
  for (std::size_t k = 1; k < nodes.size(); ++k) {
    std::size_t a = lca, b = nodes[k];
    std::size_t da = node_depth(*this, a), db = node_depth(*this, b);
    while (da > db) a = *tree[a].parent, --da;
    while (db > da) b = *tree[b].parent, --db;
    while (a != b) a = *tree[a].parent, b = *tree[b].parent;
    lca = a;
  }
  return lca;
}

std::vector<bool> StateTimeline::occupancy(std::size_t state) const {
  std::vector<bool> mask(states.size());
  for (std::size_t t = 0; t < states.size(); ++t) mask[t] = states[t] == state;
  return mask;
}

std::size_t MergeProposal::support_count() const {
  std::set<std::size_t> refs;
  for (const auto& s : support) refs.insert(s.reference);
  return refs.size();
}

TwoMeans kmeans2(std::span<const StatePoint> points, std::span<const std::size_t> subset,
                 std::uint64_t seed) {
  if (subset.size() < 2) throw CannotSplitError("2-means needs at least 2 points");
  const auto [fa, fb] = farthest_pair(points, subset);
  if (squared_distance(points[fa].coords, points[fb].coords) == 0.0)
    throw CannotSplitError("all " + std::to_string(subset.size()) + " points are identical");

  std::optional<LloydResult> best;
  std::size_t best_restart = 0;
  for (std::size_t r = 0; r < kmeans_restarts; ++r) {
    std::size_t a = fa, b = fb;
    if (r > 0) {
      std::mt19937_64 rng(derive_seed(seed, r));
      std::uniform_int_distribution<std::size_t> pick(0, subset.size() - 1);
      for (int tries = 0; tries < 1000; ++tries) {
        const std::size_t ia = subset[pick(rng)], ib = subset[pick(rng)];
        if (squared_distance(points[ia].coords, points[ib].coords) > 0.0) {
          a = ia;
          b = ib;
          break;
        }
      }
    }
    auto result = lloyd(points, subset, a, b);
    if (!best || result.ssq < best->ssq) {
      best = std::move(result);
      best_restart = r;
    }
  }

  const unsigned char first = best->labels[0];
  TwoMeans out;
  out.ssq = best->ssq;
  out.restart = best_restart;
  for (std::size_t i = 0; i < subset.size(); ++i)
    out.members[best->labels[i] == first ? 0 : 1].push_back(subset[i]);
  for (auto& m : out.members) std::sort(m.begin(), m.end());
  for (int c = 0; c < 2; ++c) out.centers[c] = mean_of(points, out.members[c]);
  return out;
}

TwoMeans kmeans2(std::span<const StatePoint> points, std::uint64_t seed) {
  std::vector<std::size_t> all(points.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return kmeans2(points, all, seed);
}

ClusterModel bisecting_kmeans(std::span<const StatePoint> points, double threshold,
                              std::uint64_t seed) {
  if (!(threshold > 0.0)) throw ConfigError("cluster threshold must be positive");
  if (points.empty()) throw InsufficientDataError("no points to cluster");
  const std::size_t d = points.front().dimension();
  for (const auto& p : points)
    if (p.dimension() != d) throw DimensionError("points of mixed dimension");

  ClusterModel model;
  model.threshold = threshold;
  model.seed = seed;
  ClusterNode root;
  root.members.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) root.members[i] = i;
  root.center = mean_of(points, root.members);
  root.mean_distance = mean_distance_to(points, root.members, root.center);
  model.tree.push_back(std::move(root));

  while (true) {
    std::optional<std::size_t> pick;
    for (std::size_t i = 0; i < model.tree.size(); ++i) {
      const auto& n = model.tree[i];
      if (n.children || n.frozen || n.mean_distance < threshold) continue;
      if (!pick || n.mean_distance > model.tree[*pick].mean_distance) pick = i;
    }
    if (!pick) break;
    const std::size_t parent = *pick;
    TwoMeans split;
    try {
      split = kmeans2(points, model.tree[parent].members, derive_seed(seed, parent, 1));
    } catch (const CannotSplitError&) {
      model.tree[parent].frozen = true;
      continue;
    }
    std::array<std::size_t, 2> kids{};
    for (int c = 0; c < 2; ++c) {
      ClusterNode child;
      child.parent = parent;
      child.members = std::move(split.members[c]);
      child.center = std::move(split.centers[c]);
      child.mean_distance = mean_distance_to(points, child.members, child.center);
      kids[c] = model.tree.size();
      model.tree.push_back(std::move(child));
    }
    model.tree[parent].children = kids;
  }

  model.labels.assign(points.size(), 0);
  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    const std::size_t node = stack.back();
    stack.pop_back();
    const auto& n = model.tree[node];
    if (n.children) {
      stack.push_back((*n.children)[1]);
      stack.push_back((*n.children)[0]);
      continue;
    }
    const std::size_t id = model.clusters.size();
    model.clusters.push_back({node, n.members, n.center, n.mean_distance, true, {}});
    for (std::size_t m : n.members) model.labels[m] = id;
  }
  return model;
}

StateTimeline assign_states(std::span<const StatePoint> points, const ClusterModel& model) {
  const auto ids = model.live_ids();
  StateTimeline timeline;
  timeline.states.resize(points.size());
  for (std::size_t t = 0; t < points.size(); ++t) {
    std::size_t best = ids.front();
    double best_d = squared_distance(points[t].coords, model.clusters[best].center);
    for (std::size_t id : ids) {
      if (points[t].dimension() != model.clusters[id].center.size())
        throw DimensionError("point and model dimensions differ");
      const double dd = squared_distance(points[t].coords, model.clusters[id].center);
      if (dd < best_d) {
        best_d = dd;
        best = id;
      }
    }
    timeline.states[t] = best;
  }
  return timeline;
}

DistanceSeries center_distance_series(std::span<const StatePoint> points,
                                      const ClusterModel& model, std::size_t id, Execution exec) {
  const auto& center = model.live(id).center;
  DistanceSeries s;
  s.reference = id;
  s.values.resize(points.size());
  const auto n = static_cast<std::ptrdiff_t>(points.size());
#pragma omp parallel for schedule(static) if (exec == Execution::parallel)
  for (std::ptrdiff_t t = 0; t < n; ++t) s.values[t] = distance(points[t].coords, center);
  return s;
}

ClusterModel merge_clusters(std::span<const StatePoint> points, const ClusterModel& model,
                            std::span<const std::size_t> ids) {
  std::set<std::size_t> unique(ids.begin(), ids.end());
  if (unique.size() < 2) throw ConfigError("merging needs at least two distinct clusters");
  std::vector<std::size_t> nodes;
  std::vector<std::size_t> members;
  for (std::size_t id : unique) {
    const auto& c = model.live(id);
    nodes.push_back(c.node);
    members.insert(members.end(), c.members.begin(), c.members.end());
  }
  std::sort(members.begin(), members.end());
  if (members.back() >= points.size())
    throw DimensionError("model does not match the supplied points");

  ClusterModel out = model;
  const std::size_t new_id = out.clusters.size();
  for (std::size_t id : unique) out.clusters[id].live = false;

  Cluster merged;
  merged.node = model.lowest_common_ancestor(nodes);
  merged.center = mean_of(points, members);
  merged.mean_distance = mean_distance_to(points, members, merged.center);
  merged.members = std::move(members);
  merged.merged_from.assign(unique.begin(), unique.end());
  for (std::size_t m : merged.members) out.labels[m] = new_id;
  out.clusters.push_back(std::move(merged));
  out.merges.push_back({new_id, {unique.begin(), unique.end()}});
  return out;
}

std::vector<MergeProposal> propose_merges(const ClusterModel& model,
                                          std::span<const ReferencePotential> potentials,
                                          double tol) {
  const auto ids = model.live_ids();
  std::map<std::vector<std::size_t>, std::vector<MergeSupport>> candidates;
  for (const auto& ref : potentials) {
    const auto& center = model.live(ref.reference).center;
    for (const auto& m : ref.curve.minima) {
      std::vector<std::size_t> near;
      std::vector<std::size_t> nodes;
      for (std::size_t j : ids) {
        if (j == ref.reference) continue;
        const double dj = distance(model.clusters[j].center, center);
        if (std::abs(dj - m.x) <= tol) {
          near.push_back(j);
          nodes.push_back(model.clusters[j].node);
        }
      }
      if (near.size() < 2 || model.lowest_common_ancestor(nodes) == 0) continue;
      candidates[near].push_back({ref.reference, m.x});
    }
  }
  std::vector<MergeProposal> out;
  for (auto& [members, support] : candidates) {
    MergeProposal p{members, std::move(support)};
    if (p.support_count() >= 2) out.push_back(std::move(p));
  }
  return out;
}

std::string tree_dump(const ClusterModel& model) {
  std::map<std::size_t, std::size_t> leaf_cluster;
  for (std::size_t id = 0; id < model.clusters.size(); ++id)
    if (model.clusters[id].merged_from.empty()) leaf_cluster[model.clusters[id].node] = id;
  std::ostringstream out;
  out << "threshold=" << csv::format(model.threshold) << " seed=" << model.seed
      << " live_clusters=" << model.live_count() << '\n';
  if (!model.tree.empty()) dump_node(model, 0, 0, leaf_cluster, out);
  for (const auto& m : model.merges) {
    out << "merge cluster=" << m.cluster << " from=";
    for (std::size_t i = 0; i < m.from.size(); ++i) out << (i ? "," : "") << m.from[i];
    out << " members=" << model.clusters[m.cluster].members.size() << '\n';
  }
  return out.str();
}

void write_model(const ClusterModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "threshold " << csv::format(model.threshold) << '\n';
  out << "seed " << model.seed << '\n';
  out << "points " << model.labels.size() << '\n';
  for (std::size_t i = 0; i < model.tree.size(); ++i) {
    const auto& n = model.tree[i];
    out << "node " << i << ' ' << (n.parent ? static_cast<long long>(*n.parent) : -1) << ' '
        << (n.children ? static_cast<long long>((*n.children)[0]) : -1) << ' '
        << (n.children ? static_cast<long long>((*n.children)[1]) : -1) << ' ' << n.frozen
        << " :";
    for (std::size_t m : n.members) out << ' ' << m;
    out << '\n';
  }
  for (std::size_t id = 0; id < model.clusters.size(); ++id) {
    const auto& c = model.clusters[id];
    out << "cluster " << id << ' ' << c.node << ' ' << c.live << " from";
    for (std::size_t f : c.merged_from) out << ' ' << f;
    out << " :";
    for (std::size_t m : c.members) out << ' ' << m;
    out << '\n';
  }
}

ClusterModel read_model(const std::string& path, std::span<const StatePoint> points) {
  const auto lines = csv::read_lines(path);
  ClusterModel model;
  std::size_t npoints = 0;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const auto colon = lines[li].find(" :");
    std::istringstream head(lines[li].substr(0, colon));
    std::istringstream tail(colon == std::string::npos ? "" : lines[li].substr(colon + 2));
    std::string kind;
    head >> kind;
    if (kind == "threshold") {
      std::string v;
      head >> v;
      const auto t = csv::parse_double(v);
      if (!t) throw ParseError("malformed threshold", li + 1);
      model.threshold = *t;
    } else if (kind == "seed") {
      head >> model.seed;
    } else if (kind == "points") {
      head >> npoints;
    } else if (kind == "node") {
      long long id, parent, left, right;
      int frozen;
      if (!(head >> id >> parent >> left >> right >> frozen) ||
          id != static_cast<long long>(model.tree.size()))
        throw ParseError("malformed node record", li + 1);
      ClusterNode n;
      if (parent >= 0) n.parent = static_cast<std::size_t>(parent);
      if (left >= 0) n.children = {static_cast<std::size_t>(left), static_cast<std::size_t>(right)};
      n.frozen = frozen != 0;
      n.members = parse_ids(tail);
      model.tree.push_back(std::move(n));
    } else if (kind == "cluster") {
      std::size_t id, node;
      int live;
      std::string from;
      if (!(head >> id >> node >> live >> from) || id != model.clusters.size() || from != "from")
        throw ParseError("malformed cluster record", li + 1);
      Cluster c;
      c.node = node;
      c.live = live != 0;
      c.merged_from = parse_ids(head);
      c.members = parse_ids(tail);
      model.clusters.push_back(std::move(c));
    } else {
      throw ParseError("unknown record '" + kind + "'", li + 1);
    }
  }
  if (npoints != points.size())
    throw DimensionError("model was fitted on " + std::to_string(npoints) + " points, got " +
                         std::to_string(points.size()));
  for (auto& n : model.tree) {
    if (n.members.empty()) throw ParseError("node without members", 0);
    n.center = mean_of(points, n.members);
    n.mean_distance = mean_distance_to(points, n.members, n.center);
  }
  model.labels.assign(points.size(), 0);
  for (std::size_t id = 0; id < model.clusters.size(); ++id) {
    auto& c = model.clusters[id];
    if (c.members.empty()) throw ParseError("cluster without members", 0);
    c.center = mean_of(points, c.members);
    if (!c.merged_from.empty()) model.merges.push_back({id, c.merged_from});
    c.mean_distance = mean_distance_to(points, c.members, c.center);
    if (c.live)
      for (std::size_t m : c.members) model.labels.at(m) = id;
  }
  return model;
}

void write_timeline(const StateTimeline& timeline, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "t,state_id\n";
  for (std::size_t t = 0; t < timeline.states.size(); ++t)
    out << t << ',' << timeline.states[t] << '\n';
}

void write_proposals(const std::vector<MergeProposal>& proposals, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "reference_id,minimum_x,member_ids,support_count\n";
  for (const auto& p : proposals) {
    std::string ids;
    for (std::size_t i = 0; i < p.members.size(); ++i)
      ids += (i ? ";" : "") + std::to_string(p.members[i]);
    for (const auto& s : p.support)
      out << s.reference << ',' << csv::format(s.minimum_x) << ',' << ids << ','
          << p.support_count() << '\n';
  }
}

}  // namespace qss
