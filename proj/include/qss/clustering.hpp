#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qss/correlation.hpp"
#include "qss/langevin.hpp"
#include "qss/parallel.hpp"

namespace qss {

/// One node of the bisecting split history. Node 0 is the root.
struct ClusterNode {
  std::vector<std::size_t> members;  // ascending point indices
  std::vector<double> center;        // mean of members
  double mean_distance = 0.0;        // mean member-to-center distance
  std::optional<std::size_t> parent;
  std::optional<std::array<std::size_t, 2>> children;
  bool frozen = false;  // above threshold but could not be split
};

struct Cluster {
  std::size_t node = 0;  // tree node; the lowest common ancestor for merged clusters
  std::vector<std::size_t> members;
  std::vector<double> center;
  double mean_distance = 0.0;
  bool live = true;
  std::vector<std::size_t> merged_from;
};

struct MergeRecord {
  std::size_t cluster = 0;
  std::vector<std::size_t> from;
};

/// Cluster ids index `clusters`. Merging retires the merged ids and appends a
/// new cluster, so ids stay stable across merges.
struct ClusterModel {
  std::vector<ClusterNode> tree;
  std::vector<Cluster> clusters;
  std::vector<std::size_t> labels;  // per point, a live cluster id
  std::vector<MergeRecord> merges;
  double threshold = 0.0;
  std::uint64_t seed = 0;

  std::vector<std::size_t> live_ids() const;
  std::size_t live_count() const;
  /// Throws UnknownClusterError unless `id` names a live cluster.
  const Cluster& live(std::size_t id) const;
  std::size_t lowest_common_ancestor(std::span<const std::size_t> nodes) const;
};

struct TwoMeans {
  std::array<std::vector<std::size_t>, 2> members;
  std::array<std::vector<double>, 2> centers;
  double ssq = 0.0;
  std::size_t restart = 0;  // index of the winning restart
};

struct StateTimeline {
  std::vector<std::size_t> states;

  std::vector<bool> occupancy(std::size_t state) const;
};

struct DistanceSeries {
  std::size_t reference = 0;
  std::vector<double> values;
};

struct ReferencePotential {
  std::size_t reference = 0;
  PotentialCurve curve;
};

struct MergeSupport {
  std::size_t reference = 0;
  double minimum_x = 0.0;
};

struct MergeProposal {
  std::vector<std::size_t> members;  // ascending cluster ids
  std::vector<MergeSupport> support;

  std::size_t support_count() const;  // distinct references
};

inline constexpr std::size_t kmeans_restarts = 10;
inline constexpr std::size_t kmeans_max_iterations = 200;

/// 2-means on `subset` (indices into `points`): Lloyd iteration from the
/// farthest pair, then from 9 seeded random member pairs; the lowest
/// within-cluster sum of squares wins, ties to the earlier restart. Cluster 0
/// is the one holding subset.front().
TwoMeans kmeans2(std::span<const StatePoint> points, std::span<const std::size_t> subset,
                 std::uint64_t seed);
TwoMeans kmeans2(std::span<const StatePoint> points, std::uint64_t seed);

/// Splits the leaf with the largest mean member-to-center distance until all
/// leaves are below `threshold`. Leaf clusters are numbered in depth-first,
/// left-first order.
ClusterModel bisecting_kmeans(std::span<const StatePoint> points, double threshold,
                              std::uint64_t seed = 0);

/// Nearest live center; ties go to the lowest id.
StateTimeline assign_states(std::span<const StatePoint> points, const ClusterModel& model);

DistanceSeries center_distance_series(std::span<const StatePoint> points,
                                      const ClusterModel& model, std::size_t id,
                                      Execution exec = Execution::parallel);

/// Retires `ids` and appends one cluster over the union of their members,
/// centered at the mean of those members.
ClusterModel merge_clusters(std::span<const StatePoint> points, const ClusterModel& model,
                            std::span<const std::size_t> ids);

/// For each reference and each of its potential minima x*, the live clusters
/// whose center lies within `tol` of distance x* from the reference center
/// form a candidate set when there are at least two of them and they share an
/// ancestor below the root. Identical sets found from at least two distinct
/// references become proposals.
std::vector<MergeProposal> propose_merges(const ClusterModel& model,
                                          std::span<const ReferencePotential> potentials,
                                          double tol);

/// Indented split tree with member counts and mean distances.
std::string tree_dump(const ClusterModel& model);

void write_model(const ClusterModel& model, const std::string& path);
/// Centers are recomputed from `points`, which must be the fitted points.
ClusterModel read_model(const std::string& path, std::span<const StatePoint> points);

void write_timeline(const StateTimeline& timeline, const std::string& path);
void write_proposals(const std::vector<MergeProposal>& proposals, const std::string& path);

}  // namespace qss
