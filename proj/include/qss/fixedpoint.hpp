#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qss/correlation.hpp"
#include "qss/matrix.hpp"

namespace qss {

/// Minimize sum_t ||L - C(t)|| subject to ||reference - L|| = radius.
/// Non-owning view of the interval's points.
struct FixedPointProblem {
  std::span<const StatePoint> points;
  std::vector<double> reference;
  double radius = 0.0;
};

struct SolverOptions {
  double tol = 1e-10;  // relative step size at which iteration stops
  std::size_t max_iterations = 10000;
  std::size_t multistarts = 5;
  std::uint64_t seed = 0;
  double uniqueness_tol = 1e-6;  // relative to the radius
};

struct FixedPointResult {
  std::vector<double> point;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double constraint_residual = 0.0;    // | ||reference - point|| - radius |
  double stationarity_residual = 0.0;  // tangential share of the objective gradient
  bool unique = true;
  double multistart_spread = 0.0;      // largest distance of a multistart solution
  std::vector<double> objective_trace; // objective after every accepted step
};

struct GeometricMedianResult {
  std::vector<double> point;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

struct ReferenceSolution {
  std::vector<double> reference;
  double radius = 0.0;
  std::optional<FixedPointResult> result;
  std::string failure;
};

struct ConsistencyReport {
  std::vector<ReferenceSolution> solutions;
  Matrix pairwise;  // NaN where a solve failed
  double tol_match = 0.0;
  bool consistent = false;
};

struct DeltaSeries {
  std::vector<double> values;  // ||C(t) - C0|| - ||C(t) - Cbar||
};

double distance_sum(std::span<const StatePoint> points, std::span<const double> x);

/// Weiszfeld iteration from the centroid with the Vardi-Zhang step at data
/// points.
GeometricMedianResult geometric_median(std::span<const StatePoint> points, double tol = 1e-10,
                                       std::size_t max_iterations = 10000);

/// Projected Weiszfeld: each Weiszfeld step is followed by radial projection
/// onto the sphere. The projected step minimizes the Weiszfeld majorizer over
/// the sphere, so the objective never increases. Starts from the projection of
/// the interval mean.
FixedPointResult constrained_fixed_point(const FixedPointProblem& problem,
                                         const SolverOptions& options = {});

/// Same problem from a caller-chosen start, without the multistart check.
FixedPointResult projected_weiszfeld(const FixedPointProblem& problem,
                                     std::span<const double> start,
                                     const SolverOptions& options = {});

struct Reference {
  std::vector<double> center;
  double radius = 0.0;
};

ConsistencyReport reference_consistency(std::span<const StatePoint> points,
                                        std::span<const Reference> references, double tol_match,
                                        const SolverOptions& options = {});

DeltaSeries delta_series(std::span<const StatePoint> points, std::span<const double> fixed_point,
                         std::span<const double> mean);

/// Header `c_0..c_{d-1},objective,residual,iterations,converged,unique`, one row.
void write_fixed_point(const FixedPointResult& result, const std::string& path);

}  // namespace qss
