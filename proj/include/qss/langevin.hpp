#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qss/correlation.hpp"
#include "qss/parallel.hpp"

namespace qss {

// Kernel-regressed Kramers-Moyal estimation for a scalar series X(t).
//
//   M_tau^(n)(x) = sum_t K_h(X(t) - x) (X(t+tau) - X(t))^n / sum_t K_h(X(t) - x)
//   D^(n)(x)     = M_tau^(n)(x) / (n! tau)        (tau -> 0 taken at the finest lag)
//   Phi(x)       = -int D^(1)(x) dx
//
// K_h is the Epanechnikov kernel (3/4h)(1 - (u/h)^2) on |u| < h.

enum class TauPolicy {
  tau1,         // D^(n) = M^(n)_1 / n!
  extrapolate,  // slope of M^(n)_tau over tau = 1, 2, 3 through the origin
};

/// Conditional moments of order 1 and 2 on a grid. Grid points without
/// kernel mass hold NaN and zero count.
struct MomentGrid {
  std::vector<double> grid;
  std::vector<std::size_t> taus;
  double bandwidth = 0.0;
  // [order - 1][tau index][grid index]
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;
  // Effective sample weight sum_t K_h(X(t) - x) * h, per tau and grid point.
  std::vector<std::vector<double>> counts;

  double moment(int order, std::size_t tau_index, std::size_t x) const {
    return order == 1 ? first[tau_index][x] : second[tau_index][x];
  }
};

struct DriftEstimate {
  std::vector<double> grid;
  std::vector<double> drift;      // D^(1), 1/td
  std::vector<double> diffusion;  // D^(2), 1/td
  std::vector<double> counts;     // at the finest lag
  std::vector<bool> valid;
  double bandwidth = 0.0;
  Span window;
};

struct Minimum {
  double x = 0.0;
  double phi = 0.0;
  double prominence = 0.0;
  std::size_t index = 0;  // into PotentialCurve::grid
};

/// Potential on the largest contiguous block of valid grid points, anchored
/// at Phi(grid.front()) = 0. The drift columns are restricted to the block.
struct PotentialCurve {
  std::vector<double> grid;
  std::vector<double> phi;
  std::vector<double> drift;
  std::vector<double> diffusion;
  std::vector<double> counts;
  std::vector<Minimum> minima;
  std::size_t discarded_points = 0;  // valid points outside the kept block
  Span window;
};

struct EstimationConfig {
  std::size_t grid_size = 101;
  std::optional<double> bandwidth;  // unset: 1.06 sigma L^(-1/5)
  TauPolicy tau = TauPolicy::tau1;
  double count_min = 10.0;
  double prominence = 0.05;  // fraction of the potential's range
  std::size_t min_length = 100;
};

struct WindowPotential {
  Span window;
  std::optional<PotentialCurve> curve;
  std::string failure;  // empty when `curve` is set

  bool ok() const noexcept { return curve.has_value(); }
};

struct OUParams {
  double gamma = 0.5;   // relaxation rate, 1/td
  double level = 0.0;   // fixed point m
  double noise = 0.1;   // D; increments have variance 2 D dt
  double initial = 0.0;
  double dt = 1.0;
  std::size_t length = 1000;  // number of samples including the initial value
  std::uint64_t seed = 0;
};

double epanechnikov(double u, double h);

/// Evenly spaced grid over the [1%, 99%] quantiles of the series.
std::vector<double> default_grid(std::span<const double> series, std::size_t size = 101);
double silverman_bandwidth(std::span<const double> series);

MomentGrid conditional_moments(std::span<const double> series, std::span<const std::size_t> taus,
                               std::span<const double> grid, double bandwidth,
                               Execution exec = Execution::parallel);

DriftEstimate estimate_drift(std::span<const double> series, std::span<const double> grid,
                             double bandwidth, TauPolicy tau = TauPolicy::tau1,
                             double count_min = 10.0, std::size_t min_length = 100,
                             Execution exec = Execution::parallel);
DriftEstimate estimate_drift(std::span<const double> series, const EstimationConfig& config,
                             Execution exec = Execution::parallel);

/// Trapezoidal cumulative integral of -D^(1). Throws EstimationError when the
/// largest valid block has fewer than 5 points.
PotentialCurve integrate_potential(const DriftEstimate& drift);

/// Strict interior minima of the 3-point moving average of Phi with
/// topographic prominence >= `prominence_min`, sorted by x.
std::vector<Minimum> find_minima(const PotentialCurve& curve, double prominence_min);

/// The minimum with the largest prominence; ties go to the lower Phi.
std::optional<Minimum> deepest_minimum(std::span<const Minimum> minima);

/// drift -> potential -> minima for one series, with the prominence floor
/// taken relative to the potential's range.
PotentialCurve estimate_potential(std::span<const double> series, const EstimationConfig& config,
                                  Execution exec = Execution::parallel);

/// One potential per window [k*shift, k*shift + window); a window whose
/// estimation fails is flagged and the sweep continues.
std::vector<WindowPotential> sliding_potentials(std::span<const double> series,
                                                std::size_t window = 1000, std::size_t shift = 21,
                                                const EstimationConfig& config = {},
                                                Execution exec = Execution::parallel);

/// Euler-Maruyama: X += -gamma (X - m) dt + sqrt(2 D dt) xi.
std::vector<double> simulate_ou(const OUParams& params);

void write_potential_csv(const PotentialCurve& curve, const std::string& path);

}  // namespace qss
