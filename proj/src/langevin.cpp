#include "qss/langevin.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "qss/csv.hpp"
#include "qss/error.hpp"

namespace qss {
namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<double> smooth3(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<double> s(n);
  if (n == 1) return v;
  s[0] = (v[0] + v[1]) / 2.0;
  s[n - 1] = (v[n - 2] + v[n - 1]) / 2.0;
  for (std::size_t i = 1; i + 1 < n; ++i) s[i] = (v[i - 1] + v[i] + v[i + 1]) / 3.0;
  return s;
}

}  // namespace

double epanechnikov(double u, double h) {
  const double z = u / h;
  return std::abs(z) < 1.0 ? 0.75 / h * (1.0 - z * z) : 0.0;
}

std::vector<double> default_grid(std::span<const double> series, std::size_t size) {
  if (size < 2) throw ConfigError("grid needs at least 2 points");
  if (series.empty()) throw InsufficientDataError("empty series");
  std::vector<double> sorted(series.begin(), series.end());
  std::sort(sorted.begin(), sorted.end());
  const double lo = quantile_sorted(sorted, 0.01);
  const double hi = quantile_sorted(sorted, 0.99);
  if (!(hi > lo)) throw EstimationError("series has no spread between its 1% and 99% quantiles");
  std::vector<double> grid(size);
  for (std::size_t i = 0; i < size; ++i)
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(size - 1);
  grid.back() = hi;
  return grid;
}

double silverman_bandwidth(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 2) throw InsufficientDataError("bandwidth needs at least 2 samples");
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : series) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0)) throw EstimationError("series has zero variance");
  return 1.06 * sd * std::pow(static_cast<double>(n), -0.2);
}

MomentGrid conditional_moments(std::span<const double> series, std::span<const std::size_t> taus,
                               std::span<const double> grid, double bandwidth, Execution exec) {
  if (!(bandwidth > 0.0)) throw ConfigError("bandwidth must be positive");
  if (taus.empty()) throw ConfigError("at least one lag is required");
  if (grid.empty()) throw ConfigError("empty evaluation grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw ConfigError("grid must be strictly increasing");
  const std::size_t max_tau = *std::max_element(taus.begin(), taus.end());
  if (*std::min_element(taus.begin(), taus.end()) == 0) throw ConfigError("lags must be positive");
  if (series.size() <= max_tau)
    throw InsufficientDataError("series of length " + std::to_string(series.size()) +
                                " is too short for lag " + std::to_string(max_tau));

  const std::size_t nt = taus.size();
  const std::size_t ng = grid.size();
  MomentGrid m;
  m.grid.assign(grid.begin(), grid.end());
  m.taus.assign(taus.begin(), taus.end());
  m.bandwidth = bandwidth;
  m.first.assign(nt, std::vector<double>(ng, nan));
  m.second.assign(nt, std::vector<double>(ng, nan));
  m.counts.assign(nt, std::vector<double>(ng, 0.0));

  const std::size_t len = series.size();
#pragma omp parallel if (exec == Execution::parallel)
  {
    std::vector<double> w_sum(nt), m1(nt), m2(nt);
#pragma omp for schedule(static)
    for (std::size_t g = 0; g < ng; ++g) {
      std::fill(w_sum.begin(), w_sum.end(), 0.0);
      std::fill(m1.begin(), m1.end(), 0.0);
      std::fill(m2.begin(), m2.end(), 0.0);
      for (std::size_t t = 0; t + 1 < len; ++t) {
        const double w = epanechnikov(series[t] - grid[g], bandwidth);
        if (w == 0.0) continue;
        for (std::size_t k = 0; k < nt; ++k) {
          if (t + taus[k] >= len) continue;
          const double inc = series[t + taus[k]] - series[t];
          w_sum[k] += w;
          m1[k] += w * inc;
          m2[k] += w * inc * inc;
        }
      }
      for (std::size_t k = 0; k < nt; ++k) {
        m.counts[k][g] = w_sum[k] * bandwidth;
        if (w_sum[k] > 0.0) {
          m.first[k][g] = m1[k] / w_sum[k];
          m.second[k][g] = m2[k] / w_sum[k];
        }
      }
    }
  }

  bool any = false;
  for (double c : m.counts[0]) any = any || c > 0.0;
  if (!any) throw EstimationError("no grid point has kernel support");
  return m;
}

DriftEstimate estimate_drift(std::span<const double> series, std::span<const double> grid,
                             double bandwidth, TauPolicy tau, double count_min,
                             std::size_t min_length, Execution exec) {
  if (series.size() < min_length)
    throw InsufficientDataError("drift estimation needs at least " + std::to_string(min_length) +
                                " samples, got " + std::to_string(series.size()));
  const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
  if (grid.empty() || grid.front() < *lo || grid.back() > *hi)
    throw ConfigError("evaluation grid extends beyond the observed data range");

  const std::vector<std::size_t> taus =
      tau == TauPolicy::tau1 ? std::vector<std::size_t>{1} : std::vector<std::size_t>{1, 2, 3};
  const MomentGrid m = conditional_moments(series, taus, grid, bandwidth, exec);

  const std::size_t ng = grid.size();
  DriftEstimate d;
  d.grid = m.grid;
  d.bandwidth = bandwidth;
  d.window = {0, series.size() - 1};
  d.drift.assign(ng, nan);
  d.diffusion.assign(ng, nan);
  d.counts = m.counts[0];
  d.valid.assign(ng, false);

  for (std::size_t g = 0; g < ng; ++g) {
    if (tau == TauPolicy::tau1) {
      d.drift[g] = m.first[0][g];
      d.diffusion[g] = m.second[0][g] / 2.0;
    } else {
      double num1 = 0.0, num2 = 0.0, den = 0.0;
      for (std::size_t k = 0; k < taus.size(); ++k) {
        const double w = m.counts[k][g];
        if (w <= 0.0) continue;
        const double t = static_cast<double>(taus[k]);
        num1 += w * t * m.first[k][g];
        num2 += w * t * m.second[k][g];
        den += w * t * t;
      }
      if (den > 0.0) {
        d.drift[g] = num1 / den;
        d.diffusion[g] = num2 / den / 2.0;
      }
    }
    d.valid[g] = d.counts[g] >= count_min && std::isfinite(d.drift[g]) &&
                 std::isfinite(d.diffusion[g]);
  }
  if (std::none_of(d.valid.begin(), d.valid.end(), [](bool v) { return v; }))
    throw EstimationError("no grid point reaches the support threshold of " +
                          csv::format(count_min) + " effective samples");
  return d;
}

DriftEstimate estimate_drift(std::span<const double> series, const EstimationConfig& config,
                             Execution exec) {
  const auto grid = default_grid(series, config.grid_size);
  const double h = config.bandwidth ? *config.bandwidth : silverman_bandwidth(series);
  return estimate_drift(series, grid, h, config.tau, config.count_min, config.min_length, exec);
}

PotentialCurve integrate_potential(const DriftEstimate& drift) {
  const std::size_t n = drift.grid.size();
  std::size_t best_start = 0, best_len = 0, total_valid = 0;
  for (std::size_t i = 0; i < n;) {
    if (!drift.valid[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && drift.valid[j]) ++j;
    total_valid += j - i;
    if (j - i > best_len) {
      best_start = i;
      best_len = j - i;
    }
    i = j;
  }
  if (best_len < 5)
    throw EstimationError("largest contiguous block of valid drift estimates has " +
                          std::to_string(best_len) + " grid points; at least 5 are needed");

  PotentialCurve c;
  c.window = drift.window;
  c.discarded_points = total_valid - best_len;
  const auto first = static_cast<std::ptrdiff_t>(best_start);
  const auto last = static_cast<std::ptrdiff_t>(best_start + best_len);
  c.grid.assign(drift.grid.begin() + first, drift.grid.begin() + last);
  c.drift.assign(drift.drift.begin() + first, drift.drift.begin() + last);
  c.diffusion.assign(drift.diffusion.begin() + first, drift.diffusion.begin() + last);
  c.counts.assign(drift.counts.begin() + first, drift.counts.begin() + last);
  c.phi.assign(best_len, 0.0);
  for (std::size_t i = 1; i < best_len; ++i)
    c.phi[i] = c.phi[i - 1] - (c.grid[i] - c.grid[i - 1]) * (c.drift[i - 1] + c.drift[i]) / 2.0;
  return c;
}

std::vector<Minimum> find_minima(const PotentialCurve& curve, double prominence_min) {
  const std::size_t n = curve.phi.size();
  std::vector<Minimum> out;
  if (n < 3) return out;
  const auto s = smooth3(curve.phi);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(s[i] < s[i - 1] && s[i] < s[i + 1])) continue;
    // Highest point crossed on each side before reaching lower ground (or the edge).
    double left = s[i];
    for (std::size_t j = i; j-- > 0;) {
      if (s[j] < s[i]) break;
      left = std::max(left, s[j]);
    }
    double right = s[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      if (s[j] < s[i]) break;
      right = std::max(right, s[j]);
    }
    const double prominence = std::min(left, right) - s[i];
    if (prominence >= prominence_min) out.push_back({curve.grid[i], curve.phi[i], prominence, i});
  }
  return out;
}

std::optional<Minimum> deepest_minimum(std::span<const Minimum> minima) {
  if (minima.empty()) return std::nullopt;
  const Minimum* best = &minima[0];
  for (const auto& m : minima)
    if (m.prominence > best->prominence ||
        (m.prominence == best->prominence && m.phi < best->phi))
      best = &m;
  return *best;
}

PotentialCurve estimate_potential(std::span<const double> series, const EstimationConfig& config,
                                  Execution exec) {
  auto curve = integrate_potential(estimate_drift(series, config, exec));
  const auto [lo, hi] = std::minmax_element(curve.phi.begin(), curve.phi.end());
  curve.minima = find_minima(curve, config.prominence * (*hi - *lo));
  return curve;
}

std::vector<WindowPotential> sliding_potentials(std::span<const double> series,
                                                std::size_t window, std::size_t shift,
                                                const EstimationConfig& config, Execution exec) {
  if (window == 0 || shift == 0) throw ConfigError("window and shift must be positive");
  if (series.size() < window)
    throw InsufficientDataError("series of length " + std::to_string(series.size()) +
                                " is shorter than the potential window " + std::to_string(window));
  const std::size_t count = (series.size() - window) / shift + 1;
  std::vector<WindowPotential> out(count);

#pragma omp parallel for schedule(dynamic) if (exec == Execution::parallel)
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t start = w * shift;
    out[w].window = {start, start + window - 1};
    try {
      auto curve = estimate_potential(series.subspan(start, window), config, Execution::serial);
      curve.window = out[w].window;
      out[w].curve = std::move(curve);
    } catch (const Error& e) {
      out[w].failure = e.what();
    }
  }
  return out;
}

std::vector<double> simulate_ou(const OUParams& p) {
  if (!(p.gamma > 0.0) || !(p.noise >= 0.0) || !(p.dt > 0.0))
    throw ConfigError("OU parameters need gamma > 0, D >= 0, dt > 0");
  std::vector<double> x(p.length);
  if (x.empty()) return x;
  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double kick = std::sqrt(2.0 * p.noise * p.dt);
  x[0] = p.initial;
  for (std::size_t t = 1; t < p.length; ++t)
    x[t] = x[t - 1] - p.gamma * (x[t - 1] - p.level) * p.dt + kick * normal(rng);
  return x;
}

void write_potential_csv(const PotentialCurve& curve, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "x,D1,D2,Phi,count\n";
  for (std::size_t i = 0; i < curve.grid.size(); ++i)
    out << csv::format(curve.grid[i]) << ',' << csv::format(curve.drift[i]) << ','
        << csv::format(curve.diffusion[i]) << ',' << csv::format(curve.phi[i]) << ','
        << csv::format(curve.counts[i]) << '\n';
}

}  // namespace qss
