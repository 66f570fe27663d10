#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's numerical code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

using Column = std::vector<double>;

inline double mean(const Column& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double variance(const Column& v) {  // population
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

inline double pearson(const Column& a, const Column& b) {
  const double ma = mean(a), mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// Trailing-window z-score of the last element, population sd.
inline double windowed_zscore(const Column& series, std::size_t end, std::size_t window) {
  Column w(series.begin() + static_cast<std::ptrdiff_t>(end + 1 - window),
           series.begin() + static_cast<std::ptrdiff_t>(end + 1));
  return (series[end] - mean(w)) / std::sqrt(variance(w));
}

inline double euclid(const Column& a, const Column& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Sector average by explicit pair enumeration over a full K x K matrix.
inline std::vector<Column> sector_average(const std::vector<Column>& corr,
                                          const std::vector<std::size_t>& sector_of,
                                          std::size_t sectors) {
  std::vector<Column> sum(sectors, Column(sectors, 0.0));
  std::vector<Column> count(sectors, Column(sectors, 0.0));
  for (std::size_t i = 0; i < corr.size(); ++i)
    for (std::size_t j = 0; j < corr.size(); ++j) {
      if (i == j) continue;
      sum[sector_of[i]][sector_of[j]] += corr[i][j];
      count[sector_of[i]][sector_of[j]] += 1.0;
    }
  for (std::size_t a = 0; a < sectors; ++a)
    for (std::size_t b = 0; b < sectors; ++b) sum[a][b] /= count[a][b];
  return sum;
}

inline double choose2(double n) { return n * (n - 1.0) / 2.0; }

// Adjusted Rand index from the contingency table.
inline double adjusted_rand(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::map<std::pair<std::size_t, std::size_t>, double> table;
  std::map<std::size_t, double> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& [k, n] : table) index += choose2(n);
  for (const auto& [k, n] : rows) sum_rows += choose2(n);
  for (const auto& [k, n] : cols) sum_cols += choose2(n);
  const double total = choose2(static_cast<double>(a.size()));
  const double expected = sum_rows * sum_cols / total;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

inline std::vector<Column> gaussian_blob(std::mt19937_64& rng, const Column& center, double sd,
                                         std::size_t n) {
  std::normal_distribution<double> normal(0.0, sd);
  std::vector<Column> out(n, center);
  for (auto& p : out)
    for (auto& x : p) x += normal(rng);
  return out;
}

inline double median(Column v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Ordinary least squares y = a + b x; returns {a, b}.
inline std::pair<double, double> line_fit(const Column& x, const Column& y) {
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double b = sxy / sxx;
  return {my - b * mx, b};
}

}  // namespace oracle
