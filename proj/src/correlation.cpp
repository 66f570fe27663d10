#include "qss/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "qss/csv.hpp"
#include "qss/error.hpp"

namespace qss {
namespace {

constexpr auto npos = std::numeric_limits<std::size_t>::max();

std::size_t window_count(std::size_t length, std::size_t window, std::size_t step) {
  return (length - window) / step + 1;
}

void check_window_args(const ReturnPanel& panel, std::size_t window, std::size_t step) {
  if (!panel.normalized()) throw ConfigError("correlations require a locally normalized panel");
  if (window < 2) throw ConfigError("correlation window must be at least 2");
  if (step < 1) throw ConfigError("correlation step must be at least 1");
  if (window > panel.length())
    throw InsufficientDataError("correlation window " + std::to_string(window) +
                                " exceeds panel length " + std::to_string(panel.length()));
}

// Centered columns of one window laid out column-major in `centered`;
// returns the first zero-variance column or npos.
std::size_t center_window(const ReturnPanel& panel, std::size_t start, std::size_t window,
                          std::vector<double>& centered, std::vector<double>& norms) {
  const std::size_t cols = panel.tickers.size();
  centered.resize(cols * window);
  norms.resize(cols);
  for (std::size_t k = 0; k < cols; ++k) {
    double sum = 0.0;
    double lo = panel.values(start, k);
    double hi = lo;
    for (std::size_t t = 0; t < window; ++t) {
      const double v = panel.values(start + t, k);
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (lo == hi) return k;
    const double mean = sum / static_cast<double>(window);
    double ss = 0.0;
    double* col = centered.data() + k * window;
    for (std::size_t t = 0; t < window; ++t) {
      col[t] = panel.values(start + t, k) - mean;
      ss += col[t] * col[t];
    }
    norms[k] = std::sqrt(ss);
  }
  return npos;
}

void pearson(const std::vector<double>& centered, const std::vector<double>& norms,
             std::size_t window, Matrix& out) {
  const std::size_t cols = norms.size();
  for (std::size_t i = 0; i < cols; ++i) {
    out(i, i) = 1.0;
    const double* a = centered.data() + i * window;
    for (std::size_t j = i + 1; j < cols; ++j) {
      const double* b = centered.data() + j * window;
      double dot = 0.0;
      for (std::size_t t = 0; t < window; ++t) dot += a[t] * b[t];
      const double c = std::clamp(dot / (norms[i] * norms[j]), -1.0, 1.0);
      out(i, j) = c;
      out(j, i) = c;
    }
  }
}

[[noreturn]] void throw_degenerate(const ReturnPanel& panel, std::size_t start,
                                   std::size_t window, std::size_t column) {
  throw DegenerateVarianceError("zero variance for " + panel.tickers[column] +
                                " in the correlation window " + panel.dates[start] + ".." +
                                panel.dates[start + window - 1]);
}

}  // namespace

SectorIndex SectorIndex::build(const SectorMap& map, const std::vector<std::string>& tickers) {
  SectorIndex index;
  std::map<std::string, std::size_t> position;
  for (const auto& s : map.sectors) {
    position.emplace(s, index.sectors.size());
    index.sectors.push_back(s);
  }
  index.members.resize(index.sectors.size());
  index.sector_of.resize(tickers.size());
  for (std::size_t k = 0; k < tickers.size(); ++k) {
    const auto it = map.assignments.find(tickers[k]);
    if (it == map.assignments.end()) throw ConfigError("ticker " + tickers[k] + " has no sector");
    const std::size_t s = position.at(it->second);
    index.sector_of[k] = s;
    index.members[s].push_back(k);
  }
  for (std::size_t s = 0; s < index.sectors.size(); ++s) {
    if (index.members[s].empty())
      throw ConfigError("sector " + index.sectors[s] + " has no instrument in the panel");
    if (index.members[s].size() == 1)
      throw ConfigError("sector " + index.sectors[s] +
                        " has a single instrument; its average correlation is undefined");
  }
  return index;
}

std::size_t embedding_dimension(std::size_t sectors) { return sectors * (sectors + 1) / 2; }

std::vector<CorrelationMatrix> rolling_correlations(const ReturnPanel& panel, std::size_t window,
                                                    std::size_t step, Execution exec) {
  check_window_args(panel, window, step);
  const std::size_t count = window_count(panel.length(), window, step);
  const std::size_t cols = panel.tickers.size();
  std::vector<CorrelationMatrix> out(count);
  std::vector<std::size_t> degenerate(count, npos);

#pragma omp parallel if (exec == Execution::parallel)
  {
    std::vector<double> centered;
    std::vector<double> norms;
#pragma omp for schedule(static)
    for (std::size_t w = 0; w < count; ++w) {
      const std::size_t start = w * step;
      out[w].window = {start, start + window - 1};
      const std::size_t bad = center_window(panel, start, window, centered, norms);
      if (bad != npos) {
        degenerate[w] = bad;
        continue;
      }
      out[w].values = Matrix(cols, cols);
      pearson(centered, norms, window, out[w].values);
    }
  }
  for (std::size_t w = 0; w < count; ++w)
    if (degenerate[w] != npos) throw_degenerate(panel, w * step, window, degenerate[w]);
  return out;
}

SectorMatrix sector_average(const CorrelationMatrix& matrix, const SectorIndex& index) {
  const std::size_t cols = matrix.values.rows();
  if (matrix.values.cols() != cols || index.sector_of.size() != cols)
    throw DimensionError("correlation matrix does not match the sector index");
  const std::size_t S = index.sectors.size();
  Matrix sums(S, S);
  for (std::size_t i = 0; i < cols; ++i)
    for (std::size_t j = i + 1; j < cols; ++j) {
      const std::size_t a = std::min(index.sector_of[i], index.sector_of[j]);
      const std::size_t b = std::max(index.sector_of[i], index.sector_of[j]);
      sums(a, b) += matrix.values(i, j);
    }
  SectorMatrix out{Matrix(S, S), matrix.window};
  for (std::size_t a = 0; a < S; ++a) {
    const double na = static_cast<double>(index.members[a].size());
    out.values(a, a) = sums(a, a) / (na * (na - 1.0) / 2.0);
    for (std::size_t b = a + 1; b < S; ++b) {
      const double v = sums(a, b) / (na * static_cast<double>(index.members[b].size()));
      out.values(a, b) = v;
      out.values(b, a) = v;
    }
  }
  return out;
}

SectorMatrix sector_average(const CorrelationMatrix& matrix, const SectorMap& map,
                            const std::vector<std::string>& tickers) {
  return sector_average(matrix, SectorIndex::build(map, tickers));
}

StatePoint embed(const SectorMatrix& matrix) {
  const std::size_t S = matrix.values.rows();
  StatePoint p;
  p.window = matrix.window;
  p.coords.reserve(embedding_dimension(S));
  for (std::size_t a = 0; a < S; ++a)
    for (std::size_t b = a; b < S; ++b) p.coords.push_back(matrix.values(a, b));
  return p;
}

SectorMatrix unembed(const StatePoint& point) {
  const std::size_t d = point.dimension();
  std::size_t S = 0;
  while (embedding_dimension(S) < d) ++S;
  if (embedding_dimension(S) != d)
    throw DimensionError("dimension " + std::to_string(d) + " is not triangular");
  SectorMatrix m{Matrix(S, S), point.window};
  std::size_t i = 0;
  for (std::size_t a = 0; a < S; ++a)
    for (std::size_t b = a; b < S; ++b) {
      m.values(a, b) = point.coords[i];
      m.values(b, a) = point.coords[i];
      ++i;
    }
  return m;
}

std::vector<StatePoint> rolling_state_points(const ReturnPanel& panel, const SectorIndex& index,
                                             std::size_t window, std::size_t step,
                                             Execution exec) {
  check_window_args(panel, window, step);
  if (index.sector_of.size() != panel.tickers.size())
    throw DimensionError("sector index does not match the panel");
  const std::size_t count = window_count(panel.length(), window, step);
  const std::size_t cols = panel.tickers.size();
  std::vector<StatePoint> out(count);
  std::vector<std::size_t> degenerate(count, npos);

#pragma omp parallel if (exec == Execution::parallel)
  {
    std::vector<double> centered;
    std::vector<double> norms;
    CorrelationMatrix scratch{Matrix(cols, cols), {}};
#pragma omp for schedule(static)
    for (std::size_t w = 0; w < count; ++w) {
      const std::size_t start = w * step;
      scratch.window = {start, start + window - 1};
      const std::size_t bad = center_window(panel, start, window, centered, norms);
      if (bad != npos) {
        degenerate[w] = bad;
        continue;
      }
      pearson(centered, norms, window, scratch.values);
      out[w] = embed(sector_average(scratch, index));
    }
  }
  for (std::size_t w = 0; w < count; ++w)
    if (degenerate[w] != npos) throw_degenerate(panel, w * step, window, degenerate[w]);
  return out;
}

double distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw DimensionError("distance between points of dimension " + std::to_string(a.size()) +
                         " and " + std::to_string(b.size()));
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    ss += d * d;
  }
  return std::sqrt(ss);
}

double distance(const StatePoint& a, const StatePoint& b) { return distance(a.coords, b.coords); }

IntervalStats interval_mean(std::span<const StatePoint> points, Span interval) {
  if (interval.end < interval.start || interval.end >= points.size())
    throw InsufficientDataError("interval [" + std::to_string(interval.start) + ", " +
                                std::to_string(interval.end) + "] is empty or out of range");
  const std::size_t d = points[interval.start].dimension();
  IntervalStats stats;
  stats.interval = interval;
  stats.count = interval.length();
  stats.mean.coords.assign(d, 0.0);
  stats.mean.window = {points[interval.start].window.start, points[interval.end].window.end};
  for (std::size_t t = interval.start; t <= interval.end; ++t) {
    if (points[t].dimension() != d) throw DimensionError("mixed point dimensions in interval");
    for (std::size_t i = 0; i < d; ++i) stats.mean.coords[i] += points[t].coords[i];
  }
  for (auto& c : stats.mean.coords) c /= static_cast<double>(stats.count);
  return stats;
}

void write_state_points(const std::vector<StatePoint>& points,
                        const std::vector<std::string>& window_end_dates,
                        const std::vector<std::string>& sectors, const std::string& path) {
  if (window_end_dates.size() != points.size())
    throw DimensionError("one date per state point required");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "# sectors=";
  for (std::size_t s = 0; s < sectors.size(); ++s) out << (s ? ";" : "") << sectors[s];
  out << "\ndate,t_start,t_end";
  for (std::size_t a = 0; a < sectors.size(); ++a)
    for (std::size_t b = a; b < sectors.size(); ++b) out << ",c_" << a << '_' << b;
  out << '\n';
  for (std::size_t t = 0; t < points.size(); ++t) {
    out << window_end_dates[t] << ',' << points[t].window.start << ',' << points[t].window.end;
    for (double c : points[t].coords) out << ',' << csv::format(c);
    out << '\n';
  }
}

StatePointFile read_state_points(const std::string& path) {
  const auto lines = csv::read_lines(path);
  if (lines.size() < 2 || !lines[0].starts_with("# sectors="))
    throw ParseError("'" + path + "': missing sector metadata", 1);
  StatePointFile file;
  file.sectors = csv::split(std::string_view(lines[0]).substr(10), ';');
  const std::size_t d = embedding_dimension(file.sectors.size());
  const auto header = csv::split(lines[1]);
  if (header.size() != d + 3) throw ParseError("expected " + std::to_string(d + 3) + " columns", 2);
  for (std::size_t i = 2; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = csv::split(lines[i]);
    if (fields.size() != d + 3) throw ParseError("wrong field count", i + 1);
    StatePoint p;
    const auto t0 = csv::parse_int(fields[1]);
    const auto t1 = csv::parse_int(fields[2]);
    if (!t0 || !t1 || *t0 < 0 || *t1 < *t0) throw ParseError("malformed window", i + 1);
    p.window = {static_cast<std::size_t>(*t0), static_cast<std::size_t>(*t1)};
    p.coords.reserve(d);
    for (std::size_t k = 3; k < fields.size(); ++k) {
      const auto v = csv::parse_double(fields[k]);
      if (!v) throw ParseError("malformed coordinate", i + 1);
      p.coords.push_back(*v);
    }
    file.dates.push_back(fields[0]);
    file.points.push_back(std::move(p));
  }
  return file;
}

}  // namespace qss
