#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "qss/ingest.hpp"
#include "qss/matrix.hpp"
#include "qss/parallel.hpp"

namespace qss {

/// Inclusive row range [start, end].
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const noexcept { return end - start + 1; }
  friend bool operator==(const Span&, const Span&) = default;
};

/// K x K Pearson matrix over one window of normalized returns.
struct CorrelationMatrix {
  Matrix values;
  Span window;
};

/// S x S sector-averaged correlations. The diagonal is the mean over distinct
/// pairs within a sector, so it is generally below 1.
struct SectorMatrix {
  Matrix values;
  Span window;
};

/// A sector matrix flattened to R^d, d = S(S+1)/2: the upper triangle
/// including the diagonal, row by row, unit weights.
struct StatePoint {
  std::vector<double> coords;
  Span window;

  std::size_t dimension() const noexcept { return coords.size(); }
};

/// Coordinate-wise mean of the points in `interval` (indices into the point
/// sequence, inclusive).
struct IntervalStats {
  Span interval;
  std::size_t count = 0;
  StatePoint mean;
};

/// Sector assignment resolved against a panel's column order.
struct SectorIndex {
  std::vector<std::string> sectors;
  std::vector<std::size_t> sector_of;                // per panel column
  std::vector<std::vector<std::size_t>> members;     // per sector, ascending columns

  /// Throws ConfigError for unmapped tickers, sectors without panel members,
  /// and single-member sectors (their diagonal entry is undefined).
  static SectorIndex build(const SectorMap& map, const std::vector<std::string>& tickers);
};

std::size_t embedding_dimension(std::size_t sectors);

/// One Pearson matrix per window position; windows start at 0, step, 2*step...
std::vector<CorrelationMatrix> rolling_correlations(const ReturnPanel& panel,
                                                    std::size_t window = 42,
                                                    std::size_t step = 1,
                                                    Execution exec = Execution::parallel);

SectorMatrix sector_average(const CorrelationMatrix& matrix, const SectorIndex& index);
SectorMatrix sector_average(const CorrelationMatrix& matrix, const SectorMap& map,
                            const std::vector<std::string>& tickers);

StatePoint embed(const SectorMatrix& matrix);
SectorMatrix unembed(const StatePoint& point);

/// rolling_correlations -> sector_average -> embed without materializing the
/// K x K matrices.
std::vector<StatePoint> rolling_state_points(const ReturnPanel& panel, const SectorIndex& index,
                                             std::size_t window = 42, std::size_t step = 1,
                                             Execution exec = Execution::parallel);

double distance(std::span<const double> a, std::span<const double> b);
double distance(const StatePoint& a, const StatePoint& b);

IntervalStats interval_mean(std::span<const StatePoint> points, Span interval);

/// `# sectors=a;b;..`, then `date,t_start,t_end,c_<a>_<b>...`; one row per
/// window, labelled with the date of its last row.
void write_state_points(const std::vector<StatePoint>& points,
                        const std::vector<std::string>& window_end_dates,
                        const std::vector<std::string>& sectors, const std::string& path);

struct StatePointFile {
  std::vector<StatePoint> points;
  std::vector<std::string> dates;
  std::vector<std::string> sectors;
};
StatePointFile read_state_points(const std::string& path);

}  // namespace qss
