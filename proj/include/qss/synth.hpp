#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "qss/correlation.hpp"
#include "qss/ingest.hpp"
#include "qss/matrix.hpp"

namespace qss {

/// A market regime: the S x S sector correlation template. Entry (a,a) is the
/// correlation between two distinct stocks of sector a.
struct Regime {
  std::string name;
  Matrix sector_correlation;
};

struct Segment {
  std::size_t regime = 0;
  std::size_t days = 0;
};

/// Regime-switching return generator: on a day in regime g, returns are
/// volatility * L_g z with L_g the Cholesky factor of the stock-level
/// correlation implied by g's template and z standard normal.
struct ScenarioSpec {
  std::size_t sectors = 0;
  std::size_t stocks_per_sector = 0;
  double volatility = 0.01;
  double initial_price = 100.0;
  std::string start_date = "2000-01-03";
  std::vector<Regime> regimes;
  std::vector<Segment> schedule;
  std::uint64_t seed = 1;

  std::size_t stocks() const noexcept { return sectors * stocks_per_sector; }
  std::size_t days() const noexcept;
};

struct SyntheticData {
  PricePanel prices;
  SectorMap sectors;
  std::vector<std::size_t> labels;  // regime of the return ending on prices.dates[t + 1]
  std::vector<std::string> regime_names;
  std::vector<StatePoint> regime_centers;  // embedded templates
};

/// Flat `key = value` text: sectors, stocks_per_sector, volatility,
/// initial_price, start_date, regime.<name> (upper triangle, row-major),
/// schedule (`name:days, ...`). `#` starts a comment.
ScenarioSpec read_scenario(const std::string& path);

/// Throws ConfigError naming the regime whose stock-level correlation is not
/// positive definite.
SyntheticData generate_scenario(const ScenarioSpec& spec);

/// prices.csv, sectors.csv, labels.csv (`date,regime_id,regime`) and
/// regimes.csv (embedded templates) under `dir`.
void write_synthetic(const SyntheticData& data, const std::string& dir);

/// Reads labels.csv back as regime ids keyed by date.
std::vector<std::pair<std::string, std::size_t>> read_labels(const std::string& path);

/// Weekdays starting at `start` (ISO-8601).
std::vector<std::string> business_days(const std::string& start, std::size_t count);

}  // namespace qss
