#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qss/matrix.hpp"
#include "qss/parallel.hpp"

namespace qss {

/// Close prices S_k(t), one row per trading day and one column per instrument.
/// Dates are ISO-8601 and strictly increasing; every price is positive.
struct PricePanel {
  std::vector<std::string> dates;
  std::vector<std::string> tickers;
  Matrix prices;

  std::size_t length() const noexcept { return dates.size(); }
};

struct LoadedPrices {
  PricePanel panel;
  std::vector<std::string> dropped;  // tickers missing on at least one date
};

/// Returns r_k(t) or locally normalized returns. Row t is labelled with the
/// date at which the return is realized (the later of the two price dates).
struct ReturnPanel {
  std::vector<std::string> dates;
  std::vector<std::string> tickers;
  Matrix values;
  std::size_t horizon = 1;
  std::optional<std::size_t> normalization_window;

  std::size_t length() const noexcept { return dates.size(); }
  bool normalized() const noexcept { return normalization_window.has_value(); }
};

struct SectorMap {
  std::map<std::string, std::string> assignments;  // ticker -> sector
  std::vector<std::string> sectors;                // sorted, distinct
};

/// Loads a long-format `date,ticker,close` CSV. Instruments absent on any
/// date are dropped and reported, which leaves a gap-free panel.
LoadedPrices load_prices(const std::string& path);

SectorMap load_sector_map(const std::string& path);

ReturnPanel compute_returns(const PricePanel& panel, std::size_t horizon);

/// Trailing-window standardization with population moments:
///   r~(t) = (r(t) - m(t)) / s(t), m and s over r(t-n+1..t).
/// The first n-1 rows have no full window and are dropped.
ReturnPanel local_normalize(const ReturnPanel& panel, std::size_t window,
                            Execution exec = Execution::parallel);

void write_prices(const PricePanel& panel, const std::string& path);
void write_sector_map(const SectorMap& map, const std::string& path);

/// Wide CSV: `# horizon=..`, optional `# normalized=..`, then `date,<tickers>`.
void write_return_panel(const ReturnPanel& panel, const std::string& path);
ReturnPanel read_return_panel(const std::string& path);

}  // namespace qss
