#include "qss/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "qss/csv.hpp"
#include "qss/error.hpp"

namespace qss {
namespace {

bool is_iso_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  const int month = (s[5] - '0') * 10 + (s[6] - '0');
  const int day = (s[8] - '0') * 10 + (s[9] - '0');
  return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

void expect_header(const std::vector<std::string>& lines, const std::vector<std::string>& want,
                   const std::string& path) {
  if (lines.empty()) throw InsufficientDataError("'" + path + "' is empty");
  auto fields = csv::split(lines[0]);
  for (auto& f : fields) f = std::string(csv::trim(f));
  if (fields != want) {
    std::string expected;
    for (const auto& w : want) expected += (expected.empty() ? "" : ",") + w;
    throw ParseError("'" + path + "': expected header '" + expected + "'", 1);
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  return out;
}

}  // namespace

LoadedPrices load_prices(const std::string& path) {
  const auto lines = csv::read_lines(path);
  expect_header(lines, {"date", "ticker", "close"}, path);

  std::map<std::string, std::map<std::string, double>> by_ticker;
  std::set<std::string> dates;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    if (csv::trim(lines[i]).empty()) continue;
    const auto fields = csv::split(lines[i]);
    if (fields.size() != 3) throw ParseError("expected 3 fields", lineno);
    const std::string date(csv::trim(fields[0]));
    const std::string ticker(csv::trim(fields[1]));
    if (!is_iso_date(date)) throw ParseError("malformed date '" + date + "'", lineno);
    if (ticker.empty()) throw ParseError("empty ticker", lineno);
    const auto price = csv::parse_double(fields[2]);
    if (!price) throw ParseError("malformed price '" + fields[2] + "'", lineno);
    if (*price <= 0.0)
      throw DataError("non-positive price for " + ticker + " on " + date + " (line " +
                      std::to_string(lineno) + ")");
    if (!by_ticker[ticker].emplace(date, *price).second)
      throw DataError("duplicate row for " + ticker + " on " + date + " (line " +
                      std::to_string(lineno) + ")");
    dates.insert(date);
  }
  if (dates.size() < 2)
    throw InsufficientDataError("'" + path + "' has fewer than 2 distinct dates");

  LoadedPrices result;
  auto& panel = result.panel;
  panel.dates.assign(dates.begin(), dates.end());
  for (const auto& [ticker, series] : by_ticker) {
    if (series.size() == dates.size())
      panel.tickers.push_back(ticker);
    else
      result.dropped.push_back(ticker);
  }
  if (panel.tickers.empty())
    throw InsufficientDataError("no instrument in '" + path + "' is present on every date");

  panel.prices = Matrix(panel.dates.size(), panel.tickers.size());
  for (std::size_t k = 0; k < panel.tickers.size(); ++k) {
    const auto& series = by_ticker[panel.tickers[k]];
    std::size_t t = 0;
    for (const auto& [date, price] : series) panel.prices(t++, k) = price;
  }
  return result;
}

SectorMap load_sector_map(const std::string& path) {
  const auto lines = csv::read_lines(path);
  expect_header(lines, {"ticker", "sector"}, path);
  SectorMap map;
  std::set<std::string> sectors;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (csv::trim(lines[i]).empty()) continue;
    const auto fields = csv::split(lines[i]);
    if (fields.size() != 2) throw ParseError("expected 2 fields", i + 1);
    const std::string ticker(csv::trim(fields[0]));
    const std::string sector(csv::trim(fields[1]));
    if (ticker.empty() || sector.empty()) throw ParseError("empty field", i + 1);
    const auto [it, inserted] = map.assignments.emplace(ticker, sector);
    if (!inserted && it->second != sector)
      throw DataError("ticker " + ticker + " assigned to two sectors (line " +
                      std::to_string(i + 1) + ")");
    sectors.insert(sector);
  }
  if (sectors.empty()) throw InsufficientDataError("'" + path + "' lists no sectors");
  map.sectors.assign(sectors.begin(), sectors.end());
  return map;
}

ReturnPanel compute_returns(const PricePanel& panel, std::size_t horizon) {
  if (horizon == 0) throw ConfigError("return horizon must be positive");
  if (horizon >= panel.length())
    throw InsufficientDataError("return horizon " + std::to_string(horizon) +
                                " needs more than " + std::to_string(panel.length()) +
                                " prices");
  const std::size_t len = panel.length() - horizon;
  ReturnPanel out;
  out.dates.assign(panel.dates.begin() + static_cast<std::ptrdiff_t>(horizon), panel.dates.end());
  out.tickers = panel.tickers;
  out.horizon = horizon;
  out.values = Matrix(len, panel.tickers.size());
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t k = 0; k < panel.tickers.size(); ++k) {
      const double s0 = panel.prices(t, k);
      out.values(t, k) = (panel.prices(t + horizon, k) - s0) / s0;
    }
  return out;
}

ReturnPanel local_normalize(const ReturnPanel& panel, std::size_t window, Execution exec) {
  if (panel.normalized()) throw ConfigError("panel is already locally normalized");
  if (window < 2) throw ConfigError("normalization window must be at least 2");
  if (panel.length() < window)
    throw InsufficientDataError("normalization window " + std::to_string(window) +
                                " exceeds panel length " + std::to_string(panel.length()));

  const std::size_t len = panel.length() - (window - 1);
  const std::size_t cols = panel.tickers.size();
  ReturnPanel out;
  out.dates.assign(panel.dates.begin() + static_cast<std::ptrdiff_t>(window - 1),
                   panel.dates.end());
  out.tickers = panel.tickers;
  out.horizon = panel.horizon;
  out.normalization_window = window;
  out.values = Matrix(len, cols);

  // First degenerate row per column; exceptions cannot leave the parallel loop.
  constexpr auto none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> degenerate(cols, none);
  const double n = static_cast<double>(window);

#pragma omp parallel for schedule(static) if (exec == Execution::parallel)
  for (std::size_t k = 0; k < cols; ++k) {
    for (std::size_t t = 0; t < len; ++t) {
      double sum = 0.0;
      double lo = panel.values(t, k);
      double hi = lo;
      for (std::size_t j = t; j < t + window; ++j) {
        const double v = panel.values(j, k);
        sum += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (lo == hi) {
        degenerate[k] = t;
        break;
      }
      const double mean = sum / n;
      double ss = 0.0;
      for (std::size_t j = t; j < t + window; ++j) {
        const double d = panel.values(j, k) - mean;
        ss += d * d;
      }
      const double sd = std::sqrt(ss / n);
      out.values(t, k) = (panel.values(t + window - 1, k) - mean) / sd;
    }
  }

  for (std::size_t k = 0; k < cols; ++k)
    if (degenerate[k] != none)
      throw DegenerateVarianceError("zero local variance for " + panel.tickers[k] +
                                    " in the window ending " + out.dates[degenerate[k]]);
  return out;
}

void write_prices(const PricePanel& panel, const std::string& path) {
  auto out = open_out(path);
  out << "date,ticker,close\n";
  for (std::size_t t = 0; t < panel.length(); ++t)
    for (std::size_t k = 0; k < panel.tickers.size(); ++k)
      out << panel.dates[t] << ',' << panel.tickers[k] << ',' << csv::format(panel.prices(t, k))
          << '\n';
}

void write_sector_map(const SectorMap& map, const std::string& path) {
  auto out = open_out(path);
  out << "ticker,sector\n";
  for (const auto& [ticker, sector] : map.assignments) out << ticker << ',' << sector << '\n';
}

void write_return_panel(const ReturnPanel& panel, const std::string& path) {
  auto out = open_out(path);
  out << "# horizon=" << panel.horizon << '\n';
  if (panel.normalization_window) out << "# normalized=" << *panel.normalization_window << '\n';
  out << "date";
  for (const auto& t : panel.tickers) out << ',' << t;
  out << '\n';
  for (std::size_t t = 0; t < panel.length(); ++t) {
    out << panel.dates[t];
    for (double v : panel.values.row(t)) out << ',' << csv::format(v);
    out << '\n';
  }
}

ReturnPanel read_return_panel(const std::string& path) {
  const auto lines = csv::read_lines(path);
  ReturnPanel panel;
  std::size_t i = 0;
  for (; i < lines.size() && lines[i].starts_with('#'); ++i) {
    const auto& l = lines[i];
    const auto eq = l.find('=');
    if (eq == std::string::npos) throw ParseError("malformed metadata line", i + 1);
    const auto key = csv::trim(std::string_view(l).substr(1, eq - 1));
    const auto value = csv::parse_int(std::string_view(l).substr(eq + 1));
    if (!value || *value <= 0) throw ParseError("malformed metadata value", i + 1);
    if (key == "horizon")
      panel.horizon = static_cast<std::size_t>(*value);
    else if (key == "normalized")
      panel.normalization_window = static_cast<std::size_t>(*value);
    else
      throw ParseError("unknown metadata key '" + std::string(key) + "'", i + 1);
  }
  if (i >= lines.size()) throw InsufficientDataError("'" + path + "' has no header");
  const auto header = csv::split(lines[i]);
  if (header.empty() || header[0] != "date") throw ParseError("expected 'date' column", i + 1);
  panel.tickers.assign(header.begin() + 1, header.end());
  std::vector<double> values;
  for (++i; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = csv::split(lines[i]);
    if (fields.size() != header.size()) throw ParseError("wrong field count", i + 1);
    panel.dates.push_back(fields[0]);
    for (std::size_t k = 1; k < fields.size(); ++k) {
      const auto v = csv::parse_double(fields[k]);
      if (!v) throw ParseError("malformed value '" + fields[k] + "'", i + 1);
      values.push_back(*v);
    }
  }
  panel.values = Matrix(panel.dates.size(), panel.tickers.size());
  std::copy(values.begin(), values.end(), panel.values.data().begin());
  return panel;
}

}  // namespace qss
