#include "qss/synth.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "qss/csv.hpp"
#include "qss/error.hpp"

namespace qss {
namespace {

std::string zero_pad(std::size_t v, std::size_t width) {
  std::string s = std::to_string(v);
  return std::string(width > s.size() ? width - s.size() : 0, '0') + s;
}

Eigen::MatrixXd stock_correlation(const ScenarioSpec& spec, const Regime& regime) {
  const auto K = static_cast<Eigen::Index>(spec.stocks());
  Eigen::MatrixXd c(K, K);
  for (Eigen::Index i = 0; i < K; ++i)
    for (Eigen::Index j = 0; j < K; ++j) {
      const auto a = static_cast<std::size_t>(i) / spec.stocks_per_sector;
      const auto b = static_cast<std::size_t>(j) / spec.stocks_per_sector;
      c(i, j) = i == j ? 1.0 : regime.sector_correlation(a, b);
    }
  return c;
}

}  // namespace

std::size_t ScenarioSpec::days() const noexcept {
  std::size_t n = 0;
  for (const auto& s : schedule) n += s.days;
  return n;
}

std::vector<std::string> business_days(const std::string& start, std::size_t count) {
  using namespace std::chrono;
  int y = 0;
  unsigned m = 0, d = 0;
  if (std::sscanf(start.c_str(), "%d-%u-%u", &y, &m, &d) != 3)
    throw ConfigError("malformed start date '" + start + "'");
  const year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) throw ConfigError("invalid start date '" + start + "'");
  sys_days day_point{ymd};
  std::vector<std::string> out;
  out.reserve(count);
  while (out.size() < count) {
    const weekday wd{day_point};
    if (wd != Saturday && wd != Sunday) {
      const year_month_day cur{day_point};
      char buf[16];
      std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(cur.year()),
                    static_cast<unsigned>(cur.month()), static_cast<unsigned>(cur.day()));
      out.emplace_back(buf);
    }
    day_point += days{1};
  }
  return out;
}

ScenarioSpec read_scenario(const std::string& path) {
  const auto lines = csv::read_lines(path);
  ScenarioSpec spec;
  std::map<std::string, std::vector<double>> regimes;
  std::vector<std::string> regime_order;
  std::string schedule;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line = std::string_view(lines[i]);
    line = line.substr(0, line.find('#'));
    if (csv::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", i + 1);
    const std::string key(csv::trim(line.substr(0, eq)));
    const std::string value(csv::trim(line.substr(eq + 1)));
    auto number = [&] {
      const auto v = csv::parse_double(value);
      if (!v) throw ParseError("malformed number for '" + key + "'", i + 1);
      return *v;
    };
    auto count = [&] {
      const auto v = csv::parse_int(value);
      if (!v || *v <= 0) throw ParseError("'" + key + "' must be a positive integer", i + 1);
      return static_cast<std::size_t>(*v);
    };
    if (key == "sectors") {
      spec.sectors = count();
    } else if (key == "stocks_per_sector") {
      spec.stocks_per_sector = count();
    } else if (key == "volatility") {
      spec.volatility = number();
    } else if (key == "initial_price") {
      spec.initial_price = number();
    } else if (key == "start_date") {
      spec.start_date = value;
    } else if (key == "schedule") {
      schedule = value;
    } else if (key.starts_with("regime.")) {
      const std::string name = key.substr(7);
      if (name.empty() || regimes.count(name)) throw ParseError("bad regime name", i + 1);
      std::istringstream in(value);
      std::vector<double> vals;
      std::string tok;
      while (in >> tok) {
        const auto v = csv::parse_double(tok);
        if (!v) throw ParseError("malformed template value '" + tok + "'", i + 1);
        vals.push_back(*v);
      }
      regimes[name] = std::move(vals);
      regime_order.push_back(name);
    } else {
      throw ParseError("unknown scenario key '" + key + "'", i + 1);
    }
  }
  if (spec.sectors == 0 || spec.stocks_per_sector == 0)
    throw ConfigError("scenario needs 'sectors' and 'stocks_per_sector'");
  if (!(spec.volatility > 0.0 && spec.volatility < 0.1))
    throw ConfigError("scenario volatility must lie in (0, 0.1)");
  if (!(spec.initial_price > 0.0)) throw ConfigError("initial price must be positive");

  std::map<std::string, std::size_t> index;
  const std::size_t d = embedding_dimension(spec.sectors);
  for (const auto& name : regime_order) {
    const auto& vals = regimes[name];
    if (vals.size() != d)
      throw ConfigError("regime " + name + " needs " + std::to_string(d) + " template values");
    StatePoint p{vals, {}};
    const auto m = unembed(p);
    index[name] = spec.regimes.size();
    spec.regimes.push_back({name, m.values});
  }
  for (const auto& item : csv::split(schedule)) {
    const auto entry = csv::trim(item);
    if (entry.empty()) continue;
    const auto colon = entry.find(':');
    const auto days = colon == std::string_view::npos ? std::nullopt
                                                      : csv::parse_int(entry.substr(colon + 1));
    if (!days || *days <= 0) throw ConfigError("malformed schedule entry '" + std::string(entry) + "'");
    const std::string name(csv::trim(entry.substr(0, colon)));
    const auto it = index.find(name);
    if (it == index.end()) throw ConfigError("schedule names unknown regime '" + name + "'");
    spec.schedule.push_back({it->second, static_cast<std::size_t>(*days)});
  }
  if (spec.schedule.empty()) throw ConfigError("scenario has an empty schedule");
  return spec;
}

SyntheticData generate_scenario(const ScenarioSpec& spec) {
  if (spec.regimes.empty() || spec.schedule.empty())
    throw ConfigError("scenario needs at least one regime and a schedule");
  const std::size_t K = spec.stocks();
  std::vector<Eigen::MatrixXd> factors;
  for (const auto& regime : spec.regimes) {
    if (regime.sector_correlation.rows() != spec.sectors)
      throw ConfigError("regime " + regime.name + " has the wrong template size");
    for (std::size_t a = 0; a < spec.sectors; ++a)
      for (std::size_t b = 0; b < spec.sectors; ++b) {
        const double v = regime.sector_correlation(a, b);
        if (!(v >= -1.0 && v <= 1.0))
          throw ConfigError("regime " + regime.name + " has a correlation outside [-1, 1]");
      }
    Eigen::LLT<Eigen::MatrixXd> llt(stock_correlation(spec, regime));
    if (llt.info() != Eigen::Success)
      throw ConfigError("regime " + regime.name +
                        " does not define a positive definite stock correlation matrix");
    factors.push_back(llt.matrixL());
  }

  SyntheticData data;
  const std::size_t days = spec.days();
  const std::size_t sector_width = std::to_string(spec.sectors - 1).size();
  const std::size_t stock_width = std::to_string(K - 1).size();
  for (std::size_t k = 0; k < K; ++k) {
    const std::string ticker = "T" + zero_pad(k, stock_width);
    const std::string sector = "S" + zero_pad(k / spec.stocks_per_sector, sector_width);
    data.prices.tickers.push_back(ticker);
    data.sectors.assignments[ticker] = sector;
  }
  for (std::size_t s = 0; s < spec.sectors; ++s)
    data.sectors.sectors.push_back("S" + zero_pad(s, sector_width));
  for (const auto& r : spec.regimes) {
    data.regime_names.push_back(r.name);
    data.regime_centers.push_back(embed(SectorMatrix{r.sector_correlation, {}}));
  }

  data.prices.dates = business_days(spec.start_date, days + 1);
  data.prices.prices = Matrix(days + 1, K);
  for (std::size_t k = 0; k < K; ++k) data.prices.prices(0, k) = spec.initial_price;

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(static_cast<Eigen::Index>(K));
  std::size_t t = 0;
  for (const auto& seg : spec.schedule) {
    const auto& L = factors[seg.regime];
    for (std::size_t day = 0; day < seg.days; ++day, ++t) {
      for (auto& v : z) v = normal(rng);
      const Eigen::VectorXd r = spec.volatility * (L * z);
      for (std::size_t k = 0; k < K; ++k)
        data.prices.prices(t + 1, k) =
            data.prices.prices(t, k) * (1.0 + r(static_cast<Eigen::Index>(k)));
      data.labels.push_back(seg.regime);
    }
  }
  return data;
}

void write_synthetic(const SyntheticData& data, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_prices(data.prices, dir + "/prices.csv");
  write_sector_map(data.sectors, dir + "/sectors.csv");
  {
    std::ofstream out(dir + "/labels.csv", std::ios::binary);
    if (!out) throw DataError("cannot write labels in '" + dir + "'");
    out << "date,regime_id,regime\n";
    for (std::size_t t = 0; t < data.labels.size(); ++t)
      out << data.prices.dates[t + 1] << ',' << data.labels[t] << ','
          << data.regime_names[data.labels[t]] << '\n';
  }
  std::ofstream out(dir + "/regimes.csv", std::ios::binary);
  if (!out) throw DataError("cannot write regimes in '" + dir + "'");
  out << "regime_id,regime";
  const std::size_t S = data.sectors.sectors.size();
  for (std::size_t a = 0; a < S; ++a)
    for (std::size_t b = a; b < S; ++b) out << ",c_" << a << '_' << b;
  out << '\n';
  for (std::size_t g = 0; g < data.regime_names.size(); ++g) {
    out << g << ',' << data.regime_names[g];
    for (double c : data.regime_centers[g].coords) out << ',' << csv::format(c);
    out << '\n';
  }
}

std::vector<std::pair<std::string, std::size_t>> read_labels(const std::string& path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty() || !lines[0].starts_with("date,regime_id"))
    throw ParseError("'" + path + "': expected labels header", 1);
  std::vector<std::pair<std::string, std::size_t>> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = csv::split(lines[i]);
    const auto id = f.size() >= 2 ? csv::parse_int(f[1]) : std::nullopt;
    if (!id || *id < 0) throw ParseError("malformed label row", i + 1);
    out.emplace_back(f[0], static_cast<std::size_t>(*id));
  }
  return out;
}

}  // namespace qss
