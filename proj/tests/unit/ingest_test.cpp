#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "qss/error.hpp"
#include "qss/ingest.hpp"

using namespace qss;

namespace {

PricePanel panel_from(const std::vector<std::vector<double>>& rows) {
  PricePanel p;
  p.prices = Matrix(rows.size(), rows.front().size());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    p.dates.push_back("2001-01-" + std::string(t + 1 < 10 ? "0" : "") + std::to_string(t + 1));
    for (std::size_t k = 0; k < rows[t].size(); ++k) p.prices(t, k) = rows[t][k];
  }
  for (std::size_t k = 0; k < rows.front().size(); ++k) p.tickers.push_back("K" + std::to_string(k));
  return p;
}

ReturnPanel column_panel(const std::vector<double>& values) {
  ReturnPanel r;
  r.values = Matrix(values.size(), 1);
  for (std::size_t t = 0; t < values.size(); ++t) {
    r.dates.push_back("d" + std::to_string(t));
    r.values(t, 0) = values[t];
  }
  r.tickers = {"A"};
  return r;
}

}  // namespace

TEST_CASE("load_prices drops instruments with a missing date") {
  fixture::TempDir dir("prices");
  std::string text = "date,ticker,close\n";
  for (int d = 1; d <= 5; ++d) {
    const std::string date = "2020-01-0" + std::to_string(d);
    text += date + ",AAA,10\n";
    if (d != 3) text += date + ",BBB,20\n";
    text += date + ",CCC,30\n";
  }
  fixture::write_text(dir.file("p.csv"), text);
  const auto loaded = load_prices(dir.file("p.csv"));
  CHECK(loaded.panel.tickers == std::vector<std::string>{"AAA", "CCC"});
  CHECK(loaded.panel.length() == 5);
  CHECK(loaded.dropped == std::vector<std::string>{"BBB"});
}

TEST_CASE("load_prices rejects bad input") {
  fixture::TempDir dir("badprices");
  fixture::write_text(dir.file("empty.csv"), "");
  CHECK_THROWS_AS(load_prices(dir.file("empty.csv")), InsufficientDataError);

  fixture::write_text(dir.file("neg.csv"),
                      "date,ticker,close\n2020-01-01,A,1\n2020-01-02,A,-1\n");
  CHECK_THROWS_AS(load_prices(dir.file("neg.csv")), DataError);

  fixture::write_text(dir.file("bad.csv"),
                      "date,ticker,close\n2020-01-01,A,1\n2020-01-02,A,x\n");
  try {
    load_prices(dir.file("bad.csv"));
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }

  fixture::write_text(dir.file("one.csv"), "date,ticker,close\n2020-01-01,A,1\n");
  CHECK_THROWS_AS(load_prices(dir.file("one.csv")), InsufficientDataError);
}

TEST_CASE("price panel round-trips through CSV") {
  fixture::TempDir dir("roundtrip");
  const auto panel = panel_from({{100, 50.5}, {101.25, 49}, {99.125, 51}});
  write_prices(panel, dir.file("p.csv"));
  const auto back = load_prices(dir.file("p.csv")).panel;
  CHECK(back.dates == panel.dates);
  CHECK(back.tickers == panel.tickers);
  CHECK(back.prices == panel.prices);
}

TEST_CASE("compute_returns examples") {
  const auto flat = compute_returns(panel_from({{100}, {100}, {100}}), 1);
  CHECK(flat.values(0, 0) == 0.0);
  CHECK(flat.values(1, 0) == 0.0);

  const auto step = compute_returns(panel_from({{100}, {101}}), 1);
  CHECK(step.values(0, 0) == doctest::Approx(0.01).epsilon(1e-14));
  CHECK(step.dates.front() == "2001-01-02");

  std::vector<std::vector<double>> geometric;
  for (int t = 0; t < 20; ++t) geometric.push_back({3.0 * std::pow(1.05, t)});
  const auto g = compute_returns(panel_from(geometric), 1);
  for (std::size_t t = 0; t < g.length(); ++t) CHECK(g.values(t, 0) == doctest::Approx(0.05).epsilon(1e-12));

  CHECK_THROWS_AS(compute_returns(panel_from({{1}, {2}}), 2), InsufficientDataError);
}

TEST_CASE("returns reconstruct prices") {
  std::mt19937_64 rng(4);
  std::lognormal_distribution<double> move(0.0, 0.02);
  std::vector<std::vector<double>> rows{{100, 20, 5}};
  for (int t = 1; t < 300; ++t) {
    auto next = rows.back();
    for (double& v : next) v *= move(rng);
    rows.push_back(next);
  }
  const auto panel = panel_from(rows);
  for (std::size_t horizon : {1u, 3u}) {
    const auto r = compute_returns(panel, horizon);
    REQUIRE(r.length() == panel.length() - horizon);
    for (std::size_t t = 0; t < r.length(); ++t)
      for (std::size_t k = 0; k < 3; ++k) {
        const double rebuilt = panel.prices(t, k) * (1.0 + r.values(t, k));
        CHECK(std::abs(rebuilt - panel.prices(t + horizon, k)) <= 1e-12 * panel.prices(t + horizon, k));
      }
  }
}

TEST_CASE("local_normalize matches a brute-force windowed z-score") {
  const auto panel = fixture::normal_panel(200, 3, 11);
  ReturnPanel raw = panel;
  raw.normalization_window.reset();
  const auto out = local_normalize(raw, 13);
  REQUIRE(out.length() == 200 - 12);
  CHECK(out.dates.front() == raw.dates[12]);
  CHECK(out.normalization_window == 13u);
  for (std::size_t k = 0; k < 3; ++k) {
    const auto col = raw.values.column(k);
    for (std::size_t t = 0; t < out.length(); ++t)
      CHECK(out.values(t, k) == doctest::Approx(oracle::windowed_zscore(col, t + 12, 13)).epsilon(1e-12));
  }
}

TEST_CASE("local_normalize of white noise has unit scale") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto raw = fixture::normal_panel(10000 + 12, 1, seed);
    raw.normalization_window.reset();
    const auto col = local_normalize(raw, 13).values.column(0);
    CHECK(std::abs(oracle::mean(col)) < 0.05);
    const double var = oracle::variance(col);
    CHECK(var > 0.8);
    CHECK(var < 1.2);
  }
}

TEST_CASE("local_normalize of a level plus alternating sign") {
  std::vector<double> v;
  for (int t = 0; t < 60; ++t) v.push_back(0.003 + (t % 2 ? 0.001 : -0.001));
  const auto out = local_normalize(column_panel(v), 13);
  for (std::size_t t = 0; t < out.length(); ++t) {
    const double expected = oracle::windowed_zscore(v, t + 12, 13);
    CHECK(out.values(t, 0) == doctest::Approx(expected).epsilon(1e-12));
    // An odd window holds one extra sample of the last sign, so the value
    // is close to but not exactly +-1.
    CHECK(std::abs(std::abs(out.values(t, 0)) - 1.0) < 0.1);
    CHECK((out.values(t, 0) > 0) == ((t + 12) % 2 == 1));
  }
}

TEST_CASE("local_normalize errors") {
  CHECK_THROWS_AS(local_normalize(column_panel(std::vector<double>(30, 0.01)), 13),
                  DegenerateVarianceError);
  auto normalized = fixture::normal_panel(30, 1, 1);
  CHECK_THROWS_AS(local_normalize(normalized, 13), ConfigError);
  CHECK_THROWS_AS(local_normalize(column_panel({1, 2, 3}), 13), InsufficientDataError);
}

TEST_CASE("local_normalize is scale invariant") {
  auto raw = fixture::normal_panel(500, 4, 3);
  raw.normalization_window.reset();
  const auto base = local_normalize(raw, 13);
  for (double c : {0.5, 4.0, 1024.0}) {
    auto scaled = raw;
    for (double& v : scaled.values.data()) v *= c;
    CHECK(local_normalize(scaled, 13).values == base.values);
  }
  for (double c : {0.013, 7.3, 1e6}) {
    auto scaled = raw;
    for (double& v : scaled.values.data()) v *= c;
    const auto out = local_normalize(scaled, 13);
    for (std::size_t i = 0; i < out.values.data().size(); ++i)
      CHECK(out.values.data()[i] == doctest::Approx(base.values.data()[i]).epsilon(1e-12));
  }
}

TEST_CASE("output lengths follow the drop rules") {
  auto prices = panel_from(std::vector<std::vector<double>>(40, {1.0}));
  for (std::size_t t = 0; t < 40; ++t) prices.prices(t, 0) = 1.0 + 0.01 * double(t * t % 7);
  for (std::size_t horizon : {1u, 2u, 5u})
    for (std::size_t n : {2u, 13u}) {
      const auto r = compute_returns(prices, horizon);
      CHECK(r.length() == 40 - horizon);
      CHECK(local_normalize(r, n).length() == 40 - horizon - (n - 1));
    }
}

TEST_CASE("sector map and return panel files round-trip") {
  fixture::TempDir dir("files");
  SectorMap map;
  map.sectors = {"Energy", "Tech"};
  map.assignments = {{"A", "Tech"}, {"B", "Energy"}, {"C", "Tech"}};
  write_sector_map(map, dir.file("s.csv"));
  const auto back = load_sector_map(dir.file("s.csv"));
  CHECK(back.sectors == map.sectors);
  CHECK(back.assignments == map.assignments);

  auto panel = fixture::normal_panel(20, 3, 9);
  write_return_panel(panel, dir.file("r.csv"));
  const auto r = read_return_panel(dir.file("r.csv"));
  CHECK(r.values == panel.values);
  CHECK(r.normalization_window == panel.normalization_window);
  CHECK(r.tickers == panel.tickers);
}
