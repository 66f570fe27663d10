// Acceptance gate: one PASS/FAIL line per criterion. `--criterion N` runs a
// single criterion; the exit status is nonzero when any selected one fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "qss/clustering.hpp"
#include "qss/csv.hpp"
#include "qss/fixedpoint.hpp"
#include "qss/langevin.hpp"
#include "qss/pipeline.hpp"
#include "qss/synth.hpp"

namespace fs = std::filesystem;
using namespace qss;

namespace {

constexpr std::uint64_t seeds = 20;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// A full pipeline run on one bundled scenario, with ground truth attached to
// every state point.
struct Run {
  pipeline::Config config;
  StatePointFile states;
  ClusterModel fitted;                          // as clustered
  ClusterModel model;                           // after the merge stage
  std::vector<std::size_t> majority;            // regime covering most of each point's window
  std::vector<std::optional<std::size_t>> pure; // regime when the whole window is one regime
  std::vector<std::string> regime_names;
  std::vector<std::vector<double>> templates;   // embedded regime templates

  fs::path out() const { return config.out; }

  // The cluster holding most of the points that lie wholly inside `regime`.
  std::size_t cluster_of(std::size_t regime, const ClusterModel& m) const {
    std::map<std::size_t, std::size_t> votes;
    for (std::size_t t = 0; t < pure.size(); ++t)
      if (pure[t] == regime) ++votes[m.labels[t]];
    std::size_t best = 0, id = 0;
    for (const auto& [c, n] : votes)
      if (n > best) best = n, id = c;
    return id;
  }

  double min_template_separation() const {
    double sep = INFINITY;
    for (std::size_t a = 0; a < templates.size(); ++a)
      for (std::size_t b = a + 1; b < templates.size(); ++b)
        sep = std::min(sep, oracle::euclid(templates[a], templates[b]));
    return sep;
  }
};

enum class Until { cluster, merge, all };

Run run_pipeline(const std::string& conf, const fs::path& out, std::uint64_t seed, Until until) {
  Run run;
  run.config = pipeline::load_config(std::string(QSS_SCENARIO_DIR) + "/" + conf);
  run.config.out = out;
  run.config.seed = seed;
  run.config.potential_svg = false;
  if (until == Until::all) {
    pipeline::run_all(run.config);
  } else {
    for (const auto& stage : pipeline::stage_names()) {
      if (stage == "all") continue;
      pipeline::run_stage(stage, run.config);
      if (stage == (until == Until::cluster ? "cluster" : "merge")) break;
    }
  }

  run.states = read_state_points((out / "correlate" / "states.csv").string());
  const auto fitted = out / "cluster" / "model.txt";
  const auto merged = out / "merge" / "model.txt";
  run.fitted = read_model(fitted.string(), run.states.points);
  run.model = fs::exists(merged) ? read_model(merged.string(), run.states.points) : run.fitted;

  const auto labels = read_labels((out / "synth" / "labels.csv").string());
  std::map<std::string, std::size_t> day;
  for (std::size_t i = 0; i < labels.size(); ++i) day[labels[i].first] = i;
  const std::size_t span = run.config.correlation_window + run.config.horizon - 1;
  for (const auto& date : run.states.dates) {
    const std::size_t end = day.at(date);
    std::map<std::size_t, std::size_t> count;
    for (std::size_t i = end + 1 - span; i <= end; ++i) ++count[labels[i].second];
    std::size_t best = 0, regime = 0;
    for (const auto& [g, n] : count)
      if (n >= best) best = n, regime = g;
    run.majority.push_back(regime);
    run.pure.push_back(count.size() == 1 ? std::optional(regime) : std::nullopt);
  }

  const auto rows = csv::read_lines((out / "synth" / "regimes.csv").string());
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].empty()) continue;
    const auto f = csv::split(rows[i]);
    run.regime_names.push_back(f[1]);
    std::vector<double> c;
    for (std::size_t k = 2; k < f.size(); ++k) c.push_back(*csv::parse_double(f[k]));
    run.templates.push_back(c);
  }
  return run;
}

std::vector<double> read_fixed_point(const fs::path& path) {
  const auto rows = csv::read_lines(path.string());
  const auto header = csv::split(rows[0]);
  const auto values = csv::split(rows[1]);
  std::vector<double> point;
  for (std::size_t k = 0; k < header.size() && header[k].rfind("c_", 0) == 0; ++k)
    point.push_back(*csv::parse_double(values[k]));
  return point;
}

// reference id -> radius, from fixedpoint/summary.txt.
std::map<std::size_t, double> read_radii(const fs::path& path) {
  std::map<std::size_t, double> radii;
  for (const auto& line : csv::read_lines(path.string())) {
    std::size_t ref = 0;
    double radius = 0;
    if (std::sscanf(line.c_str(), "reference %zu radius = %lf", &ref, &radius) == 2)
      radii[ref] = radius;
  }
  return radii;
}

// ---------------------------------------------------------------------------

Verdict drift_recovery() {
  const auto start = std::chrono::steady_clock::now();
  std::vector<double> slopes, crossings, diffusions;
  for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
    const auto x = simulate_ou({0.5, 1.9, 0.1, 1.9, 1.0, 100000, seed});
    const auto est = estimate_drift(x, EstimationConfig{});
    // Central half of the grid: the tails carry few samples.
    const std::size_t n = est.grid.size(), lo = n / 4, hi = n - n / 4;
    std::vector<double> gx, gd, d2;
    for (std::size_t i = lo; i < hi; ++i) {
      if (!est.valid[i]) continue;
      gx.push_back(est.grid[i]);
      gd.push_back(est.drift[i]);
      d2.push_back(est.diffusion[i]);
    }
    const auto [a, b] = oracle::line_fit(gx, gd);
    slopes.push_back(b);
    crossings.push_back(-a / b);
    diffusions.push_back(oracle::median(d2));
  }
  const double slope = oracle::median(slopes), crossing = oracle::median(crossings),
               d2 = oracle::median(diffusions), elapsed = seconds_since(start);
  const bool pass = std::abs(slope + 0.5) <= 0.05 && std::abs(crossing - 1.9) <= 0.05 &&
                    std::abs(d2 - 0.1) <= 0.015 && elapsed < 30.0;
  return {pass, fmt("median slope %.4f (-0.5 +-10%%), crossing %.4f (1.9 +-0.05), "
                    "D2 %.4f (0.1 +-15%%), %.1f s (< 30 s)",
                    slope, crossing, d2, elapsed)};
}

Verdict potential_correctness() {
  const auto start = std::chrono::steady_clock::now();
  auto curve_for = [](const std::function<double(double)>& drift, double x0, double x1,
                      std::size_t n) {
    DriftEstimate d;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = x0 + (x1 - x0) * static_cast<double>(i) / static_cast<double>(n - 1);
      d.grid.push_back(x);
      d.drift.push_back(drift(x));
      d.diffusion.push_back(0.1);
      d.counts.push_back(100.0);
      d.valid.push_back(true);
    }
    return integrate_potential(d);
  };

  // Linear drift -gamma (x - m): the potential is gamma (x - m)^2 / 2.
  const double gamma = 0.5, m = 1.9;
  const auto lin = curve_for([&](double x) { return -gamma * (x - m); }, 1.0, 2.8, 101);
  const double h = lin.grid[1] - lin.grid[0];
  auto exact = [&](double x) { return 0.5 * gamma * (x - m) * (x - m); };
  double lin_dev = 0.0, lin_scale = 0.0;
  for (std::size_t i = 0; i < lin.grid.size(); ++i) {
    lin_dev = std::max(lin_dev, std::abs(lin.phi[i] - (exact(lin.grid[i]) - exact(lin.grid[0]))));
    lin_scale = std::max(lin_scale, std::abs(lin.phi[i]));
  }
  // Trapezoid error (b - a) h^2 max|f''| / 12 vanishes for a linear integrand;
  // allow for rounding in the running sum.
  const double lin_bound = 0.0 + 64 * 2.2e-16 * lin_scale * static_cast<double>(lin.grid.size());

  double fd_dev = 0.0;
  for (std::size_t i = 1; i + 1 < lin.grid.size(); ++i)
    fd_dev = std::max(fd_dev, std::abs((lin.phi[i + 1] - lin.phi[i - 1]) / (2 * h) + lin.drift[i]));

  // Cubic drift x - x^3: potential x^4/4 - x^2/2, trapezoid bound (b - a) h^2 max|6x| / 12.
  const auto cub = curve_for([](double x) { return x - x * x * x; }, -1.5, 1.5, 101);
  const double hc = cub.grid[1] - cub.grid[0];
  auto quartic = [](double x) { return x * x * x * x / 4 - x * x / 2; };
  double cub_dev = 0.0;
  for (std::size_t i = 0; i < cub.grid.size(); ++i)
    cub_dev = std::max(cub_dev, std::abs(cub.phi[i] - (quartic(cub.grid[i]) - quartic(cub.grid[0]))));
  const double cub_bound = 3.0 * hc * hc * 9.0 / 12.0;

  const double elapsed = seconds_since(start);
  const bool pass = lin_dev <= lin_bound && fd_dev <= 1e-10 && cub_dev <= cub_bound && elapsed < 1.0;
  return {pass, fmt("linear max dev %.2e (bound %.2e), finite difference %.2e (1e-10), "
                    "cubic max dev %.2e (bound %.2e), %.3f s",
                    lin_dev, lin_bound, fd_dev, cub_dev, cub_bound, elapsed)};
}

Verdict state_recovery() {
  const auto start = std::chrono::steady_clock::now();
  fixture::TempDir dir("acc_c3");
  std::vector<double> aris;
  for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
    const auto run = run_pipeline("three_regime.conf", dir.path() / "out", seed, Until::merge);
    aris.push_back(oracle::adjusted_rand(run.model.labels, run.majority));
  }
  const double worst = *std::min_element(aris.begin(), aris.end());
  const double elapsed = seconds_since(start);
  return {worst >= 0.95 && elapsed < 120.0,
          fmt("min ARI %.4f over %d seeds (>= 0.95), %.1f s (< 120 s)", worst, int(seeds), elapsed)};
}

Verdict potential_coincidence() {
  fixture::TempDir dir("acc_c4");
  const auto run = run_pipeline("three_regime.conf", dir.path() / "out", 1, Until::cluster);
  std::size_t stable = 0, hits = 0;
  for (std::size_t ref : run.model.live_ids()) {
    const auto series = center_distance_series(run.states.points, run.model, ref);
    const auto windows = sliding_potentials(series.values, run.config.potential_window,
                                            run.config.potential_shift, run.config.estimation);
    for (const auto& w : windows) {
      const auto regime = run.pure[w.window.start];
      bool one_regime = regime.has_value();
      for (std::size_t t = w.window.start; one_regime && t <= w.window.end; ++t)
        one_regime = run.pure[t] == regime;
      if (!one_regime) continue;
      const std::size_t occupied = run.cluster_of(*regime, run.model);
      // The reference's own state sits at distance zero, on the grid's edge.
      if (occupied == ref) continue;
      ++stable;
      if (!w.ok()) continue;
      const auto deepest = deepest_minimum(w.curve->minima);
      if (!deepest) continue;
      const double cell = w.curve->grid[1] - w.curve->grid[0];
      const double expected =
          distance(run.model.clusters[ref].center, run.model.clusters[occupied].center);
      if (std::abs(deepest->x - expected) <= 2 * cell) ++hits;
    }
  }
  const double share = stable ? static_cast<double>(hits) / static_cast<double>(stable) : 0.0;
  return {stable > 0 && share >= 0.9,
          fmt("%zu of %zu stable windows within 2 grid cells (%.1f%%, need >= 90%%)", hits, stable,
              100 * share)};
}

Verdict merge_criterion() {
  fixture::TempDir dir("acc_c5");
  std::size_t good = 0;
  std::ostringstream misses;
  for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
    const auto run = run_pipeline("oversplit.conf", dir.path() / "out", seed, Until::merge);
    std::set<std::size_t> variants;
    for (std::size_t g = 0; g < run.regime_names.size(); ++g)
      if (run.regime_names[g].rfind("a", 0) == 0) variants.insert(run.cluster_of(g, run.fitted));

    std::map<std::string, std::set<std::size_t>> support;  // member list -> references
    const auto rows = csv::read_lines((run.out() / "merge" / "proposals.csv").string());
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].empty()) continue;
      const auto f = csv::split(rows[i]);
      support[f[2]].insert(static_cast<std::size_t>(*csv::parse_int(f[0])));
    }
    bool ok = variants.size() == 3 && support.size() == 1;
    if (ok) {
      std::set<std::size_t> members;
      std::stringstream ss(support.begin()->first);
      for (std::string id; std::getline(ss, id, ';');) members.insert(std::stoul(id));
      ok = members == variants && support.begin()->second.size() >= 2;
    }
    if (ok) ++good;
    else misses << ' ' << seed;
  }
  return {good >= 18, fmt("%zu of %d seeds with one 3-sibling proposal (>= 18)%s%s", good,
                          int(seeds), good < seeds ? ", missed:" : "", misses.str().c_str())};
}

Verdict constrained_fixed_point_check() {
  fixture::TempDir dir("acc_c6");
  double worst_residual = 0.0, worst_recovery = 0.0, worst_ratio = 0.0, worst_match = 0.0;
  bool monotone = true;
  double sep = 0.0;
  for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
    const auto run = run_pipeline("three_regime.conf", dir.path() / "out", seed, Until::all);
    const auto fp_dir = run.out() / "fixedpoint";
    const auto c0 = read_fixed_point(fp_dir / "fixed_point.csv");
    const auto radii = read_radii(fp_dir / "summary.txt");
    const auto interval = *run.config.interval;
    const std::span<const StatePoint> sub(run.states.points.data() + interval.start,
                                          interval.length());
    SolverOptions options;
    options.seed = seed;

    for (const auto& [ref, radius] : radii) {
      const auto& mu = run.model.clusters[ref].center;
      const auto r = constrained_fixed_point({sub, mu, radius}, options);
      worst_residual = std::max(worst_residual, r.constraint_residual / radius);
      for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
        monotone = monotone && r.objective_trace[i] <= r.objective_trace[i - 1];
      if (ref == radii.begin()->first)
        worst_match = std::max(worst_match, oracle::euclid(r.point, c0));

      const auto median = geometric_median(sub, 1e-12).point;
      const auto g = constrained_fixed_point({sub, mu, oracle::euclid(mu, median)}, options);
      worst_recovery = std::max(worst_recovery, oracle::euclid(g.point, median));
    }

    std::size_t calm = 0;
    for (std::size_t g = 0; g < run.regime_names.size(); ++g)
      if (run.regime_names[g] == "calm") calm = g;
    sep = run.min_template_separation();
    worst_ratio = std::max(worst_ratio, oracle::euclid(c0, run.templates[calm]) / sep);
  }
  const bool pass = worst_residual <= 1e-8 && monotone && worst_recovery <= 1e-6 &&
                    worst_match <= 1e-8 && worst_ratio < 0.5;
  return {pass, fmt("residual/X0 %.1e (1e-8), objective %s, median recovery %.1e (1e-6), "
                    "artifact match %.1e, |C0 - calm| / separation %.3f (< 0.5), %d seeds",
                    worst_residual, monotone ? "non-increasing" : "INCREASED", worst_recovery,
                    worst_match, worst_ratio, int(seeds))};
}

Verdict reference_consistency_check() {
  fixture::TempDir dir("acc_c7");
  double worst = 0.0;
  std::size_t pairs = 0;
  for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
    const auto run = run_pipeline("three_regime.conf", dir.path() / "out", seed, Until::all);
    const double sep = run.min_template_separation();
    const auto rows = csv::read_lines((run.out() / "fixedpoint" / "consistency.csv").string());
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].empty()) continue;
      const auto d = *csv::parse_double(csv::split(rows[i])[2]);
      worst = std::max(worst, std::isnan(d) ? INFINITY : d / sep);
      ++pairs;
    }
  }
  return {pairs >= seeds && worst < 0.1,
          fmt("%zu reference pairs, max distance / separation %.4f (< 0.1)", pairs, worst)};
}

Verdict delta_signature() {
  fixture::TempDir dir("acc_c8");
  std::size_t in_total = 0, in_negative = 0;
  double worst_share = 1.0, worst_out_mean = INFINITY;
  for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
    const auto run = run_pipeline("three_regime.conf", dir.path() / "out", seed, Until::all);
    std::size_t calm = 0;
    for (std::size_t g = 0; g < run.regime_names.size(); ++g)
      if (run.regime_names[g] == "calm") calm = g;
    const auto rows = csv::read_lines((run.out() / "fixedpoint" / "delta.csv").string());
    std::size_t in = 0, neg = 0, out = 0;
    double out_sum = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].empty()) continue;
      const auto f = csv::split(rows[i]);
      const auto t = static_cast<std::size_t>(*csv::parse_int(f[0]));
      const double delta = *csv::parse_double(f[1]);
      if (!run.pure[t]) continue;
      if (*run.pure[t] == calm) {
        ++in;
        if (delta < 0) ++neg;
      } else {
        ++out;
        out_sum += delta;
      }
    }
    in_total += in;
    in_negative += neg;
    worst_share = std::min(worst_share, static_cast<double>(neg) / static_cast<double>(in));
    worst_out_mean = std::min(worst_out_mean, out_sum / static_cast<double>(out));
  }
  return {worst_share >= 0.9 && worst_out_mean > 0,
          fmt("worst in-state share with delta < 0: %.3f (>= 0.9), pooled %zu/%zu; "
              "worst out-of-state mean %.4f (> 0)",
              worst_share, in_negative, in_total, worst_out_mean)};
}

Verdict determinism() {
  fixture::TempDir dir("acc_c9");
  const std::string conf = std::string(QSS_SCENARIO_DIR) + "/three_regime.conf";
  std::vector<std::map<std::string, std::uint64_t>> trees;
  for (const char* name : {"first", "second"}) {
    const auto out = dir.path() / name;
    const std::string cmd = std::string("'") + QSS_CLI_PATH + "' --config '" + conf + "' --out '" +
                            out.string() + "' all > /dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) return {false, fmt("qss all failed for the %s run", name)};
    std::map<std::string, std::uint64_t> tree;
    for (const auto& e : fs::recursive_directory_iterator(out))
      if (e.is_regular_file() && e.path().filename() != ".lock")
        tree[e.path().lexically_relative(out).generic_string()] = pipeline::file_checksum(e.path());
    trees.push_back(std::move(tree));
  }
  std::size_t differing = 0;
  for (const auto& [path, sum] : trees[0])
    if (!trees[1].count(path) || trees[1].at(path) != sum) ++differing;
  const bool pass = differing == 0 && trees[0].size() == trees[1].size();
  return {pass, fmt("%zu files, %zu differing", trees[0].size(), differing)};
}

Verdict oracle_equivalence() {
  const std::vector<double> x{0.3, -1.2, 0.8, 2.5, 1.1, -0.4, 0.0, 1.7, -2.1, 0.6};
  const double range = 2.5 - -2.1;
  const double h = 1e6 * range;
  const std::vector<std::size_t> taus{1, 2, 3};
  const std::vector<double> grid{-2.1, -0.7, 0.2, 1.4, 2.5};
  const auto m = conditional_moments(x, taus, grid, h, Execution::serial);
  double worst = 0.0;
  for (std::size_t k = 0; k < taus.size(); ++k) {
    const std::size_t tau = taus[k];
    double s1 = 0, s2 = 0;
    for (std::size_t t = 0; t + tau < x.size(); ++t) {
      const double d = x[t + tau] - x[t];
      s1 += d;
      s2 += d * d;
    }
    const double n = static_cast<double>(x.size() - tau);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      worst = std::max(worst, std::abs(m.first[k][i] - s1 / n));
      worst = std::max(worst, std::abs(m.second[k][i] - s2 / n));
    }
  }
  return {worst <= 1e-10, fmt("max deviation %.2e over 3 lags x 5 grid points (1e-10)", worst)};
}

struct Criterion {
  const char* name;
  Verdict (*check)();
};

const Criterion criteria[] = {
    {"drift recovery", drift_recovery},
    {"potential correctness", potential_correctness},
    {"state recovery end-to-end", state_recovery},
    {"potential/cluster coincidence", potential_coincidence},
    {"merge criterion", merge_criterion},
    {"constrained fixed point", constrained_fixed_point_check},
    {"reference consistency", reference_consistency_check},
    {"delta occupancy signature", delta_signature},
    {"determinism", determinism},
    {"oracle equivalence", oracle_equivalence},
};

}  // namespace

int main(int argc, char** argv) {
  constexpr int count = static_cast<int>(std::size(criteria));
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
      return 2;
    }
  }
  if (only < 0 || only > count) {
    std::fprintf(stderr, "criterion must be 1..%d\n", count);
    return 2;
  }

  int failed = 0;
  for (int n = 1; n <= count; ++n) {
    if (only && n != only) continue;
    Verdict v;
    try {
      v = criteria[n - 1].check();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    std::printf("criterion %2d  %s  %s: %s\n", n, v.pass ? "PASS" : "FAIL", criteria[n - 1].name,
                v.detail.c_str());
    std::fflush(stdout);
    if (!v.pass) ++failed;
  }
  return failed ? 1 : 0;
}
