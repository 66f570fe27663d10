#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "qss/clustering.hpp"
#include "qss/csv.hpp"
#include "qss/fixedpoint.hpp"
#include "qss/ingest.hpp"
#include "qss/pipeline.hpp"
#include "qss/synth.hpp"
#include "svg.hpp"

namespace qss::pipeline {
namespace {

namespace fs = std::filesystem;

std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

std::string rel(const fs::path& p, const fs::path& out) {
  const auto r = p.lexically_relative(out);
  if (!r.empty() && *r.begin() != "..") return r.generic_string();
  return p.generic_string();
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

fs::path stage_dir(const Config& c, const std::string& stage) { return c.out / stage; }

// Starting a stage discards its own outputs and everything downstream, so no
// stage can read artifacts left over from an earlier configuration.
fs::path begin_stage(const Config& c, const std::string& stage) {
  const auto& names = stage_names();
  const auto pos = std::find(names.begin(), names.end(), stage);
  for (auto it = pos; it != names.end(); ++it) fs::remove_all(stage_dir(c, *it));
  const auto dir = stage_dir(c, stage);
  fs::create_directories(dir);
  return dir;
}

fs::path require(const std::string& stage, const std::string& producer, const fs::path& path) {
  if (!fs::exists(path)) throw StageOrderError(stage, producer);
  return path;
}

// Rewrites this stage's block of manifest.txt and drops the blocks of the
// downstream stages, whose outputs begin_stage already removed.
void record(const Config& c, const std::string& stage, const std::vector<fs::path>& inputs,
            const fs::path& dir) {
  const auto manifest = c.out / "manifest.txt";
  std::map<std::string, std::string> blocks;
  if (fs::exists(manifest)) {
    std::string current;
    for (const auto& line : csv::read_lines(manifest.string())) {
      if (line.size() > 2 && line.front() == '[' && line.back() == ']')
        current = line.substr(1, line.size() - 2);
      else if (!current.empty() && !line.empty())
        blocks[current] += line + '\n';
    }
  }
  const auto& names = stage_names();
  const auto pos = std::find(names.begin(), names.end(), stage);
  for (auto it = pos; it != names.end(); ++it) blocks.erase(*it);

  std::ostringstream b;
  b << "version = " << version << '\n' << "config_hash = " << hex(config_hash(c)) << '\n';
  for (const auto& in : inputs) b << "input " << rel(in, c.out) << ' ' << hex(file_checksum(in)) << '\n';
  std::vector<fs::path> outputs;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) outputs.push_back(e.path());
  std::sort(outputs.begin(), outputs.end());
  for (const auto& o : outputs) b << "output " << rel(o, c.out) << ' ' << hex(file_checksum(o)) << '\n';
  blocks[stage] = b.str();

  auto out = open_out(manifest);
  for (const auto& name : names)
    if (blocks.count(name)) out << '[' << name << "]\n" << blocks[name] << '\n';
}

fs::path prices_path(const Config& c) {
  if (!c.prices.empty()) return c.prices;
  if (!c.scenario.empty()) return require("ingest", "synth", c.out / "synth" / "prices.csv");
  throw ConfigError("no price input: set 'prices' or 'scenario'");
}

fs::path sectors_path(const Config& c, const std::string& stage) {
  if (!c.sectors.empty()) return c.sectors;
  if (!c.scenario.empty()) return require(stage, "synth", c.out / "synth" / "sectors.csv");
  throw ConfigError("no sector input: set 'sectors' or 'scenario'");
}

fs::path states_path(const Config& c, const std::string& stage) {
  return require(stage, "correlate", c.out / "correlate" / "states.csv");
}

fs::path cluster_model_path(const Config& c, const std::string& stage) {
  return require(stage, "cluster", c.out / "cluster" / "model.txt");
}

// The merged model when the merge stage produced one.
fs::path current_model_path(const Config& c, const std::string& stage) {
  const auto merged = c.out / "merge" / "model.txt";
  return fs::exists(merged) ? merged : cluster_model_path(c, stage);
}

std::vector<std::size_t> select(const ClusterModel& model, const IdSelection& ids) {
  if (!ids) return model.live_ids();
  for (std::size_t id : *ids) model.live(id);
  return *ids;
}

std::string window_name(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "window_%04zu", k);
  return buf;
}

std::vector<double> center_distances(const ClusterModel& model, std::size_t ref) {
  std::vector<double> d;
  for (std::size_t j : model.live_ids())
    d.push_back(distance(model.clusters[j].center, model.clusters[ref].center));
  return d;
}

// A potential with dotted verticals at the
// distances from the reference to every live cluster center.
void potential_panel(Svg& svg, const Frame& f, std::span<const double> grid,
                     std::span<const double> phi, std::span<const double> centers,
                     const std::string& title) {
  f.axes(svg, title, "distance to reference center", "potential");
  svg.polyline(f.map(grid, phi), "black");
  for (double x : centers) {
    const double px = std::clamp(f.px(x), f.left, f.left + f.width);
    svg.line(px, f.top, px, f.top + f.height, "#d62728", "center", true);
  }
}

Frame potential_frame(std::span<const double> grid, std::span<const double> phi,
                      std::span<const double> centers, double left, double top) {
  std::vector<double> xs(grid.begin(), grid.end());
  xs.insert(xs.end(), centers.begin(), centers.end());
  const auto [x0, x1] = padded_range(xs);
  const auto [y0, y1] = padded_range(phi);
  return {left, top, 520, 180, x0, x1, y0, y1};
}

void write_minima_rows(std::ostream& out, const PotentialCurve& curve) {
  for (const auto& m : curve.minima)
    out << curve.window.start << ',' << curve.window.end << ',' << csv::format(m.x) << ','
        << csv::format(m.phi) << ',' << csv::format(m.prominence) << '\n';
}

struct CommonMinimum {
  std::size_t reference = 0;
  Minimum minimum;
  bool deepest = false;
};

std::vector<CommonMinimum> read_common_minima(const fs::path& path) {
  const auto lines = csv::read_lines(path.string());
  std::vector<CommonMinimum> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = csv::split(lines[i]);
    if (f.size() != 8) throw ParseError("'" + path.string() + "': expected 8 fields", i + 1);
    CommonMinimum m;
    const auto ref = csv::parse_int(f[0]);
    const auto x = csv::parse_double(f[3]);
    const auto phi = csv::parse_double(f[4]);
    const auto prom = csv::parse_double(f[5]);
    const auto deep = csv::parse_int(f[7]);
    if (!ref || !x || !phi || !prom || !deep)
      throw ParseError("'" + path.string() + "': malformed row", i + 1);
    m.reference = static_cast<std::size_t>(*ref);
    m.minimum = {*x, *phi, *prom, 0};
    m.deepest = *deep != 0;
    out.push_back(m);
  }
  return out;
}

std::pair<std::vector<double>, std::vector<double>> read_potential(const fs::path& path) {
  const auto lines = csv::read_lines(path.string());
  std::vector<double> x, phi;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = csv::split(lines[i]);
    const auto a = f.size() == 5 ? csv::parse_double(f[0]) : std::nullopt;
    const auto b = f.size() == 5 ? csv::parse_double(f[3]) : std::nullopt;
    if (!a || !b) throw ParseError("'" + path.string() + "': malformed row", i + 1);
    x.push_back(*a);
    phi.push_back(*b);
  }
  return {x, phi};
}

void write_model_outputs(const ClusterModel& model, const fs::path& dir) {
  write_model(model, (dir / "model.txt").string());
  write_timeline({model.labels}, (dir / "timeline.csv").string());
  open_out(dir / "tree.txt") << tree_dump(model);
}

}  // namespace

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {"synth", "ingest", "correlate", "cluster",
                                                 "potentials", "merge", "fixedpoint", "report"};
  return names;
}

void run_synth(const Config& c) {
  if (c.scenario.empty()) throw ConfigError("synth needs 'scenario' in the config");
  auto spec = read_scenario(c.scenario.string());
  spec.seed = c.seed;
  const auto data = generate_scenario(spec);
  const auto dir = begin_stage(c, "synth");
  write_synthetic(data, dir.string());
  record(c, "synth", {c.scenario}, dir);
}

void run_ingest(const Config& c) {
  const auto prices = prices_path(c);
  const auto sectors = sectors_path(c, "ingest");
  const auto loaded = load_prices(prices.string());
  const auto map = load_sector_map(sectors.string());
  SectorIndex::build(map, loaded.panel.tickers);
  const auto returns = compute_returns(loaded.panel, c.horizon);
  const auto normalized = local_normalize(returns, c.normalize_window);

  const auto dir = begin_stage(c, "ingest");
  write_return_panel(returns, (dir / "returns.csv").string());
  write_return_panel(normalized, (dir / "normalized.csv").string());
  auto s = open_out(dir / "summary.txt");
  s << "instruments = " << loaded.panel.tickers.size() << '\n' << "dropped =";
  for (const auto& t : loaded.dropped) s << ' ' << t;
  s << '\n'
    << "sectors = " << map.sectors.size() << '\n'
    << "first_date = " << loaded.panel.dates.front() << '\n'
    << "last_date = " << loaded.panel.dates.back() << '\n'
    << "price_rows = " << loaded.panel.length() << '\n'
    << "return_rows = " << returns.length() << '\n'
    << "normalized_rows = " << normalized.length() << '\n';
  s.close();
  record(c, "ingest", {prices, sectors}, dir);
}

void run_correlate(const Config& c) {
  const auto normalized_path = require("correlate", "ingest", c.out / "ingest" / "normalized.csv");
  const auto sectors = sectors_path(c, "correlate");
  const auto panel = read_return_panel(normalized_path.string());
  const auto map = load_sector_map(sectors.string());
  const auto index = SectorIndex::build(map, panel.tickers);
  const auto points = rolling_state_points(panel, index, c.correlation_window, c.correlation_step);
  std::vector<std::string> dates;
  for (const auto& p : points) dates.push_back(panel.dates[p.window.end]);

  const auto dir = begin_stage(c, "correlate");
  write_state_points(points, dates, index.sectors, (dir / "states.csv").string());
  record(c, "correlate", {normalized_path, sectors}, dir);
}

void run_cluster(const Config& c) {
  const auto states = states_path(c, "cluster");
  const auto file = read_state_points(states.string());
  const auto model = bisecting_kmeans(file.points, c.threshold, c.seed);

  const auto dir = begin_stage(c, "cluster");
  write_model_outputs(model, dir);
  auto out = open_out(dir / "distances.csv");
  const auto ids = model.live_ids();
  out << 't';
  for (std::size_t id : ids) out << ",d_" << id;
  out << '\n';
  std::vector<DistanceSeries> series;
  for (std::size_t id : ids) series.push_back(center_distance_series(file.points, model, id));
  for (std::size_t t = 0; t < file.points.size(); ++t) {
    out << t;
    for (const auto& s : series) out << ',' << csv::format(s.values[t]);
    out << '\n';
  }
  out.close();
  record(c, "cluster", {states}, dir);
}

void run_potentials(const Config& c) {
  const auto states = states_path(c, "potentials");
  const auto model_path = cluster_model_path(c, "potentials");
  const auto file = read_state_points(states.string());
  const auto model = read_model(model_path.string(), file.points);
  const auto refs = select(model, c.potential_references);
  const Span common = c.common_window.value_or(Span{0, file.points.size() - 1});
  if (common.end >= file.points.size())
    throw ConfigError("potential.common extends past the " + std::to_string(file.points.size()) +
                      " state points");

  const auto dir = begin_stage(c, "potentials");
  auto status = open_out(dir / "windows.csv");
  status << "reference_id,window,t1,t2,status,message\n";
  auto common_minima = open_out(dir / "common_minima.csv");
  common_minima << "reference_id,t1,t2,x_star,phi,prominence,count,deepest\n";
  std::size_t windows_total = 0, windows_ok = 0;

  for (std::size_t r : refs) {
    const auto rdir = dir / ("ref_" + std::to_string(r));
    fs::create_directories(rdir);
    const auto series = center_distance_series(file.points, model, r);
    const auto centers = center_distances(model, r);
    const auto windows = sliding_potentials(series.values, c.potential_window, c.potential_shift,
                                            c.estimation);
    auto minima = open_out(rdir / "minima.csv");
    minima << "t1,t2,x_star,phi,prominence\n";
    for (std::size_t k = 0; k < windows.size(); ++k) {
      const auto& w = windows[k];
      ++windows_total;
      status << r << ',' << k << ',' << w.window.start << ',' << w.window.end << ','
             << (w.ok() ? "ok" : "failed") << ',' << w.failure << '\n';
      if (!w.ok()) continue;
      ++windows_ok;
      write_potential_csv(*w.curve, (rdir / (window_name(k) + ".csv")).string());
      write_minima_rows(minima, *w.curve);
      if (c.potential_svg) {
        Svg svg(600, 250);
        const auto f = potential_frame(w.curve->grid, w.curve->phi, centers, 60, 30);
        potential_panel(svg, f, w.curve->grid, w.curve->phi, centers,
                        "reference " + std::to_string(r) + ", points " +
                            std::to_string(w.window.start) + "-" + std::to_string(w.window.end));
        svg.save((rdir / (window_name(k) + ".svg")).string());
      }
    }

    std::span<const double> part(series.values.data() + common.start, common.length());
    try {
      auto curve = estimate_potential(part, c.estimation);
      curve.window = common;
      write_potential_csv(curve, (rdir / "common.csv").string());
      const auto deepest = deepest_minimum(curve.minima);
      for (const auto& m : curve.minima)
        common_minima << r << ',' << common.start << ',' << common.end << ','
                      << csv::format(m.x) << ',' << csv::format(m.phi) << ','
                      << csv::format(m.prominence) << ',' << curve.minima.size() << ','
                      << (deepest && deepest->index == m.index) << '\n';
      status << r << ",common," << common.start << ',' << common.end << ",ok,\n";
    } catch (const Error& e) {
      status << r << ",common," << common.start << ',' << common.end << ",failed," << e.what()
             << '\n';
    }
  }
  status.close();
  common_minima.close();
  record(c, "potentials", {states, model_path}, dir);
  if (windows_total > 0 && windows_ok == 0)
    throw EstimationFailure("every potential window failed; see potentials/windows.csv");
}

void run_merge(const Config& c) {
  const auto states = states_path(c, "merge");
  const auto model_path = cluster_model_path(c, "merge");
  const auto minima_path = require("merge", "potentials", c.out / "potentials" / "common_minima.csv");
  const auto file = read_state_points(states.string());
  auto model = read_model(model_path.string(), file.points);

  std::map<std::size_t, ReferencePotential> by_ref;
  for (const auto& m : read_common_minima(minima_path)) {
    auto& rp = by_ref[m.reference];
    rp.reference = m.reference;
    rp.curve.minima.push_back(m.minimum);
  }
  std::vector<ReferencePotential> potentials;
  for (auto& [id, rp] : by_ref) potentials.push_back(std::move(rp));
  const auto proposals = propose_merges(model, potentials, c.merge_tol);

  const auto dir = begin_stage(c, "merge");
  write_proposals(proposals, (dir / "proposals.csv").string());
  if (c.merge_apply) {
    for (const auto& p : proposals) {
      const bool all_live = std::all_of(p.members.begin(), p.members.end(), [&](std::size_t id) {
        return model.clusters[id].live;
      });
      if (all_live) model = merge_clusters(file.points, model, p.members);
    }
    write_model_outputs(model, dir);
  }
  record(c, "merge", {states, model_path, minima_path}, dir);
}

void run_fixedpoint(const Config& c) {
  const auto states = states_path(c, "fixedpoint");
  const auto model_path = current_model_path(c, "fixedpoint");
  const auto minima_path =
      require("fixedpoint", "potentials", c.out / "potentials" / "common_minima.csv");
  const auto file = read_state_points(states.string());
  const auto model = read_model(model_path.string(), file.points);
  const auto& points = file.points;

  const Span interval = c.interval.value_or(Span{0, points.size() - 1});
  if (interval.end >= points.size())
    throw ConfigError("fixedpoint.interval extends past the " + std::to_string(points.size()) +
                      " state points");
  std::size_t target = 0;
  if (c.target) {
    target = *c.target;
    model.live(target);
  } else {
    std::map<std::size_t, std::size_t> occupancy;
    for (std::size_t t = interval.start; t <= interval.end; ++t) ++occupancy[model.labels[t]];
    std::size_t best = 0;
    for (const auto& [id, n] : occupancy)
      if (n > best) {
        best = n;
        target = id;
      }
  }

  std::map<std::size_t, std::vector<CommonMinimum>> minima;
  for (const auto& m : read_common_minima(minima_path)) minima[m.reference].push_back(m);
  std::vector<std::size_t> refs;
  if (c.fixedpoint_references) {
    for (std::size_t r : *c.fixedpoint_references) {
      model.live(r);
      if (r == target) throw ConfigError("reference " + std::to_string(r) + " is the target cluster");
      if (!minima.count(r))
        throw ConfigError("reference " + std::to_string(r) + " has no potential minimum");
      refs.push_back(r);
    }
  } else {
    for (std::size_t r : model.live_ids())
      if (r != target && minima.count(r)) refs.push_back(r);
  }
  if (refs.empty()) throw ConfigError("no reference cluster with a potential minimum");

  // Radius: the reference's minimum nearest the target center's distance, or
  // its deepest minimum.
  std::vector<Reference> references;
  const auto& mu_target = model.clusters[target].center;
  for (std::size_t r : refs) {
    const auto& mu = model.clusters[r].center;
    const double expected = distance(mu, mu_target);
    const CommonMinimum* pick = nullptr;
    for (const auto& m : minima[r]) {
      if (c.deepest_minimum ? m.deepest
                            : (!pick || std::abs(m.minimum.x - expected) <
                                            std::abs(pick->minimum.x - expected)))
        pick = &m;
    }
    if (!pick) throw EstimationError("reference " + std::to_string(r) + " has no deepest minimum");
    references.push_back({mu, pick->minimum.x});
  }

  const std::span<const StatePoint> sub(points.data() + interval.start, interval.length());
  const auto mean = interval_mean(points, interval).mean.coords;
  SolverOptions options;
  options.tol = c.fixedpoint_tol;
  options.max_iterations = c.fixedpoint_max_iterations;
  options.multistarts = c.fixedpoint_multistarts;
  options.seed = c.seed;

  double match_tol = 0.0;
  if (c.match_tol) {
    match_tol = *c.match_tol;
  } else {
    double sep = INFINITY;
    const auto ids = model.live_ids();
    for (std::size_t a = 0; a < ids.size(); ++a)
      for (std::size_t b = a + 1; b < ids.size(); ++b)
        sep = std::min(sep, distance(model.clusters[ids[a]].center, model.clusters[ids[b]].center));
    match_tol = std::isfinite(sep) ? 0.1 * sep : 0.0;
  }

  ConsistencyReport report;
  if (references.size() >= 2) {
    report = reference_consistency(sub, references, match_tol, options);
  } else {
    ReferenceSolution sol{references[0].center, references[0].radius, std::nullopt, {}};
    try {
      sol.result = constrained_fixed_point({sub, references[0].center, references[0].radius}, options);
    } catch (const Error& e) {
      sol.failure = e.what();
    }
    report.solutions.push_back(std::move(sol));
  }

  const auto dir = begin_stage(c, "fixedpoint");
  const FixedPointResult* primary = nullptr;
  std::size_t primary_ref = 0;
  auto summary = open_out(dir / "summary.txt");
  summary << "target = " << target << '\n'
          << "interval = " << interval.start << ':' << interval.end << '\n'
          << "interval_mean_to_target = " << csv::format(distance(mean, mu_target)) << '\n';
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto& sol = report.solutions[i];
    summary << "reference " << refs[i] << " radius = " << csv::format(sol.radius);
    if (!sol.result) {
      summary << " failed: " << sol.failure << '\n';
      continue;
    }
    const auto& r = *sol.result;
    write_fixed_point(r, (dir / ("ref_" + std::to_string(refs[i]) + ".csv")).string());
    summary << " objective = " << csv::format(r.objective)
            << " to_target = " << csv::format(distance(r.point, mu_target))
            << " to_mean = " << csv::format(distance(r.point, mean))
            << " stationarity = " << csv::format(r.stationarity_residual)
            << " converged = " << r.converged << " unique = " << r.unique << '\n';
    if (!primary) {
      primary = &r;
      primary_ref = refs[i];
    }
  }
  if (!primary) {
    summary.close();
    record(c, "fixedpoint", {states, model_path, minima_path}, dir);
    throw EstimationFailure("the fixed point failed for every reference; see fixedpoint/summary.txt");
  }
  summary << "primary_reference = " << primary_ref << '\n';
  summary.close();
  write_fixed_point(*primary, (dir / "fixed_point.csv").string());

  if (references.size() >= 2) {
    auto out = open_out(dir / "consistency.csv");
    out << "reference_a,reference_b,distance,tol_match,consistent\n";
    for (std::size_t a = 0; a < refs.size(); ++a)
      for (std::size_t b = a + 1; b < refs.size(); ++b)
        out << refs[a] << ',' << refs[b] << ',' << csv::format(report.pairwise(a, b)) << ','
            << csv::format(report.tol_match) << ',' << report.consistent << '\n';
  }

  const auto delta = delta_series(points, primary->point, mean);
  auto out = open_out(dir / "delta.csv");
  out << "t,delta,state_id\n";
  for (std::size_t t = 0; t < points.size(); ++t)
    out << t << ',' << csv::format(delta.values[t]) << ',' << model.labels[t] << '\n';
  out.close();
  record(c, "fixedpoint", {states, model_path, minima_path}, dir);
}

void run_report(const Config& c) {
  const auto states = states_path(c, "report");
  const auto model_path = current_model_path(c, "report");
  const auto delta_path = require("report", "fixedpoint", c.out / "fixedpoint" / "delta.csv");
  const auto summary_path = require("report", "fixedpoint", c.out / "fixedpoint" / "summary.txt");
  require("report", "potentials", c.out / "potentials" / "common_minima.csv");
  const auto file = read_state_points(states.string());
  const auto model = read_model(model_path.string(), file.points);
  const auto refs = select(model, c.report_references);
  const auto ids = model.live_ids();
  const double n = static_cast<double>(file.points.size());
  auto color_of = [&](std::size_t id) {
    return palette(static_cast<std::size_t>(std::find(ids.begin(), ids.end(), id) - ids.begin()));
  };
  auto shade_runs = [&](Svg& svg, const Frame& f, auto&& pick, double opacity) {
    std::size_t start = 0;
    for (std::size_t t = 1; t <= model.labels.size(); ++t) {
      if (t < model.labels.size() && model.labels[t] == model.labels[start]) continue;
      if (const auto fill = pick(model.labels[start]); !fill.empty())
        svg.rect(f.px(static_cast<double>(start)), f.top,
                 f.px(static_cast<double>(t)) - f.px(static_cast<double>(start)), f.height, fill,
                 opacity);
      start = t;
    }
  };
  const auto dir = begin_stage(c, "report");

  {
    Svg svg(700, 160);
    const Frame f{60, 30, 600, 60, 0.0, n, 0.0, 1.0};
    shade_runs(svg, f, [&](std::size_t id) { return color_of(id); }, 1.0);
    f.axes(svg, "market state per window", "window index", "");
    for (std::size_t i = 0; i < ids.size(); ++i) {
      svg.rect(60 + 70.0 * static_cast<double>(i), 132, 10, 10, palette(i));
      svg.text(74 + 70.0 * static_cast<double>(i), 141, "state " + std::to_string(ids[i]), 10);
    }
    svg.save((dir / "timeline.svg").string());
  }
  {
    std::vector<std::vector<double>> series;
    std::vector<double> all;
    for (std::size_t r : refs) {
      series.push_back(center_distance_series(file.points, model, r).values);
      all.insert(all.end(), series.back().begin(), series.back().end());
    }
    const auto [y0, y1] = padded_range(all);
    Svg svg(700, 300);
    const Frame f{60, 30, 600, 220, 0.0, n, y0, y1};
    f.axes(svg, "distance to cluster centers", "window index", "distance");
    std::vector<double> ts(file.points.size());
    for (std::size_t t = 0; t < ts.size(); ++t) ts[t] = static_cast<double>(t);
    for (std::size_t i = 0; i < refs.size(); ++i) {
      svg.polyline(f.map(ts, series[i]), color_of(refs[i]));
      svg.text(665, 40 + 14.0 * static_cast<double>(i), "to " + std::to_string(refs[i]), 10);
    }
    svg.save((dir / "distances.svg").string());
  }
  {
    std::vector<std::size_t> panels;
    for (std::size_t r : refs)
      if (fs::exists(c.out / "potentials" / ("ref_" + std::to_string(r)) / "common.csv"))
        panels.push_back(r);
    Svg svg(600, 40 + 240.0 * static_cast<double>(std::max<std::size_t>(panels.size(), 1)));
    for (std::size_t i = 0; i < panels.size(); ++i) {
      const auto [grid, phi] =
          read_potential(c.out / "potentials" / ("ref_" + std::to_string(panels[i])) / "common.csv");
      const auto centers = center_distances(model, panels[i]);
      const auto f = potential_frame(grid, phi, centers, 60, 40 + 240.0 * static_cast<double>(i));
      potential_panel(svg, f, grid, phi, centers, "seen from state " + std::to_string(panels[i]));
    }
    svg.save((dir / "potentials.svg").string());
  }
  {
    std::size_t target = 0;
    for (const auto& line : csv::read_lines(summary_path.string()))
      if (line.starts_with("target = ")) target = static_cast<std::size_t>(csv::parse_int(line.substr(9)).value_or(0));
    std::vector<double> ts, delta;
    const auto lines = csv::read_lines(delta_path.string());
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const auto fields = csv::split(lines[i]);
      const auto v = fields.size() == 3 ? csv::parse_double(fields[1]) : std::nullopt;
      if (!v) throw ParseError("'" + delta_path.string() + "': malformed row", i + 1);
      ts.push_back(static_cast<double>(i - 1));
      delta.push_back(*v);
    }
    const auto [y0, y1] = padded_range(delta);
    Svg svg(700, 300);
    const Frame f{60, 30, 600, 220, 0.0, n, std::min(y0, 0.0), std::max(y1, 0.0)};
    shade_runs(svg, f, [&](std::size_t id) { return id == target ? "#9ecae1" : std::string(); }, 0.5);
    f.axes(svg, "distance to fixed point minus distance to interval mean", "window index",
           "delta");
    svg.line(f.left, f.py(0.0), f.left + f.width, f.py(0.0), "#7f7f7f", "", true);
    svg.polyline(f.map(ts, delta), "black");
    svg.text(665, 40, "shaded: state " + std::to_string(target), 10, "end");
    svg.save((dir / "delta.svg").string());
  }
  record(c, "report", {states, model_path, delta_path}, dir);
}

void run_all(const Config& c) {
  for (const auto& name : stage_names()) {
    if (name == "synth" && c.scenario.empty()) continue;
    run_stage(name, c);
  }
}

void run_stage(const std::string& name, const Config& c) {
  if (name == "synth") return run_synth(c);
  if (name == "ingest") return run_ingest(c);
  if (name == "correlate") return run_correlate(c);
  if (name == "cluster") return run_cluster(c);
  if (name == "potentials") return run_potentials(c);
  if (name == "merge") return run_merge(c);
  if (name == "fixedpoint") return run_fixedpoint(c);
  if (name == "report") return run_report(c);
  if (name == "all") return run_all(c);
  throw ConfigError("unknown stage '" + name + "'");
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const StageOrderError*>(&e)) return 3;
  if (dynamic_cast<const EstimationFailure*>(&e)) return 4;
  return 2;
}

}  // namespace qss::pipeline
