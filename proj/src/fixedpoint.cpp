#include "qss/fixedpoint.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "qss/csv.hpp"
#include "qss/error.hpp"

namespace qss {
namespace {

// Iterates closer than this to a data point are treated as sitting on it.
constexpr double coincidence = 1e-12;

double norm(std::span<const double> v) {
  double ss = 0.0;
  for (double x : v) ss += x * x;
  return std::sqrt(ss);
}

std::vector<double> project(std::span<const double> y, std::span<const double> center,
                            double radius) {
  std::vector<double> dir(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) dir[i] = y[i] - center[i];
  const double len = norm(dir);
  for (std::size_t i = 0; i < y.size(); ++i) dir[i] = center[i] + radius * dir[i] / len;
  return dir;
}

void check_problem(const FixedPointProblem& p) {
  if (p.points.empty()) throw InsufficientDataError("fixed-point problem has no points");
  if (!(p.radius > 0.0)) throw ConfigError("sphere radius must be positive");
  for (const auto& pt : p.points)
    if (pt.dimension() != p.reference.size())
      throw DimensionError("points and reference differ in dimension");
}

struct WeiszfeldTerms {
  std::vector<double> target;  // weighted mean of non-coincident points
  double weight = 0.0;
  std::size_t coincident = 0;
  std::size_t coincident_index = 0;
};

WeiszfeldTerms weiszfeld_terms(std::span<const StatePoint> points, std::span<const double> x) {
  WeiszfeldTerms w;
  w.target.assign(x.size(), 0.0);
  for (std::size_t t = 0; t < points.size(); ++t) {
    const double d = distance(points[t].coords, x);
    if (d < coincidence) {
      if (w.coincident++ == 0) w.coincident_index = t;
      continue;
    }
    const double inv = 1.0 / d;
    w.weight += inv;
    for (std::size_t i = 0; i < x.size(); ++i) w.target[i] += inv * points[t].coords[i];
  }
  if (w.weight > 0.0)
    for (auto& v : w.target) v /= w.weight;
  return w;
}

// Gradient of the distance sum over points not coincident with x.
std::vector<double> gradient(std::span<const StatePoint> points, std::span<const double> x) {
  std::vector<double> g(x.size(), 0.0);
  for (const auto& p : points) {
    const double d = distance(p.coords, x);
    if (d < coincidence) continue;
    for (std::size_t i = 0; i < x.size(); ++i) g[i] += (x[i] - p.coords[i]) / d;
  }
  return g;
}

std::vector<double> tangential(std::span<const double> g, std::span<const double> x,
                               std::span<const double> center) {
  std::vector<double> n(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) n[i] = x[i] - center[i];
  const double len = norm(n);
  double dot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    n[i] /= len;
    dot += g[i] * n[i];
  }
  std::vector<double> tan(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) tan[i] = g[i] - dot * n[i];
  return tan;
}

}  // namespace

double distance_sum(std::span<const StatePoint> points, std::span<const double> x) {
  double sum = 0.0;
  for (const auto& p : points) sum += distance(p.coords, x);
  return sum;
}

GeometricMedianResult geometric_median(std::span<const StatePoint> points, double tol,
                                       std::size_t max_iterations) {
  if (points.empty()) throw InsufficientDataError("geometric median of no points");
  const std::size_t d = points.front().dimension();
  GeometricMedianResult r;
  r.point.assign(d, 0.0);
  for (const auto& p : points) {
    if (p.dimension() != d) throw DimensionError("points of mixed dimension");
    for (std::size_t i = 0; i < d; ++i) r.point[i] += p.coords[i];
  }
  for (auto& v : r.point) v /= static_cast<double>(points.size());

  for (r.iterations = 1; r.iterations <= max_iterations; ++r.iterations) {
    const auto w = weiszfeld_terms(points, r.point);
    if (w.weight == 0.0) {
      r.point = points[w.coincident_index].coords;
      r.converged = true;
      break;
    }
    std::vector<double> next = w.target;
    if (w.coincident > 0) {
      // Vardi-Zhang: stay on the data point when it is optimal, otherwise
      // move toward the Weiszfeld target by the shortfall.
      std::vector<double> pull(d);
      for (std::size_t i = 0; i < d; ++i) pull[i] = w.weight * (w.target[i] - r.point[i]);
      const double strength = norm(pull);
      const double k = static_cast<double>(w.coincident);
      if (strength <= k) {
        r.point = points[w.coincident_index].coords;
        r.converged = true;
        break;
      }
      const double gamma = k / strength;
      for (std::size_t i = 0; i < d; ++i) next[i] = (1.0 - gamma) * w.target[i] + gamma * r.point[i];
    }
    const double step = distance(next, r.point);
    r.point = std::move(next);
    if (step < tol * std::max(1.0, norm(r.point))) {
      r.converged = true;
      break;
    }
  }
  r.iterations = std::min(r.iterations, max_iterations);
  r.objective = distance_sum(points, r.point);
  return r;
}

FixedPointResult projected_weiszfeld(const FixedPointProblem& problem,
                                     std::span<const double> start,
                                     const SolverOptions& options) {
  check_problem(problem);
  const auto& mu = problem.reference;
  const std::size_t d = mu.size();
  FixedPointResult r;
  r.point = project(start, mu, problem.radius);
  double f = distance_sum(problem.points, r.point);
  r.objective_trace.push_back(f);

  for (r.iterations = 1; r.iterations <= options.max_iterations; ++r.iterations) {
    const auto w = weiszfeld_terms(problem.points, r.point);
    std::vector<double> y = w.target;
    if (w.coincident > 0) {
      // On a data point that lies on the sphere: it is a constrained minimizer
      // when the tangential pull of the other points cannot overcome it.
      const auto g = gradient(problem.points, r.point);
      const double pull = norm(tangential(g, r.point, mu));
      const double k = static_cast<double>(w.coincident);
      if (w.weight == 0.0 || pull <= k) {
        r.point = problem.points[w.coincident_index].coords;
        f = distance_sum(problem.points, r.point);
        r.converged = true;
        break;
      }
      std::vector<double> lift(d);
      for (std::size_t i = 0; i < d; ++i) lift[i] = w.weight * (w.target[i] - r.point[i]);
      const double gamma = std::min(1.0, k / norm(lift));
      for (std::size_t i = 0; i < d; ++i) y[i] = (1.0 - gamma) * w.target[i] + gamma * r.point[i];
    }
    if (distance(y, mu) == 0.0) {
      // Weiszfeld target at the sphere center: every sphere point is equally
      // good for the majorizer, so the current point is kept.
      r.converged = true;
      break;
    }
    auto next = project(y, mu, problem.radius);
    const double f_next = distance_sum(problem.points, next);
    if (f_next > f) {
      // Only rounding (or the data-point branch) can raise the objective.
      r.converged = true;
      break;
    }
    const double step = distance(next, r.point);
    r.point = std::move(next);
    f = f_next;
    r.objective_trace.push_back(f);
    if (step < options.tol * std::max(1.0, norm(r.point))) {
      r.converged = true;
      break;
    }
  }
  r.iterations = std::min(r.iterations, options.max_iterations);
  r.objective = f;
  r.constraint_residual = std::abs(distance(mu, r.point) - problem.radius);
  const auto g = gradient(problem.points, r.point);
  const double gn = norm(g);
  r.stationarity_residual = gn > 0.0 ? norm(tangential(g, r.point, mu)) / gn : 0.0;
  return r;
}

FixedPointResult constrained_fixed_point(const FixedPointProblem& problem,
                                         const SolverOptions& options) {
  check_problem(problem);
  const auto& mu = problem.reference;
  const std::size_t d = mu.size();

  std::vector<double> mean(d, 0.0);
  std::size_t far = 0;
  double far_d = -1.0;
  for (std::size_t t = 0; t < problem.points.size(); ++t) {
    const auto& c = problem.points[t].coords;
    for (std::size_t i = 0; i < d; ++i) mean[i] += c[i];
    const double dt = distance(c, mu);
    if (dt > far_d) {
      far_d = dt;
      far = t;
    }
  }
  if (far_d < coincidence)
    throw EstimationError("every point coincides with the reference; the fixed point is undefined");
  for (auto& v : mean) v /= static_cast<double>(problem.points.size());

  // A mean on the reference has no direction; aim at the farthest point instead.
  const auto& start = distance(mean, mu) < coincidence ? problem.points[far].coords : mean;
  auto best = projected_weiszfeld(problem, start, options);

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<FixedPointResult> alternates;
  for (std::size_t s = 0; s < options.multistarts; ++s) {
    std::vector<double> dir(d);
    for (auto& v : dir) v = normal(rng);
    for (std::size_t i = 0; i < d; ++i) dir[i] += mu[i];
    alternates.push_back(projected_weiszfeld(problem, dir, options));
  }
  double spread = 0.0;
  for (const auto& a : alternates) spread = std::max(spread, distance(a.point, best.point));
  std::size_t winner = alternates.size();
  for (std::size_t s = 0; s < alternates.size(); ++s)
    if (alternates[s].objective < (winner == alternates.size() ? best : alternates[winner]).objective)
      winner = s;
  if (winner != alternates.size()) {
    auto trace = std::move(best.objective_trace);
    best = alternates[winner];
    // Keep the trace of the run from the interval mean; the adopted point only
    // lowers its final objective further.
    trace.push_back(best.objective);
    best.objective_trace = std::move(trace);
    spread = 0.0;
    for (const auto& a : alternates) spread = std::max(spread, distance(a.point, best.point));
  }
  best.multistart_spread = spread;
  best.unique = spread <= options.uniqueness_tol * problem.radius;
  return best;
}

ConsistencyReport reference_consistency(std::span<const StatePoint> points,
                                        std::span<const Reference> references, double tol_match,
                                        const SolverOptions& options) {
  if (references.size() < 2) throw ConfigError("consistency check needs at least 2 references");
  ConsistencyReport report;
  report.tol_match = tol_match;
  for (const auto& ref : references) {
    ReferenceSolution sol{ref.center, ref.radius, std::nullopt, {}};
    try {
      sol.result = constrained_fixed_point({points, ref.center, ref.radius}, options);
    } catch (const Error& e) {
      sol.failure = e.what();
    }
    report.solutions.push_back(std::move(sol));
  }
  const std::size_t n = references.size();
  report.pairwise = Matrix(n, n, std::numeric_limits<double>::quiet_NaN());
  report.consistent = true;
  for (std::size_t a = 0; a < n; ++a) {
    const auto& ra = report.solutions[a].result;
    if (!ra) {
      report.consistent = false;
      continue;
    }
    report.pairwise(a, a) = 0.0;
    for (std::size_t b = a + 1; b < n; ++b) {
      const auto& rb = report.solutions[b].result;
      if (!rb) continue;
      const double dab = distance(ra->point, rb->point);
      report.pairwise(a, b) = dab;
      report.pairwise(b, a) = dab;
      if (!(dab < tol_match)) report.consistent = false;
    }
  }
  return report;
}

DeltaSeries delta_series(std::span<const StatePoint> points, std::span<const double> fixed_point,
                         std::span<const double> mean) {
  DeltaSeries s;
  s.values.reserve(points.size());
  for (const auto& p : points)
    s.values.push_back(distance(p.coords, fixed_point) - distance(p.coords, mean));
  return s;
}

void write_fixed_point(const FixedPointResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  for (std::size_t i = 0; i < result.point.size(); ++i) out << "c_" << i << ',';
  out << "objective,residual,iterations,converged,unique\n";
  for (double v : result.point) out << csv::format(v) << ',';
  out << csv::format(result.objective) << ',' << csv::format(result.constraint_residual) << ','
      << result.iterations << ',' << result.converged << ',' << result.unique << '\n';
}

}  // namespace qss
