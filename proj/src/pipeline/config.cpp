#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "qss/csv.hpp"
#include "qss/pipeline.hpp"

namespace qss::pipeline {
namespace {

namespace fs = std::filesystem;

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::size_t to_count(const std::string& key, const std::string& v, bool allow_zero = false) {
  const auto n = csv::parse_int(v);
  if (!n || *n < (allow_zero ? 0 : 1))
    throw ConfigError("'" + key + "' must be a " + (allow_zero ? "non-negative" : "positive") +
                      " integer, got '" + v + "'");
  return static_cast<std::size_t>(*n);
}

double to_positive(const std::string& key, const std::string& v) {
  const auto x = csv::parse_double(v);
  if (!x || !(*x > 0.0)) throw ConfigError("'" + key + "' must be a positive number, got '" + v + "'");
  return *x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("'" + key + "' must be true or false, got '" + v + "'");
}

std::optional<Span> to_span(const std::string& key, const std::string& v) {
  if (v == "all") return std::nullopt;
  const auto colon = v.find(':');
  const auto a = colon == std::string::npos ? std::nullopt : csv::parse_int(v.substr(0, colon));
  const auto b = colon == std::string::npos ? std::nullopt : csv::parse_int(v.substr(colon + 1));
  if (!a || !b || *a < 0 || *b < *a)
    throw ConfigError("'" + key + "' must be 'all' or 'start:end' (inclusive), got '" + v + "'");
  return Span{static_cast<std::size_t>(*a), static_cast<std::size_t>(*b)};
}

IdSelection to_ids(const std::string& key, const std::string& v) {
  if (v == "all" || v == "auto") return std::nullopt;
  std::vector<std::size_t> ids;
  for (const auto& item : csv::split(v)) ids.push_back(to_count(key, std::string(csv::trim(item)), true));
  if (ids.empty()) throw ConfigError("'" + key + "' lists no cluster ids");
  return ids;
}

std::string ids_text(const IdSelection& ids, const char* none) {
  if (!ids) return none;
  std::string s;
  for (std::size_t i = 0; i < ids->size(); ++i) s += (i ? "," : "") + std::to_string((*ids)[i]);
  return s;
}

std::string span_text(const std::optional<Span>& s) {
  return s ? std::to_string(s->start) + ":" + std::to_string(s->end) : "all";
}

// Paths under the output directory are written relative to it so that the
// same configuration run into two directories hashes identically.
std::string path_text(const fs::path& p, const fs::path& out) {
  if (p.empty()) return "";
  const auto rel = p.lexically_relative(out);
  if (!rel.empty() && *rel.begin() != "..") return "$out/" + rel.generic_string();
  return p.generic_string();
}

}  // namespace

Config load_config(const fs::path& path) {
  const auto lines = csv::read_lines(path.string());
  const fs::path base = fs::absolute(path).parent_path();
  auto resolve = [&](const std::string& v) {
    fs::path p(v);
    return p.is_absolute() ? p : (base / p).lexically_normal();
  };

  Config c;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"out", [&](auto&, auto& v) { c.out = resolve(v); }},
      {"scenario", [&](auto&, auto& v) { c.scenario = resolve(v); }},
      {"prices", [&](auto&, auto& v) { c.prices = resolve(v); }},
      {"sectors", [&](auto&, auto& v) { c.sectors = resolve(v); }},
      {"seed", [&](auto& k, auto& v) { c.seed = to_count(k, v, true); }},
      {"returns.horizon", [&](auto& k, auto& v) { c.horizon = to_count(k, v); }},
      {"normalize.window", [&](auto& k, auto& v) { c.normalize_window = to_count(k, v); }},
      {"correlation.window", [&](auto& k, auto& v) { c.correlation_window = to_count(k, v); }},
      {"correlation.step", [&](auto& k, auto& v) { c.correlation_step = to_count(k, v); }},
      {"cluster.threshold", [&](auto& k, auto& v) { c.threshold = to_positive(k, v); }},
      {"potential.window", [&](auto& k, auto& v) { c.potential_window = to_count(k, v); }},
      {"potential.shift", [&](auto& k, auto& v) { c.potential_shift = to_count(k, v); }},
      {"potential.grid", [&](auto& k, auto& v) { c.estimation.grid_size = to_count(k, v); }},
      {"potential.bandwidth",
       [&](auto& k, auto& v) {
         if (v == "auto")
           c.estimation.bandwidth.reset();
         else
           c.estimation.bandwidth = to_positive(k, v);
       }},
      {"potential.tau",
       [&](auto& k, auto& v) {
         if (v == "tau1")
           c.estimation.tau = TauPolicy::tau1;
         else if (v == "extrapolate")
           c.estimation.tau = TauPolicy::extrapolate;
         else
           throw ConfigError("'" + k + "' must be tau1 or extrapolate, got '" + v + "'");
       }},
      {"potential.prominence", [&](auto& k, auto& v) { c.estimation.prominence = to_positive(k, v); }},
      {"potential.count_min", [&](auto& k, auto& v) { c.estimation.count_min = to_positive(k, v); }},
      {"potential.min_length", [&](auto& k, auto& v) { c.estimation.min_length = to_count(k, v); }},
      {"potential.references", [&](auto& k, auto& v) { c.potential_references = to_ids(k, v); }},
      {"potential.common", [&](auto& k, auto& v) { c.common_window = to_span(k, v); }},
      {"potential.svg", [&](auto& k, auto& v) { c.potential_svg = to_bool(k, v); }},
      {"merge.tol", [&](auto& k, auto& v) { c.merge_tol = to_positive(k, v); }},
      {"merge.apply", [&](auto& k, auto& v) { c.merge_apply = to_bool(k, v); }},
      {"fixedpoint.interval", [&](auto& k, auto& v) { c.interval = to_span(k, v); }},
      {"fixedpoint.target",
       [&](auto& k, auto& v) {
         if (v == "auto")
           c.target.reset();
         else
           c.target = to_count(k, v, true);
       }},
      {"fixedpoint.references", [&](auto& k, auto& v) { c.fixedpoint_references = to_ids(k, v); }},
      {"fixedpoint.minimum",
       [&](auto& k, auto& v) {
         if (v != "nearest" && v != "deepest")
           throw ConfigError("'" + k + "' must be nearest or deepest, got '" + v + "'");
         c.deepest_minimum = v == "deepest";
       }},
      {"fixedpoint.tol", [&](auto& k, auto& v) { c.fixedpoint_tol = to_positive(k, v); }},
      {"fixedpoint.max_iter", [&](auto& k, auto& v) { c.fixedpoint_max_iterations = to_count(k, v); }},
      {"fixedpoint.multistarts",
       [&](auto& k, auto& v) { c.fixedpoint_multistarts = to_count(k, v, true); }},
      {"fixedpoint.match_tol",
       [&](auto& k, auto& v) {
         if (v == "auto")
           c.match_tol.reset();
         else
           c.match_tol = to_positive(k, v);
       }},
      {"report.references", [&](auto& k, auto& v) { c.report_references = to_ids(k, v); }},
  };

  std::set<std::string> seen;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line = std::string_view(lines[i]);
    line = line.substr(0, line.find('#'));
    if (csv::trim(line).empty()) continue;
    const auto eq = line.find('=');
    const auto where = path.string() + ":" + std::to_string(i + 1) + ": ";
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key(csv::trim(line.substr(0, eq)));
    const std::string value(csv::trim(line.substr(eq + 1)));
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + "key '" + key + "' set twice");
    if (value.empty()) throw ConfigError(where + "key '" + key + "' has no value");
    try {
      it->second(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return c;
}

std::string canonical(const Config& c) {
  std::ostringstream s;
  const auto& e = c.estimation;
  s << "scenario = " << path_text(c.scenario, c.out) << '\n'
    << "prices = " << path_text(c.prices, c.out) << '\n'
    << "sectors = " << path_text(c.sectors, c.out) << '\n'
    << "seed = " << c.seed << '\n'
    << "returns.horizon = " << c.horizon << '\n'
    << "normalize.window = " << c.normalize_window << '\n'
    << "correlation.window = " << c.correlation_window << '\n'
    << "correlation.step = " << c.correlation_step << '\n'
    << "cluster.threshold = " << csv::format(c.threshold) << '\n'
    << "potential.window = " << c.potential_window << '\n'
    << "potential.shift = " << c.potential_shift << '\n'
    << "potential.grid = " << e.grid_size << '\n'
    << "potential.bandwidth = " << (e.bandwidth ? csv::format(*e.bandwidth) : "auto") << '\n'
    << "potential.tau = " << (e.tau == TauPolicy::tau1 ? "tau1" : "extrapolate") << '\n'
    << "potential.prominence = " << csv::format(e.prominence) << '\n'
    << "potential.count_min = " << csv::format(e.count_min) << '\n'
    << "potential.min_length = " << e.min_length << '\n'
    << "potential.references = " << ids_text(c.potential_references, "all") << '\n'
    << "potential.common = " << span_text(c.common_window) << '\n'
    << "potential.svg = " << (c.potential_svg ? "true" : "false") << '\n'
    << "merge.tol = " << csv::format(c.merge_tol) << '\n'
    << "merge.apply = " << (c.merge_apply ? "true" : "false") << '\n'
    << "fixedpoint.interval = " << span_text(c.interval) << '\n'
    << "fixedpoint.target = " << (c.target ? std::to_string(*c.target) : "auto") << '\n'
    << "fixedpoint.references = " << ids_text(c.fixedpoint_references, "auto") << '\n'
    << "fixedpoint.minimum = " << (c.deepest_minimum ? "deepest" : "nearest") << '\n'
    << "fixedpoint.tol = " << csv::format(c.fixedpoint_tol) << '\n'
    << "fixedpoint.max_iter = " << c.fixedpoint_max_iterations << '\n'
    << "fixedpoint.multistarts = " << c.fixedpoint_multistarts << '\n'
    << "fixedpoint.match_tol = " << (c.match_tol ? csv::format(*c.match_tol) : "auto") << '\n'
    << "report.references = " << ids_text(c.report_references, "all") << '\n';
  return s.str();
}

std::uint64_t config_hash(const Config& config) { return fnv1a(canonical(config)); }

std::uint64_t file_checksum(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0)
    h = fnv1a(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
  return h;
}

RunLock::RunLock(const fs::path& dir) {
  fs::create_directories(dir);
  const auto path = dir / ".lock";
  fd_ = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
  if (fd_ < 0) throw DataError("cannot open lock file '" + path.string() + "': " + std::strerror(errno));
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw DataError("another run holds the lock on '" + dir.string() + "'");
  }
}

RunLock::~RunLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

}  // namespace qss::pipeline
