#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qss/correlation.hpp"
#include "qss/error.hpp"
#include "qss/langevin.hpp"

namespace qss::pipeline {

inline constexpr const char* version = "qss 0.1.0";

/// A stage was asked to run before the stage that produces its inputs.
class StageOrderError : public Error {
 public:
  StageOrderError(const std::string& stage, const std::string& missing)
      : Error("stage '" + stage + "' needs '" + missing + "'; run that stage first"),
        stage_(stage) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Every window (or every reference solve) of an estimation stage failed.
class EstimationFailure : public Error {
 public:
  using Error::Error;
};

/// Cluster ids, or every live cluster when unset.
using IdSelection = std::optional<std::vector<std::size_t>>;

struct Config {
  std::filesystem::path out = "qss_out";
  std::filesystem::path scenario;  // synthetic source; empty for file input
  std::filesystem::path prices;    // default: <out>/synth/prices.csv when a scenario is set
  std::filesystem::path sectors;
  std::uint64_t seed = 1;

  std::size_t horizon = 1;
  std::size_t normalize_window = 13;
  std::size_t correlation_window = 42;
  std::size_t correlation_step = 1;

  double threshold = 1.564;

  std::size_t potential_window = 1000;
  std::size_t potential_shift = 21;
  EstimationConfig estimation;
  IdSelection potential_references;
  std::optional<Span> common_window;  // unset: the whole distance series
  bool potential_svg = true;

  double merge_tol = 0.05;
  bool merge_apply = true;

  std::optional<Span> interval;  // unset: every state point
  std::optional<std::size_t> target;
  IdSelection fixedpoint_references;
  bool deepest_minimum = false;  // radius from the deepest minimum instead of the nearest
  double fixedpoint_tol = 1e-10;
  std::size_t fixedpoint_max_iterations = 10000;
  std::size_t fixedpoint_multistarts = 5;
  std::optional<double> match_tol;  // unset: 10% of the smallest center separation

  IdSelection report_references;
};

/// Flat `key = value` text with `#` comments. Unknown keys, repeated keys and
/// malformed values are ConfigError. Relative paths resolve against the
/// config file's directory.
Config load_config(const std::filesystem::path& path);

/// Every effective setting, one `key = value` line each, in a fixed order.
std::string canonical(const Config& config);
std::uint64_t config_hash(const Config& config);

/// 64-bit FNV-1a of a file's bytes.
std::uint64_t file_checksum(const std::filesystem::path& path);

/// Exclusive advisory lock on `<dir>/.lock`, held for the object's lifetime.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  int fd_ = -1;
};

void run_synth(const Config& config);
void run_ingest(const Config& config);
void run_correlate(const Config& config);
void run_cluster(const Config& config);
void run_potentials(const Config& config);
void run_merge(const Config& config);
void run_fixedpoint(const Config& config);
void run_report(const Config& config);
/// synth (when a scenario is configured) through report.
void run_all(const Config& config);

/// Stage names in pipeline order.
const std::vector<std::string>& stage_names();
void run_stage(const std::string& name, const Config& config);

/// 0 success, 2 input error, 3 pipeline-order error, 4 estimation failure.
int exit_code(const std::exception& e);

}  // namespace qss::pipeline
