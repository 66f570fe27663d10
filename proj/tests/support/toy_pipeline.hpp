#pragma once

#include <string>

#include "fixtures.hpp"

namespace fixture {

// A three-regime, two-sector scenario small enough to run the whole
// pipeline in a fraction of a second.
inline const char* toy_scenario =
    "sectors = 2\n"
    "stocks_per_sector = 4\n"
    "volatility = 0.01\n"
    "regime.calm = 0.20 0.00 0.20\n"
    "regime.hot = 0.80 0.60 0.80\n"
    "regime.mid = 0.60 -0.10 0.60\n"
    "schedule = calm:700, hot:600, mid:600, calm:600\n";

inline const char* toy_config =
    "scenario = toy.txt\n"
    "out = out\n"
    "cluster.threshold = 0.25\n"
    "potential.window = 500\n"
    "potential.shift = 100\n";

// Writes toy.txt and toy.conf (plus `extra` config lines) into `dir` and
// returns the config path.
inline std::string write_toy(const TempDir& dir, const std::string& extra = "") {
  write_text(dir.file("toy.txt"), toy_scenario);
  write_text(dir.file("toy.conf"), std::string(toy_config) + extra);
  return dir.file("toy.conf");
}

}  // namespace fixture
