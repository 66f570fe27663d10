#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "qss/correlation.hpp"
#include "qss/ingest.hpp"

namespace fixture {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = fs::temp_directory_path() /
            ("qss_test_" + tag + "_" + std::to_string(std::random_device{}()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Normalized-looking panel of independent standard normal columns.
inline qss::ReturnPanel normal_panel(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  qss::ReturnPanel p;
  p.values = qss::Matrix(rows, cols);
  for (std::size_t t = 0; t < rows; ++t) {
    p.dates.push_back("d" + std::to_string(t));
    for (std::size_t k = 0; k < cols; ++k) p.values(t, k) = normal(rng);
  }
  for (std::size_t k = 0; k < cols; ++k) p.tickers.push_back("T" + std::to_string(k));
  p.normalization_window = 13;
  return p;
}

inline qss::SectorMap round_robin_sectors(const std::vector<std::string>& tickers,
                                          std::size_t sectors) {
  qss::SectorMap m;
  for (std::size_t s = 0; s < sectors; ++s) m.sectors.push_back("S" + std::to_string(s));
  for (std::size_t k = 0; k < tickers.size(); ++k)
    m.assignments[tickers[k]] = m.sectors[k % sectors];
  return m;
}

inline qss::StatePoint point(std::vector<double> coords) { return {std::move(coords), {}}; }

}  // namespace fixture
