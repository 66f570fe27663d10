#pragma once

#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace qss::pipeline {

// Minimal SVG emitter. Coordinates are printed with two decimals so output
// bytes depend only on the data.
class Svg {
 public:
  Svg(double width, double height);

  void rect(double x, double y, double w, double h, const std::string& fill, double opacity = 1.0);
  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            const std::string& cls = "", bool dotted = false);
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke);
  void text(double x, double y, const std::string& s, double size = 11,
            const std::string& anchor = "start");
  void save(const std::string& path) const;

 private:
  double width_;
  double height_;
  std::ostringstream body_;
};

// A plotting area mapping data coordinates onto a pixel rectangle.
struct Frame {
  double left, top, width, height;
  double x0, x1, y0, y1;

  double px(double x) const;
  double py(double y) const;
  void axes(Svg& svg, const std::string& title, const std::string& xlabel,
            const std::string& ylabel) const;
  // Clips a data series to the frame's x range before mapping.
  std::vector<std::pair<double, double>> map(std::span<const double> xs,
                                             std::span<const double> ys) const;
};

const std::string& palette(std::size_t i);

// Lower and upper bound of the finite values, padded by 5%; (0, 1) if none.
std::pair<double, double> padded_range(std::span<const double> values);

}  // namespace qss::pipeline
