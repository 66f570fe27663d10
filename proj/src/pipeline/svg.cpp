#include "svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "qss/error.hpp"

namespace qss::pipeline {
namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<')
      out += "&lt;";
    else if (c == '>')
      out += "&gt;";
    else if (c == '&')
      out += "&amp;";
    else
      out += c;
  }
  return out;
}

}  // namespace

Svg::Svg(double width, double height) : width_(width), height_(height) {}

void Svg::rect(double x, double y, double w, double h, const std::string& fill, double opacity) {
  body_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w)
        << "\" height=\"" << num(h) << "\" fill=\"" << fill << '"';
  if (opacity < 1.0) body_ << " fill-opacity=\"" << num(opacity) << '"';
  body_ << "/>\n";
}

void Svg::line(double x1, double y1, double x2, double y2, const std::string& stroke,
               const std::string& cls, bool dotted) {
  body_ << "<line";
  if (!cls.empty()) body_ << " class=\"" << cls << '"';
  body_ << " x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\""
        << num(y2) << "\" stroke=\"" << stroke << '"';
  if (dotted) body_ << " stroke-dasharray=\"2,3\"";
  body_ << "/>\n";
}

void Svg::polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke) {
  if (pts.empty()) return;
  body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1\" points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i)
    body_ << (i ? " " : "") << num(pts[i].first) << ',' << num(pts[i].second);
  body_ << "\"/>\n";
}

void Svg::text(double x, double y, const std::string& s, double size, const std::string& anchor) {
  body_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << num(size)
        << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">" << escape(s)
        << "</text>\n";
}

void Svg::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width_) << "\" height=\""
      << num(height_) << "\" viewBox=\"0 0 " << num(width_) << ' ' << num(height_) << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << body_.str() << "</svg>\n";
}

double Frame::px(double x) const { return left + (x - x0) / (x1 - x0) * width; }
double Frame::py(double y) const { return top + height - (y - y0) / (y1 - y0) * height; }

void Frame::axes(Svg& svg, const std::string& title, const std::string& xlabel,
                 const std::string& ylabel) const {
  svg.line(left, top + height, left + width, top + height, "black");
  svg.line(left, top, left, top + height, "black");
  for (int i = 0; i <= 4; ++i) {
    const double fx = x0 + (x1 - x0) * i / 4.0;
    const double fy = y0 + (y1 - y0) * i / 4.0;
    svg.line(px(fx), top + height, px(fx), top + height + 4, "black");
    svg.text(px(fx), top + height + 15, tick(fx), 10, "middle");
    svg.line(left - 4, py(fy), left, py(fy), "black");
    svg.text(left - 6, py(fy) + 3, tick(fy), 10, "end");
  }
  svg.text(left + width / 2, top - 6, title, 12, "middle");
  svg.text(left + width / 2, top + height + 30, xlabel, 11, "middle");
  svg.text(left - 40, top + height / 2, ylabel, 11, "middle");
}

std::vector<std::pair<double, double>> Frame::map(std::span<const double> xs,
                                                  std::span<const double> ys) const {
  std::vector<std::pair<double, double>> pts;
  const double lo = std::min(x0, x1), hi = std::max(x0, x1);
  for (std::size_t i = 0; i < xs.size() && i < ys.size(); ++i)
    if (std::isfinite(ys[i]) && xs[i] >= lo && xs[i] <= hi) pts.emplace_back(px(xs[i]), py(ys[i]));
  return pts;
}

const std::string& palette(std::size_t i) {
  static const std::array<std::string, 10> colors = {
      "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
      "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors[i % colors.size()];
}

std::pair<double, double> padded_range(std::span<const double> values) {
  double lo = INFINITY, hi = -INFINITY;
  for (double v : values)
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (!(lo <= hi)) return {0.0, 1.0};
  if (lo == hi) return {lo - 0.5, hi + 0.5};
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace qss::pipeline
