#include "scarfcn/render.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "scarfcn/error.hpp"

namespace scarfcn {

namespace {

constexpr double kCenter = 160.0;
constexpr std::array<double, 4> kRadii = {150.0, 110.0, 70.0, 30.0};  // basal outer .. apical inner
constexpr const char* kScarColor = "#c0392b";
constexpr const char* kClearColor = "#e6e6e6";

// Angular centre (degrees, counter-clockwise from 3 o'clock) of each wall.
constexpr std::array<double, 6> kWallCenter = {90.0, 150.0, 210.0, 270.0, 330.0, 30.0};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

struct Point {
  double x, y;
};

Point polar(double radius, double degrees) {
  const double a = degrees * std::numbers::pi / 180.0;
  return {kCenter + radius * std::cos(a), kCenter - radius * std::sin(a)};
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_bullseye_svg(const BullseyeValues& values) {
  for (int v : values.predicted) {
    if (v != 0 && v != 1) throw InputError("render: predicted classes must be 0 or 1");
  }
  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"320\" height=\"350\" "
      "viewBox=\"0 0 320 350\">\n";
  svg += "<rect width=\"320\" height=\"350\" fill=\"white\"/>\n";
  for (int s = 1; s <= kSegments; ++s) {
    const int ring = static_cast<int>(ring_of(s));
    const double mid = kWallCenter[static_cast<int>(wall_of(s))];
    const double a0 = mid - 30.0, a1 = mid + 30.0;
    const double outer = kRadii[ring], inner = kRadii[ring + 1];
    const Point p0 = polar(outer, a0), p1 = polar(outer, a1);
    const Point p2 = polar(inner, a1), p3 = polar(inner, a0);
    const bool scar = values.predicted[s - 1] == 1;
    double opacity = 1.0;
    if (scar && values.scores) {
      opacity = 1.0 / (1.0 + std::exp(-(*values.scores)[s - 1]));
    }
    std::string stroke = "#555555";
    std::string stroke_width = "1";
    if (values.labels && (*values.labels)[s - 1] == 1) {
      stroke = "#000000";
      stroke_width = "3";
    }
    svg += "<path id=\"seg" + std::to_string(s) + "\" class=\"" + (scar ? "scar" : "noscar") +
           "\" d=\"M " + num(p0.x) + " " + num(p0.y) + " A " + num(outer) + " " + num(outer) +
           " 0 0 0 " + num(p1.x) + " " + num(p1.y) + " L " + num(p2.x) + " " + num(p2.y) +
           " A " + num(inner) + " " + num(inner) + " 0 0 1 " + num(p3.x) + " " + num(p3.y) +
           " Z\" fill=\"" + (scar ? kScarColor : kClearColor) + "\" fill-opacity=\"" +
           num(opacity) + "\" stroke=\"" + stroke + "\" stroke-width=\"" + stroke_width +
           "\"><title>" + std::to_string(s) + " " + segment_name(s) + "</title></path>\n";
    const Point label = polar(0.5 * (outer + inner), mid);
    svg += "<text x=\"" + num(label.x) + "\" y=\"" + num(label.y + 4.0) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
           std::to_string(s) + "</text>\n";
  }
  svg += "<circle cx=\"" + num(kCenter) + "\" cy=\"" + num(kCenter) + "\" r=\"" + num(kRadii[3]) +
         "\" fill=\"white\" stroke=\"#555555\"/>\n";
  svg += "<text x=\"160\" y=\"335\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\">" +
         escape(values.title) + "</text>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace scarfcn
