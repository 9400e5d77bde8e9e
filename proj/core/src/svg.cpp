#include "bracket/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bracket/errors.hpp"

namespace bracket::svg {

namespace {

constexpr double kWidth = 760.0;
constexpr double kHeight = 480.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 24.0;
constexpr double kMarginTop = 46.0;
constexpr double kMarginBottom = 56.0;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::string escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (const char c : s) {
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

/// Tick positions at a "nice" step (1, 2, or 5 times a power of ten).
std::vector<double> nice_ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw_step = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw_step)));
  double step = mag;
  for (const double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw_step) {
      step = m * mag;
      break;
    }
  }
  std::vector<double> ticks;
  const double first = std::ceil(lo / step) * step;
  for (double t = first; t <= hi + 0.5 * step; t += step) {
    // snap near-zero ticks produced by rounding
    ticks.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
  }
  return ticks;
}

}  // namespace

std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label,
                              const std::vector<Series>& series) {
  double x_lo = 0.0, x_hi = 1.0, y_lo = 0.0, y_hi = 1.0;
  bool any = false;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      const double ylow = s.band_lo.size() == s.xs.size() ? s.band_lo[i] : s.ys[i];
      const double yhigh = s.band_hi.size() == s.xs.size() ? s.band_hi[i] : s.ys[i];
      if (!any) {
        x_lo = x_hi = s.xs[i];
        y_lo = ylow;
        y_hi = yhigh;
        any = true;
      } else {
        x_lo = std::min(x_lo, s.xs[i]);
        x_hi = std::max(x_hi, s.xs[i]);
        y_lo = std::min(y_lo, ylow);
        y_hi = std::max(y_hi, yhigh);
      }
    }
  }
  if (!any) throw PreconditionError("cannot render a chart with no data points");
  if (x_hi == x_lo) {
    x_lo -= 0.5;
    x_hi += 0.5;
  }
  if (y_hi == y_lo) {
    y_lo -= 0.5;
    y_hi += 0.5;
  }
  const double y_pad = 0.05 * (y_hi - y_lo);
  y_lo -= y_pad;
  y_hi += y_pad;

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  auto px = [&](double x) { return kMarginLeft + (x - x_lo) / (x_hi - x_lo) * plot_w; };
  auto py = [&](double y) { return kMarginTop + (y_hi - y) / (y_hi - y_lo) * plot_h; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
     << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
     << "font-family=\"sans-serif\" font-size=\"16\">" << escape(title) << "</text>\n";

  // gridlines and ticks
  for (const double t : nice_ticks(x_lo, x_hi)) {
    const double x = px(t);
    os << "<line x1=\"" << x << "\" y1=\"" << kMarginTop << "\" x2=\"" << x << "\" y2=\""
       << kMarginTop + plot_h << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << x << "\" y=\"" << kMarginTop + plot_h + 18
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(t)
       << "</text>\n";
  }
  for (const double t : nice_ticks(y_lo, y_hi)) {
    const double y = py(t);
    os << "<line x1=\"" << kMarginLeft << "\" y1=\"" << y << "\" x2=\""
       << kMarginLeft + plot_w << "\" y2=\"" << y << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << kMarginLeft - 6 << "\" y=\"" << y + 4
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(t)
       << "</text>\n";
  }

  // axes
  os << "<rect x=\"" << kMarginLeft << "\" y=\"" << kMarginTop << "\" width=\"" << plot_w
     << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#333333\"/>\n";
  os << "<text x=\"" << kMarginLeft + plot_w / 2 << "\" y=\"" << kHeight - 14
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
     << escape(x_label) << "</text>\n";
  os << "<text x=\"18\" y=\"" << kMarginTop + plot_h / 2
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
     << "transform=\"rotate(-90 18 " << kMarginTop + plot_h / 2 << ")\">" << escape(y_label)
     << "</text>\n";

  auto emit_path_points = [&](std::ostringstream& path, double x, double y, bool first,
                              bool step, double prev_y) {
    if (first) {
      path << "M" << px(x) << " " << py(y);
    } else if (step) {
      path << " L" << px(x) << " " << py(prev_y) << " L" << px(x) << " " << py(y);
    } else {
      path << " L" << px(x) << " " << py(y);
    }
  };

  for (const auto& s : series) {
    if (s.xs.empty()) continue;
    if (s.band_lo.size() == s.xs.size() && s.band_hi.size() == s.xs.size()) {
      std::ostringstream band;
      for (std::size_t i = 0; i < s.xs.size(); ++i) {
        band << (i == 0 ? "M" : " L") << px(s.xs[i]) << " " << py(s.band_hi[i]);
      }
      for (std::size_t i = s.xs.size(); i-- > 0;) {
        band << " L" << px(s.xs[i]) << " " << py(s.band_lo[i]);
      }
      band << " Z";
      os << "<path d=\"" << band.str() << "\" fill=\"" << s.color
         << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    }
    std::ostringstream line;
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      emit_path_points(line, s.xs[i], s.ys[i], i == 0, s.step, i > 0 ? s.ys[i - 1] : 0.0);
    }
    os << "<path d=\"" << line.str() << "\" fill=\"none\" stroke=\"" << s.color
       << "\" stroke-width=\"1.8\"/>\n";
  }

  // legend
  double ly = kMarginTop + 14;
  for (const auto& s : series) {
    const double lx = kMarginLeft + plot_w - 150;
    os << "<line x1=\"" << lx << "\" y1=\"" << ly - 4 << "\" x2=\"" << lx + 26 << "\" y2=\""
       << ly - 4 << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << lx + 32 << "\" y=\"" << ly
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape(s.name) << "</text>\n";
    ly += 18;
  }

  os << "</svg>\n";
  return os.str();
}

void write_file(const std::string& content, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open file for writing: " + path);
  out << content;
  if (!out) throw InputError("failed while writing: " + path);
}

}  // namespace bracket::svg
