#include "homtom/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "homtom/errors.hpp"

namespace homtom {

namespace {

constexpr const char* kBarFill = "#4878a8";
constexpr const char* kTheoryStroke = "#c44e52";
constexpr const char* kGridStroke = "#d8d8d8";

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (const char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

// Round a raw tick spacing to the nearest 1/2/5 decade multiple.
double nice_step(double range, int target_ticks) {
  if (!(range > 0.0)) return 1.0;
  const double raw = range / target_ticks;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double norm = raw / mag;
  double step = 10.0;
  if (norm < 1.5) step = 1.0;
  else if (norm < 3.5) step = 2.0;
  else if (norm < 7.5) step = 5.0;
  return step * mag;
}

struct Frame {
  double x0, y0, plot_w, plot_h;  // plot rectangle in svg coordinates
  double ymin, ymax;

  double ty(double v) const {
    return y0 + plot_h * (ymax - v) / (ymax - ymin);
  }
};

void render_into(std::ostringstream& out, const BarChartSpec& spec,
                 double ox, double oy) {
  const std::size_t n = spec.values.size();
  if (n == 0) throw DomainError("bar chart needs at least one value");
  if (!spec.errors.empty() && spec.errors.size() != n) {
    throw DomainError("bar chart errors must match values in length");
  }
  if (!spec.overlay.empty() && spec.overlay.size() != n) {
    throw DomainError("bar chart overlay must match values in length");
  }
  if (!spec.categories.empty() && spec.categories.size() != n) {
    throw DomainError("bar chart tick labels must match values in length");
  }

  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = spec.errors.empty() ? 0.0 : spec.errors[i];
    lo = std::min(lo, spec.values[i] - e);
    hi = std::max(hi, spec.values[i] + e);
    if (!spec.overlay.empty()) {
      lo = std::min(lo, spec.overlay[i]);
      hi = std::max(hi, spec.overlay[i]);
    }
  }
  if (hi <= lo) hi = lo + 1.0;
  const double pad = 0.08 * (hi - lo);
  if (hi > 0.0) hi += pad;
  if (lo < 0.0) lo -= pad;

  Frame f;
  f.x0 = ox + 62.0;
  f.y0 = oy + 28.0;
  f.plot_w = spec.width - 62.0 - 14.0;
  f.plot_h = spec.height - 28.0 - 44.0;
  f.ymin = lo;
  f.ymax = hi;

  out << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect x=\"" << num(f.x0) << "\" y=\"" << num(f.y0) << "\" width=\""
      << num(f.plot_w) << "\" height=\"" << num(f.plot_h)
      << "\" fill=\"white\" stroke=\"#404040\" stroke-width=\"1\"/>\n";

  // horizontal grid and y tick labels
  const double step = nice_step(hi - lo, 5);
  for (double tick = std::ceil(lo / step) * step; tick <= hi + 1e-12 * step;
       tick += step) {
    const double y = f.ty(tick);
    out << "<line x1=\"" << num(f.x0) << "\" y1=\"" << num(y) << "\" x2=\""
        << num(f.x0 + f.plot_w) << "\" y2=\"" << num(y) << "\" stroke=\""
        << kGridStroke << "\" stroke-width=\"0.7\"/>\n";
    out << "<text x=\"" << num(f.x0 - 6.0) << "\" y=\"" << num(y + 3.5)
        << "\" text-anchor=\"end\">" << num(std::abs(tick) < 1e-12 * step ? 0.0 : tick)
        << "</text>\n";
  }

  const double slot = f.plot_w / static_cast<double>(n);
  const double bar_w = 0.64 * slot;
  const double zero_y = f.ty(std::clamp(0.0, lo, hi));

  for (std::size_t i = 0; i < n; ++i) {
    const double cx = f.x0 + slot * (static_cast<double>(i) + 0.5);
    const double vy = f.ty(spec.values[i]);
    const double top = std::min(vy, zero_y);
    const double height = std::abs(vy - zero_y);
    out << "<rect x=\"" << num(cx - bar_w / 2.0) << "\" y=\"" << num(top)
        << "\" width=\"" << num(bar_w) << "\" height=\"" << num(height)
        << "\" fill=\"" << kBarFill << "\"/>\n";
    if (!spec.errors.empty() && spec.errors[i] > 0.0) {
      const double y1 = f.ty(spec.values[i] - spec.errors[i]);
      const double y2 = f.ty(spec.values[i] + spec.errors[i]);
      const double cap = 0.35 * bar_w;
      out << "<path d=\"M" << num(cx) << ' ' << num(y1) << " L" << num(cx)
          << ' ' << num(y2) << " M" << num(cx - cap / 2.0) << ' ' << num(y1)
          << " L" << num(cx + cap / 2.0) << ' ' << num(y1) << " M"
          << num(cx - cap / 2.0) << ' ' << num(y2) << " L"
          << num(cx + cap / 2.0) << ' ' << num(y2)
          << "\" stroke=\"#202020\" stroke-width=\"1.2\" fill=\"none\"/>\n";
    }
    if (!spec.categories.empty()) {
      out << "<text x=\"" << num(cx) << "\" y=\""
          << num(f.y0 + f.plot_h + 14.0) << "\" text-anchor=\"middle\">"
          << escape(spec.categories[i]) << "</text>\n";
    }
  }

  if (!spec.overlay.empty()) {
    out << "<polyline fill=\"none\" stroke=\"" << kTheoryStroke
        << "\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\" points=\"";
    for (std::size_t i = 0; i < n; ++i) {
      const double cx = f.x0 + slot * (static_cast<double>(i) + 0.5);
      out << num(cx) << ',' << num(f.ty(spec.overlay[i]));
      if (i + 1 < n) out << ' ';
    }
    out << "\"/>\n";
    for (std::size_t i = 0; i < n; ++i) {
      const double cx = f.x0 + slot * (static_cast<double>(i) + 0.5);
      out << "<circle cx=\"" << num(cx) << "\" cy=\""
          << num(f.ty(spec.overlay[i])) << "\" r=\"2.4\" fill=\"white\" stroke=\""
          << kTheoryStroke << "\" stroke-width=\"1.2\"/>\n";
    }
    // small legend swatch in the top-right corner of the plot
    const double lx = f.x0 + f.plot_w - 78.0;
    const double ly = f.y0 + 12.0;
    out << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly) << "\" x2=\""
        << num(lx + 22.0) << "\" y2=\"" << num(ly) << "\" stroke=\""
        << kTheoryStroke << "\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>\n";
    out << "<text x=\"" << num(lx + 27.0) << "\" y=\"" << num(ly + 3.5)
        << "\">theory</text>\n";
  }

  if (!spec.title.empty()) {
    out << "<text x=\"" << num(ox + spec.width / 2.0) << "\" y=\""
        << num(oy + 17.0)
        << "\" text-anchor=\"middle\" font-size=\"13\" font-weight=\"bold\">"
        << escape(spec.title) << "</text>\n";
  }
  if (!spec.x_label.empty()) {
    out << "<text x=\"" << num(f.x0 + f.plot_w / 2.0) << "\" y=\""
        << num(f.y0 + f.plot_h + 32.0) << "\" text-anchor=\"middle\">"
        << escape(spec.x_label) << "</text>\n";
  }
  if (!spec.y_label.empty()) {
    const double lx = ox + 14.0;
    const double ly = f.y0 + f.plot_h / 2.0;
    out << "<text x=\"" << num(lx) << "\" y=\"" << num(ly)
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 " << num(lx)
        << ' ' << num(ly) << ")\">" << escape(spec.y_label) << "</text>\n";
  }
  out << "</g>\n";
}

}  // namespace

std::string render_bar_chart(const BarChartSpec& spec) {
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width
      << "\" height=\"" << spec.height << "\" viewBox=\"0 0 " << spec.width
      << ' ' << spec.height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  render_into(out, spec, 0.0, 0.0);
  out << "</svg>\n";
  return out.str();
}

std::string render_panel_grid(const std::vector<BarChartSpec>& panels,
                              int columns) {
  if (panels.empty()) throw DomainError("panel grid needs at least one chart");
  if (columns < 1) throw DomainError("panel grid needs at least one column");
  const int cols = std::min<int>(columns, static_cast<int>(panels.size()));
  const int rows =
      (static_cast<int>(panels.size()) + cols - 1) / cols;
  int panel_w = 0, panel_h = 0;
  for (const BarChartSpec& p : panels) {
    panel_w = std::max(panel_w, p.width);
    panel_h = std::max(panel_h, p.height);
  }
  const int total_w = cols * panel_w;
  const int total_h = rows * panel_h;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << total_w
      << "\" height=\"" << total_h << "\" viewBox=\"0 0 " << total_w << ' '
      << total_h << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < panels.size(); ++i) {
    const int r = static_cast<int>(i) / cols;
    const int c = static_cast<int>(i) % cols;
    render_into(out, panels[i], c * panel_w, r * panel_h);
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace homtom
