#include "oscar/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "oscar/io.hpp"

namespace oscar {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

void bounds_of(const Matrix& pts, double& lo, double& hi) {
  for (double v : pts.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
}

}  // namespace

std::string render_svg(const std::vector<SvgPanel>& panels, double lo, double hi,
                       std::size_t panel_px) {
  const double pad = 18.0;
  const auto px = static_cast<double>(panel_px);
  if (lo == 0.0 && hi == 0.0) {
    lo = 1e30;
    hi = -1e30;
    for (const auto& p : panels) {
      bounds_of(p.dots, lo, hi);
      bounds_of(p.crosses, lo, hi);
      bounds_of(p.plusses, lo, hi);
    }
    if (lo > hi) {
      lo = -1.0;
      hi = 1.0;
    }
    const double margin = 0.08 * (hi - lo) + 1e-12;
    lo -= margin;
    hi += margin;
  }
  const double span = hi - lo;

  const double width = px * static_cast<double>(panels.size());
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << px << "\" viewBox=\"0 0 " << width << " " << px
     << "\">\n";
  os << "<rect width=\"" << width << "\" height=\"" << px
     << "\" fill=\"white\"/>\n";

  for (std::size_t p = 0; p < panels.size(); ++p) {
    const double ox = px * static_cast<double>(p);
    auto X = [&](double x) { return ox + pad + (x - lo) / span * (px - 2 * pad); };
    auto Y = [&](double y) { return px - pad - (y - lo) / span * (px - 2 * pad); };

    os << "<rect x=\"" << num(ox + pad) << "\" y=\"" << num(pad) << "\" width=\""
       << num(px - 2 * pad) << "\" height=\"" << num(px - 2 * pad)
       << "\" fill=\"none\" stroke=\"#ccc\"/>\n";
    if (!panels[p].title.empty())
      os << "<text x=\"" << num(ox + px / 2) << "\" y=\"" << num(pad - 5)
         << "\" font-size=\"11\" text-anchor=\"middle\" fill=\"#333\">"
         << panels[p].title << "</text>\n";

    const Matrix& d = panels[p].dots;
    for (std::size_t i = 0; i < d.rows; ++i)
      os << "<circle cx=\"" << num(X(d(i, 0))) << "\" cy=\"" << num(Y(d(i, 1)))
         << "\" r=\"1.8\" fill=\"#5577aa\" fill-opacity=\"0.7\"/>\n";

    const Matrix& c = panels[p].crosses;
    for (std::size_t i = 0; i < c.rows; ++i) {
      const double x = X(c(i, 0)), y = Y(c(i, 1)), a = 3.0;
      os << "<path d=\"M" << num(x - a) << " " << num(y - a) << " L" << num(x + a)
         << " " << num(y + a) << " M" << num(x - a) << " " << num(y + a) << " L"
         << num(x + a) << " " << num(y - a)
         << "\" stroke=\"#cc3333\" stroke-width=\"1.2\"/>\n";
    }

    const Matrix& m = panels[p].plusses;
    for (std::size_t i = 0; i < m.rows; ++i) {
      const double x = X(m(i, 0)), y = Y(m(i, 1)), a = 4.0;
      os << "<path d=\"M" << num(x - a) << " " << num(y) << " L" << num(x + a)
         << " " << num(y) << " M" << num(x) << " " << num(y - a) << " L" << num(x)
         << " " << num(y + a) << "\" stroke=\"black\" stroke-width=\"1.4\"/>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

void write_svg(const std::string& path, const std::vector<SvgPanel>& panels,
               double lo, double hi, std::size_t panel_px) {
  write_text_file(path, render_svg(panels, lo, hi, panel_px));
}

}  // namespace oscar
