#pragma once

#include <string>
#include <vector>

#include "oscar/matrix.hpp"

namespace oscar {

// One scatter panel: small dots for a point cloud, "x" markers for a second
// cloud (typically final samples), "+" markers for reference centers.
struct SvgPanel {
  std::string title;
  Matrix dots;     // may be empty
  Matrix crosses;  // may be empty ("x")
  Matrix plusses;  // may be empty ("+")
};

// Side-by-side panels with a shared coordinate range (computed from all the
// points unless lo/hi are given). Only 2-d points are drawn; scatter and
// markers, nothing else, so the artifact has no external dependencies.
std::string render_svg(const std::vector<SvgPanel>& panels, double lo = 0.0,
                       double hi = 0.0, std::size_t panel_px = 320);

void write_svg(const std::string& path, const std::vector<SvgPanel>& panels,
               double lo = 0.0, double hi = 0.0, std::size_t panel_px = 320);

}  // namespace oscar
