#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rgbd/imagery.hpp"

namespace rgbd {

// Minimal raster plotting: PR curves and table heatmaps rendered straight
// into PPM images (the only raster format this project writes). Axis labels
// go into a text sidecar instead of embedded fonts.

void write_pr_curve_ppm(const std::vector<std::pair<double, double>>& recall_precision,
                        const std::string& path, int width = 480, int height = 360);

// Values in row-major order; colors follow a dark-to-warm ramp over the
// value range. A "<path>.legend.txt" sidecar names rows, columns and range.
void write_table_heatmap_ppm(const std::vector<std::string>& row_labels,
                             const std::vector<std::string>& col_labels,
                             const std::vector<double>& values, const std::string& path,
                             int cell_px = 48);

}  // namespace rgbd
