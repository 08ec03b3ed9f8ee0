#include "rgbd/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace rgbd {

namespace {

struct Canvas {
  ColorImage img;

  Canvas(int w, int h, uint8_t r, uint8_t g, uint8_t b) {
    img = ColorImage::create(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) set(x, y, r, g, b);
  }

  void set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
    if (x < 0 || x >= img.width || y < 0 || y >= img.height) return;
    size_t i = img.idx(x, y);
    img.rgb[i] = r;
    img.rgb[i + 1] = g;
    img.rgb[i + 2] = b;
  }

  void fill_rect(int x1, int y1, int x2, int y2, uint8_t r, uint8_t g, uint8_t b) {
    for (int y = y1; y <= y2; ++y)
      for (int x = x1; x <= x2; ++x) set(x, y, r, g, b);
  }

  void line(int x0, int y0, int x1, int y1, uint8_t r, uint8_t g, uint8_t b) {
    int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
      set(x0, y0, r, g, b);
      if (x0 == x1 && y0 == y1) break;
      int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }
};

void heat_color(double t, uint8_t* r, uint8_t* g, uint8_t* b) {
  t = std::clamp(t, 0.0, 1.0);
  // dark blue -> teal -> yellow ramp
  *r = static_cast<uint8_t>(std::lround(255 * std::pow(t, 1.5)));
  *g = static_cast<uint8_t>(std::lround(255 * (0.1 + 0.9 * t)));
  *b = static_cast<uint8_t>(std::lround(255 * (0.6 - 0.5 * t)));
}

}  // namespace

void write_pr_curve_ppm(const std::vector<std::pair<double, double>>& recall_precision,
                        const std::string& path, int width, int height) {
  Canvas c(width, height, 255, 255, 255);
  const int ml = 40, mr = 15, mt = 15, mb = 40;  // margins
  const int x0 = ml, y0 = height - mb, x1 = width - mr, y1 = mt;

  auto px = [&](double recall) {
    return x0 + static_cast<int>(std::lround(recall * (x1 - x0)));
  };
  auto py = [&](double precision) {
    return y0 - static_cast<int>(std::lround(precision * (y0 - y1)));
  };

  for (int i = 0; i <= 4; ++i) {  // gridlines at 0, .25, .5, .75, 1
    double v = i / 4.0;
    c.line(px(v), y0, px(v), y1, 220, 220, 220);
    c.line(x0, py(v), x1, py(v), 220, 220, 220);
  }
  c.line(x0, y0, x1, y0, 0, 0, 0);
  c.line(x0, y0, x0, y1, 0, 0, 0);

  int prev_x = px(0.0), prev_y = py(recall_precision.empty() ? 0.0 : 1.0);
  for (const auto& [recall, precision] : recall_precision) {
    int x = px(recall), y = py(precision);
    c.line(prev_x, prev_y, x, y, 180, 40, 40);
    prev_x = x;
    prev_y = y;
  }
  save_color(c.img, path);
}

void write_table_heatmap_ppm(const std::vector<std::string>& row_labels,
                             const std::vector<std::string>& col_labels,
                             const std::vector<double>& values, const std::string& path,
                             int cell_px) {
  const int rows = static_cast<int>(row_labels.size());
  const int cols = static_cast<int>(col_labels.size());
  if (rows * cols != static_cast<int>(values.size()))
    throw std::invalid_argument("heatmap: value count does not match labels");

  double lo = *std::min_element(values.begin(), values.end());
  double hi = *std::max_element(values.begin(), values.end());
  const int legend_h = 14;
  Canvas c(cols * cell_px + 2, rows * cell_px + legend_h + 4, 255, 255, 255);

  for (int r = 0; r < rows; ++r) {
    for (int col = 0; col < cols; ++col) {
      double t = hi > lo ? (values[r * cols + col] - lo) / (hi - lo) : 0.5;
      uint8_t cr, cg, cb;
      heat_color(t, &cr, &cg, &cb);
      c.fill_rect(col * cell_px + 1, r * cell_px + 1, (col + 1) * cell_px - 1,
                  (r + 1) * cell_px - 1, cr, cg, cb);
    }
  }
  // legend ramp along the bottom
  int ly = rows * cell_px + 3;
  for (int x = 0; x < cols * cell_px; ++x) {
    uint8_t cr, cg, cb;
    heat_color(static_cast<double>(x) / (cols * cell_px - 1), &cr, &cg, &cb);
    c.fill_rect(x + 1, ly, x + 1, ly + legend_h - 1, cr, cg, cb);
  }
  save_color(c.img, path);

  std::ofstream legend(path + ".legend.txt");
  if (!legend.good()) throw DataError(path + ".legend.txt: cannot open for writing");
  legend << "rows (top to bottom):";
  for (const auto& r : row_labels) legend << " " << r;
  legend << "\ncolumns (left to right):";
  for (const auto& col : col_labels) legend << " " << col;
  legend << "\nrange: " << format_double(lo) << " (dark) to " << format_double(hi) << " (bright)\n";
}

}  // namespace rgbd
