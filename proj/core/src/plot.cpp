#include "dmtlr/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "dmtlr/dataset.hpp"

namespace dmtlr::plot {

namespace {

// 5x7 glyphs, one byte per row, low 5 bits used.
struct Glyph {
  char ch;
  unsigned char rows[7];
};

constexpr Glyph kGlyphs[] = {
    {'0', {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e}},
    {'1', {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e}},
    {'2', {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f}},
    {'3', {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e}},
    {'4', {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02}},
    {'5', {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e}},
    {'6', {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e}},
    {'7', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e}},
    {'9', {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c}},
    {'-', {0x00, 0x00, 0x00, 0x1f, 0x00, 0x00, 0x00}},
    {'+', {0x00, 0x04, 0x04, 0x1f, 0x04, 0x04, 0x00}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0c, 0x0c}},
    {'e', {0x00, 0x00, 0x0e, 0x11, 0x1f, 0x10, 0x0e}},
    {'x', {0x00, 0x00, 0x11, 0x0a, 0x04, 0x0a, 0x11}},
};

const Glyph* find_glyph(char ch) {
  for (const Glyph& g : kGlyphs)
    if (g.ch == ch) return &g;
  return nullptr;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

}  // namespace

Canvas::Canvas(int width, int height, Color background)
    : width_(width), height_(height),
      rgb_(static_cast<std::size_t>(width) * height * 3) {
  for (std::size_t i = 0; i < rgb_.size(); i += 3) {
    rgb_[i] = background.r;
    rgb_[i + 1] = background.g;
    rgb_[i + 2] = background.b;
  }
}

void Canvas::set_pixel(int x, int y, Color c) {
  if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
  const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  rgb_[i] = c.r;
  rgb_[i + 1] = c.g;
  rgb_[i + 2] = c.b;
}

void Canvas::line(double x0, double y0, double x1, double y1, Color c) {
  const double dx = x1 - x0, dy = y1 - y0;
  const int steps = static_cast<int>(std::max(std::abs(dx), std::abs(dy))) + 1;
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    set_pixel(static_cast<int>(std::lround(x0 + t * dx)),
              static_cast<int>(std::lround(y0 + t * dy)), c);
  }
}

void Canvas::marker(double x, double y, Color c, int radius) {
  const int cx = static_cast<int>(std::lround(x));
  const int cy = static_cast<int>(std::lround(y));
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dx * dx + dy * dy <= radius * radius) set_pixel(cx + dx, cy + dy, c);
}

void Canvas::text(int x, int y, const std::string& s, Color c) {
  int cursor = x;
  for (char ch : s) {
    if (const Glyph* g = find_glyph(ch)) {
      for (int row = 0; row < 7; ++row)
        for (int col = 0; col < 5; ++col)
          if (g->rows[row] & (1 << (4 - col))) set_pixel(cursor + col, y + row, c);
    }
    cursor += 6;
  }
}

nn::Tensor Canvas::to_tensor() const {
  nn::Tensor image({height_, width_, 3});
  image.data = rgb_;
  return image;
}

void write_bmp(const std::string& path, const nn::Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != 3)
    throw std::invalid_argument("write_bmp: expected (h,w,3)");
  const int h = image.dim(0), w = image.dim(1);
  const int row_bytes = (3 * w + 3) & ~3;
  const std::uint32_t data_size = static_cast<std::uint32_t>(row_bytes) * h;
  const std::uint32_t file_size = 54 + data_size;

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_bmp: cannot open " + path);
  unsigned char header[54] = {};
  header[0] = 'B';
  header[1] = 'M';
  auto put32 = [&header](int off, std::uint32_t v) {
    header[off] = static_cast<unsigned char>(v & 0xff);
    header[off + 1] = static_cast<unsigned char>((v >> 8) & 0xff);
    header[off + 2] = static_cast<unsigned char>((v >> 16) & 0xff);
    header[off + 3] = static_cast<unsigned char>((v >> 24) & 0xff);
  };
  put32(2, file_size);
  put32(10, 54);
  put32(14, 40);
  put32(18, static_cast<std::uint32_t>(w));
  put32(22, static_cast<std::uint32_t>(h));
  header[26] = 1;            // planes
  header[28] = 24;           // bits per pixel
  put32(34, data_size);
  put32(38, 2835);           // ~72 dpi
  put32(42, 2835);
  os.write(reinterpret_cast<const char*>(header), sizeof(header));

  std::vector<unsigned char> row(static_cast<std::size_t>(row_bytes), 0);
  for (int y = h - 1; y >= 0; --y) {  // bottom-up
    for (int x = 0; x < w; ++x) {
      const std::size_t i = (static_cast<std::size_t>(y) * w + x) * 3;
      const auto clamp = [](double v) {
        return static_cast<unsigned char>(std::clamp(v, 0.0, 255.0));
      };
      row[static_cast<std::size_t>(3 * x)] = clamp(image.data[i + 2]);      // B
      row[static_cast<std::size_t>(3 * x) + 1] = clamp(image.data[i + 1]);  // G
      row[static_cast<std::size_t>(3 * x) + 2] = clamp(image.data[i]);      // R
    }
    os.write(reinterpret_cast<const char*>(row.data()), row_bytes);
  }
  if (!os) throw std::runtime_error("write_bmp: write failed for " + path);
}

Canvas render_chart(const std::vector<Series>& series, int width, int height,
                    bool y_log) {
  Canvas canvas(width, height);
  const int left = 46, right = 12, top = 12, bottom = 24;
  const int x0 = left, x1 = width - right;
  const int y0 = height - bottom, y1 = top;  // pixel y grows downward

  double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
  double min_y = min_x, max_y = -min_x;
  for (const Series& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      double yv = s.y[i];
      if (y_log) {
        if (yv <= 0.0) continue;
        yv = std::log10(yv);
      }
      min_x = std::min(min_x, s.x[i]);
      max_x = std::max(max_x, s.x[i]);
      min_y = std::min(min_y, yv);
      max_y = std::max(max_y, yv);
    }
  if (!std::isfinite(min_x)) {
    min_x = 0.0;
    max_x = 1.0;
    min_y = 0.0;
    max_y = 1.0;
  }
  if (max_x == min_x) max_x = min_x + 1.0;
  if (max_y == min_y) max_y = min_y + 1.0;
  const double pad_y = 0.05 * (max_y - min_y);
  min_y -= pad_y;
  max_y += pad_y;

  const auto px = [&](double v) {
    return x0 + (v - min_x) / (max_x - min_x) * (x1 - x0);
  };
  const auto py = [&](double v) {
    const double t = y_log ? std::log10(v) : v;
    return y0 + (t - min_y) / (max_y - min_y) * (y1 - y0);
  };

  // frame and ticks
  canvas.line(x0, y0, x1, y0, kBlack);
  canvas.line(x0, y0, x0, y1, kBlack);
  canvas.line(x0, y1, x1, y1, kGray);
  canvas.line(x1, y0, x1, y1, kGray);
  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double fx = min_x + (max_x - min_x) * i / kTicks;
    const int tx = static_cast<int>(std::lround(px(fx)));
    canvas.line(tx, y0, tx, y0 + 3, kBlack);
    canvas.text(tx - 12, y0 + 6, tick_label(fx), kBlack);

    const double fy = min_y + (max_y - min_y) * i / kTicks;
    const int ty = static_cast<int>(std::lround(y0 + (fy - min_y) / (max_y - min_y) * (y1 - y0)));
    canvas.line(x0 - 3, ty, x0, ty, kBlack);
    canvas.text(2, ty - 3, tick_label(y_log ? std::pow(10.0, fy) : fy), kBlack);
  }

  for (const Series& s : series) {
    double prev_x = 0, prev_y = 0;
    bool has_prev = false;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (y_log && s.y[i] <= 0.0) {
        has_prev = false;
        continue;
      }
      const double cx = px(s.x[i]);
      const double cy = py(s.y[i]);
      if (s.lines) {
        if (has_prev) canvas.line(prev_x, prev_y, cx, cy, s.color);
        prev_x = cx;
        prev_y = cy;
        has_prev = true;
      } else {
        canvas.marker(cx, cy, s.color, s.marker_radius);
      }
    }
  }
  return canvas;
}

void save_chart(const std::vector<Series>& series, int width, int height,
                const std::string& path_base, bool y_log) {
  const Canvas canvas = render_chart(series, width, height, y_log);
  const nn::Tensor image = canvas.to_tensor();
  data::write_image(path_base + ".dmim", image);
  write_bmp(path_base + ".bmp", image);
}

}  // namespace dmtlr::plot
