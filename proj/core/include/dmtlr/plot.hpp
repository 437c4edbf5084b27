#ifndef DMTLR_PLOT_HPP
#define DMTLR_PLOT_HPP

#include <string>
#include <vector>

#include "dmtlr/tensor.hpp"

namespace dmtlr::plot {

struct Color {
  double r = 0.0, g = 0.0, b = 0.0;
};

inline constexpr Color kBlack{0, 0, 0};
inline constexpr Color kWhite{255, 255, 255};
inline constexpr Color kGray{180, 180, 180};
inline constexpr Color kBlue{40, 90, 200};
inline constexpr Color kRed{200, 60, 50};
inline constexpr Color kGreen{40, 150, 80};
inline constexpr Color kOrange{230, 150, 30};

// Tiny RGB raster with pixel values in [0, 255].
class Canvas {
 public:
  Canvas(int width, int height, Color background = kWhite);

  int width() const { return width_; }
  int height() const { return height_; }

  void set_pixel(int x, int y, Color c);
  void line(double x0, double y0, double x1, double y1, Color c);
  void marker(double x, double y, Color c, int radius = 2);
  // 5x7 bitmap glyphs: digits, '-', '+', '.', 'e', 'x'. Unknown chars are
  // skipped.
  void text(int x, int y, const std::string& s, Color c);

  nn::Tensor to_tensor() const;  // (h, w, 3)

 private:
  int width_, height_;
  std::vector<double> rgb_;
};

// Uncompressed 24-bit bitmap.
void write_bmp(const std::string& path, const nn::Tensor& image);

struct Series {
  std::vector<double> x, y;
  Color color = kBlue;
  bool lines = true;   // otherwise markers
  int marker_radius = 2;
};

// Axes, ticks with numeric labels, and the given series; y_log uses log10
// scaling for strictly positive data.
Canvas render_chart(const std::vector<Series>& series, int width, int height,
                    bool y_log = false);

// Writes the chart both as the raw image format used by datasets (.dmim) and
// as a .bmp next to it.
void save_chart(const std::vector<Series>& series, int width, int height,
                const std::string& path_base, bool y_log = false);

}  // namespace dmtlr::plot

#endif  // DMTLR_PLOT_HPP
