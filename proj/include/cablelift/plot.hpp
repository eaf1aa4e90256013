#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cablelift::plot {

using Color = std::array<std::uint8_t, 3>;

inline constexpr Color kBlack{0, 0, 0};
inline constexpr Color kGrey{170, 170, 170};
inline constexpr Color kBlue{31, 119, 180};
inline constexpr Color kOrange{255, 127, 14};
inline constexpr Color kGreen{44, 160, 44};
inline constexpr Color kRed{214, 39, 40};
inline constexpr Color kPurple{148, 103, 189};

/// RGB raster with a few drawing primitives.
class Image {
 public:
  Image(int width, int height, Color background = {255, 255, 255});

  int width() const { return w_; }
  int height() const { return h_; }
  void set(int x, int y, Color c);
  Color get(int x, int y) const;
  void line(double x0, double y0, double x1, double y1, Color c, int thickness = 1, bool dashed = false);
  void rect(int x0, int y0, int x1, int y1, Color c, bool filled = false);
  /// Upper-case 5x7 bitmap text; unsupported glyphs render as blanks.
  void text(int x, int y, const std::string& s, Color c, int scale = 2);
  static int text_width(const std::string& s, int scale = 2) { return static_cast<int>(s.size()) * 6 * scale; }

  /// Throws Error(InvalidConfig) when the file cannot be written.
  void write_png(const std::filesystem::path& path) const;

 private:
  int w_, h_;
  std::vector<std::uint8_t> px_;
};

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  Color color = kBlue;
  bool dashed = false;
};

struct HLine {
  std::string label;
  double y = 0.0;
  Color color = kRed;
};

struct Figure {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  std::vector<Series> series;
  std::vector<HLine> hlines;
  bool equal_aspect = false;
  int width = 900;
  int height = 560;
};

Image render(const Figure& fig);
void save(const Figure& fig, const std::filesystem::path& path);

}  // namespace cablelift::plot
