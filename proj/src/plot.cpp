#include "cablelift/plot.hpp"

#include "cablelift/error.hpp"

#include <fmt/format.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>

namespace cablelift::plot {

namespace {

using Glyph = std::array<std::uint8_t, 7>;

const std::map<char, Glyph>& font() {
  static const std::map<char, Glyph> f = {
      {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
      {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
      {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
      {'.', {0, 0, 0, 0, 0, 0x0C, 0x0C}},                {'-', {0, 0, 0, 0x1F, 0, 0, 0}},
      {'+', {0, 0x04, 0x04, 0x1F, 0x04, 0x04, 0}},       {'=', {0, 0, 0x1F, 0, 0x1F, 0, 0}},
      {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}}, {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
      {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}}, {':', {0, 0x0C, 0x0C, 0, 0x0C, 0x0C, 0}},
      {'_', {0, 0, 0, 0, 0, 0, 0x1F}},                   {',', {0, 0, 0, 0, 0x0C, 0x04, 0x08}},
      {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}}, {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
      {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
      {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
      {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}, {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
      {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
      {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
      {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
      {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
      {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}}, {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
      {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}}, {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
      {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
      {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}}, {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
      {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}}, {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
  };
  return f;
}

double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
};

}  // namespace

Image::Image(int width, int height, Color background) : w_(width), h_(height) {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidConfig, "image size must be positive");
  px_.resize(static_cast<std::size_t>(w_) * h_ * 3);
  for (std::size_t k = 0; k < px_.size(); k += 3) std::copy(background.begin(), background.end(), px_.begin() + k);
}

void Image::set(int x, int y, Color c) {
  if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
  std::copy(c.begin(), c.end(), px_.begin() + (static_cast<std::size_t>(y) * w_ + x) * 3);
}

Color Image::get(int x, int y) const {
  const auto k = (static_cast<std::size_t>(y) * w_ + x) * 3;
  return {px_[k], px_[k + 1], px_[k + 2]};
}

void Image::line(double x0, double y0, double x1, double y1, Color c, int thickness, bool dashed) {
  const double len = std::hypot(x1 - x0, y1 - y0);
  const int steps = std::max(1, static_cast<int>(std::ceil(len * 2.0)));
  const int half = thickness / 2;
  for (int s = 0; s <= steps; ++s) {
    const double f = static_cast<double>(s) / steps;
    if (dashed && static_cast<int>(f * len / 6.0) % 2 == 1) continue;
    const int x = static_cast<int>(std::lround(x0 + f * (x1 - x0)));
    const int y = static_cast<int>(std::lround(y0 + f * (y1 - y0)));
    for (int dx = -half; dx <= half; ++dx)
      for (int dy = -half; dy <= half; ++dy) set(x + dx, y + dy, c);
  }
}

void Image::rect(int x0, int y0, int x1, int y1, Color c, bool filled) {
  if (filled) {
    for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y)
      for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) set(x, y, c);
    return;
  }
  line(x0, y0, x1, y0, c);
  line(x1, y0, x1, y1, c);
  line(x1, y1, x0, y1, c);
  line(x0, y1, x0, y0, c);
}

void Image::text(int x, int y, const std::string& s, Color c, int scale) {
  const auto& f = font();
  int cx = x;
  for (char ch : s) {
    const char key = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    if (const auto it = f.find(key); it != f.end()) {
      for (int row = 0; row < 7; ++row)
        for (int col = 0; col < 5; ++col)
          if (it->second[row] & (0x10 >> col))
            for (int a = 0; a < scale; ++a)
              for (int b = 0; b < scale; ++b) set(cx + col * scale + a, y + row * scale + b, c);
    }
    cx += 6 * scale;
  }
}

void Image::write_png(const std::filesystem::path& path) const {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw Error(ErrorCode::InvalidConfig, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::InvalidConfig, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::InvalidConfig, "libpng failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w_), static_cast<png_uint_32>(h_), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h_; ++y) {
    png_write_row(png, const_cast<png_bytep>(px_.data() + static_cast<std::size_t>(y) * w_ * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image render(const Figure& fig) {
  Image img(fig.width, fig.height);
  const int left = 100, right = 24, top = 44, bottom = 64;
  const int pw = fig.width - left - right, ph = fig.height - top - bottom;

  Range xr, yr;
  for (const auto& s : fig.series) {
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(v);
  }
  for (const auto& h : fig.hlines) yr.add(h.y);
  xr.finish();
  yr.finish();
  if (fig.equal_aspect) {
    const double sx = (xr.hi - xr.lo) / pw, sy = (yr.hi - yr.lo) / ph, s = std::max(sx, sy);
    const double cx = 0.5 * (xr.lo + xr.hi), cy = 0.5 * (yr.lo + yr.hi);
    xr.lo = cx - 0.5 * s * pw;
    xr.hi = cx + 0.5 * s * pw;
    yr.lo = cy - 0.5 * s * ph;
    yr.hi = cy + 0.5 * s * ph;
  }
  auto X = [&](double v) { return left + (v - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto Y = [&](double v) { return top + ph - (v - yr.lo) / (yr.hi - yr.lo) * ph; };

  for (auto [range, vertical] : {std::pair{xr, true}, std::pair{yr, false}}) {
    const double step = nice_step(range.hi - range.lo, 6);
    for (double v = std::ceil(range.lo / step) * step; v <= range.hi; v += step) {
      const double clean = std::abs(v) < 1e-9 * step ? 0.0 : v;
      const std::string label = fmt::format("{:.3g}", clean);
      if (vertical) {
        img.line(X(v), top, X(v), top + ph, {235, 235, 235});
        img.text(static_cast<int>(X(v)) - Image::text_width(label) / 2, top + ph + 8, label, kBlack);
      } else {
        img.line(left, Y(v), left + pw, Y(v), {235, 235, 235});
        img.text(left - 8 - Image::text_width(label), static_cast<int>(Y(v)) - 7, label, kBlack);
      }
    }
  }
  img.rect(left, top, left + pw, top + ph, kBlack);

  for (const auto& h : fig.hlines) img.line(left, Y(h.y), left + pw, Y(h.y), h.color, 1, true);
  for (const auto& s : fig.series) {
    for (std::size_t k = 1; k < std::min(s.x.size(), s.y.size()); ++k) {
      if (!std::isfinite(s.y[k - 1]) || !std::isfinite(s.y[k])) continue;
      img.line(X(s.x[k - 1]), Y(s.y[k - 1]), X(s.x[k]), Y(s.y[k]), s.color, 2, s.dashed);
    }
  }

  img.text(left, 8, fig.title, kBlack);
  img.text(left + pw / 2 - Image::text_width(fig.xlabel) / 2, fig.height - 26, fig.xlabel, kBlack);
  img.text(left, top - 12, fig.ylabel, {90, 90, 90}, 1);

  int ly = top + 8;
  auto legend = [&](const std::string& label, Color c) {
    const int w = Image::text_width(label);
    const int lx = left + pw - w - 40;
    img.rect(lx, ly + 4, lx + 20, ly + 8, c, true);
    img.text(lx + 26, ly, label, kBlack);
    ly += 20;
  };
  for (const auto& s : fig.series)
    if (!s.label.empty()) legend(s.label, s.color);
  for (const auto& h : fig.hlines)
    if (!h.label.empty()) legend(h.label, h.color);
  return img;
}

void save(const Figure& fig, const std::filesystem::path& path) { render(fig).write_png(path); }

}  // namespace cablelift::plot
