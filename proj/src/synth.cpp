#include "scotopic/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "scotopic/rng.hpp"

namespace scotopic {

namespace {

constexpr int kSize = 28;
constexpr int kFontH = 7, kFontW = 5;

// 7x5 bitmap font, one row string per glyph row.
const std::array<std::array<const char*, kFontH>, 10> kFont = {{
    {"01110", "10001", "10011", "10101", "11001", "10001", "01110"},  // 0
    {"00100", "01100", "00100", "00100", "00100", "00100", "01110"},  // 1
    {"01110", "10001", "00001", "00010", "00100", "01000", "11111"},  // 2
    {"11111", "00010", "00100", "00010", "00001", "10001", "01110"},  // 3
    {"00010", "00110", "01010", "10010", "11111", "00010", "00010"},  // 4
    {"11111", "10000", "11110", "00001", "00001", "10001", "01110"},  // 5
    {"00110", "01000", "10000", "11110", "10001", "10001", "01110"},  // 6
    {"11111", "00001", "00010", "00100", "01000", "01000", "01000"},  // 7
    {"01110", "10001", "10001", "01110", "10001", "10001", "01110"},  // 8
    {"01110", "10001", "10001", "01111", "00001", "00010", "01100"},  // 9
}};

double font_sample(int digit, double fy, double fx) {
  // Bilinear sample of the glyph bitmap; outside is background.
  const int y0 = static_cast<int>(std::floor(fy));
  const int x0 = static_cast<int>(std::floor(fx));
  const double wy = fy - y0, wx = fx - x0;
  auto px = [&](int y, int x) -> double {
    if (y < 0 || y >= kFontH || x < 0 || x >= kFontW) return 0.0;
    return kFont[digit][y][x] == '1' ? 1.0 : 0.0;
  };
  return (1 - wy) * ((1 - wx) * px(y0, x0) + wx * px(y0, x0 + 1)) +
         wy * ((1 - wx) * px(y0 + 1, x0) + wx * px(y0 + 1, x0 + 1));
}

void blur3(std::vector<double>& img) {
  static const double k[3] = {0.25, 0.5, 0.25};
  std::vector<double> tmp(img.size(), 0.0);
  for (int y = 0; y < kSize; ++y)
    for (int x = 0; x < kSize; ++x) {
      double acc = 0.0;
      for (int d = -1; d <= 1; ++d) {
        const int xx = std::clamp(x + d, 0, kSize - 1);
        acc += k[d + 1] * img[y * kSize + xx];
      }
      tmp[y * kSize + x] = acc;
    }
  for (int y = 0; y < kSize; ++y)
    for (int x = 0; x < kSize; ++x) {
      double acc = 0.0;
      for (int d = -1; d <= 1; ++d) {
        const int yy = std::clamp(y + d, 0, kSize - 1);
        acc += k[d + 1] * tmp[yy * kSize + x];
      }
      img[y * kSize + x] = acc;
    }
}

}  // namespace

std::vector<IntensityImage> synth_digits(int n, uint64_t seed) {
  std::vector<IntensityImage> out(n);
  for (int i = 0; i < n; ++i) {
    RngStream rng(seed, RngLane::Dataset, static_cast<uint32_t>(i));
    const int digit = static_cast<int>(rng.below(10));
    const double rot = std::clamp(rng.normal() * 8.0, -20.0, 20.0) * 3.14159265358979 / 180.0;
    const double scale = 0.8 + 0.35 * rng.uniform();
    const double shear = -0.15 + 0.3 * rng.uniform();
    const double tx = -2.5 + 5.0 * rng.uniform();
    const double ty = -2.5 + 5.0 * rng.uniform();
    const double intensity = 0.65 + 0.35 * rng.uniform();
    const int blur_passes = 1 + static_cast<int>(rng.below(2));

    // glyph cell size inside the canvas
    const double cell = 2.9 * scale;
    const double cx = (kSize - 1) * 0.5 + tx;
    const double cy = (kSize - 1) * 0.5 + ty;
    const double cr = std::cos(rot), sr = std::sin(rot);

    IntensityImage& img = out[i];
    img.height = kSize;
    img.width = kSize;
    img.channels = 1;
    img.label = digit;
    img.pixels.assign(kSize * kSize, 0.0);
    for (int y = 0; y < kSize; ++y) {
      for (int x = 0; x < kSize; ++x) {
        // canvas -> glyph coordinates (inverse rotation, shear, scale)
        const double dx = x - cx, dy = y - cy;
        const double rx = cr * dx + sr * dy;
        const double ry = -sr * dx + cr * dy;
        const double gx = (rx - shear * ry) / cell + (kFontW - 1) * 0.5;
        const double gy = ry / cell + (kFontH - 1) * 0.5;
        img.pixels[y * kSize + x] = intensity * font_sample(digit, gy, gx);
      }
    }
    for (int b = 0; b < blur_passes; ++b) blur3(img.pixels);
    for (double& p : img.pixels) p = std::clamp(p, 0.0, 1.0);
  }
  return out;
}

}  // namespace scotopic
