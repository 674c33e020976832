#pragma once

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "wisva/error.hpp"
#include "wisva/grid.hpp"
#include "wisva/io/binary.hpp"

namespace wisva::io {

using Rgb = std::array<std::uint8_t, 3>;

/// Viridis sampled at nine evenly spaced control points, linearly interpolated.
inline Rgb viridis(double t) {
  static constexpr std::array<std::array<double, 3>, 9> kStops{{{68, 1, 84},
                                                               {71, 44, 122},
                                                               {59, 81, 139},
                                                               {44, 113, 142},
                                                               {33, 144, 141},
                                                               {39, 173, 129},
                                                               {92, 200, 99},
                                                               {170, 220, 50},
                                                               {253, 231, 37}}};
  if (!(t >= 0.0)) t = 0.0;  // also maps NaN to the low end
  t = std::min(t, 1.0);
  const double x = t * (kStops.size() - 1);
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(x), kStops.size() - 2);
  const double f = x - static_cast<double>(k);
  Rgb c;
  for (int ch = 0; ch < 3; ++ch)
    c[ch] = static_cast<std::uint8_t>(std::lround(kStops[k][ch] + f * (kStops[k + 1][ch] - kStops[k][ch])));
  return c;
}

/// Width of the legend strip appended to the right of every heatmap.
inline constexpr int kLegendGap = 2;
inline constexpr int kLegendBar = 6;
inline constexpr int kLegendWidth = kLegendGap + kLegendBar;

namespace detail {

inline void png_chunk(ByteWriter& out, const char* type, const std::vector<std::uint8_t>& data) {
  const auto be32 = [&](std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.u8(static_cast<std::uint8_t>(v >> s));
  };
  be32(static_cast<std::uint32_t>(data.size()));
  std::vector<std::uint8_t> crc_in(type, type + 4);
  crc_in.insert(crc_in.end(), data.begin(), data.end());
  out.bytes(crc_in.data(), crc_in.size());
  be32(static_cast<std::uint32_t>(crc32(0L, crc_in.data(), static_cast<uInt>(crc_in.size()))));
}

}  // namespace detail

/// Encodes 8-bit RGB rows (top row first). Filter 0, zlib level 9: the output
/// is a pure function of the pixels.
inline std::vector<std::uint8_t> encode_png_rgb(int width, int height, const std::vector<Rgb>& pixels) {
  if (width < 1 || height < 1 || pixels.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::ShapeMismatch, "png: pixel count does not match dimensions");
  }
  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(height) * (1 + 3 * width));
  for (int r = 0; r < height; ++r) {
    raw.push_back(0);
    for (int c = 0; c < width; ++c) {
      const Rgb& p = pixels[static_cast<std::size_t>(r) * width + c];
      raw.insert(raw.end(), p.begin(), p.end());
    }
  }
  uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> z(zlen);
  if (compress2(z.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK) {
    throw Error(ErrorCode::Io, "png: deflate failed");
  }
  z.resize(zlen);

  ByteWriter out;
  static constexpr std::uint8_t kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  out.bytes(kSig, 8);
  std::vector<std::uint8_t> ihdr;
  for (std::uint32_t v : {static_cast<std::uint32_t>(width), static_cast<std::uint32_t>(height)})
    for (int s = 24; s >= 0; s -= 8) ihdr.push_back(static_cast<std::uint8_t>(v >> s));
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});  // depth 8, RGB, deflate, filter 0, no interlace
  detail::png_chunk(out, "IHDR", ihdr);
  detail::png_chunk(out, "IDAT", z);
  detail::png_chunk(out, "IEND", {});
  return out.buffer();
}

/// Heatmap rendering: grid row 0 (smallest y) at the bottom, values clamped to
/// [lo, hi], then a white gap and a vertical colour bar (hi at the top).
template <typename T>
std::vector<Rgb> render_heatmap(const Grid<T>& values, double lo, double hi, int& width, int& height) {
  if (!(lo < hi)) throw Error(ErrorCode::DegenerateRange, "heatmap range: lo must be below hi");
  if (values.empty()) throw Error(ErrorCode::ShapeMismatch, "heatmap: empty grid");
  const int H = values.rows();
  const int W = values.cols();
  width = W + kLegendWidth;
  height = H;
  std::vector<Rgb> px(static_cast<std::size_t>(width) * height, Rgb{255, 255, 255});
  for (int r = 0; r < H; ++r) {
    const int i = H - 1 - r;
    for (int j = 0; j < W; ++j) {
      const double t = (static_cast<double>(values(i, j)) - lo) / (hi - lo);
      px[static_cast<std::size_t>(r) * width + j] = viridis(t);
    }
    const double t = H > 1 ? static_cast<double>(H - 1 - r) / (H - 1) : 1.0;
    for (int j = W + kLegendGap; j < width; ++j) px[static_cast<std::size_t>(r) * width + j] = viridis(t);
  }
  return px;
}

template <typename T>
std::vector<std::uint8_t> heatmap_png(const Grid<T>& values, double lo, double hi) {
  int w = 0, h = 0;
  const auto px = render_heatmap(values, lo, hi, w, h);
  return encode_png_rgb(w, h, px);
}

template <typename T>
void export_heatmap_png(const Grid<T>& values, double lo, double hi, const std::string& path) {
  write_file(path, heatmap_png(values, lo, hi));
}

}  // namespace wisva::io
