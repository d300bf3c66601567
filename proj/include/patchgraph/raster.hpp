#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "patchgraph/errors.hpp"
#include "patchgraph/io_util.hpp"

namespace patchgraph {

// 8-bit raster, 1 channel (scalar) or 3 channels (RGB), row-major with
// interleaved channels.
struct Raster {
  std::size_t width = 0;
  std::size_t height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;

  Raster() = default;
  Raster(std::size_t w, std::size_t h, int c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), pixels(w * h * c, fill) {}

  std::uint8_t at(std::size_t x, std::size_t y, int c = 0) const {
    return pixels[(y * width + x) * channels + c];
  }
  void set(std::size_t x, std::size_t y, int c, std::uint8_t v) {
    pixels[(y * width + x) * channels + c] = v;
  }
  std::size_t pixel_count() const { return width * height; }
};

namespace detail {

inline void skip_pnm_whitespace(const std::string& b, std::size_t& i) {
  while (i < b.size()) {
    if (b[i] == '#') {
      while (i < b.size() && b[i] != '\n') ++i;
    } else if (b[i] == ' ' || b[i] == '\t' || b[i] == '\r' || b[i] == '\n') {
      ++i;
    } else {
      return;
    }
  }
}

inline std::size_t read_pnm_int(const std::string& b, std::size_t& i, const std::string& path) {
  skip_pnm_whitespace(b, i);
  std::size_t start = i;
  while (i < b.size() && b[i] >= '0' && b[i] <= '9') ++i;
  if (i == start) throw FormatError(path + ": malformed PNM header");
  return static_cast<std::size_t>(std::stoull(b.substr(start, i - start)));
}

}  // namespace detail

// Reads binary PGM (P5) or PPM (P6) with maxval 255.
inline Raster read_pnm(const std::string& path) {
  std::string bytes = read_file_bytes(path);
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw FormatError(path + ": not a binary PGM/PPM file (expected P5 or P6)");
  const int channels = bytes[1] == '5' ? 1 : 3;
  std::size_t i = 2;
  const std::size_t w = detail::read_pnm_int(bytes, i, path);
  const std::size_t h = detail::read_pnm_int(bytes, i, path);
  const std::size_t maxval = detail::read_pnm_int(bytes, i, path);
  if (maxval != 255) throw FormatError(path + ": unsupported maxval " + std::to_string(maxval));
  if (w < 1 || h < 1) throw FormatError(path + ": empty raster");
  ++i;  // single whitespace byte after maxval
  const std::size_t need = w * h * static_cast<std::size_t>(channels);
  if (bytes.size() - i < need)
    throw FormatError(path + ": truncated pixel payload (" +
                      std::to_string(bytes.size() - i) + " of " + std::to_string(need) +
                      " bytes)");
  Raster r(w, h, channels);
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(i),
            bytes.begin() + static_cast<std::ptrdiff_t>(i + need), r.pixels.begin());
  return r;
}

inline void write_pnm(const Raster& r, const std::string& path) {
  if (r.channels != 1 && r.channels != 3)
    throw FormatError("write_pnm: unsupported channel count " + std::to_string(r.channels));
  std::string out;
  out += r.channels == 1 ? "P5\n" : "P6\n";
  out += std::to_string(r.width) + " " + std::to_string(r.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(r.pixels.data()), r.pixels.size());
  atomic_write_file(path, out);
}

// HSV saturation of each RGB pixel, scaled to [0, 255].
// sat = 0 when max(R,G,B) = 0, else (max - min) / max.
inline Raster rgb_to_saturation(const Raster& rgb) {
  if (rgb.channels != 3)
    throw FormatError("rgb_to_saturation: expected 3 channels, got " +
                      std::to_string(rgb.channels));
  Raster out(rgb.width, rgb.height, 1);
  for (std::size_t p = 0; p < rgb.pixel_count(); ++p) {
    const std::uint8_t r = rgb.pixels[3 * p + 0];
    const std::uint8_t g = rgb.pixels[3 * p + 1];
    const std::uint8_t b = rgb.pixels[3 * p + 2];
    const int mx = std::max(r, std::max(g, b));
    const int mn = std::min(r, std::min(g, b));
    double sat = mx == 0 ? 0.0 : static_cast<double>(mx - mn) / mx;
    out.pixels[p] = static_cast<std::uint8_t>(std::lround(sat * 255.0));
  }
  return out;
}

inline std::array<std::uint64_t, 256> gray_histogram(const Raster& r) {
  if (r.channels != 1)
    throw FormatError("gray_histogram: expected 1 channel, got " + std::to_string(r.channels));
  std::array<std::uint64_t, 256> h{};
  for (std::uint8_t v : r.pixels) ++h[v];
  return h;
}

// Otsu threshold from a 256-bin histogram: the t in [0, 255] maximizing
// between-class variance of classes {v <= t} and {v > t}, smallest t on ties.
// Foreground is value > t.
inline int otsu_threshold_from_histogram(const std::array<std::uint64_t, 256>& hist) {
  std::uint64_t total = 0;
  int distinct = 0;
  double weighted_sum = 0.0;
  for (int v = 0; v < 256; ++v) {
    total += hist[v];
    if (hist[v] > 0) ++distinct;
    weighted_sum += static_cast<double>(v) * static_cast<double>(hist[v]);
  }
  if (total == 0) throw DegenerateInputError("otsu: empty raster");
  if (distinct < 2)
    throw DegenerateInputError("otsu: constant raster, no two classes to separate");

  int best_t = 0;
  double best_var = -1.0;
  std::uint64_t count_below = 0;
  double sum_below = 0.0;
  for (int t = 0; t < 256; ++t) {
    count_below += hist[t];
    sum_below += static_cast<double>(t) * static_cast<double>(hist[t]);
    const std::uint64_t count_above = total - count_below;
    if (count_below == 0 || count_above == 0) continue;
    const double w0 = static_cast<double>(count_below) / static_cast<double>(total);
    const double w1 = 1.0 - w0;
    const double mu0 = sum_below / static_cast<double>(count_below);
    const double mu1 = (weighted_sum - sum_below) / static_cast<double>(count_above);
    const double var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (var > best_var) {
      best_var = var;
      best_t = t;
    }
  }
  return best_t;
}

inline int otsu_threshold(const Raster& r) {
  return otsu_threshold_from_histogram(gray_histogram(r));
}

}  // namespace patchgraph
