#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "patchgraph/errors.hpp"
#include "patchgraph/io_util.hpp"
#include "patchgraph/tensor.hpp"

namespace patchgraph {

// Per-patch feature matrix, 32-bit on disk. Row i belongs to the patch in
// row i of the paired coordinate set.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;  // row-major

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c, float fill = 0.0f)
      : rows(r), cols(c), data(r * c, fill) {}

  float& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  float operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  Tensor2 to_tensor() const {
    Tensor2 t(rows, cols);
    for (std::size_t i = 0; i < data.size(); ++i) t.data[i] = data[i];
    return t;
  }
};

inline constexpr char kFmatMagic[8] = {'P', 'G', 'C', 'N', 'F', 'M', 'A', 'T'};

namespace detail {

inline void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32_le(const std::string& b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + i])) << (8 * i);
  return v;
}

inline void put_f32_le(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32_le(out, bits);
}

inline float get_f32_le(const std::string& b, std::size_t off) {
  const std::uint32_t bits = get_u32_le(b, off);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace detail

inline std::string fmat_to_bytes(const FeatureMatrix& m) {
  std::string out(kFmatMagic, 8);
  detail::put_u32_le(out, static_cast<std::uint32_t>(m.rows));
  detail::put_u32_le(out, static_cast<std::uint32_t>(m.cols));
  out.reserve(out.size() + 4 * m.data.size());
  for (float f : m.data) detail::put_f32_le(out, f);
  return out;
}

inline void write_feature_matrix(const FeatureMatrix& m, const std::string& path) {
  for (float f : m.data)
    if (!std::isfinite(f))
      throw ValidationError(path + ": refusing to write non-finite feature value");
  atomic_write_file(path, fmat_to_bytes(m));
}

inline FeatureMatrix fmat_from_bytes(const std::string& bytes, const std::string& context) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kFmatMagic, 8) != 0)
    throw FormatError(context + ": bad magic, not an FMAT file");
  const std::uint32_t rows = detail::get_u32_le(bytes, 8);
  const std::uint32_t cols = detail::get_u32_le(bytes, 12);
  const std::size_t need = 16 + 4ull * rows * cols;
  if (bytes.size() < need)
    throw FormatError(context + ": truncated payload, header promises " +
                      std::to_string(rows) + "x" + std::to_string(cols) + " (" +
                      std::to_string(need) + " bytes), file has " +
                      std::to_string(bytes.size()));
  FeatureMatrix m(rows, cols);
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    m.data[i] = detail::get_f32_le(bytes, 16 + 4 * i);
    if (!std::isfinite(m.data[i]))
      throw ValidationError(context + ": non-finite value at element " + std::to_string(i));
  }
  return m;
}

inline FeatureMatrix read_feature_matrix(const std::string& path) {
  return fmat_from_bytes(read_file_bytes(path), path);
}

}  // namespace patchgraph
