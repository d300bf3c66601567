#pragma once

#include <string>

#include "patchgraph/coords.hpp"
#include "patchgraph/raster.hpp"

namespace patchgraph {

// Tissue detection on a downsampled scalar raster. Each full-resolution
// patch of patch_size pixels maps to a (patch_size / downsample_factor)^2
// block of raster pixels; a patch is kept when strictly more than
// min_foreground_fraction of its block lies above the Otsu threshold.
// Patch ids run in row-major scan order over kept patches. Partial blocks
// at the right/bottom edges are not patched.
inline PatchCoordinateSet segment_to_coordinates(const Raster& saturation,
                                                 std::int64_t patch_size,
                                                 std::int64_t downsample_factor,
                                                 double min_foreground_fraction,
                                                 const std::string& slide_id) {
  if (saturation.channels != 1)
    throw FormatError("segment_to_coordinates: expected 1-channel raster");
  if (downsample_factor < 1)
    throw ValidationError("segment_to_coordinates: downsample_factor must be >= 1");
  if (patch_size < 1 || patch_size % downsample_factor != 0)
    throw ValidationError("segment_to_coordinates: patch_size " + std::to_string(patch_size) +
                          " not divisible by downsample_factor " +
                          std::to_string(downsample_factor));
  if (min_foreground_fraction < 0.0 || min_foreground_fraction > 1.0)
    throw ValidationError("segment_to_coordinates: min_foreground_fraction out of [0,1]");

  const int threshold = otsu_threshold(saturation);
  const std::size_t block = static_cast<std::size_t>(patch_size / downsample_factor);
  const std::size_t nx = saturation.width / block;
  const std::size_t ny = saturation.height / block;

  PatchCoordinateSet out;
  out.patch_size = patch_size;
  std::int64_t next_id = 0;
  for (std::size_t by = 0; by < ny; ++by) {
    for (std::size_t bx = 0; bx < nx; ++bx) {
      std::size_t above = 0;
      for (std::size_t dy = 0; dy < block; ++dy) {
        const std::uint8_t* row = saturation.pixels.data() + (by * block + dy) * saturation.width;
        for (std::size_t dx = 0; dx < block; ++dx)
          if (row[bx * block + dx] > threshold) ++above;
      }
      const double fraction = static_cast<double>(above) / static_cast<double>(block * block);
      if (fraction > min_foreground_fraction) {
        PatchCoordinate e;
        e.patch_id = next_id++;
        e.slide_id = slide_id;
        e.x = static_cast<std::int64_t>(bx) * patch_size;
        e.y = static_cast<std::int64_t>(by) * patch_size;
        out.entries.push_back(std::move(e));
      }
    }
  }
  return out;
}

}  // namespace patchgraph
