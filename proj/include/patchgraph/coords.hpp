#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "patchgraph/errors.hpp"
#include "patchgraph/io_util.hpp"

namespace patchgraph {

struct PatchCoordinate {
  std::int64_t patch_id = 0;
  std::string slide_id;
  std::int64_t x = 0;  // full-resolution pixels, multiple of patch_size
  std::int64_t y = 0;
};

struct PatchCoordinateSet {
  std::vector<PatchCoordinate> entries;
  std::int64_t patch_size = 256;

  std::size_t size() const { return entries.size(); }

  // patch_ids unique; (slide, x, y) unique; coordinates grid-aligned.
  void validate() const {
    std::set<std::int64_t> ids;
    std::set<std::tuple<std::string, std::int64_t, std::int64_t>> pos;
    for (const auto& e : entries) {
      if (!ids.insert(e.patch_id).second)
        throw ValidationError("coords: duplicate patch_id " + std::to_string(e.patch_id));
      if (!pos.insert({e.slide_id, e.x, e.y}).second)
        throw ValidationError("coords: duplicate position (" + e.slide_id + "," +
                              std::to_string(e.x) + "," + std::to_string(e.y) + ")");
      if (e.x < 0 || e.y < 0 || e.x % patch_size != 0 || e.y % patch_size != 0)
        throw ValidationError("coords: patch " + std::to_string(e.patch_id) +
                              " not aligned to grid of " + std::to_string(patch_size));
    }
  }
};

inline std::string coords_to_csv(const PatchCoordinateSet& s) {
  std::string out = "patch_id,slide_id,x,y\n";
  for (const auto& e : s.entries) {
    out += std::to_string(e.patch_id);
    out += ',';
    out += e.slide_id;
    out += ',';
    out += std::to_string(e.x);
    out += ',';
    out += std::to_string(e.y);
    out += '\n';
  }
  return out;
}

inline void write_coords_csv(const PatchCoordinateSet& s, const std::string& path) {
  atomic_write_file(path, coords_to_csv(s));
}

inline PatchCoordinateSet read_coords_csv(const std::string& path,
                                          std::int64_t patch_size = 256) {
  auto lines = read_lines(path);
  if (lines.empty() || lines[0] != "patch_id,slide_id,x,y")
    throw FormatError(path + ": expected header 'patch_id,slide_id,x,y'");
  PatchCoordinateSet s;
  s.patch_size = patch_size;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto fields = split_csv_line(lines[i]);
    if (fields.size() != 4)
      throw FormatError(path + ":" + std::to_string(i + 1) + ": expected 4 fields");
    PatchCoordinate e;
    e.patch_id = parse_int(fields[0], path);
    e.slide_id = std::string(fields[1]);
    e.x = parse_int(fields[2], path);
    e.y = parse_int(fields[3], path);
    s.entries.push_back(std::move(e));
  }
  return s;
}

}  // namespace patchgraph
