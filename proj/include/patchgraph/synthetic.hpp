#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "patchgraph/coords.hpp"
#include "patchgraph/errors.hpp"
#include "patchgraph/fmat.hpp"
#include "patchgraph/labels.hpp"
#include "patchgraph/rng.hpp"

namespace patchgraph {

// Synthetic cohort request. Phenotype 0 is "A" and phenotype 1 is "B";
// the planted motif is A spatially adjacent to B (8-neighborhood) in
// high-risk patients, while low-risk patients keep every A at Chebyshev
// distance >= 3 from every B. Phenotype counts per patient are drawn from
// the same distribution in both risk classes, so bag composition carries
// no signal; only the spatial arrangement does.
struct SyntheticSpec {
  std::size_t n_patients = 200;
  std::size_t grid_side = 8;
  std::size_t n_phenotypes = 4;
  std::size_t feature_dim = 64;
  double noise_sigma = 0.1;
  std::string context_rule = "A adjacent to B in high-risk; Chebyshev(A,B) >= 3 in low-risk";
  std::uint64_t seed = 1;
};

struct SyntheticPatient {
  std::string patient_id;
  bool high_risk = false;
  std::vector<int> phenotypes;  // grid cell -> phenotype, row-major
  PatchCoordinateSet coords;
  FeatureMatrix features;
  SurvivalLabel label;
};

struct SyntheticCohort {
  SyntheticSpec spec;
  std::vector<SyntheticPatient> patients;
};

namespace detail {

struct ZoneSplit {
  bool horizontal = false;  // split along rows instead of columns
  bool swap_ab = false;     // B takes the low side
  std::size_t a_lines = 0;  // rows/columns in the A zone
  std::size_t b_lines = 0;
};

inline std::vector<ZoneSplit> feasible_splits(std::size_t side, std::size_t count_a,
                                              std::size_t count_b) {
  std::vector<ZoneSplit> out;
  for (int horizontal = 0; horizontal < 2; ++horizontal) {
    for (std::size_t a_lines = 1; a_lines + 3 <= side; ++a_lines) {
      const std::size_t b_lines = side - a_lines - 3;
      if (b_lines == 0) continue;
      if (a_lines * side >= count_a && b_lines * side >= count_b)
        out.push_back({horizontal != 0, false, a_lines, b_lines});
      if (a_lines * side >= count_b && b_lines * side >= count_a)
        out.push_back({horizontal != 0, true, a_lines, b_lines});
    }
  }
  return out;
}

inline std::size_t chebyshev(std::size_t r1, std::size_t c1, std::size_t r2, std::size_t c2) {
  const std::size_t dr = r1 > r2 ? r1 - r2 : r2 - r1;
  const std::size_t dc = c1 > c2 ? c1 - c2 : c2 - c1;
  return std::max(dr, dc);
}

}  // namespace detail

// True when some A patch has a B patch among its 8 grid neighbors.
inline bool has_ab_adjacency(const std::vector<int>& phenotypes, std::size_t side) {
  for (std::size_t r = 0; r < side; ++r)
    for (std::size_t c = 0; c < side; ++c) {
      if (phenotypes[r * side + c] != 0) continue;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const long long nr = static_cast<long long>(r) + dr;
          const long long nc = static_cast<long long>(c) + dc;
          if (nr < 0 || nc < 0 || nr >= static_cast<long long>(side) ||
              nc >= static_cast<long long>(side))
            continue;
          if (phenotypes[static_cast<std::size_t>(nr) * side +
                         static_cast<std::size_t>(nc)] == 1)
            return true;
        }
    }
  return false;
}

inline std::size_t min_ab_chebyshev(const std::vector<int>& phenotypes, std::size_t side) {
  std::size_t best = static_cast<std::size_t>(-1);
  for (std::size_t i = 0; i < phenotypes.size(); ++i) {
    if (phenotypes[i] != 0) continue;
    for (std::size_t j = 0; j < phenotypes.size(); ++j) {
      if (phenotypes[j] != 1) continue;
      best = std::min(best, detail::chebyshev(i / side, i % side, j / side, j % side));
    }
  }
  return best;
}

inline SyntheticCohort generate_synthetic_cohort(const SyntheticSpec& spec) {
  if (spec.n_patients < 1) throw SpecError("synthetic: n_patients must be >= 1");
  if (spec.grid_side < 3) throw SpecError("synthetic: grid_side must be >= 3");
  if (spec.n_phenotypes < 2) throw SpecError("synthetic: n_phenotypes must be >= 2");
  if (!(spec.noise_sigma > 0.0)) throw SpecError("synthetic: noise_sigma must be > 0");
  if (spec.feature_dim < 1) throw SpecError("synthetic: feature_dim must be >= 1");
  if (spec.grid_side < 4)
    throw SpecError("synthetic: grid_side " + std::to_string(spec.grid_side) +
                    " cannot separate A from B at Chebyshev distance >= 3");

  const std::size_t side = spec.grid_side;
  const std::size_t cells = side * side;
  const std::size_t p = spec.n_phenotypes;
  Rng rng(spec.seed);

  // Unit-norm phenotype centroids, shared by the whole cohort.
  std::vector<std::vector<double>> centroids(p, std::vector<double>(spec.feature_dim));
  for (auto& c : centroids) {
    double norm2 = 0.0;
    for (auto& v : c) {
      v = rng.normal();
      norm2 += v * v;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& v : c) v *= inv;
  }

  SyntheticCohort cohort;
  cohort.spec = spec;
  cohort.patients.reserve(spec.n_patients);

  int digits = 1;
  for (std::size_t n = spec.n_patients; n >= 10; n /= 10) ++digits;

  for (std::size_t pi = 0; pi < spec.n_patients; ++pi) {
    SyntheticPatient pat;
    {
      std::string num = std::to_string(pi);
      pat.patient_id = "P" + std::string(digits - static_cast<int>(num.size()), '0') + num;
    }
    pat.high_risk = pi % 2 == 0;

    // Phenotype counts: near-even base with a light jitter. The same draw
    // procedure, including the placement feasibility re-draw, runs for both
    // risk classes so the count distributions are identical.
    std::vector<std::size_t> counts;
    std::vector<detail::ZoneSplit> splits;
    for (int attempt = 0;; ++attempt) {
      if (attempt >= 1000)
        throw SpecError("synthetic: cannot place phenotypes with the requested separation on a " +
                        std::to_string(side) + "x" + std::to_string(side) + " grid");
      counts.assign(p, cells / p);
      for (std::size_t r = 0; r < cells % p; ++r) ++counts[r];
      const std::size_t jitter = std::max<std::size_t>(1, cells / 32);
      for (std::size_t j = 0; j < jitter; ++j) {
        const std::size_t from = rng.uniform_index(p);
        const std::size_t to = rng.uniform_index(p);
        const std::size_t keep = from < 2 ? 1 : 0;
        if (from != to && counts[from] > keep) {
          --counts[from];
          ++counts[to];
        }
      }
      if (counts[0] < 1 || counts[1] < 1) continue;
      splits = detail::feasible_splits(side, counts[0], counts[1]);
      if (!splits.empty()) break;
    }

    // Placement.
    std::vector<int> pheno(cells, -1);
    std::vector<std::size_t> rest_cells;
    if (pat.high_risk) {
      // Grow a connected blob of count_A + count_B cells and fill it
      // alternating A, B in growth order. Cell #2 is always a neighbor of
      // cell #1, so at least one A-B contact exists.
      const std::size_t blob_size = counts[0] + counts[1];
      std::vector<char> in_blob(cells, 0), in_frontier(cells, 0);
      std::vector<std::size_t> frontier, blob;
      std::size_t start = rng.uniform_index(cells);
      frontier.push_back(start);
      in_frontier[start] = 1;
      while (blob.size() < blob_size) {
        const std::size_t fi = rng.uniform_index(frontier.size());
        const std::size_t cell = frontier[fi];
        frontier[fi] = frontier.back();
        frontier.pop_back();
        in_frontier[cell] = 0;
        in_blob[cell] = 1;
        blob.push_back(cell);
        const std::size_t r = cell / side, c = cell % side;
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            const long long nr = static_cast<long long>(r) + dr;
            const long long nc = static_cast<long long>(c) + dc;
            if (nr < 0 || nc < 0 || nr >= static_cast<long long>(side) ||
                nc >= static_cast<long long>(side))
              continue;
            const std::size_t n = static_cast<std::size_t>(nr) * side +
                                  static_cast<std::size_t>(nc);
            if (!in_blob[n] && !in_frontier[n]) {
              frontier.push_back(n);
              in_frontier[n] = 1;
            }
          }
      }
      std::size_t a_left = counts[0], b_left = counts[1];
      bool next_a = counts[0] >= counts[1];
      for (std::size_t cell : blob) {
        int ph;
        if (a_left > 0 && (next_a || b_left == 0)) {
          ph = 0;
          --a_left;
        } else {
          ph = 1;
          --b_left;
        }
        next_a = !next_a;
        pheno[cell] = ph;
      }
      for (std::size_t cell = 0; cell < cells; ++cell)
        if (pheno[cell] < 0) rest_cells.push_back(cell);
    } else {
      const detail::ZoneSplit split = splits[rng.uniform_index(splits.size())];
      auto line_of = [&](std::size_t cell) {
        return split.horizontal ? cell / side : cell % side;
      };
      std::vector<std::size_t> a_zone, b_zone;
      for (std::size_t cell = 0; cell < cells; ++cell) {
        const std::size_t line = line_of(cell);
        if (line < split.a_lines)
          a_zone.push_back(cell);
        else if (line >= side - split.b_lines)
          b_zone.push_back(cell);
      }
      if (split.swap_ab) std::swap(a_zone, b_zone);
      rng.shuffle(a_zone);
      rng.shuffle(b_zone);
      for (std::size_t i = 0; i < counts[0]; ++i) pheno[a_zone[i]] = 0;
      for (std::size_t i = 0; i < counts[1]; ++i) pheno[b_zone[i]] = 1;
      for (std::size_t cell = 0; cell < cells; ++cell)
        if (pheno[cell] < 0) rest_cells.push_back(cell);
    }

    rng.shuffle(rest_cells);
    {
      std::size_t at = 0;
      for (std::size_t ph = 2; ph < p; ++ph)
        for (std::size_t i = 0; i < counts[ph]; ++i) pheno[rest_cells[at++]] = static_cast<int>(ph);
    }
    pat.phenotypes = pheno;

    // Coordinates: full grid, row-major ids, one slide per patient.
    pat.coords.patch_size = 256;
    pat.coords.entries.reserve(cells);
    for (std::size_t r = 0; r < side; ++r)
      for (std::size_t c = 0; c < side; ++c) {
        PatchCoordinate e;
        e.patch_id = static_cast<std::int64_t>(r * side + c);
        e.slide_id = pat.patient_id;
        e.x = static_cast<std::int64_t>(c) * pat.coords.patch_size;
        e.y = static_cast<std::int64_t>(r) * pat.coords.patch_size;
        pat.coords.entries.push_back(std::move(e));
      }

    pat.features = FeatureMatrix(cells, spec.feature_dim);
    for (std::size_t m = 0; m < cells; ++m) {
      const auto& centroid = centroids[static_cast<std::size_t>(pheno[m])];
      for (std::size_t j = 0; j < spec.feature_dim; ++j)
        pat.features(m, j) = static_cast<float>(centroid[j] + rng.normal(0.0, spec.noise_sigma));
    }

    const double mean_months = pat.high_risk ? 12.0 : 48.0;
    double t = rng.exponential(mean_months);
    bool censored = false;
    if (rng.uniform01() < 0.25) {
      t = rng.uniform(0.0, t);
      censored = true;
    }
    pat.label = SurvivalLabel(pat.patient_id, t, censored);

    cohort.patients.push_back(std::move(pat));
  }
  return cohort;
}

}  // namespace patchgraph
