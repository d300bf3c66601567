#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "patchgraph/coords.hpp"
#include "patchgraph/errors.hpp"
#include "patchgraph/fmat.hpp"
#include "patchgraph/io_util.hpp"
#include "patchgraph/tensor.hpp"

namespace patchgraph {

struct KnnConfig {
  std::size_t k = 8;  // spatial neighbors per node, squared Euclidean within a slide
};

struct NodePosition {
  std::int32_t slide = 0;  // index into WsiGraph::slide_names
  std::int64_t x = 0;
  std::int64_t y = 0;
};

// Undirected spatial graph over the patches of one patient. Edges are kept
// twice: a canonical sorted (src < dst) list and a CSR view with sorted
// neighbor lists. Immutable after construction.
struct WsiGraph {
  std::string patient_id;
  Tensor2 node_features;  // M x d
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  std::vector<NodePosition> node_coords;
  std::vector<std::string> slide_names;
  std::vector<std::int64_t> patch_ids;

  std::vector<std::size_t> adj_offsets;  // M + 1
  std::vector<std::uint32_t> adj;

  std::size_t num_nodes() const { return node_features.rows; }
  std::size_t num_edges() const { return edges.size(); }

  std::pair<const std::uint32_t*, const std::uint32_t*> neighbors(std::size_t v) const {
    return {adj.data() + adj_offsets[v], adj.data() + adj_offsets[v + 1]};
  }
  std::size_t degree(std::size_t v) const { return adj_offsets[v + 1] - adj_offsets[v]; }

  // Canonicalizes the edge list and rebuilds the CSR view.
  void finalize() {
    const std::size_t m = num_nodes();
    for (auto& e : edges) {
      if (e.first == e.second)
        throw ValidationError("graph: self-loop at node " + std::to_string(e.first));
      if (e.first >= m || e.second >= m)
        throw ValidationError("graph: edge endpoint out of range");
      if (e.first > e.second) std::swap(e.first, e.second);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    std::vector<std::size_t> deg(m, 0);
    for (const auto& e : edges) {
      ++deg[e.first];
      ++deg[e.second];
    }
    adj_offsets.assign(m + 1, 0);
    for (std::size_t v = 0; v < m; ++v) adj_offsets[v + 1] = adj_offsets[v] + deg[v];
    adj.assign(adj_offsets[m], 0);
    std::vector<std::size_t> cursor(adj_offsets.begin(), adj_offsets.end() - 1);
    for (const auto& e : edges) {
      adj[cursor[e.first]++] = e.second;
      adj[cursor[e.second]++] = e.first;
    }
    for (std::size_t v = 0; v < m; ++v)
      std::sort(adj.begin() + static_cast<std::ptrdiff_t>(adj_offsets[v]),
                adj.begin() + static_cast<std::ptrdiff_t>(adj_offsets[v + 1]));
  }
};

namespace detail {

inline std::int64_t sq_dist(std::int64_t ax, std::int64_t ay, std::int64_t bx, std::int64_t by) {
  const std::int64_t dx = ax - bx;
  const std::int64_t dy = ay - by;
  return dx * dx + dy * dy;
}

// Exact k nearest neighbors among `members` for every member, squared
// Euclidean distance with ties broken by smaller node index. Uniform-grid
// spatial hash with expanding ring search; exactness comes from the ring
// lower bound, the grid only orders the scan.
inline void knn_within_slide(const std::vector<std::uint32_t>& members,
                             const std::vector<std::int64_t>& xs,
                             const std::vector<std::int64_t>& ys, std::size_t k,
                             std::vector<std::pair<std::uint32_t, std::uint32_t>>& out_edges) {
  const std::size_t n = members.size();
  if (n < 2 || k == 0) return;
  const std::size_t k_eff = std::min(k, n - 1);

  std::int64_t min_x = xs[members[0]], max_x = min_x;
  std::int64_t min_y = ys[members[0]], max_y = min_y;
  for (auto m : members) {
    min_x = std::min(min_x, xs[m]);
    max_x = std::max(max_x, xs[m]);
    min_y = std::min(min_y, ys[m]);
    max_y = std::max(max_y, ys[m]);
  }
  const double extent = static_cast<double>(std::max(max_x - min_x, max_y - min_y)) + 1.0;
  const double cell = std::max(1.0, extent / std::ceil(std::sqrt(static_cast<double>(n))));
  const std::size_t grid_w =
      static_cast<std::size_t>(static_cast<double>(max_x - min_x) / cell) + 1;
  const std::size_t grid_h =
      static_cast<std::size_t>(static_cast<double>(max_y - min_y) / cell) + 1;

  auto cell_of = [&](std::uint32_t node) {
    const std::size_t cx = static_cast<std::size_t>(static_cast<double>(xs[node] - min_x) / cell);
    const std::size_t cy = static_cast<std::size_t>(static_cast<double>(ys[node] - min_y) / cell);
    return std::pair<std::size_t, std::size_t>(cx, cy);
  };

  // Bucket members by cell (CSR over cells).
  std::vector<std::size_t> counts(grid_w * grid_h + 1, 0);
  for (auto m : members) {
    auto [cx, cy] = cell_of(m);
    ++counts[cy * grid_w + cx + 1];
  }
  for (std::size_t i = 1; i < counts.size(); ++i) counts[i] += counts[i - 1];
  std::vector<std::uint32_t> bucket(n);
  {
    std::vector<std::size_t> cursor(counts.begin(), counts.end() - 1);
    for (auto m : members) {
      auto [cx, cy] = cell_of(m);
      bucket[cursor[cy * grid_w + cx]++] = m;
    }
  }

  using Cand = std::pair<std::int64_t, std::uint32_t>;  // (squared distance, index)
  std::vector<Cand> heap;  // max-heap: worst candidate on top
  heap.reserve(k_eff + 1);

  for (auto q : members) {
    heap.clear();
    auto [qcx, qcy] = cell_of(q);
    const std::size_t max_ring = std::max(grid_w, grid_h);
    for (std::size_t ring = 0; ring <= max_ring; ++ring) {
      if (heap.size() == k_eff) {
        // Points in cells at Chebyshev cell distance `ring` are at least
        // (ring - 1) * cell away from the query point.
        const double lb = (static_cast<double>(ring) - 1.0) * cell;
        if (lb > 0.0 && lb * lb > static_cast<double>(heap.front().first)) break;
      }
      const long long r = static_cast<long long>(ring);
      for (long long dy = -r; dy <= r; ++dy) {
        const long long cy = static_cast<long long>(qcy) + dy;
        if (cy < 0 || cy >= static_cast<long long>(grid_h)) continue;
        const bool edge_row = std::abs(dy) == r;
        const long long step = edge_row ? 1 : 2 * r;
        for (long long dx = -r; dx <= r; dx += step == 0 ? 1 : step) {
          const long long cx = static_cast<long long>(qcx) + dx;
          if (cx < 0 || cx >= static_cast<long long>(grid_w)) continue;
          const std::size_t ci = static_cast<std::size_t>(cy) * grid_w +
                                 static_cast<std::size_t>(cx);
          for (std::size_t bi = counts[ci]; bi < counts[ci + 1]; ++bi) {
            const std::uint32_t cand = bucket[bi];
            if (cand == q) continue;
            const Cand c{detail::sq_dist(xs[q], ys[q], xs[cand], ys[cand]), cand};
            if (heap.size() < k_eff) {
              heap.push_back(c);
              std::push_heap(heap.begin(), heap.end());
            } else if (c < heap.front()) {
              std::pop_heap(heap.begin(), heap.end());
              heap.back() = c;
              std::push_heap(heap.begin(), heap.end());
            }
          }
          if (r == 0) break;
        }
      }
    }
    for (const auto& c : heap)
      out_edges.emplace_back(std::min(q, c.second), std::max(q, c.second));
  }
}

}  // namespace detail

namespace detail {

// Fills nodes, coordinates and slide grouping; leaves edges empty.
inline WsiGraph init_graph_nodes(const PatchCoordinateSet& coords, const FeatureMatrix& features,
                                 const std::string& patient_id, const char* op,
                                 std::vector<std::vector<std::uint32_t>>* slide_members_out) {
  if (coords.size() == 0) throw EmptyGraphError(std::string(op) + ": zero nodes");
  if (features.rows != coords.size())
    throw ShapeError(std::string(op) + ": " + std::to_string(coords.size()) +
                     " coordinates but feature matrix has " + std::to_string(features.rows) +
                     " rows");

  WsiGraph g;
  g.patient_id = patient_id;
  g.node_features = features.to_tensor();

  const std::size_t n = coords.size();
  std::map<std::string, std::int32_t> slide_index;
  g.node_coords.resize(n);
  g.patch_ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = coords.entries[i];
    auto [it, inserted] = slide_index.try_emplace(
        e.slide_id, static_cast<std::int32_t>(g.slide_names.size()));
    if (inserted) {
      g.slide_names.push_back(e.slide_id);
      if (slide_members_out) slide_members_out->emplace_back();
    }
    g.node_coords[i] = {it->second, e.x, e.y};
    g.patch_ids[i] = e.patch_id;
    if (slide_members_out)
      (*slide_members_out)[static_cast<std::size_t>(it->second)].push_back(
          static_cast<std::uint32_t>(i));
  }
  return g;
}

}  // namespace detail

// Spatial k-NN graph over one patient's patches. Neighbors are found within
// each slide only; the directed k-NN relation is symmetrized.
inline WsiGraph build_knn_graph(const PatchCoordinateSet& coords, const FeatureMatrix& features,
                                const KnnConfig& cfg, const std::string& patient_id = "") {
  if (cfg.k < 1) throw ValidationError("build_knn_graph: k must be >= 1");
  std::vector<std::vector<std::uint32_t>> slide_members;
  WsiGraph g = detail::init_graph_nodes(coords, features, patient_id, "build_knn_graph",
                                        &slide_members);
  const std::size_t n = coords.size();
  std::vector<std::int64_t> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = coords.entries[i].x;
    ys[i] = coords.entries[i].y;
  }
  for (const auto& members : slide_members)
    detail::knn_within_slide(members, xs, ys, cfg.k, g.edges);
  g.finalize();
  return g;
}

// DeepGraphConv-style baseline: k-NN by squared Euclidean distance in
// feature space, brute force, slide boundaries ignored. Desk scale only.
inline WsiGraph build_feature_space_graph(const PatchCoordinateSet& coords,
                                          const FeatureMatrix& features, const KnnConfig& cfg,
                                          const std::string& patient_id = "") {
  if (cfg.k < 1) throw ValidationError("build_feature_space_graph: k must be >= 1");
  WsiGraph g = detail::init_graph_nodes(coords, features, patient_id,
                                        "build_feature_space_graph", nullptr);
  const std::size_t n = features.rows;
  const std::size_t k_eff = std::min(cfg.k, n - 1);
  using Cand = std::pair<double, std::uint32_t>;
  std::vector<Cand> heap;
  for (std::uint32_t i = 0; i < n; ++i) {
    heap.clear();
    for (std::uint32_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double d2 = 0.0;
      for (std::size_t c = 0; c < features.cols; ++c) {
        const double d = static_cast<double>(features(i, c)) - features(j, c);
        d2 += d * d;
      }
      const Cand cand{d2, j};
      if (heap.size() < k_eff) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end());
      } else if (cand < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end());
      }
    }
    for (const auto& c : heap) g.edges.emplace_back(std::min(i, c.second), std::max(i, c.second));
  }
  g.finalize();
  return g;
}

// Disjoint union of per-slide subgraphs of one patient.
inline WsiGraph merge_patient_graph(const std::vector<WsiGraph>& subgraphs) {
  if (subgraphs.empty()) throw EmptyGraphError("merge_patient_graph: empty subgraph list");
  const std::string& pid = subgraphs.front().patient_id;
  const std::size_t dim = subgraphs.front().node_features.cols;
  std::size_t total = 0, total_edges = 0;
  for (const auto& sg : subgraphs) {
    if (sg.patient_id != pid)
      throw ValidationError("merge_patient_graph: mixed patient ids '" + pid + "' and '" +
                            sg.patient_id + "'");
    if (sg.node_features.cols != dim)
      throw ValidationError("merge_patient_graph: feature dim mismatch " + std::to_string(dim) +
                            " vs " + std::to_string(sg.node_features.cols));
    total += sg.num_nodes();
    total_edges += sg.num_edges();
  }

  WsiGraph g;
  g.patient_id = pid;
  g.node_features = Tensor2(total, dim);
  g.edges.reserve(total_edges);
  g.node_coords.reserve(total);
  g.patch_ids.reserve(total);
  std::uint32_t offset = 0;
  for (const auto& sg : subgraphs) {
    const std::int32_t slide_base = static_cast<std::int32_t>(g.slide_names.size());
    for (const auto& s : sg.slide_names) g.slide_names.push_back(s);
    std::copy(sg.node_features.data.begin(), sg.node_features.data.end(),
              g.node_features.data.begin() + static_cast<std::ptrdiff_t>(offset * dim));
    for (const auto& nc : sg.node_coords)
      g.node_coords.push_back({nc.slide + slide_base, nc.x, nc.y});
    for (auto pid_ : sg.patch_ids) g.patch_ids.push_back(pid_);
    for (const auto& e : sg.edges) g.edges.emplace_back(e.first + offset, e.second + offset);
    offset += static_cast<std::uint32_t>(sg.num_nodes());
  }
  g.finalize();
  return g;
}

// Nodes within `hops` edges of `node`, including the node itself.
inline std::vector<std::uint32_t> hop_neighborhood(const WsiGraph& g, std::size_t node,
                                                   std::size_t hops) {
  if (node >= g.num_nodes())
    throw IndexError("hop_neighborhood: node " + std::to_string(node) + " out of range [0, " +
                     std::to_string(g.num_nodes()) + ")");
  std::vector<char> seen(g.num_nodes(), 0);
  std::vector<std::uint32_t> result;
  std::deque<std::pair<std::uint32_t, std::size_t>> queue;
  seen[node] = 1;
  queue.emplace_back(static_cast<std::uint32_t>(node), 0);
  result.push_back(static_cast<std::uint32_t>(node));
  while (!queue.empty()) {
    auto [v, d] = queue.front();
    queue.pop_front();
    if (d == hops) continue;
    auto [it, end] = g.neighbors(v);
    for (; it != end; ++it) {
      if (!seen[*it]) {
        seen[*it] = 1;
        result.push_back(*it);
        queue.emplace_back(*it, d + 1);
      }
    }
  }
  std::sort(result.begin(), result.end());
  return result;
}

inline std::vector<std::size_t> degree_histogram(const WsiGraph& g) {
  std::size_t max_deg = 0;
  for (std::size_t v = 0; v < g.num_nodes(); ++v) max_deg = std::max(max_deg, g.degree(v));
  std::vector<std::size_t> hist(max_deg + 1, 0);
  for (std::size_t v = 0; v < g.num_nodes(); ++v) ++hist[g.degree(v)];
  return hist;
}

inline std::string edges_to_csv(const WsiGraph& g) {
  std::string out = "src,dst\n";
  for (const auto& e : g.edges) {
    out += std::to_string(e.first);
    out += ',';
    out += std::to_string(e.second);
    out += '\n';
  }
  return out;
}

inline void write_graph_csv(const WsiGraph& g, const std::string& path) {
  atomic_write_file(path, edges_to_csv(g));
}

inline std::vector<std::pair<std::uint32_t, std::uint32_t>> read_edges_csv(
    const std::string& path) {
  auto lines = read_lines(path);
  if (lines.empty() || lines[0] != "src,dst")
    throw FormatError(path + ": expected header 'src,dst'");
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto fields = split_csv_line(lines[i]);
    if (fields.size() != 2)
      throw FormatError(path + ":" + std::to_string(i + 1) + ": expected 2 fields");
    const long long s = parse_int(fields[0], path);
    const long long d = parse_int(fields[1], path);
    if (s < 0 || d < 0 || s == d)
      throw FormatError(path + ":" + std::to_string(i + 1) + ": invalid edge");
    edges.emplace_back(static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(d));
  }
  return edges;
}

}  // namespace patchgraph
