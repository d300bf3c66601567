#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "patchgraph/errors.hpp"
#include "patchgraph/graph.hpp"
#include "patchgraph/tensor.hpp"

namespace patchgraph {

struct ValueId {
  std::uint32_t idx = 0;
};

// Reverse-mode tape over Tensor2 values. Each primitive records its output
// value and a closure that pushes the output gradient back into its input
// gradients. One tape serves one forward expression; gradients exist after
// backward() and accumulate (+=) so shared subexpressions combine correctly.
class Tape {
 public:
  ValueId input(Tensor2 v) { return push(std::move(v), nullptr); }
  ValueId input(const Tensor2& v) { return push(Tensor2(v), nullptr); }

  const Tensor2& value(ValueId id) const { return nodes_[id.idx].value; }

  const Tensor2& grad(ValueId id) const {
    if (!backward_done_) throw NumericError("tape: grad read before backward()");
    return grads_[id.idx];
  }

  std::size_t size() const { return nodes_.size(); }

  ValueId matmul(ValueId a, ValueId b) {
    const Tensor2& A = value(a);
    const Tensor2& B = value(b);
    if (A.cols != B.rows)
      throw ShapeError("matmul: " + A.shape_str() + " x " + B.shape_str());
    Tensor2 out(A.rows, B.cols);
    matmul_acc(A, B, out);
    return push(std::move(out), [a, b](Tape& t, ValueId self) {
      const Tensor2& g = t.grads_[self.idx];
      matmul_a_bt_acc(g, t.value(b), t.grads_[a.idx]);   // dA += G * B^T
      matmul_at_b_acc(t.value(a), g, t.grads_[b.idx]);   // dB += A^T * G
    });
  }

  ValueId add(ValueId a, ValueId b) {
    const Tensor2& A = value(a);
    const Tensor2& B = value(b);
    require_same_shape(A, B, "add");
    Tensor2 out(A.rows, A.cols);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = A.data[i] + B.data[i];
    return push(std::move(out), [a, b](Tape& t, ValueId self) {
      const Tensor2& g = t.grads_[self.idx];
      accumulate(t.grads_[a.idx], g);
      accumulate(t.grads_[b.idx], g);
    });
  }

  // m (M x d) plus a (1 x d) row broadcast over rows.
  ValueId add_broadcast_row(ValueId m, ValueId r) {
    const Tensor2& M = value(m);
    const Tensor2& R = value(r);
    if (R.rows != 1 || R.cols != M.cols)
      throw ShapeError("add_broadcast_row: " + M.shape_str() + " + " + R.shape_str());
    Tensor2 out(M.rows, M.cols);
    for (std::size_t i = 0; i < M.rows; ++i)
      for (std::size_t j = 0; j < M.cols; ++j) out(i, j) = M(i, j) + R(0, j);
    return push(std::move(out), [m, r](Tape& t, ValueId self) {
      const Tensor2& g = t.grads_[self.idx];
      accumulate(t.grads_[m.idx], g);
      Tensor2& gr = t.grads_[r.idx];
      for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < g.cols; ++j) gr(0, j) += g(i, j);
    });
  }

  ValueId add_scalar(ValueId a, double c) {
    const Tensor2& A = value(a);
    Tensor2 out(A.rows, A.cols);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = A.data[i] + c;
    return push(std::move(out), [a](Tape& t, ValueId self) {
      accumulate(t.grads_[a.idx], t.grads_[self.idx]);
    });
  }

  ValueId scale(ValueId a, double c) {
    const Tensor2& A = value(a);
    Tensor2 out(A.rows, A.cols);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = c * A.data[i];
    return push(std::move(out), [a, c](Tape& t, ValueId self) {
      const Tensor2& g = t.grads_[self.idx];
      Tensor2& ga = t.grads_[a.idx];
      for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += c * g.data[i];
    });
  }

  ValueId mul(ValueId a, ValueId b) {
    const Tensor2& A = value(a);
    const Tensor2& B = value(b);
    require_same_shape(A, B, "mul");
    Tensor2 out(A.rows, A.cols);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = A.data[i] * B.data[i];
    return push(std::move(out), [a, b](Tape& t, ValueId self) {
      const Tensor2& g = t.grads_[self.idx];
      Tensor2& ga = t.grads_[a.idx];
      Tensor2& gb = t.grads_[b.idx];
      const Tensor2& A2 = t.value(a);
      const Tensor2& B2 = t.value(b);
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        ga.data[i] += g.data[i] * B2.data[i];
        gb.data[i] += g.data[i] * A2.data[i];
      }
    });
  }

  // Gradient at exactly 0 is defined as 0.
  ValueId relu(ValueId a) {
    const Tensor2& A = value(a);
    Tensor2 out(A.rows, A.cols);
    for (std::size_t i = 0; i < out.data.size(); ++i)
      out.data[i] = A.data[i] > 0.0 ? A.data[i] : 0.0;
    return push(std::move(out), [a](Tape& t, ValueId self) {
      const Tensor2& g = t.grads_[self.idx];
      const Tensor2& A2 = t.value(a);
      Tensor2& ga = t.grads_[a.idx];
      for (std::size_t i = 0; i < g.data.size(); ++i)
        if (A2.data[i] > 0.0) ga.data[i] += g.data[i];
    });
  }

  ValueId tanh_act(ValueId a) {
    const Tensor2& A = value(a);
    Tensor2 out(A.rows, A.cols);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::tanh(A.data[i]);
    return push(std::move(out), [a](Tape& t, ValueId self) {
      const Tensor2& g = t.grads_[self.idx];
      const Tensor2& y = t.nodes_[self.idx].value;
      Tensor2& ga = t.grads_[a.idx];
      for (std::size_t i = 0; i < g.data.size(); ++i)
        ga.data[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]);
    });
  }

  ValueId sigmoid(ValueId a) {
    const Tensor2& A = value(a);
    Tensor2 out(A.rows, A.cols);
    for (std::size_t i = 0; i < out.data.size(); ++i)
      out.data[i] = 1.0 / (1.0 + std::exp(-A.data[i]));
    return push(std::move(out), [a](Tape& t, ValueId self) {
      const Tensor2& g = t.grads_[self.idx];
      const Tensor2& y = t.nodes_[self.idx].value;
      Tensor2& ga = t.grads_[a.idx];
      for (std::size_t i = 0; i < g.data.size(); ++i)
        ga.data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
    });
  }

  ValueId exp_elem(ValueId a) {
    const Tensor2& A = value(a);
    Tensor2 out(A.rows, A.cols);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::exp(A.data[i]);
    return push(std::move(out), [a](Tape& t, ValueId self) {
      const Tensor2& g = t.grads_[self.idx];
      const Tensor2& y = t.nodes_[self.idx].value;
      Tensor2& ga = t.grads_[a.idx];
      for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * y.data[i];
    });
  }

  ValueId log_elem(ValueId a) {
    const Tensor2& A = value(a);
    Tensor2 out(A.rows, A.cols);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::log(A.data[i]);
    return push(std::move(out), [a](Tape& t, ValueId self) {
      const Tensor2& g = t.grads_[self.idx];
      const Tensor2& A2 = t.value(a);
      Tensor2& ga = t.grads_[a.idx];
      for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] / A2.data[i];
    });
  }

  // Gradient passes only strictly inside (lo, hi).
  ValueId clamp(ValueId a, double lo, double hi) {
    const Tensor2& A = value(a);
    Tensor2 out(A.rows, A.cols);
    for (std::size_t i = 0; i < out.data.size(); ++i)
      out.data[i] = std::min(hi, std::max(lo, A.data[i]));
    return push(std::move(out), [a, lo, hi](Tape& t, ValueId self) {
      const Tensor2& g = t.grads_[self.idx];
      const Tensor2& A2 = t.value(a);
      Tensor2& ga = t.grads_[a.idx];
      for (std::size_t i = 0; i < g.data.size(); ++i)
        if (A2.data[i] > lo && A2.data[i] < hi) ga.data[i] += g.data[i];
    });
  }

  // Numerically stable per-row softmax (max subtraction).
  ValueId rowwise_softmax(ValueId a) {
    const Tensor2& A = value(a);
    Tensor2 out(A.rows, A.cols);
    for (std::size_t i = 0; i < A.rows; ++i) {
      double mx = A(i, 0);
      for (std::size_t j = 1; j < A.cols; ++j) mx = std::max(mx, A(i, j));
      double sum = 0.0;
      for (std::size_t j = 0; j < A.cols; ++j) {
        out(i, j) = std::exp(A(i, j) - mx);
        sum += out(i, j);
      }
      const double inv = 1.0 / sum;
      for (std::size_t j = 0; j < A.cols; ++j) out(i, j) *= inv;
    }
    return push(std::move(out), [a](Tape& t, ValueId self) {
      const Tensor2& g = t.grads_[self.idx];
      const Tensor2& y = t.nodes_[self.idx].value;
      Tensor2& ga = t.grads_[a.idx];
      for (std::size_t i = 0; i < g.rows; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < g.cols; ++j) dot += g(i, j) * y(i, j);
        for (std::size_t j = 0; j < g.cols; ++j)
          ga(i, j) += y(i, j) * (g(i, j) - dot);
      }
    });
  }

  ValueId transpose(ValueId a) {
    const Tensor2& A = value(a);
    Tensor2 out(A.cols, A.rows);
    for (std::size_t i = 0; i < A.rows; ++i)
      for (std::size_t j = 0; j < A.cols; ++j) out(j, i) = A(i, j);
    return push(std::move(out), [a](Tape& t, ValueId self) {
      const Tensor2& g = t.grads_[self.idx];
      Tensor2& ga = t.grads_[a.idx];
      for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < g.cols; ++j) ga(j, i) += g(i, j);
    });
  }

  ValueId concat_cols(std::span<const ValueId> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    if (parts.size() == 1) return parts[0];
    const std::size_t rows = value(parts[0]).rows;
    std::size_t cols = 0;
    for (ValueId p : parts) {
      if (value(p).rows != rows)
        throw ShapeError("concat_cols: row mismatch " + std::to_string(rows) + " vs " +
                         value(p).shape_str());
      cols += value(p).cols;
    }
    Tensor2 out(rows, cols);
    std::size_t at = 0;
    for (ValueId p : parts) {
      const Tensor2& A = value(p);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < A.cols; ++j) out(i, at + j) = A(i, j);
      at += A.cols;
    }
    std::vector<ValueId> owned(parts.begin(), parts.end());
    return push(std::move(out), [owned](Tape& t, ValueId self) {
      const Tensor2& g = t.grads_[self.idx];
      std::size_t at = 0;
      for (ValueId p : owned) {
        Tensor2& gp = t.grads_[p.idx];
        for (std::size_t i = 0; i < g.rows; ++i)
          for (std::size_t j = 0; j < gp.cols; ++j) gp(i, j) += g(i, at + j);
        at += gp.cols;
      }
    });
  }

  ValueId sum_all(ValueId a) {
    const Tensor2& A = value(a);
    double s = 0.0;
    for (double v : A.data) s += v;
    Tensor2 out(1, 1);
    out.data[0] = s;
    return push(std::move(out), [a](Tape& t, ValueId self) {
      const double g = t.grads_[self.idx].data[0];
      Tensor2& ga = t.grads_[a.idx];
      for (double& v : ga.data) v += g;
    });
  }

  ValueId mean_all(ValueId a) {
    const Tensor2& A = value(a);
    const double inv = 1.0 / static_cast<double>(A.size());
    double s = 0.0;
    for (double v : A.data) s += v;
    Tensor2 out(1, 1);
    out.data[0] = s * inv;
    return push(std::move(out), [a, inv](Tape& t, ValueId self) {
      const double g = t.grads_[self.idx].data[0] * inv;
      Tensor2& ga = t.grads_[a.idx];
      for (double& v : ga.data) v += g;
    });
  }

  // x * W + broadcast bias row.
  ValueId affine(ValueId x, ValueId w, ValueId b) {
    const Tensor2& X = value(x);
    const Tensor2& W = value(w);
    const Tensor2& B = value(b);
    if (X.cols != W.rows || B.rows != 1 || B.cols != W.cols)
      throw ShapeError("affine: x " + X.shape_str() + ", w " + W.shape_str() + ", b " +
                       B.shape_str());
    Tensor2 out(X.rows, W.cols);
    for (std::size_t i = 0; i < out.rows; ++i)
      for (std::size_t j = 0; j < out.cols; ++j) out(i, j) = B(0, j);
    matmul_acc(X, W, out);
    return push(std::move(out), [x, w, b](Tape& t, ValueId self) {
      const Tensor2& g = t.grads_[self.idx];
      matmul_a_bt_acc(g, t.value(w), t.grads_[x.idx]);
      matmul_at_b_acc(t.value(x), g, t.grads_[w.idx]);
      Tensor2& gb = t.grads_[b.idx];
      for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < g.cols; ++j) gb(0, j) += g(i, j);
    });
  }

  // Per-node, per-channel softmax-weighted combination of neighbor rows:
  //   out[v][c] = sum_{u in N(v)} softmax_u(beta * msg[u][c]) * msg[u][c]
  // A node without neighbors aggregates its own row, so the result is
  // defined for every graph. The graph must outlive the tape.
  ValueId neighbor_softmax_aggregate(ValueId msg, const WsiGraph* graph, double beta) {
    const Tensor2& Msg = value(msg);
    if (Msg.rows != graph->num_nodes())
      throw ShapeError("neighbor_softmax_aggregate: " + std::to_string(graph->num_nodes()) +
                       " nodes but message matrix is " + Msg.shape_str());
    const std::size_t m = Msg.rows, d = Msg.cols;
    Tensor2 out(m, d);
    {
      const double* pm = Msg.data.data();
      double* po = out.data.data();
#pragma omp parallel for schedule(static) if (m >= 4096)
      for (std::size_t v = 0; v < m; ++v) {
        auto [it, end] = graph->neighbors(v);
        const std::uint32_t self_idx = static_cast<std::uint32_t>(v);
        const std::uint32_t* nb = it;
        std::size_t deg = static_cast<std::size_t>(end - it);
        if (deg == 0) {
          nb = &self_idx;
          deg = 1;
        }
        double* orow = po + v * d;
        for (std::size_t c = 0; c < d; ++c) {
          double mx = pm[static_cast<std::size_t>(nb[0]) * d + c];
          for (std::size_t u = 1; u < deg; ++u)
            mx = std::max(mx, pm[static_cast<std::size_t>(nb[u]) * d + c]);
          double z = 0.0, acc = 0.0;
          for (std::size_t u = 0; u < deg; ++u) {
            const double x = pm[static_cast<std::size_t>(nb[u]) * d + c];
            const double e = std::exp(beta * (x - mx));
            z += e;
            acc += e * x;
          }
          orow[c] = acc / z;
        }
      }
    }
    return push(std::move(out), [msg, graph, beta](Tape& t, ValueId self) {
      const Tensor2& g = t.grads_[self.idx];
      const Tensor2& Msg2 = t.value(msg);
      const Tensor2& Out = t.nodes_[self.idx].value;
      Tensor2& gm = t.grads_[msg.idx];
      const std::size_t d = Msg2.cols;
      for (std::size_t v = 0; v < Msg2.rows; ++v) {
        auto [it, end] = graph->neighbors(v);
        const std::uint32_t self_idx = static_cast<std::uint32_t>(v);
        const std::uint32_t* nb = it;
        std::size_t deg = static_cast<std::size_t>(end - it);
        if (deg == 0) {
          nb = &self_idx;
          deg = 1;
        }
        for (std::size_t c = 0; c < d; ++c) {
          const double gv = g(v, c);
          if (gv == 0.0) continue;
          double mx = Msg2(nb[0], c);
          for (std::size_t u = 1; u < deg; ++u) mx = std::max(mx, Msg2(nb[u], c));
          double z = 0.0;
          for (std::size_t u = 0; u < deg; ++u)
            z += std::exp(beta * (Msg2(nb[u], c) - mx));
          const double ov = Out(v, c);
          for (std::size_t u = 0; u < deg; ++u) {
            const double x = Msg2(nb[u], c);
            const double w = std::exp(beta * (x - mx)) / z;
            gm(nb[u], c) += gv * w * (1.0 + beta * (x - ov));
          }
        }
      }
    });
  }

  // Discrete survival negative log likelihood from a 1 x n_bins hazard row.
  //   event in bin b:      -log h_b - sum_{s < b} log(1 - h_s)
  //   censored in bin b:   -sum_{s <= b} log(1 - h_s)
  ValueId survival_nll(ValueId hazards, int bin, bool censored) {
    const Tensor2& H = value(hazards);
    if (H.rows != 1) throw ShapeError("survival_nll: hazards must be 1 x n_bins");
    if (bin < 0 || static_cast<std::size_t>(bin) >= H.cols)
      throw IndexError("survival_nll: bin " + std::to_string(bin) + " out of [0, " +
                       std::to_string(H.cols) + ")");
    for (double h : H.data)
      if (!(h > 0.0 && h < 1.0))
        throw NumericError("survival_nll: hazard outside (0,1): " + std::to_string(h));
    double loss = 0.0;
    const std::size_t b = static_cast<std::size_t>(bin);
    if (censored) {
      for (std::size_t s = 0; s <= b; ++s) loss -= std::log(1.0 - H.data[s]);
    } else {
      loss -= std::log(H.data[b]);
      for (std::size_t s = 0; s < b; ++s) loss -= std::log(1.0 - H.data[s]);
    }
    Tensor2 out(1, 1);
    out.data[0] = loss;
    return push(std::move(out), [hazards, bin, censored](Tape& t, ValueId self) {
      const double g = t.grads_[self.idx].data[0];
      const Tensor2& H2 = t.value(hazards);
      Tensor2& gh = t.grads_[hazards.idx];
      const std::size_t b = static_cast<std::size_t>(bin);
      if (censored) {
        for (std::size_t s = 0; s <= b; ++s) gh.data[s] += g / (1.0 - H2.data[s]);
      } else {
        gh.data[b] -= g / H2.data[b];
        for (std::size_t s = 0; s < b; ++s) gh.data[s] += g / (1.0 - H2.data[s]);
      }
    });
  }

  // Seeds d(seed)/d(seed) = 1 and sweeps the tape in reverse.
  void backward(ValueId seed) {
    if (value(seed).size() != 1)
      throw ShapeError("backward: seed must be a 1x1 scalar, got " + value(seed).shape_str());
    grads_.clear();
    grads_.reserve(nodes_.size());
    for (const auto& n : nodes_) grads_.emplace_back(n.value.rows, n.value.cols);
    grads_[seed.idx].data[0] = 1.0;
    backward_done_ = true;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      if (nodes_[i].back) nodes_[i].back(*this, ValueId{static_cast<std::uint32_t>(i)});
    }
  }

 private:
  using BackFn = std::function<void(Tape&, ValueId)>;

  struct Node {
    Tensor2 value;
    BackFn back;
  };

  static void accumulate(Tensor2& dst, const Tensor2& src) {
    for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
  }

  ValueId push(Tensor2 v, BackFn back) {
#ifndef NDEBUG
    if (!v.all_finite()) throw NumericError("tape: non-finite value in forward pass");
#endif
    nodes_.push_back(Node{std::move(v), std::move(back)});
    return ValueId{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  std::vector<Node> nodes_;
  std::vector<Tensor2> grads_;
  bool backward_done_ = false;
};

}  // namespace patchgraph
