#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "patchgraph/autodiff.hpp"
#include "patchgraph/errors.hpp"
#include "patchgraph/graph.hpp"
#include "patchgraph/optim.hpp"
#include "patchgraph/rng.hpp"

namespace patchgraph {

struct ModelConfig {
  std::size_t feature_dim = 64;
  std::size_t d_model = 128;
  std::size_t d_attn = 128;
  std::size_t layers = 4;
  std::size_t n_bins = 4;
  double beta = 1.0;      // inverse temperature of the neighbor softmax
  double epsilon = 1e-7;  // message positivity constant
  double logit_clamp = 30.0;
  bool include_input_skip = true;  // projected input joins the dense concat
  bool gated_attention = false;

  std::size_t d_cat() const {
    return (layers + (include_input_skip ? 1 : 0)) * d_model;
  }

  void validate() const {
    if (feature_dim < 1 || d_model < 1 || d_attn < 1 || n_bins < 1)
      throw ConfigError("model: dimensions must be >= 1");
    if (!(beta > 0.0)) throw ConfigError("model: beta must be > 0");
    if (!(epsilon > 0.0)) throw ConfigError("model: epsilon must be > 0");
    if (layers == 0 && !include_input_skip)
      throw ConfigError("model: zero layers without the input skip leaves an empty representation");
  }
};

// Message construction: ReLU(h_u + h_e when present) + epsilon.
// The pipeline carries no edge features; the edge branch exists for
// completeness and is exercised by unit tests only.
inline std::vector<double> message_construct_phi(const std::vector<double>& h_u,
                                                 const std::vector<double>* h_edge,
                                                 double epsilon = 1e-7) {
  if (h_edge && h_edge->size() != h_u.size())
    throw ShapeError("message_construct_phi: node dim " + std::to_string(h_u.size()) +
                     " vs edge dim " + std::to_string(h_edge->size()));
  std::vector<double> out(h_u.size());
  for (std::size_t i = 0; i < h_u.size(); ++i) {
    const double x = h_u[i] + (h_edge ? (*h_edge)[i] : 0.0);
    out[i] = (x > 0.0 ? x : 0.0) + epsilon;
  }
  return out;
}

// Per-channel softmax aggregation across messages. Each output channel is a
// convex combination of that channel across the inputs.
inline std::vector<double> softmax_aggregate_rho(const std::vector<std::vector<double>>& messages,
                                                 double beta) {
  if (messages.empty()) throw ValidationError("softmax_aggregate_rho: no messages");
  if (!(beta > 0.0)) throw ValidationError("softmax_aggregate_rho: beta must be > 0");
  const std::size_t d = messages.front().size();
  for (const auto& m : messages)
    if (m.size() != d) throw ShapeError("softmax_aggregate_rho: ragged message dims");
  std::vector<double> out(d);
  for (std::size_t c = 0; c < d; ++c) {
    double mx = messages[0][c];
    for (const auto& m : messages) mx = std::max(mx, m[c]);
    double z = 0.0, acc = 0.0;
    for (const auto& m : messages) {
      const double e = std::exp(beta * (m[c] - mx));
      z += e;
      acc += e * m[c];
    }
    out[c] = acc / z;
  }
  return out;
}

struct GcnLayerParams {
  Parameter w1, b1, w2, b2;  // update MLP, hidden width = channel width
};

// Ids of the interesting tape nodes of one forward pass.
struct ForwardIds {
  ValueId features;
  ValueId x0;
  std::vector<ValueId> layer_out;
  ValueId h_cat;
  ValueId attention;  // 1 x M
  ValueId h_bag;      // 1 x d_cat
  ValueId logits;     // 1 x n_bins, clamped
  ValueId hazards;    // 1 x n_bins
};

// Everything a caller needs from one patient forward pass.
struct ForwardTrace {
  std::vector<double> attention;
  std::vector<double> hazards;
  std::vector<double> survival;
  double risk = 0.0;
};

inline std::vector<double> survival_curve_from_hazards(const std::vector<double>& hazards) {
  std::vector<double> s(hazards.size());
  double run = 1.0;
  for (std::size_t t = 0; t < hazards.size(); ++t) {
    run *= 1.0 - hazards[t];
    s[t] = run;
  }
  return s;
}

inline double risk_from_hazards(const std::vector<double>& hazards) {
  double risk = 0.0;
  for (double s : survival_curve_from_hazards(hazards)) risk -= s;
  return risk;
}

class GcnModel {
 public:
  GcnModel(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    std::uint64_t salt = 0;
    auto next_seed = [&] { return derive_seed(seed, salt++); };
    auto weight = [&](const std::string& name, std::size_t r, std::size_t c) {
      Parameter p(name, r, c);
      p.value = glorot_uniform(r, c, next_seed());
      return p;
    };
    auto bias = [&](const std::string& name, std::size_t c) { return Parameter(name, 1, c); };

    proj_w_ = weight("proj.w", cfg_.feature_dim, cfg_.d_model);
    proj_b_ = bias("proj.b", cfg_.d_model);
    layers_.resize(cfg_.layers);
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      const std::string base = "layer" + std::to_string(l) + ".";
      layers_[l].w1 = weight(base + "w1", cfg_.d_model, cfg_.d_model);
      layers_[l].b1 = bias(base + "b1", cfg_.d_model);
      layers_[l].w2 = weight(base + "w2", cfg_.d_model, cfg_.d_model);
      layers_[l].b2 = bias(base + "b2", cfg_.d_model);
    }
    attn_v_ = weight("attn.v", cfg_.d_cat(), cfg_.d_attn);
    if (cfg_.gated_attention) attn_u_ = weight("attn.u", cfg_.d_cat(), cfg_.d_attn);
    attn_w_ = weight("attn.w", cfg_.d_attn, 1);
    head_w_ = weight("head.w", cfg_.d_cat(), cfg_.n_bins);
    head_b_ = bias("head.b", cfg_.n_bins);
  }

  const ModelConfig& config() const { return cfg_; }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out{&proj_w_, &proj_b_};
    for (auto& l : layers_) {
      out.push_back(&l.w1);
      out.push_back(&l.b1);
      out.push_back(&l.w2);
      out.push_back(&l.b2);
    }
    out.push_back(&attn_v_);
    if (attn_u_) out.push_back(&*attn_u_);
    out.push_back(&attn_w_);
    out.push_back(&head_w_);
    out.push_back(&head_b_);
    return out;
  }

  std::vector<const Parameter*> parameters() const {
    auto mut = const_cast<GcnModel*>(this)->parameters();
    return {mut.begin(), mut.end()};
  }

  using ParamBindings = std::vector<std::pair<Parameter*, ValueId>>;

  // One GCN layer: messages from neighbors, per-channel softmax
  // aggregation, update MLP on h + m, then the residual add.
  ValueId layer_forward(Tape& tape, ValueId h, const WsiGraph& graph, std::size_t l,
                        ParamBindings* bindings = nullptr) const {
    auto& lp = const_cast<GcnModel*>(this)->layers_[l];
    auto bind = [&](Parameter& p) {
      ValueId id = tape.input(p.value);
      if (bindings) bindings->emplace_back(&p, id);
      return id;
    };
    ValueId msg = tape.add_scalar(tape.relu(h), cfg_.epsilon);
    ValueId agg = tape.neighbor_softmax_aggregate(msg, &graph, cfg_.beta);
    ValueId pre = tape.add(h, agg);
    ValueId hidden = tape.relu(tape.affine(pre, bind(lp.w1), bind(lp.b1)));
    ValueId upd = tape.affine(hidden, bind(lp.w2), bind(lp.b2));
    return tape.add(upd, h);
  }

  // Builds the whole forward expression for one patient graph. When
  // `bindings` is given, each parameter's tape id is appended so gradients
  // can be pulled back out after backward().
  ForwardIds forward(Tape& tape, const WsiGraph& graph,
                     ParamBindings* bindings = nullptr) const {
    if (graph.num_nodes() == 0) throw EmptyGraphError("forward: empty graph");
    if (graph.node_features.cols != cfg_.feature_dim)
      throw ShapeError("forward: graph features " + graph.node_features.shape_str() +
                       " but model expects dim " + std::to_string(cfg_.feature_dim));

    auto* self = const_cast<GcnModel*>(this);
    auto bind = [&](Parameter& p) {
      ValueId id = tape.input(p.value);
      if (bindings) bindings->emplace_back(&p, id);
      return id;
    };

    ForwardIds ids;
    ids.features = tape.input(graph.node_features);
    ids.x0 = tape.relu(tape.affine(ids.features, bind(self->proj_w_), bind(self->proj_b_)));

    ValueId h = ids.x0;
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      h = layer_forward(tape, h, graph, l, bindings);
      ids.layer_out.push_back(h);
    }

    std::vector<ValueId> blocks;
    if (cfg_.include_input_skip) blocks.push_back(ids.x0);
    for (ValueId v : ids.layer_out) blocks.push_back(v);
    ids.h_cat = tape.concat_cols(blocks);

    ValueId score = tape.tanh_act(tape.matmul(ids.h_cat, bind(self->attn_v_)));
    if (cfg_.gated_attention) {
      ValueId gate = tape.sigmoid(tape.matmul(ids.h_cat, bind(*self->attn_u_)));
      score = tape.mul(score, gate);
    }
    ValueId node_logits = tape.matmul(score, bind(self->attn_w_));  // M x 1
    ids.attention = tape.rowwise_softmax(tape.transpose(node_logits));
    ids.h_bag = tape.matmul(ids.attention, ids.h_cat);

    ids.logits = tape.clamp(tape.affine(ids.h_bag, bind(self->head_w_), bind(self->head_b_)),
                            -cfg_.logit_clamp, cfg_.logit_clamp);
    ids.hazards = tape.sigmoid(ids.logits);
    return ids;
  }

  ForwardTrace trace(const Tape& tape, const ForwardIds& ids) const {
    ForwardTrace t;
    t.attention = tape.value(ids.attention).data;
    t.hazards = tape.value(ids.hazards).data;
    t.survival = survival_curve_from_hazards(t.hazards);
    t.risk = risk_from_hazards(t.hazards);
    return t;
  }

  ForwardTrace run(const WsiGraph& graph) const {
    Tape tape;
    ForwardIds ids = forward(tape, graph);
    return trace(tape, ids);
  }

  Parameter& parameter(const std::string& name) {
    for (Parameter* p : parameters())
      if (p->name == name) return *p;
    throw ValidationError("model: no parameter named '" + name + "'");
  }

 private:
  ModelConfig cfg_;
  Parameter proj_w_, proj_b_;
  std::vector<GcnLayerParams> layers_;
  Parameter attn_v_, attn_w_;
  std::optional<Parameter> attn_u_;
  Parameter head_w_, head_b_;
};

}  // namespace patchgraph
