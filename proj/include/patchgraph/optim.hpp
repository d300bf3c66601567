#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "patchgraph/errors.hpp"
#include "patchgraph/rng.hpp"
#include "patchgraph/tensor.hpp"

namespace patchgraph {

struct Parameter {
  std::string name;
  Tensor2 value;
  Tensor2 grad;

  Parameter() = default;
  Parameter(std::string n, std::size_t rows, std::size_t cols)
      : name(std::move(n)), value(rows, cols), grad(rows, cols) {}

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

// Uniform Glorot: +-sqrt(6 / (fan_in + fan_out)) with fan_in = rows,
// fan_out = cols for a weight used as x * W.
inline Tensor2 glorot_uniform(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Tensor2 t(rows, cols);
  Rng rng(seed);
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (double& v : t.data) v = rng.uniform(-limit, limit);
  return t;
}

struct AdamConfig {
  double learning_rate = 2e-4;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  std::uint64_t step_count() const { return step_; }

  // Applies one update. Parameter gradients must hold the sum over
  // `accumulation_count` per-sample backward passes; they are averaged,
  // consumed and zeroed here. Weight decay is decoupled (applied to the
  // value directly, not through the moments).
  void step(const std::vector<Parameter*>& params, std::size_t accumulation_count) {
    if (accumulation_count < 1)
      throw TrainingError("adam: accumulation_count must be >= 1");
    if (moments_.empty()) {
      moments_.resize(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        moments_[i].m = Tensor2(params[i]->value.rows, params[i]->value.cols);
        moments_[i].v = Tensor2(params[i]->value.rows, params[i]->value.cols);
      }
    }
    if (moments_.size() != params.size())
      throw TrainingError("adam: parameter list changed between steps");

    ++step_;
    const double inv_count = 1.0 / static_cast<double>(accumulation_count);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Parameter& p = *params[i];
      Tensor2& m = moments_[i].m;
      Tensor2& v = moments_[i].v;
      for (std::size_t j = 0; j < p.value.data.size(); ++j) {
        const double g = p.grad.data[j] * inv_count;
        if (!std::isfinite(g))
          throw TrainingError("adam: non-finite gradient in parameter '" + p.name + "'");
        p.value.data[j] -= cfg_.learning_rate * cfg_.weight_decay * p.value.data[j];
        m.data[j] = cfg_.beta1 * m.data[j] + (1.0 - cfg_.beta1) * g;
        v.data[j] = cfg_.beta2 * v.data[j] + (1.0 - cfg_.beta2) * g * g;
        const double m_hat = m.data[j] / bc1;
        const double v_hat = v.data[j] / bc2;
        p.value.data[j] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.eps);
      }
      p.zero_grad();
    }
  }

 private:
  struct Moments {
    Tensor2 m, v;
  };
  AdamConfig cfg_;
  std::vector<Moments> moments_;
  std::uint64_t step_ = 0;
};

}  // namespace patchgraph
