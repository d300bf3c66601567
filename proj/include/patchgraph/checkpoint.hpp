#pragma once

#include <cstdint>
#include <cstring>
#include <set>
#include <string>

#include "json.hpp"
#include "patchgraph/errors.hpp"
#include "patchgraph/io_util.hpp"
#include "patchgraph/model.hpp"

namespace patchgraph {

inline constexpr char kCkptMagic[8] = {'P', 'G', 'C', 'N', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCkptVersion = 1;

namespace detail {

inline void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64_le(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64_le(out, bits);
}

inline double get_f64_le(const std::string& b, std::size_t off) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[off + i])) << (8 * i);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace detail

inline nlohmann::json model_config_to_json(const ModelConfig& cfg) {
  return {
      {"feature_dim", cfg.feature_dim},
      {"d_model", cfg.d_model},
      {"d_attn", cfg.d_attn},
      {"layers", cfg.layers},
      {"n_bins", cfg.n_bins},
      {"beta", cfg.beta},
      {"epsilon", cfg.epsilon},
      {"logit_clamp", cfg.logit_clamp},
      {"include_input_skip", cfg.include_input_skip},
      {"gated_attention", cfg.gated_attention},
  };
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.feature_dim = j.at("feature_dim").get<std::size_t>();
  cfg.d_model = j.at("d_model").get<std::size_t>();
  cfg.d_attn = j.at("d_attn").get<std::size_t>();
  cfg.layers = j.at("layers").get<std::size_t>();
  cfg.n_bins = j.at("n_bins").get<std::size_t>();
  cfg.beta = j.at("beta").get<double>();
  cfg.epsilon = j.at("epsilon").get<double>();
  cfg.logit_clamp = j.at("logit_clamp").get<double>();
  cfg.include_input_skip = j.at("include_input_skip").get<bool>();
  cfg.gated_attention = j.at("gated_attention").get<bool>();
  return cfg;
}

// Binary parameter file plus a JSON sidecar (<path>.json) holding the
// hyperparameters needed to rebuild the model shape.
inline void save_checkpoint(const GcnModel& model, const std::string& path) {
  std::string out(kCkptMagic, 8);
  detail::put_u32_le(out, kCkptVersion);
  for (const Parameter* p : model.parameters()) {
    detail::put_u32_le(out, static_cast<std::uint32_t>(p->name.size()));
    out += p->name;
    detail::put_u32_le(out, static_cast<std::uint32_t>(p->value.rows));
    detail::put_u32_le(out, static_cast<std::uint32_t>(p->value.cols));
    for (double v : p->value.data) detail::put_f64_le(out, v);
  }
  atomic_write_file(path, out);
  atomic_write_file(path + ".json", model_config_to_json(model.config()).dump(2) + "\n");
}

inline GcnModel load_checkpoint(const std::string& path) {
  nlohmann::json sidecar;
  try {
    sidecar = nlohmann::json::parse(read_file_bytes(path + ".json"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ".json: invalid hyperparameter sidecar: " + e.what());
  }
  GcnModel model(model_config_from_json(sidecar), 0);

  const std::string bytes = read_file_bytes(path);
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kCkptMagic, 8) != 0)
    throw FormatError(path + ": bad magic, not a checkpoint file");
  const std::uint32_t version = detail::get_u32_le(bytes, 8);
  if (version != kCkptVersion)
    throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));

  std::set<std::string> filled;
  std::size_t off = 12;
  while (off < bytes.size()) {
    if (bytes.size() - off < 4) throw FormatError(path + ": truncated parameter block");
    const std::uint32_t name_len = detail::get_u32_le(bytes, off);
    off += 4;
    if (bytes.size() - off < name_len + 8)
      throw FormatError(path + ": truncated parameter block");
    const std::string name = bytes.substr(off, name_len);
    off += name_len;
    const std::uint32_t rows = detail::get_u32_le(bytes, off);
    const std::uint32_t cols = detail::get_u32_le(bytes, off + 4);
    off += 8;
    const std::size_t payload = 8ull * rows * cols;
    if (bytes.size() - off < payload)
      throw FormatError(path + ": truncated data for parameter '" + name + "'");
    Parameter& p = model.parameter(name);
    if (p.value.rows != rows || p.value.cols != cols)
      throw FormatError(path + ": parameter '" + name + "' is " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", expected " + p.value.shape_str());
    for (std::size_t i = 0; i < p.value.data.size(); ++i)
      p.value.data[i] = detail::get_f64_le(bytes, off + 8 * i);
    off += payload;
    filled.insert(name);
  }
  for (const Parameter* p : model.parameters())
    if (!filled.count(p->name))
      throw FormatError(path + ": missing parameter '" + p->name + "'");
  return model;
}

}  // namespace patchgraph
