#pragma once

#include <string>
#include <vector>

#include "hithar/core/json.hpp"
#include "hithar/core/taxonomy.hpp"

namespace hithar::model {

struct ModelConfig {
  int in_channels = 8;
  int window_len = 50;
  int embed_dim = 128;
  std::vector<int> dilations{1, 2, 4};
  int stem_channels = 64;
  int stem_kernel = 5;
  // Output width of each multi-dilation block. 96/128/128 puts the default
  // model at 717,365 parameters.
  std::vector<int> block_channels{96, 128, 128};
  int block_kernel = 3;
  int se_reduction = 8;
  int gru_hidden = 96;
  int attn_pool_dim = 64;
  int wat_layers = 1;
  int wat_heads = 4;
  int wat_ff = 512;
  int seq_len = 30;
  int gate_hidden = 64;
  int n_actions = kNumActions;
  int n_scenarios = kNumScenarios;
  double dropout_wle = 0.3;
  double dropout_wat = 0.2;
  double ln_eps = 1e-5;

  /// Small configuration used for finite-difference gradient checks.
  static ModelConfig tiny() {
    ModelConfig c;
    c.window_len = 20;
    c.embed_dim = 16;
    c.stem_channels = 8;
    c.block_channels = {8, 12, 12};
    c.se_reduction = 4;
    c.gru_hidden = 6;
    c.attn_pool_dim = 5;
    c.wat_heads = 4;
    c.wat_ff = 24;
    c.seq_len = 4;
    c.gate_hidden = 6;
    return c;
  }

  void validate() const {
    auto positive = [](int v, const char* name) {
      if (v < 1) throw ConfigError(std::string("model.") + name + " must be >= 1");
    };
    positive(in_channels, "in_channels");
    positive(window_len, "window_len");
    positive(embed_dim, "embed_dim");
    positive(stem_channels, "stem_channels");
    positive(stem_kernel, "stem_kernel");
    positive(block_kernel, "block_kernel");
    positive(se_reduction, "se_reduction");
    positive(gru_hidden, "gru_hidden");
    positive(attn_pool_dim, "attn_pool_dim");
    positive(wat_layers, "wat_layers");
    positive(wat_heads, "wat_heads");
    positive(wat_ff, "wat_ff");
    positive(seq_len, "seq_len");
    positive(gate_hidden, "gate_hidden");
    positive(n_actions, "n_actions");
    positive(n_scenarios, "n_scenarios");
    if (stem_kernel % 2 == 0 || block_kernel % 2 == 0)
      throw ConfigError("model: kernel sizes must be odd for same padding");
    if (dilations.empty()) throw ConfigError("model.dilations must not be empty");
    for (int d : dilations) positive(d, "dilations[]");
    if (block_channels.empty()) throw ConfigError("model.block_channels must not be empty");
    for (int c : block_channels) {
      positive(c, "block_channels[]");
      if (c / se_reduction < 1) throw ConfigError("model: block width smaller than se_reduction");
    }
    if (embed_dim % wat_heads != 0) throw ConfigError("model.embed_dim must be divisible by wat_heads");
    if (dropout_wle < 0.0 || dropout_wle >= 1.0 || dropout_wat < 0.0 || dropout_wat >= 1.0)
      throw ConfigError("model: dropout must be in [0,1)");
    if (!(ln_eps > 0.0)) throw ConfigError("model.ln_eps must be positive");
  }
};

inline json to_json(const ModelConfig& c) {
  return json{{"in_channels", c.in_channels},     {"window_len", c.window_len},
              {"embed_dim", c.embed_dim},         {"dilations", c.dilations},
              {"stem_channels", c.stem_channels}, {"stem_kernel", c.stem_kernel},
              {"block_channels", c.block_channels}, {"block_kernel", c.block_kernel},
              {"se_reduction", c.se_reduction},   {"gru_hidden", c.gru_hidden},
              {"attn_pool_dim", c.attn_pool_dim}, {"wat_layers", c.wat_layers},
              {"wat_heads", c.wat_heads},         {"wat_ff", c.wat_ff},
              {"seq_len", c.seq_len},             {"gate_hidden", c.gate_hidden},
              {"n_actions", c.n_actions},         {"n_scenarios", c.n_scenarios},
              {"dropout_wle", c.dropout_wle},     {"dropout_wat", c.dropout_wat},
              {"ln_eps", c.ln_eps}};
}

inline ModelConfig model_config_from_json(const json& j, ModelConfig c = {}) {
  StrictReader r(j, "model");
  r.get("in_channels", c.in_channels)
      .get("window_len", c.window_len)
      .get("embed_dim", c.embed_dim)
      .get("dilations", c.dilations)
      .get("stem_channels", c.stem_channels)
      .get("stem_kernel", c.stem_kernel)
      .get("block_channels", c.block_channels)
      .get("block_kernel", c.block_kernel)
      .get("se_reduction", c.se_reduction)
      .get("gru_hidden", c.gru_hidden)
      .get("attn_pool_dim", c.attn_pool_dim)
      .get("wat_layers", c.wat_layers)
      .get("wat_heads", c.wat_heads)
      .get("wat_ff", c.wat_ff)
      .get("seq_len", c.seq_len)
      .get("gate_hidden", c.gate_hidden)
      .get("n_actions", c.n_actions)
      .get("n_scenarios", c.n_scenarios)
      .get("dropout_wle", c.dropout_wle)
      .get("dropout_wat", c.dropout_wat)
      .get("ln_eps", c.ln_eps);
  r.finish();
  c.validate();
  return c;
}

}  // namespace hithar::model
