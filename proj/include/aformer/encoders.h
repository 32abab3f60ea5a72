// Copyright (c) 2026 Aformer Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef AFORMER_ENCODERS_H_
#define AFORMER_ENCODERS_H_

#include <string>
#include <vector>

#include "aformer/layers.h"

namespace aformer {

// Macaron block:
//   x1 = x  + 1/2 FFN1(x)
//   x2 = x1 + MHSA(x1)
//   x3 = x2 + Conv(x2)
//   x4 = x3 + 1/2 FFN2(x3)
//   y  = LayerNorm(x4)
// Each sublayer owns a pre-norm applied to its input.
struct ConformerBlock {
  LayerNorm ffn1_norm;
  FeedForward ffn1;
  LayerNorm mhsa_norm;
  MultiHeadAttention mhsa;
  LayerNorm conv_norm;
  ConvModule conv;
  LayerNorm ffn2_norm;
  FeedForward ffn2;
  LayerNorm final_norm;

  // Intermediate residual sums, exposed for structural checks.
  struct Trace {
    Tensor x_ffn1;
    Tensor x_mhsa;
    Tensor x_conv;
    Tensor x_ffn2;
    Tensor y;
  };

  static ConformerBlock create(int d_model, int heads, int d_ff, int kernel,
                               std::mt19937& rng);
  Tensor forward(const Tensor& x, const ForwardContext& ctx) const;
  Trace trace(const Tensor& x, const ForwardContext& ctx) const;
  int d_model() const { return final_norm.gamma.dim(0); }
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct GeneralEncoder {
  std::vector<ConformerBlock> blocks;

  static GeneralEncoder create(int n_blocks, int d_model, int heads, int d_ff,
                               int kernel, std::mt19937& rng);
  // Identity when there are no blocks.
  Tensor forward(const Tensor& x, const ForwardContext& ctx) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

// Post-norm transformer encoder layer:
//   x = LN(x + MHSA(x)); x = LN(x + FFN(x))
struct TransformerLayer {
  MultiHeadAttention mhsa;
  LayerNorm norm1;
  FeedForward ffn;
  LayerNorm norm2;

  static TransformerLayer create(int d_model, int heads, int d_ff,
                                 std::mt19937& rng);
  Tensor forward(const Tensor& x, const ForwardContext& ctx) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

enum class AccentKind { kNone, kTransformer, kRecurrent };

std::string to_string(AccentKind kind);
AccentKind accent_kind_from_string(const std::string& s);

struct AccentEncoderConfig {
  AccentKind kind = AccentKind::kTransformer;
  int depth = 1;
  int d_ff = 64;
  int lstm_hidden = 32;

  bool operator==(const AccentEncoderConfig&) const = default;
};

// Lightweight encoder running beside the general encoder on the same
// frontend output. The recurrent kind ends in a projection back to d_model.
struct AccentEncoder {
  AccentKind kind = AccentKind::kNone;
  std::vector<TransformerLayer> layers;
  std::vector<Lstm> lstm;
  Linear proj;

  static AccentEncoder create(const AccentEncoderConfig& cfg, int d_model,
                              int heads, std::mt19937& rng);
  Tensor forward(const Tensor& x, const ForwardContext& ctx) const;
  // Width of forward()'s output; 0 for kNone.
  int output_dim() const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

// Throws ConfigError unless the accent encoder emits the general encoder's
// width, which every fusion requires.
void check_encoder_pair(int general_d_model, const AccentEncoder& accent);

}  // namespace aformer

#endif  // AFORMER_ENCODERS_H_
