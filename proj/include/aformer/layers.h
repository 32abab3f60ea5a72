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

#ifndef AFORMER_LAYERS_H_
#define AFORMER_LAYERS_H_

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "aformer/tensor.h"

namespace aformer {

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

// Mode flags threaded through every forward call. Dropout only fires when
// `training` is set, and then draws from `rng`.
struct ForwardContext {
  bool training = false;
  float dropout = 0.0f;
  std::mt19937* rng = nullptr;

  Tensor drop(const Tensor& x) const;
};

// y = x W + b, W stored [in x out].
struct Linear {
  Tensor weight;
  Tensor bias;  // undefined when the layer has no bias

  static Linear create(int in, int out, std::mt19937& rng, bool with_bias = true);
  Tensor forward(const Tensor& x) const;
  int in_dim() const { return weight.dim(0); }
  int out_dim() const { return weight.dim(1); }
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;

  static LayerNorm create(int d);
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

enum class Activation { kSwish, kRelu };

// Position-wise two-layer network: w2(drop(act(w1 x))).
struct FeedForward {
  Linear w1;
  Linear w2;
  Activation activation = Activation::kSwish;

  static FeedForward create(int d, int d_ff, Activation act, std::mt19937& rng);
  Tensor forward(const Tensor& x, const ForwardContext& ctx) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

// Scaled dot-product attention with `heads` heads of width d_model/heads.
// Queries come from `query_in`, keys and values from `kv_in` (the same
// tensor for self-attention).
struct MultiHeadAttention {
  int heads = 1;
  Linear wq, wk, wv, wo;

  static MultiHeadAttention create(int d_model, int heads, std::mt19937& rng);
  Tensor forward(const Tensor& query_in, const Tensor& kv_in, bool causal,
                 const ForwardContext& ctx,
                 std::vector<Tensor>* weights = nullptr) const;
  Tensor self_attention(const Tensor& x, const ForwardContext& ctx) const {
    return forward(x, x, false, ctx);
  }
  void collect(const std::string& prefix, NamedParams& out) const;
};

// pointwise(d -> 2d) -> GLU -> depthwise conv -> layer norm -> swish ->
// pointwise(d -> d). Layer norm stands in for batch norm so the module
// does not depend on batch statistics.
struct ConvModule {
  Linear pointwise1;
  Tensor depthwise_weight;  // [d x kernel]
  Tensor depthwise_bias;    // [d]
  LayerNorm norm;
  Linear pointwise2;

  static ConvModule create(int d, int kernel, std::mt19937& rng);
  Tensor forward(const Tensor& x, const ForwardContext& ctx) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

// Single-layer LSTM, gate order (input, forget, cell, output), zero
// initial state.
struct Lstm {
  Tensor w_ih;  // [in x 4h]
  Tensor w_hh;  // [h x 4h]
  Tensor bias;  // [4h]

  static Lstm create(int in, int hidden, std::mt19937& rng);
  int hidden() const { return w_hh.dim(0); }
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

// Two stride-2 3x3 convolutions (no padding, ReLU after each) over the
// (time, feature) plane followed by a projection to d_model.
struct Subsampling {
  Tensor conv1_weight;  // [C x 1 x 3 x 3]
  Tensor conv1_bias;
  Tensor conv2_weight;  // [C x C x 3 x 3]
  Tensor conv2_bias;
  Linear proj;          // (C * F') -> d_model

  static constexpr int kMinFrames = 7;

  // floor((floor((n - 1) / 2) - 1) / 2); 0 when n < kMinFrames.
  static int output_length(int n);

  static Subsampling create(int feat_dim, int channels, int d_model,
                            std::mt19937& rng);
  Tensor forward(const Tensor& feats) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

// Sinusoidal absolute encoding: pe[t][2i] = sin(t / 10000^(2i/d)),
// pe[t][2i+1] = cos(same).
Tensor positional_encoding(int frames, int d);

int64_t parameter_count(const NamedParams& params);

}  // namespace aformer

#endif  // AFORMER_LAYERS_H_
