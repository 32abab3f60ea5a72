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

#ifndef AFORMER_FUSION_H_
#define AFORMER_FUSION_H_

#include <string>
#include <vector>

#include "aformer/layers.h"

namespace aformer {

// How the general (X_G) and accent (X_A) encoder outputs are combined.
enum class FusionKind { kAdd, kConcat, kCrossAttention };

std::string to_string(FusionKind kind);
FusionKind fusion_kind_from_string(const std::string& s);

// One single-head cross-attention layer without biases:
//   out = relu(softmax((Xq Wq)(Xkv Wk)^T / sqrt(d_att)) (Xkv Wv))
// Wq, Wk map d_model -> d_att; Wv maps d_model -> d_model.
struct CrossAttentionLayer {
  Linear wq;
  Linear wk;
  Linear wv;

  static CrossAttentionLayer create(int d_model, int d_att, std::mt19937& rng);
  int d_att() const { return wq.out_dim(); }
  Tensor forward(const Tensor& query_in, const Tensor& kv_in,
                 Tensor* weights = nullptr) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

// Layer 1 attends from X_A into X_G giving X_M; layer 2 attends from X_M
// into X_A giving X_F.
struct CrossAttentionParams {
  CrossAttentionLayer first;
  CrossAttentionLayer second;
};

struct CrossAttentionTrace {
  Tensor mid;             // X_M
  Tensor first_weights;   // [T x T]
  Tensor second_weights;  // [T x T]
};

Tensor fuse_add(const Tensor& general, const Tensor& accent);
// Feature-axis concatenation [T x 2d] followed by a bias-free projection
// [2d x d] back to the decoder width.
Tensor fuse_concat(const Tensor& general, const Tensor& accent,
                   const Linear& projection);
Tensor fuse_cross_attention(const Tensor& general, const Tensor& accent,
                            const CrossAttentionParams& params,
                            CrossAttentionTrace* trace = nullptr);

struct Fusion {
  FusionKind kind = FusionKind::kAdd;
  Linear concat_projection;
  CrossAttentionParams cross;

  static Fusion create(FusionKind kind, int d_model, int d_att,
                       std::mt19937& rng);
  Tensor forward(const Tensor& general, const Tensor& accent) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

}  // namespace aformer

#endif  // AFORMER_FUSION_H_
