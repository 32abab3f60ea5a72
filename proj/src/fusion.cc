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

#include "aformer/fusion.h"

#include <cmath>

#include "aformer/errors.h"
#include "aformer/ops.h"

namespace aformer {

namespace {

void require_pair(const Tensor& general, const Tensor& accent, const char* op) {
  if (general.rank() != 2 || general.shape() != accent.shape()) {
    throw DimensionError(std::string(op) + ": encoder outputs differ, " +
                         shape_str(general.shape()) + " vs " +
                         shape_str(accent.shape()));
  }
}

}  // namespace

std::string to_string(FusionKind kind) {
  switch (kind) {
    case FusionKind::kAdd: return "add";
    case FusionKind::kConcat: return "concat";
    case FusionKind::kCrossAttention: return "cross_attention";
  }
  return "add";
}

FusionKind fusion_kind_from_string(const std::string& s) {
  if (s == "add") return FusionKind::kAdd;
  if (s == "concat") return FusionKind::kConcat;
  if (s == "cross_attention" || s == "cross-attention") {
    return FusionKind::kCrossAttention;
  }
  throw ConfigError("unknown fusion kind '" + s + "'");
}

CrossAttentionLayer CrossAttentionLayer::create(int d_model, int d_att,
                                                std::mt19937& rng) {
  if (d_att <= 0) {
    throw ConfigError("cross-attention: d_att must be positive, got " +
                      std::to_string(d_att));
  }
  CrossAttentionLayer l;
  l.wq = Linear::create(d_model, d_att, rng, false);
  l.wk = Linear::create(d_model, d_att, rng, false);
  l.wv = Linear::create(d_model, d_model, rng, false);
  return l;
}

Tensor CrossAttentionLayer::forward(const Tensor& query_in, const Tensor& kv_in,
                                    Tensor* weights) const {
  const int d_att = wq.out_dim();
  if (d_att <= 0 || wk.out_dim() != d_att) {
    throw ContractError("cross-attention: inconsistent attention dimension");
  }
  const Tensor q = wq.forward(query_in);
  const Tensor k = wk.forward(kv_in);
  const Tensor v = wv.forward(kv_in);
  const float inv = 1.0f / std::sqrt(static_cast<float>(d_att));
  const Tensor w = softmax(scale(matmul(q, transpose(k)), inv), 1);
  if (weights) *weights = w;
  return relu(matmul(w, v));
}

void CrossAttentionLayer::collect(const std::string& prefix,
                                  NamedParams& out) const {
  out.emplace_back(prefix + ".wq", wq.weight);
  out.emplace_back(prefix + ".wk", wk.weight);
  out.emplace_back(prefix + ".wv", wv.weight);
}

Tensor fuse_add(const Tensor& general, const Tensor& accent) {
  require_pair(general, accent, "fuse_add");
  return add(general, accent);
}

Tensor fuse_concat(const Tensor& general, const Tensor& accent,
                   const Linear& projection) {
  require_pair(general, accent, "fuse_concat");
  const int d = general.dim(1);
  if (projection.in_dim() != 2 * d || projection.out_dim() != d) {
    throw DimensionError("fuse_concat: projection " +
                         shape_str(projection.weight.shape()) +
                         " does not map 2d -> d for d = " + std::to_string(d));
  }
  return projection.forward(concat({general, accent}, 1));
}

Tensor fuse_cross_attention(const Tensor& general, const Tensor& accent,
                            const CrossAttentionParams& params,
                            CrossAttentionTrace* trace) {
  require_pair(general, accent, "fuse_cross_attention");
  if (params.first.d_att() != params.second.d_att()) {
    throw ConfigError("cross-attention: both layers must share d_att");
  }
  Tensor w1, w2;
  const Tensor mid = params.first.forward(accent, general, &w1);
  const Tensor fused = params.second.forward(mid, accent, &w2);
  if (trace) {
    trace->mid = mid;
    trace->first_weights = w1;
    trace->second_weights = w2;
  }
  return fused;
}

Fusion Fusion::create(FusionKind kind, int d_model, int d_att,
                      std::mt19937& rng) {
  Fusion f;
  f.kind = kind;
  if (kind == FusionKind::kConcat) {
    f.concat_projection = Linear::create(2 * d_model, d_model, rng, false);
  } else if (kind == FusionKind::kCrossAttention) {
    f.cross.first = CrossAttentionLayer::create(d_model, d_att, rng);
    f.cross.second = CrossAttentionLayer::create(d_model, d_att, rng);
  }
  return f;
}

Tensor Fusion::forward(const Tensor& general, const Tensor& accent) const {
  switch (kind) {
    case FusionKind::kAdd: return fuse_add(general, accent);
    case FusionKind::kConcat:
      return fuse_concat(general, accent, concat_projection);
    case FusionKind::kCrossAttention:
      return fuse_cross_attention(general, accent, cross);
  }
  return general;
}

void Fusion::collect(const std::string& prefix, NamedParams& out) const {
  if (kind == FusionKind::kConcat) {
    out.emplace_back(prefix + ".concat_projection", concat_projection.weight);
  } else if (kind == FusionKind::kCrossAttention) {
    cross.first.collect(prefix + ".cross1", out);
    cross.second.collect(prefix + ".cross2", out);
  }
}

}  // namespace aformer
