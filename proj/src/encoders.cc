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

#include "aformer/encoders.h"

#include "aformer/errors.h"
#include "aformer/ops.h"

namespace aformer {

ConformerBlock ConformerBlock::create(int d_model, int heads, int d_ff,
                                      int kernel, std::mt19937& rng) {
  ConformerBlock b;
  b.ffn1_norm = LayerNorm::create(d_model);
  b.ffn1 = FeedForward::create(d_model, d_ff, Activation::kSwish, rng);
  b.mhsa_norm = LayerNorm::create(d_model);
  b.mhsa = MultiHeadAttention::create(d_model, heads, rng);
  b.conv_norm = LayerNorm::create(d_model);
  b.conv = ConvModule::create(d_model, kernel, rng);
  b.ffn2_norm = LayerNorm::create(d_model);
  b.ffn2 = FeedForward::create(d_model, d_ff, Activation::kSwish, rng);
  b.final_norm = LayerNorm::create(d_model);
  return b;
}

ConformerBlock::Trace ConformerBlock::trace(const Tensor& x,
                                            const ForwardContext& ctx) const {
  if (x.rank() != 2 || x.dim(1) != d_model()) {
    throw DimensionError("conformer block: input " + shape_str(x.shape()) +
                         " does not match d_model " + std::to_string(d_model()));
  }
  Trace t;
  t.x_ffn1 = add(x, scale(ctx.drop(ffn1.forward(ffn1_norm.forward(x), ctx)), 0.5f));
  t.x_mhsa = add(t.x_ffn1, ctx.drop(mhsa.self_attention(mhsa_norm.forward(t.x_ffn1), ctx)));
  t.x_conv = add(t.x_mhsa, ctx.drop(conv.forward(conv_norm.forward(t.x_mhsa), ctx)));
  t.x_ffn2 = add(t.x_conv, scale(ctx.drop(ffn2.forward(ffn2_norm.forward(t.x_conv), ctx)), 0.5f));
  t.y = final_norm.forward(t.x_ffn2);
  return t;
}

Tensor ConformerBlock::forward(const Tensor& x, const ForwardContext& ctx) const {
  return trace(x, ctx).y;
}

void ConformerBlock::collect(const std::string& prefix, NamedParams& out) const {
  ffn1_norm.collect(prefix + ".ffn1_norm", out);
  ffn1.collect(prefix + ".ffn1", out);
  mhsa_norm.collect(prefix + ".mhsa_norm", out);
  mhsa.collect(prefix + ".mhsa", out);
  conv_norm.collect(prefix + ".conv_norm", out);
  conv.collect(prefix + ".conv", out);
  ffn2_norm.collect(prefix + ".ffn2_norm", out);
  ffn2.collect(prefix + ".ffn2", out);
  final_norm.collect(prefix + ".final_norm", out);
}

GeneralEncoder GeneralEncoder::create(int n_blocks, int d_model, int heads,
                                      int d_ff, int kernel, std::mt19937& rng) {
  GeneralEncoder e;
  for (int i = 0; i < n_blocks; ++i) {
    e.blocks.push_back(ConformerBlock::create(d_model, heads, d_ff, kernel, rng));
  }
  return e;
}

Tensor GeneralEncoder::forward(const Tensor& x, const ForwardContext& ctx) const {
  Tensor h = x;
  for (const ConformerBlock& b : blocks) h = b.forward(h, ctx);
  return h;
}

void GeneralEncoder::collect(const std::string& prefix, NamedParams& out) const {
  for (size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].collect(prefix + ".block" + std::to_string(i), out);
  }
}

TransformerLayer TransformerLayer::create(int d_model, int heads, int d_ff,
                                          std::mt19937& rng) {
  TransformerLayer l;
  l.mhsa = MultiHeadAttention::create(d_model, heads, rng);
  l.norm1 = LayerNorm::create(d_model);
  l.ffn = FeedForward::create(d_model, d_ff, Activation::kRelu, rng);
  l.norm2 = LayerNorm::create(d_model);
  return l;
}

Tensor TransformerLayer::forward(const Tensor& x, const ForwardContext& ctx) const {
  Tensor h = norm1.forward(add(x, ctx.drop(mhsa.self_attention(x, ctx))));
  return norm2.forward(add(h, ctx.drop(ffn.forward(h, ctx))));
}

void TransformerLayer::collect(const std::string& prefix, NamedParams& out) const {
  mhsa.collect(prefix + ".mhsa", out);
  norm1.collect(prefix + ".norm1", out);
  ffn.collect(prefix + ".ffn", out);
  norm2.collect(prefix + ".norm2", out);
}

std::string to_string(AccentKind kind) {
  switch (kind) {
    case AccentKind::kNone: return "none";
    case AccentKind::kTransformer: return "transformer";
    case AccentKind::kRecurrent: return "recurrent";
  }
  return "none";
}

AccentKind accent_kind_from_string(const std::string& s) {
  if (s == "none") return AccentKind::kNone;
  if (s == "transformer") return AccentKind::kTransformer;
  if (s == "recurrent" || s == "lstm") return AccentKind::kRecurrent;
  throw ConfigError("unknown accent encoder kind '" + s + "'");
}

AccentEncoder AccentEncoder::create(const AccentEncoderConfig& cfg, int d_model,
                                    int heads, std::mt19937& rng) {
  AccentEncoder e;
  e.kind = cfg.kind;
  if (cfg.kind == AccentKind::kNone) return e;
  if (cfg.depth < 1) throw ConfigError("accent encoder depth must be >= 1");
  if (cfg.kind == AccentKind::kTransformer) {
    for (int i = 0; i < cfg.depth; ++i) {
      e.layers.push_back(TransformerLayer::create(d_model, heads, cfg.d_ff, rng));
    }
  } else {
    int in = d_model;
    for (int i = 0; i < cfg.depth; ++i) {
      e.lstm.push_back(Lstm::create(in, cfg.lstm_hidden, rng));
      in = cfg.lstm_hidden;
    }
    e.proj = Linear::create(cfg.lstm_hidden, d_model, rng);
  }
  check_encoder_pair(d_model, e);
  return e;
}

Tensor AccentEncoder::forward(const Tensor& x, const ForwardContext& ctx) const {
  switch (kind) {
    case AccentKind::kNone:
      throw ContractError("accent encoder is disabled in this model");
    case AccentKind::kTransformer: {
      Tensor h = x;
      for (const TransformerLayer& l : layers) h = l.forward(h, ctx);
      return h;
    }
    case AccentKind::kRecurrent: {
      Tensor h = x;
      for (const Lstm& l : lstm) h = ctx.drop(l.forward(h));
      return proj.forward(h);
    }
  }
  return x;
}

int AccentEncoder::output_dim() const {
  switch (kind) {
    case AccentKind::kNone: return 0;
    case AccentKind::kTransformer:
      return layers.empty() ? 0 : layers.back().norm2.gamma.dim(0);
    case AccentKind::kRecurrent: return proj.out_dim();
  }
  return 0;
}

void AccentEncoder::collect(const std::string& prefix, NamedParams& out) const {
  for (size_t i = 0; i < layers.size(); ++i) {
    layers[i].collect(prefix + ".layer" + std::to_string(i), out);
  }
  for (size_t i = 0; i < lstm.size(); ++i) {
    lstm[i].collect(prefix + ".lstm" + std::to_string(i), out);
  }
  if (kind == AccentKind::kRecurrent) proj.collect(prefix + ".proj", out);
}

void check_encoder_pair(int general_d_model, const AccentEncoder& accent) {
  if (accent.kind == AccentKind::kNone) return;
  if (accent.output_dim() != general_d_model) {
    throw ConfigError("accent encoder emits width " +
                      std::to_string(accent.output_dim()) +
                      " but the general encoder emits " +
                      std::to_string(general_d_model));
  }
}

}  // namespace aformer
