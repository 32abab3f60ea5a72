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

#include "aformer/layers.h"

#include <cmath>
#include <string>

#include "aformer/errors.h"
#include "aformer/ops.h"

namespace aformer {

namespace {

Tensor uniform_param(Shape shape, float bound, std::mt19937& rng) {
  std::uniform_real_distribution<float> dist(-bound, bound);
  Tensor t(std::move(shape));
  for (float& v : t.data()) v = dist(rng);
  t.set_requires_grad(true);
  return t;
}

Tensor constant_param(Shape shape, float value) {
  Tensor t = Tensor::full(std::move(shape), value);
  t.set_requires_grad(true);
  return t;
}

}  // namespace

Tensor ForwardContext::drop(const Tensor& x) const {
  if (!training || dropout <= 0.0f) return x;
  if (rng == nullptr) throw ContractError("training-mode dropout without an rng");
  return aformer::dropout(x, dropout, training, *rng);
}

Linear Linear::create(int in, int out, std::mt19937& rng, bool with_bias) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(in));
  Linear l;
  l.weight = uniform_param({in, out}, bound, rng);
  if (with_bias) l.bias = uniform_param({out}, bound, rng);
  return l;
}

Tensor Linear::forward(const Tensor& x) const { return linear(x, weight, bias); }

void Linear::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".weight", weight);
  if (bias.defined()) out.emplace_back(prefix + ".bias", bias);
}

LayerNorm LayerNorm::create(int d) {
  return LayerNorm{constant_param({d}, 1.0f), constant_param({d}, 0.0f)};
}

Tensor LayerNorm::forward(const Tensor& x) const {
  return layer_norm(x, gamma, beta);
}

void LayerNorm::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".gamma", gamma);
  out.emplace_back(prefix + ".beta", beta);
}

FeedForward FeedForward::create(int d, int d_ff, Activation act,
                                std::mt19937& rng) {
  FeedForward f;
  f.w1 = Linear::create(d, d_ff, rng);
  f.w2 = Linear::create(d_ff, d, rng);
  f.activation = act;
  return f;
}

Tensor FeedForward::forward(const Tensor& x, const ForwardContext& ctx) const {
  if (x.rank() != 2 || x.dim(1) != w1.in_dim()) {
    throw DimensionError("feed-forward: input " + shape_str(x.shape()) +
                         " does not match width " + std::to_string(w1.in_dim()));
  }
  Tensor h = w1.forward(x);
  h = activation == Activation::kSwish ? swish(h) : relu(h);
  return w2.forward(ctx.drop(h));
}

void FeedForward::collect(const std::string& prefix, NamedParams& out) const {
  w1.collect(prefix + ".w1", out);
  w2.collect(prefix + ".w2", out);
}

MultiHeadAttention MultiHeadAttention::create(int d_model, int heads,
                                              std::mt19937& rng) {
  if (heads < 1 || d_model % heads != 0) {
    throw ConfigError("attention: d_model " + std::to_string(d_model) +
                      " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
  MultiHeadAttention m;
  m.heads = heads;
  m.wq = Linear::create(d_model, d_model, rng);
  m.wk = Linear::create(d_model, d_model, rng);
  m.wv = Linear::create(d_model, d_model, rng);
  m.wo = Linear::create(d_model, d_model, rng);
  return m;
}

Tensor MultiHeadAttention::forward(const Tensor& query_in, const Tensor& kv_in,
                                   bool causal, const ForwardContext& /*ctx*/,
                                   std::vector<Tensor>* weights) const {
  const int d = wq.in_dim();
  if (query_in.rank() != 2 || query_in.dim(1) != d || kv_in.rank() != 2 ||
      kv_in.dim(1) != d) {
    throw DimensionError("attention: inputs " + shape_str(query_in.shape()) +
                         ", " + shape_str(kv_in.shape()) +
                         " do not match d_model " + std::to_string(d));
  }
  if (causal && query_in.dim(0) != kv_in.dim(0)) {
    throw DimensionError("attention: causal mask needs equal lengths");
  }
  const int dk = d / heads;
  const float inv_scale = 1.0f / std::sqrt(static_cast<float>(dk));
  const Tensor q = wq.forward(query_in);
  const Tensor k = wk.forward(kv_in);
  const Tensor v = wv.forward(kv_in);
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    const Tensor qh = heads == 1 ? q : slice(q, 1, h * dk, dk);
    const Tensor kh = heads == 1 ? k : slice(k, 1, h * dk, dk);
    const Tensor vh = heads == 1 ? v : slice(v, 1, h * dk, dk);
    Tensor scores = scale(matmul(qh, transpose(kh)), inv_scale);
    if (causal) scores = causal_mask(scores);
    const Tensor w = softmax(scores, 1);
    if (weights) weights->push_back(w);
    outs.push_back(matmul(w, vh));
  }
  const Tensor merged = heads == 1 ? outs[0] : concat(outs, 1);
  return wo.forward(merged);
}

void MultiHeadAttention::collect(const std::string& prefix,
                                 NamedParams& out) const {
  wq.collect(prefix + ".wq", out);
  wk.collect(prefix + ".wk", out);
  wv.collect(prefix + ".wv", out);
  wo.collect(prefix + ".wo", out);
}

ConvModule ConvModule::create(int d, int kernel, std::mt19937& rng) {
  if (kernel < 1 || kernel % 2 == 0) {
    throw ConfigError("conv module: depthwise kernel must be odd, got " +
                      std::to_string(kernel));
  }
  ConvModule c;
  c.pointwise1 = Linear::create(d, 2 * d, rng);
  const float bound = 1.0f / std::sqrt(static_cast<float>(kernel));
  c.depthwise_weight = uniform_param({d, kernel}, bound, rng);
  c.depthwise_bias = uniform_param({d}, bound, rng);
  c.norm = LayerNorm::create(d);
  c.pointwise2 = Linear::create(d, d, rng);
  return c;
}

Tensor ConvModule::forward(const Tensor& x, const ForwardContext& ctx) const {
  if (x.rank() != 2 || x.dim(1) != pointwise1.in_dim()) {
    throw DimensionError("conv module: input " + shape_str(x.shape()) +
                         " does not match width " +
                         std::to_string(pointwise1.in_dim()));
  }
  Tensor h = glu(pointwise1.forward(x));
  h = depthwise_conv1d(h, depthwise_weight, depthwise_bias);
  h = swish(norm.forward(h));
  return pointwise2.forward(ctx.drop(h));
}

void ConvModule::collect(const std::string& prefix, NamedParams& out) const {
  pointwise1.collect(prefix + ".pointwise1", out);
  out.emplace_back(prefix + ".depthwise.weight", depthwise_weight);
  out.emplace_back(prefix + ".depthwise.bias", depthwise_bias);
  norm.collect(prefix + ".norm", out);
  pointwise2.collect(prefix + ".pointwise2", out);
}

Lstm Lstm::create(int in, int hidden, std::mt19937& rng) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(hidden));
  Lstm l;
  l.w_ih = uniform_param({in, 4 * hidden}, bound, rng);
  l.w_hh = uniform_param({hidden, 4 * hidden}, bound, rng);
  l.bias = uniform_param({4 * hidden}, bound, rng);
  return l;
}

Tensor Lstm::forward(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != w_ih.dim(0)) {
    throw DimensionError("lstm: input " + shape_str(x.shape()) +
                         " does not match width " + std::to_string(w_ih.dim(0)));
  }
  const int h = hidden();
  const int frames = x.dim(0);
  const Tensor projected = linear(x, w_ih, bias);  // [T x 4h]
  Tensor state_h({1, h});
  Tensor state_c({1, h});
  std::vector<Tensor> outputs;
  outputs.reserve(frames);
  for (int t = 0; t < frames; ++t) {
    const Tensor gates = add(slice(projected, 0, t, 1), matmul(state_h, w_hh));
    const Tensor i = sigmoid(slice(gates, 1, 0, h));
    const Tensor f = sigmoid(slice(gates, 1, h, h));
    const Tensor g = tanh(slice(gates, 1, 2 * h, h));
    const Tensor o = sigmoid(slice(gates, 1, 3 * h, h));
    state_c = add(mul(f, state_c), mul(i, g));
    state_h = mul(o, tanh(state_c));
    outputs.push_back(state_h);
  }
  return frames == 1 ? outputs[0] : concat(outputs, 0);
}

void Lstm::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".w_ih", w_ih);
  out.emplace_back(prefix + ".w_hh", w_hh);
  out.emplace_back(prefix + ".bias", bias);
}

int Subsampling::output_length(int n) {
  if (n < kMinFrames) return 0;
  return ((n - 1) / 2 - 1) / 2;
}

Subsampling Subsampling::create(int feat_dim, int channels, int d_model,
                                std::mt19937& rng) {
  if (feat_dim < kMinFrames) {
    throw ConfigError("subsampling: feature dim must be at least " +
                      std::to_string(kMinFrames));
  }
  Subsampling s;
  const float b1 = 1.0f / 3.0f;
  const float b2 = 1.0f / std::sqrt(9.0f * channels);
  s.conv1_weight = uniform_param({channels, 1, 3, 3}, b1, rng);
  s.conv1_bias = uniform_param({channels}, b1, rng);
  s.conv2_weight = uniform_param({channels, channels, 3, 3}, b2, rng);
  s.conv2_bias = uniform_param({channels}, b2, rng);
  s.proj = Linear::create(channels * output_length(feat_dim), d_model, rng);
  return s;
}

Tensor Subsampling::forward(const Tensor& feats) const {
  if (feats.rank() != 2) {
    throw DimensionError("subsampling: features must be [T x F], got " +
                         shape_str(feats.shape()));
  }
  const int frames = feats.dim(0);
  if (frames < kMinFrames) {
    throw DimensionError("subsampling: utterance has " + std::to_string(frames) +
                         " frames, minimum is " + std::to_string(kMinFrames));
  }
  const Tensor x = reshape(feats, {1, frames, feats.dim(1)});
  Tensor h = relu(conv2d(x, conv1_weight, conv1_bias, 2));
  h = relu(conv2d(h, conv2_weight, conv2_bias, 2));  // [C x T' x F']
  const int channels = h.dim(0), t_out = h.dim(1), f_out = h.dim(2);
  h = reshape(swap_leading_axes(h), {t_out, channels * f_out});
  return proj.forward(h);
}

void Subsampling::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".conv1.weight", conv1_weight);
  out.emplace_back(prefix + ".conv1.bias", conv1_bias);
  out.emplace_back(prefix + ".conv2.weight", conv2_weight);
  out.emplace_back(prefix + ".conv2.bias", conv2_bias);
  proj.collect(prefix + ".proj", out);
}

Tensor positional_encoding(int frames, int d) {
  if (frames < 1 || d < 1) {
    throw DimensionError("positional_encoding: frames and d must be positive");
  }
  Tensor pe({frames, d});
  float* p = pe.ptr();
  for (int t = 0; t < frames; ++t) {
    for (int i = 0; i < d; i += 2) {
      const double angle = t / std::pow(10000.0, static_cast<double>(i) / d);
      p[static_cast<size_t>(t) * d + i] = static_cast<float>(std::sin(angle));
      if (i + 1 < d) {
        p[static_cast<size_t>(t) * d + i + 1] = static_cast<float>(std::cos(angle));
      }
    }
  }
  return pe;
}

int64_t parameter_count(const NamedParams& params) {
  int64_t n = 0;
  for (const auto& [name, t] : params) n += static_cast<int64_t>(t.numel());
  return n;
}

}  // namespace aformer
