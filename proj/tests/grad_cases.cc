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

#include "grad_cases.h"

#include <stdexcept>

#include "aformer/encoders.h"
#include "aformer/fusion.h"
#include "aformer/model.h"

namespace gradcases {

using aformer::NamedParams;
using aformer::Tensor;

namespace {

struct Shape {
  int frames;
  int kv_frames;
  int d;
  int heads;
};

Shape micro_shape(std::mt19937& rng) {
  std::uniform_int_distribution<int> frames(2, 5);
  const int dims[] = {4, 6, 8};
  Shape s;
  s.frames = frames(rng);
  s.kv_frames = frames(rng);
  s.d = dims[std::uniform_int_distribution<int>(0, 2)(rng)];
  s.heads = (s.d % 4 == 0 && rng() % 2) ? 2 : 1;
  if (s.d == 6 && rng() % 2) s.heads = 3;
  return s;
}

std::string describe(const Shape& s) {
  return "T=" + std::to_string(s.frames) + " S=" + std::to_string(s.kv_frames) +
         " d=" + std::to_string(s.d) + " h=" + std::to_string(s.heads);
}

// Perturbs parameters away from their initial values so that, e.g., layer
// norm gains and zero biases are exercised generically.
void jitter(NamedParams& params, std::mt19937& rng) {
  std::normal_distribution<float> n(0.0f, 0.1f);
  for (auto& [name, t] : params) {
    Tensor p = t;
    for (float& v : p.data()) v += n(rng);
  }
}

std::vector<std::pair<std::string, Tensor>> with_inputs(
    NamedParams params, std::vector<std::pair<std::string, Tensor>> inputs) {
  for (auto& p : params) inputs.push_back(std::move(p));
  return inputs;
}

}  // namespace

std::vector<std::string> layer_names() {
  return {"ffn",           "mhsa",          "conv_module",
          "lstm",          "fusion_add",    "fusion_concat",
          "fusion_cross_attention", "decoder_layer"};
}

Outcome run(const std::string& layer, int seed) {
  std::mt19937 rng(static_cast<uint32_t>(1000 + seed));
  const Shape s = micro_shape(rng);
  const aformer::ForwardContext eval;
  Outcome out{layer, seed, describe(s), {}};
  const uint64_t probe = 77 + static_cast<uint64_t>(seed);

  Tensor x = oracle::random_tensor({s.frames, s.d}, rng);
  NamedParams params;

  if (layer == "ffn") {
    const auto act = seed % 2 ? aformer::Activation::kRelu : aformer::Activation::kSwish;
    const auto ffn = aformer::FeedForward::create(s.d, 2 * s.d, act, rng);
    ffn.collect("ffn", params);
    jitter(params, rng);
    out.check = oracle::check_gradients([&] { return ffn.forward(x, eval); },
                                        with_inputs(params, {{"x", x}}), probe, kEps);
  } else if (layer == "mhsa") {
    const auto mha = aformer::MultiHeadAttention::create(s.d, s.heads, rng);
    mha.collect("mhsa", params);
    jitter(params, rng);
    const bool causal = seed % 2 == 1;
    Tensor kv = causal ? x : oracle::random_tensor({s.kv_frames, s.d}, rng);
    std::vector<std::pair<std::string, Tensor>> inputs = {{"query", x}};
    if (!causal) inputs.emplace_back("kv", kv);
    out.shape += causal ? " causal" : " cross";
    out.check = oracle::check_gradients([&] { return mha.forward(x, kv, causal, eval); },
                                        with_inputs(params, inputs), probe, kEps);
  } else if (layer == "conv_module") {
    const int kernel = seed % 2 ? 5 : 3;
    const auto conv = aformer::ConvModule::create(s.d, kernel, rng);
    conv.collect("conv", params);
    jitter(params, rng);
    out.shape += " k=" + std::to_string(kernel);
    out.check = oracle::check_gradients([&] { return conv.forward(x, eval); },
                                        with_inputs(params, {{"x", x}}), probe, kEps);
  } else if (layer == "lstm") {
    const int hidden = std::uniform_int_distribution<int>(2, 6)(rng);
    const auto lstm = aformer::Lstm::create(s.d, hidden, rng);
    lstm.collect("lstm", params);
    jitter(params, rng);
    out.shape += " hidden=" + std::to_string(hidden);
    out.check = oracle::check_gradients([&] { return lstm.forward(x); },
                                        with_inputs(params, {{"x", x}}), probe, kEps);
  } else if (layer == "fusion_add") {
    Tensor a = oracle::random_tensor({s.frames, s.d}, rng);
    out.check = oracle::check_gradients([&] { return aformer::fuse_add(x, a); },
                                        {{"general", x}, {"accent", a}}, probe, kEps);
  } else if (layer == "fusion_concat") {
    Tensor a = oracle::random_tensor({s.frames, s.d}, rng);
    const auto proj = aformer::Linear::create(2 * s.d, s.d, rng, false);
    proj.collect("projection", params);
    out.check = oracle::check_gradients([&] { return aformer::fuse_concat(x, a, proj); },
                                        with_inputs(params, {{"general", x}, {"accent", a}}),
                                        probe, kEps);
  } else if (layer == "fusion_cross_attention") {
    Tensor a = oracle::random_tensor({s.frames, s.d}, rng);
    const int d_att = std::uniform_int_distribution<int>(2, 6)(rng);
    const auto fusion = aformer::Fusion::create(aformer::FusionKind::kCrossAttention, s.d,
                                                d_att, rng);
    fusion.collect("fusion", params);
    jitter(params, rng);
    out.shape += " d_att=" + std::to_string(d_att);
    out.check = oracle::check_gradients([&] { return fusion.forward(x, a); },
                                        with_inputs(params, {{"general", x}, {"accent", a}}),
                                        probe, kEps);
  } else if (layer == "decoder_layer") {
    Tensor memory = oracle::random_tensor({s.kv_frames, s.d}, rng);
    const auto dec = aformer::DecoderLayer::create(s.d, s.heads, 2 * s.d, rng);
    dec.collect("decoder", params);
    jitter(params, rng);
    out.check = oracle::check_gradients([&] { return dec.forward(x, memory, eval); },
                                        with_inputs(params, {{"x", x}, {"memory", memory}}),
                                        probe, kEps);
  } else {
    throw std::invalid_argument("unknown layer " + layer);
  }
  return out;
}

}  // namespace gradcases
