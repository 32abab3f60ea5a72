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

#include <gtest/gtest.h>

#include "aformer/encoders.h"
#include "aformer/errors.h"
#include "aformer/ops.h"
#include "grad_cases.h"
#include "oracles.h"

namespace aformer {
namespace {

void zero(Tensor t) {
  for (float& v : t.data()) v = 0.0f;
}

void zero(Linear& l) {
  zero(l.weight);
  if (l.bias.defined()) zero(l.bias);
}

void expect_close(const Tensor& a, const Tensor& b, double tol) {
  ASSERT_EQ(a.shape(), b.shape());
  for (size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], tol) << i;
}

void randomize_norm(LayerNorm& n, std::mt19937& rng) {
  n.gamma = oracle::random_tensor(n.gamma.shape(), rng);
  n.beta = oracle::random_tensor(n.beta.shape(), rng);
}

TEST(ConformerBlock, ZeroSublayersReduceToFinalNorm) {
  std::mt19937 rng(41);
  ConformerBlock block = ConformerBlock::create(8, 2, 16, 3, rng);
  zero(block.ffn1.w2);
  zero(block.mhsa.wo);
  zero(block.conv.pointwise2);
  zero(block.ffn2.w2);
  randomize_norm(block.final_norm, rng);
  const Tensor x = oracle::random_tensor({5, 8}, rng);
  expect_close(block.forward(x, ForwardContext{}), block.final_norm.forward(x), 1e-6);
}

TEST(ConformerBlock, FeedForwardResidualsUseHalfWeight) {
  std::mt19937 rng(42);
  ConformerBlock block = ConformerBlock::create(8, 2, 16, 3, rng);
  randomize_norm(block.ffn1_norm, rng);
  randomize_norm(block.ffn2_norm, rng);
  const Tensor x = oracle::random_tensor({4, 8}, rng);
  const ForwardContext eval;
  const ConformerBlock::Trace t = block.trace(x, eval);

  const Tensor f1 = block.ffn1.forward(block.ffn1_norm.forward(x), eval);
  expect_close(t.x_ffn1, add(x, scale(f1, 0.5f)), 1e-6);
  const Tensor m = block.mhsa.self_attention(block.mhsa_norm.forward(t.x_ffn1), eval);
  expect_close(t.x_mhsa, add(t.x_ffn1, m), 1e-6);
  const Tensor c = block.conv.forward(block.conv_norm.forward(t.x_mhsa), eval);
  expect_close(t.x_conv, add(t.x_mhsa, c), 1e-6);
  const Tensor f2 = block.ffn2.forward(block.ffn2_norm.forward(t.x_conv), eval);
  expect_close(t.x_ffn2, add(t.x_conv, scale(f2, 0.5f)), 1e-6);
  expect_close(t.y, block.final_norm.forward(t.x_ffn2), 1e-6);
}

TEST(ConformerBlock, DoublingFeedForwardMovesSumByHalfTheChange) {
  std::mt19937 rng(49);
  ConformerBlock block = ConformerBlock::create(8, 2, 16, 3, rng);
  // Silence the middle sublayers so the second FFN sees the same input.
  for (Linear* l : {&block.mhsa.wo, &block.conv.pointwise2}) zero(*l);
  const Tensor x = oracle::random_tensor({4, 8}, rng);
  const ForwardContext eval;
  const ConformerBlock::Trace base = block.trace(x, eval);
  const Tensor f1 = block.ffn1.forward(block.ffn1_norm.forward(x), eval);

  ConformerBlock doubled = block;
  for (FeedForward* f : {&doubled.ffn1, &doubled.ffn2}) {
    f->w2.weight = scale(f->w2.weight, 2.0f).detach();
    f->w2.bias = scale(f->w2.bias, 2.0f).detach();
  }
  const ConformerBlock::Trace moved = doubled.trace(x, eval);
  // FFN1: the output grows by f1, the sum by f1 / 2.
  expect_close(sub(moved.x_ffn1, base.x_ffn1), scale(f1, 0.5f), 1e-5);
  // FFN2 sees a shifted input; compare against its own undoubled output.
  const Tensor f2 = block.ffn2.forward(block.ffn2_norm.forward(moved.x_conv), eval);
  expect_close(sub(moved.x_ffn2, moved.x_conv), f2, 1e-5);
  const Tensor f2_base = block.ffn2.forward(block.ffn2_norm.forward(base.x_conv), eval);
  expect_close(sub(base.x_ffn2, base.x_conv), scale(f2_base, 0.5f), 1e-5);
}

TEST(ConformerBlock, GradientMatchesFiniteDifferences) {
  std::mt19937 rng(43);
  const ConformerBlock block = ConformerBlock::create(4, 2, 8, 3, rng);
  Tensor x = oracle::random_tensor({3, 4}, rng);
  NamedParams params;
  block.collect("block", params);
  std::vector<std::pair<std::string, Tensor>> inputs = {{"x", x}};
  for (auto& p : params) inputs.push_back(p);
  const auto check = oracle::check_gradients(
      [&] { return block.forward(x, ForwardContext{}); }, inputs, 4);
  EXPECT_TRUE(check.ok(gradcases::kTolerance)) << check.worst_input << " " << check.worst_rel;
}

TEST(GeneralEncoder, NoBlocksIsIdentityAndDepthStacks) {
  std::mt19937 rng(44);
  const Tensor x = oracle::random_tensor({4, 8}, rng);
  const GeneralEncoder empty = GeneralEncoder::create(0, 8, 2, 16, 3, rng);
  expect_close(empty.forward(x, ForwardContext{}), x, 0.0);
  const GeneralEncoder two = GeneralEncoder::create(2, 8, 2, 16, 3, rng);
  const Tensor stacked = two.blocks[1].forward(two.blocks[0].forward(x, {}), {});
  expect_close(two.forward(x, ForwardContext{}), stacked, 0.0);
}

TEST(TransformerLayer, IsPostNorm) {
  std::mt19937 rng(45);
  TransformerLayer layer = TransformerLayer::create(6, 2, 12, rng);
  randomize_norm(layer.norm1, rng);
  randomize_norm(layer.norm2, rng);
  const Tensor x = oracle::random_tensor({4, 6}, rng);
  const ForwardContext eval;
  const Tensor h = layer.norm1.forward(add(x, layer.mhsa.self_attention(x, eval)));
  expect_close(layer.forward(x, eval), layer.norm2.forward(add(h, layer.ffn.forward(h, eval))),
               1e-6);
  zero(layer.mhsa.wo);
  zero(layer.ffn.w2);
  expect_close(layer.forward(x, eval), layer.norm2.forward(layer.norm1.forward(x)), 1e-6);
}

TEST(AccentEncoder, KindsProduceModelWidth) {
  std::mt19937 rng(46);
  const Tensor x = oracle::random_tensor({5, 8}, rng);
  const AccentEncoder tr = AccentEncoder::create({AccentKind::kTransformer, 2, 16, 4}, 8, 2, rng);
  EXPECT_EQ(tr.layers.size(), 2u);
  EXPECT_EQ(tr.forward(x, {}).shape(), (Shape{5, 8}));
  const AccentEncoder rec = AccentEncoder::create({AccentKind::kRecurrent, 2, 16, 3}, 8, 2, rng);
  EXPECT_EQ(rec.lstm.size(), 2u);
  EXPECT_EQ(rec.output_dim(), 8);
  EXPECT_EQ(rec.forward(x, {}).shape(), (Shape{5, 8}));
  const AccentEncoder none = AccentEncoder::create({AccentKind::kNone, 1, 16, 3}, 8, 2, rng);
  EXPECT_EQ(none.output_dim(), 0);
  EXPECT_THROW(none.forward(x, {}), ContractError);
  NamedParams params;
  none.collect("accent_encoder", params);
  EXPECT_TRUE(params.empty());
}

TEST(AccentEncoder, RecurrentGradientMatchesFiniteDifferences) {
  std::mt19937 rng(47);
  const AccentEncoder rec = AccentEncoder::create({AccentKind::kRecurrent, 2, 8, 3}, 4, 1, rng);
  Tensor x = oracle::random_tensor({4, 4}, rng);
  NamedParams params;
  rec.collect("accent", params);
  std::vector<std::pair<std::string, Tensor>> inputs = {{"x", x}};
  for (auto& p : params) inputs.push_back(p);
  const auto check =
      oracle::check_gradients([&] { return rec.forward(x, ForwardContext{}); }, inputs, 5);
  EXPECT_TRUE(check.ok(gradcases::kTolerance)) << check.worst_input << " " << check.worst_rel;
}

TEST(AccentEncoder, ConfigErrors) {
  std::mt19937 rng(48);
  EXPECT_THROW(AccentEncoder::create({AccentKind::kTransformer, 0, 16, 4}, 8, 2, rng),
               ConfigError);
  AccentEncoder tr = AccentEncoder::create({AccentKind::kTransformer, 1, 16, 4}, 8, 2, rng);
  EXPECT_THROW(check_encoder_pair(16, tr), ConfigError);
  EXPECT_THROW(accent_kind_from_string("gru"), ConfigError);
  for (AccentKind k : {AccentKind::kNone, AccentKind::kTransformer, AccentKind::kRecurrent}) {
    EXPECT_EQ(accent_kind_from_string(to_string(k)), k);
  }
}

}  // namespace
}  // namespace aformer
