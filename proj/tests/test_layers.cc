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

#include <cmath>

#include "aformer/errors.h"
#include "aformer/layers.h"
#include "aformer/ops.h"
#include "grad_cases.h"
#include "oracles.h"

namespace aformer {
namespace {

class LayerGradients : public ::testing::TestWithParam<std::string> {};

TEST_P(LayerGradients, MatchFiniteDifferencesOnMicroShapes) {
  for (int seed = 0; seed < 6; ++seed) {
    const gradcases::Outcome o = gradcases::run(GetParam(), seed);
    EXPECT_TRUE(o.check.ok(gradcases::kTolerance))
        << o.layer << " seed " << seed << " " << o.shape << " worst " << o.check.worst_input
        << " rel " << o.check.worst_rel;
  }
}

INSTANTIATE_TEST_SUITE_P(AllLayers, LayerGradients,
                         ::testing::ValuesIn(gradcases::layer_names()),
                         [](const auto& info) { return info.param; });

TEST(Subsampling, OutputLengthFormula) {
  EXPECT_EQ(Subsampling::output_length(6), 0);
  EXPECT_EQ(Subsampling::output_length(7), 1);
  EXPECT_EQ(Subsampling::output_length(16), 3);
  EXPECT_EQ(Subsampling::output_length(32), 7);
  EXPECT_EQ(Subsampling::output_length(100), 24);
  for (int n = 7; n < 400; ++n) {
    const int once = (n - 3) / 2 + 1;  // valid 3x3 stride-2 convolution
    EXPECT_EQ(Subsampling::output_length(n), (once - 3) / 2 + 1) << n;
  }
}

TEST(Subsampling, ShapesAndFrequencyBins) {
  std::mt19937 rng(31);
  const Subsampling sub = Subsampling::create(16, 5, 12, rng);
  EXPECT_EQ(sub.proj.in_dim(), 5 * 3);  // 16 features -> 3 bins per channel
  const Tensor y = sub.forward(oracle::random_tensor({32, 16}, rng));
  EXPECT_EQ(y.shape(), (Shape{7, 12}));
  EXPECT_EQ(sub.forward(oracle::random_tensor({7, 16}, rng)).shape(), (Shape{1, 12}));
}

TEST(Subsampling, RejectsShortInputsAndNarrowFeatures) {
  std::mt19937 rng(32);
  const Subsampling sub = Subsampling::create(8, 2, 4, rng);
  EXPECT_THROW(sub.forward(Tensor({6, 8})), DimensionError);
  EXPECT_THROW(sub.forward(Tensor({10})), DimensionError);
  EXPECT_THROW(Subsampling::create(6, 2, 4, rng), ConfigError);
}

TEST(Subsampling, GradientMatchesFiniteDifferences) {
  std::mt19937 rng(33);
  const Subsampling sub = Subsampling::create(8, 2, 3, rng);
  Tensor feats = oracle::random_tensor({9, 8}, rng);
  NamedParams params;
  sub.collect("sub", params);
  std::vector<std::pair<std::string, Tensor>> inputs = {{"feats", feats}};
  for (auto& p : params) inputs.push_back(p);
  const auto check = oracle::check_gradients([&] { return sub.forward(feats); }, inputs, 3);
  EXPECT_TRUE(check.ok(gradcases::kTolerance)) << check.worst_input << " " << check.worst_rel;
}

TEST(PositionalEncoding, SinusoidValues) {
  const Tensor pe = positional_encoding(9, 6);
  for (int t = 0; t < 9; ++t) {
    for (int i = 0; i < 3; ++i) {
      const double angle = t / std::pow(10000.0, 2.0 * i / 6.0);
      EXPECT_NEAR(pe.at(t, 2 * i), std::sin(angle), 1e-6);
      EXPECT_NEAR(pe.at(t, 2 * i + 1), std::cos(angle), 1e-6);
    }
  }
  EXPECT_THROW(positional_encoding(0, 4), DimensionError);
}

TEST(Attention, WeightsAreRowStochasticAndCausalWhenAsked) {
  std::mt19937 rng(34);
  const auto mha = MultiHeadAttention::create(8, 2, rng);
  const Tensor x = oracle::random_tensor({5, 8}, rng);
  std::vector<Tensor> weights;
  mha.forward(x, x, true, ForwardContext{}, &weights);
  ASSERT_EQ(weights.size(), 2u);
  for (const Tensor& w : weights) {
    for (int r = 0; r < 5; ++r) {
      double total = 0;
      for (int c = 0; c < 5; ++c) {
        total += w.at(r, c);
        if (c > r) EXPECT_EQ(w.at(r, c), 0.0f);
      }
      EXPECT_NEAR(total, 1.0, 1e-6);
    }
  }
}

TEST(Attention, CausalOutputIgnoresFutureFrames) {
  std::mt19937 rng(35);
  const auto mha = MultiHeadAttention::create(6, 3, rng);
  Tensor x = oracle::random_tensor({6, 6}, rng);
  const Tensor before = mha.forward(x, x, true, ForwardContext{});
  Tensor changed = x.clone();
  for (int c = 0; c < 6; ++c) changed.data()[4 * 6 + c] += 3.0f;
  const Tensor after = mha.forward(changed, changed, true, ForwardContext{});
  for (int t = 0; t < 4; ++t) {
    for (int c = 0; c < 6; ++c) EXPECT_EQ(before.at(t, c), after.at(t, c));
  }
}

TEST(Attention, HeadsMustDivideWidth) {
  std::mt19937 rng(36);
  EXPECT_THROW(MultiHeadAttention::create(6, 4, rng), ConfigError);
}

TEST(ConvModule, EvenKernelRejected) {
  std::mt19937 rng(37);
  EXPECT_THROW(ConvModule::create(4, 4, rng), ConfigError);
}

TEST(Lstm, MatchesDoubleRecurrence) {
  std::mt19937 rng(38);
  const Lstm lstm = Lstm::create(3, 2, rng);
  const Tensor x = oracle::random_tensor({4, 3}, rng);
  const Tensor y = lstm.forward(x);
  ASSERT_EQ(y.shape(), (Shape{4, 2}));
  const int h = 2;
  std::vector<double> hs(h, 0.0), cs(h, 0.0);
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (int t = 0; t < 4; ++t) {
    std::vector<double> z(4 * h);
    for (int j = 0; j < 4 * h; ++j) {
      z[j] = lstm.bias.data()[j];
      for (int i = 0; i < 3; ++i) z[j] += x.at(t, i) * lstm.w_ih.at(i, j);
      for (int i = 0; i < h; ++i) z[j] += hs[i] * lstm.w_hh.at(i, j);
    }
    for (int j = 0; j < h; ++j) {
      const double ig = sig(z[j]), fg = sig(z[h + j]), cg = std::tanh(z[2 * h + j]),
                   og = sig(z[3 * h + j]);
      cs[j] = fg * cs[j] + ig * cg;
      hs[j] = og * std::tanh(cs[j]);
      EXPECT_NEAR(y.at(t, j), hs[j], 1e-5);
    }
  }
}

TEST(ForwardContext, TrainingDropoutNeedsRng) {
  ForwardContext ctx;
  ctx.training = true;
  ctx.dropout = 0.1f;
  EXPECT_THROW(ctx.drop(Tensor({2, 2})), ContractError);
}

TEST(Parameters, CountSumsElements) {
  std::mt19937 rng(39);
  NamedParams params;
  Linear::create(3, 4, rng).collect("a", params);
  Linear::create(4, 2, rng, false).collect("b", params);
  EXPECT_EQ(parameter_count(params), 3 * 4 + 4 + 4 * 2);
}

}  // namespace
}  // namespace aformer
