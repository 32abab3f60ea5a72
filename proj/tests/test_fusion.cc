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
#include "aformer/fusion.h"
#include "aformer/ops.h"
#include "oracles.h"

namespace aformer {
namespace {

void expect_close(const Tensor& a, const Tensor& b, double tol) {
  ASSERT_EQ(a.shape(), b.shape());
  for (size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], tol) << i;
}

void expect_close(const Tensor& a, const oracle::Matrix& b, double tol) {
  ASSERT_EQ(a.dim(0), static_cast<int>(b.size()));
  ASSERT_EQ(a.dim(1), static_cast<int>(b[0].size()));
  for (int r = 0; r < a.dim(0); ++r) {
    for (int c = 0; c < a.dim(1); ++c) EXPECT_NEAR(a.at(r, c), b[r][c], tol) << r << "," << c;
  }
}

// [2d x d] selector stacking two d x d blocks.
Linear selector(int d, float top, float bottom) {
  Linear l;
  l.weight = Tensor({2 * d, d});
  for (int i = 0; i < d; ++i) {
    l.weight.data()[i * d + i] = top;
    l.weight.data()[(d + i) * d + i] = bottom;
  }
  return l;
}

TEST(FuseAdd, IdentityAndCommutativity) {
  std::mt19937 rng(51);
  const Tensor g = oracle::random_tensor({4, 6}, rng), a = oracle::random_tensor({4, 6}, rng);
  expect_close(fuse_add(g, Tensor({4, 6})), g, 0.0);
  expect_close(fuse_add(g, a), fuse_add(a, g), 0.0);
  EXPECT_THROW(fuse_add(g, Tensor({3, 6})), DimensionError);
}

TEST(FuseConcat, SelectorProjectionsRecoverInputs) {
  std::mt19937 rng(52);
  const Tensor g = oracle::random_tensor({5, 4}, rng), a = oracle::random_tensor({5, 4}, rng);
  expect_close(fuse_concat(g, a, selector(4, 1, 0)), g, 1e-7);
  expect_close(fuse_concat(g, a, selector(4, 0, 1)), a, 1e-7);
  expect_close(fuse_concat(g, a, selector(4, 1, 1)), fuse_add(g, a), 1e-6);
}

TEST(FuseConcat, ProjectionShapeChecked) {
  std::mt19937 rng(53);
  const Tensor g({3, 4}), a({3, 4});
  EXPECT_THROW(fuse_concat(g, a, Linear::create(8, 5, rng, false)), DimensionError);
  EXPECT_THROW(fuse_concat(g, a, Linear::create(4, 4, rng, false)), DimensionError);
}

TEST(FuseCrossAttention, SingleFrameClosedForm) {
  // With one frame every attention weight is 1, so
  //   X_M = relu(X_G Wv1) and X_F = relu(X_A Wv2).
  std::mt19937 rng(54);
  const Fusion f = Fusion::create(FusionKind::kCrossAttention, 6, 3, rng);
  const Tensor g = oracle::random_tensor({1, 6}, rng), a = oracle::random_tensor({1, 6}, rng);
  CrossAttentionTrace trace;
  const Tensor fused = fuse_cross_attention(g, a, f.cross, &trace);
  expect_close(trace.mid, relu(f.cross.first.wv.forward(g)), 1e-6);
  expect_close(fused, relu(f.cross.second.wv.forward(a)), 1e-6);
  EXPECT_FLOAT_EQ(trace.first_weights.at(0, 0), 1.0f);
}

TEST(FuseCrossAttention, MatchesDoubleOracleWithAttentionWidthScaling) {
  std::mt19937 rng(55);
  for (int d_att : {2, 5, 16}) {
    const Fusion f = Fusion::create(FusionKind::kCrossAttention, 8, d_att, rng);
    const Tensor g = oracle::random_tensor({6, 8}, rng), a = oracle::random_tensor({6, 8}, rng);
    CrossAttentionTrace trace;
    const Tensor fused = fuse_cross_attention(g, a, f.cross, &trace);
    using oracle::to_matrix;
    const oracle::Matrix mid =
        oracle::cross_attention_layer(to_matrix(a), to_matrix(g), to_matrix(f.cross.first.wq.weight),
                                      to_matrix(f.cross.first.wk.weight),
                                      to_matrix(f.cross.first.wv.weight));
    expect_close(trace.mid, mid, 1e-5);
    const oracle::Matrix want = oracle::cross_attention_layer(
        to_matrix(trace.mid), to_matrix(a), to_matrix(f.cross.second.wq.weight),
        to_matrix(f.cross.second.wk.weight), to_matrix(f.cross.second.wv.weight));
    expect_close(fused, want, 1e-5);
  }
}

TEST(FuseCrossAttention, AttentionWeightsAreRowStochastic) {
  std::mt19937 rng(56);
  const Fusion f = Fusion::create(FusionKind::kCrossAttention, 4, 4, rng);
  CrossAttentionTrace trace;
  fuse_cross_attention(oracle::random_tensor({5, 4}, rng), oracle::random_tensor({5, 4}, rng),
                       f.cross, &trace);
  for (const Tensor* w : {&trace.first_weights, &trace.second_weights}) {
    for (int r = 0; r < 5; ++r) {
      double total = 0;
      for (int c = 0; c < 5; ++c) total += w->at(r, c);
      EXPECT_NEAR(total, 1.0, 1e-6);
    }
  }
}

TEST(Fusion, ParametersPerKind) {
  std::mt19937 rng(57);
  NamedParams add_params, concat_params, cross_params;
  Fusion::create(FusionKind::kAdd, 4, 2, rng).collect("fusion", add_params);
  Fusion::create(FusionKind::kConcat, 4, 2, rng).collect("fusion", concat_params);
  Fusion::create(FusionKind::kCrossAttention, 4, 2, rng).collect("fusion", cross_params);
  EXPECT_EQ(parameter_count(add_params), 0);
  EXPECT_EQ(parameter_count(concat_params), 8 * 4);
  EXPECT_EQ(parameter_count(cross_params), 2 * (4 * 2 + 4 * 2 + 4 * 4));
  EXPECT_THROW(Fusion::create(FusionKind::kCrossAttention, 4, 0, rng), ConfigError);
  EXPECT_THROW(fusion_kind_from_string("gate"), ConfigError);
  for (FusionKind k : {FusionKind::kAdd, FusionKind::kConcat, FusionKind::kCrossAttention}) {
    EXPECT_EQ(fusion_kind_from_string(to_string(k)), k);
  }
}

}  // namespace
}  // namespace aformer
