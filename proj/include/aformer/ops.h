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

// Differentiable tensor operations. Unless stated otherwise, 2-D inputs are
// [rows x cols] row-major and broadcasting is limited to the explicit
// row-wise forms below.

#ifndef AFORMER_OPS_H_
#define AFORMER_OPS_H_

#include <random>
#include <span>
#include <vector>

#include "aformer/tensor.h"

namespace aformer {

// [m x k] * [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);
// x [T x in] * w [in x out] + bias [out]; bias may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);
// x [T x d] + v [d] added to every row.
Tensor add_rowwise(const Tensor& x, const Tensor& v);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor swish(const Tensor& x);
// Gated linear unit over the last axis: [.., 2d] -> a * sigmoid(b).
Tensor glu(const Tensor& x);

Tensor softmax(const Tensor& x, int axis);
Tensor log_softmax(const Tensor& x, int axis);
// Row-wise normalization of x [T x d] with affine gamma/beta [d].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  float eps = 1e-5f);

Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, int start, int length);
Tensor reshape(const Tensor& x, Shape shape);
// [A x B x C] -> [B x A x C]
Tensor swap_leading_axes(const Tensor& x);

// Inverted dropout; identity when !training or p == 0.
Tensor dropout(const Tensor& x, float p, bool training, std::mt19937& rng);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// x [C x H x W], w [O x C x k x k], bias [O]; valid (unpadded) convolution.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias,
              int stride);
// Per-channel convolution along time with symmetric zero padding.
// x [T x d], w [d x k] (k odd), bias [d]; output [T x d].
Tensor depthwise_conv1d(const Tensor& x, const Tensor& w, const Tensor& bias);

// Rows of table [V x d] selected by ids.
Tensor embedding(const Tensor& table, std::span<const int> ids);

// Sets entries strictly above the diagonal of a square score matrix to -inf.
Tensor causal_mask(const Tensor& scores);

// Label-smoothed cross entropy averaged over rows. The target class gets
// 1 - smoothing and every other class smoothing / (V - 1).
Tensor label_smoothed_cross_entropy(const Tensor& logits,
                                    std::span<const int> targets,
                                    float smoothing);

}  // namespace aformer

#endif  // AFORMER_OPS_H_
