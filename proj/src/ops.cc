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

#include "aformer/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "aformer/errors.h"

namespace aformer {

namespace {

// C[m x n] (+)= A[m x k] * B[k x n]
void gemm_nn(const float* a, const float* b, float* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<size_t>(i) * n;
    const float* arow = a + static_cast<size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const float av = arow[p];
      const float* brow = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m x n] += A[m x k] * B[n x k]^T
void gemm_nt(const float* a, const float* b, float* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const float* arow = a + static_cast<size_t>(i) * k;
    float* crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const float* brow = b + static_cast<size_t>(j) * k;
      float acc = 0.0f;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C[m x n] += A[k x m]^T * B[k x n]
void gemm_tn(const float* a, const float* b, float* c, int m, int k, int n) {
  for (int p = 0; p < k; ++p) {
    const float* arow = a + static_cast<size_t>(p) * m;
    const float* brow = b + static_cast<size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const float av = arow[i];
      float* crow = c + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void require_rank(const Tensor& t, int rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void require_finite(const Tensor& t, const char* op) {
  for (float v : t.data()) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + ": non-finite input");
    }
  }
}

// Masked (-inf) logits are legal softmax inputs; NaN and +inf are not.
void require_softmax_input(const Tensor& t, const char* op) {
  for (float v : t.data()) {
    if (std::isnan(v) || v == std::numeric_limits<float>::infinity()) {
      throw NumericError(std::string(op) + ": NaN or +inf input");
    }
  }
}

void require_live_slice(float mx, const char* op) {
  if (mx == -std::numeric_limits<float>::infinity()) {
    throw NumericError(std::string(op) + ": every entry of a slice is masked");
  }
}

// Grad buffer of parent `i` when it takes part in differentiation.
float* parent_grad(TensorImpl& out, size_t i) {
  TensorImpl& p = *out.parents[i];
  return p.requires_grad ? p.grad_buffer() : nullptr;
}

const float* parent_data(TensorImpl& out, size_t i) {
  return out.parents[i]->data.data();
}

// outer x n x inner decomposition around `axis`.
struct AxisSplit {
  size_t outer = 1;
  int n = 1;
  size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, int axis) {
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

int normalize_axis(const Tensor& t, int axis, const char* op) {
  int r = t.rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) {
    throw DimensionError(std::string(op) + ": axis out of range for " +
                         shape_str(t.shape()));
  }
  return axis;
}

template <typename Fwd, typename Bwd>
Tensor unary(const Tensor& x, Fwd fwd, Bwd bwd) {
  std::vector<float> y(x.numel());
  const float* xd = x.ptr();
  for (size_t i = 0; i < y.size(); ++i) y[i] = fwd(xd[i]);
  return make_result(x.shape(), std::move(y), {x}, [bwd](TensorImpl& out) {
    float* gx = parent_grad(out, 0);
    if (!gx) return;
    const float* xv = parent_data(out, 0);
    const float* yv = out.data.data();
    const float* gy = out.grad.data();
    for (size_t i = 0; i < out.data.size(); ++i) {
      gx[i] += gy[i] * bwd(xv[i], yv[i]);
    }
  });
}

float sigmoidf(float v) { return 1.0f / (1.0f + std::exp(-v)); }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ, " +
                         shape_str(a.shape()) + " * " + shape_str(b.shape()));
  }
  std::vector<float> y(static_cast<size_t>(m) * n, 0.0f);
  gemm_nn(a.ptr(), b.ptr(), y.data(), m, k, n);
  return make_result({m, n}, std::move(y), {a, b}, [m, k, n](TensorImpl& out) {
    const float* gy = out.grad.data();
    if (float* ga = parent_grad(out, 0)) {
      gemm_nt(gy, parent_data(out, 1), ga, m, n, k);
    }
    if (float* gb = parent_grad(out, 1)) {
      gemm_tn(parent_data(out, 0), gy, gb, k, m, n);
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_rank(x, 2, "linear");
  require_rank(w, 2, "linear");
  const int m = x.dim(0), k = x.dim(1), n = w.dim(1);
  if (w.dim(0) != k) {
    throw DimensionError("linear: input " + shape_str(x.shape()) +
                         " incompatible with weight " + shape_str(w.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != n)) {
    throw DimensionError("linear: bias " + shape_str(bias.shape()) +
                         " does not match output width " + std::to_string(n));
  }
  std::vector<float> y(static_cast<size_t>(m) * n, 0.0f);
  if (has_bias) {
    for (int i = 0; i < m; ++i) {
      std::copy(bias.ptr(), bias.ptr() + n, y.data() + static_cast<size_t>(i) * n);
    }
  }
  gemm_nn(x.ptr(), w.ptr(), y.data(), m, k, n);
  auto fn = [m, k, n, has_bias](TensorImpl& out) {
    const float* gy = out.grad.data();
    if (float* gx = parent_grad(out, 0)) {
      gemm_nt(gy, parent_data(out, 1), gx, m, n, k);
    }
    if (float* gw = parent_grad(out, 1)) {
      gemm_tn(parent_data(out, 0), gy, gw, k, m, n);
    }
    if (has_bias) {
      if (float* gb = parent_grad(out, 2)) {
        for (int i = 0; i < m; ++i) {
          const float* row = gy + static_cast<size_t>(i) * n;
          for (int j = 0; j < n; ++j) gb[j] += row[j];
        }
      }
    }
  };
  if (has_bias) return make_result({m, n}, std::move(y), {x, w, bias}, fn);
  return make_result({m, n}, std::move(y), {x, w}, fn);
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const int m = a.dim(0), n = a.dim(1);
  std::vector<float> y(a.numel());
  const float* ad = a.ptr();
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) y[static_cast<size_t>(j) * m + i] = ad[static_cast<size_t>(i) * n + j];
  }
  return make_result({n, m}, std::move(y), {a}, [m, n](TensorImpl& out) {
    float* ga = parent_grad(out, 0);
    if (!ga) return;
    const float* gy = out.grad.data();
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) ga[static_cast<size_t>(i) * n + j] += gy[static_cast<size_t>(j) * m + i];
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<float> y(a.numel());
  for (size_t i = 0; i < y.size(); ++i) y[i] = a.ptr()[i] + b.ptr()[i];
  return make_result(a.shape(), std::move(y), {a, b}, [](TensorImpl& out) {
    const float* gy = out.grad.data();
    const size_t n = out.data.size();
    for (size_t p = 0; p < 2; ++p) {
      if (float* g = parent_grad(out, p)) {
        for (size_t i = 0; i < n; ++i) g[i] += gy[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<float> y(a.numel());
  for (size_t i = 0; i < y.size(); ++i) y[i] = a.ptr()[i] - b.ptr()[i];
  return make_result(a.shape(), std::move(y), {a, b}, [](TensorImpl& out) {
    const float* gy = out.grad.data();
    const size_t n = out.data.size();
    if (float* g = parent_grad(out, 0)) {
      for (size_t i = 0; i < n; ++i) g[i] += gy[i];
    }
    if (float* g = parent_grad(out, 1)) {
      for (size_t i = 0; i < n; ++i) g[i] -= gy[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<float> y(a.numel());
  for (size_t i = 0; i < y.size(); ++i) y[i] = a.ptr()[i] * b.ptr()[i];
  return make_result(a.shape(), std::move(y), {a, b}, [](TensorImpl& out) {
    const float* gy = out.grad.data();
    const size_t n = out.data.size();
    const float* av = parent_data(out, 0);
    const float* bv = parent_data(out, 1);
    if (float* g = parent_grad(out, 0)) {
      for (size_t i = 0; i < n; ++i) g[i] += gy[i] * bv[i];
    }
    if (float* g = parent_grad(out, 1)) {
      for (size_t i = 0; i < n; ++i) g[i] += gy[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, float s) {
  std::vector<float> y(a.numel());
  for (size_t i = 0; i < y.size(); ++i) y[i] = a.ptr()[i] * s;
  return make_result(a.shape(), std::move(y), {a}, [s](TensorImpl& out) {
    float* g = parent_grad(out, 0);
    if (!g) return;
    const float* gy = out.grad.data();
    for (size_t i = 0; i < out.data.size(); ++i) g[i] += gy[i] * s;
  });
}

Tensor add_rowwise(const Tensor& x, const Tensor& v) {
  require_rank(x, 2, "add_rowwise");
  const int m = x.dim(0), n = x.dim(1);
  if (v.rank() != 1 || v.dim(0) != n) {
    throw DimensionError("add_rowwise: vector " + shape_str(v.shape()) +
                         " does not match rows of " + shape_str(x.shape()));
  }
  std::vector<float> y(x.data().begin(), x.data().end());
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) y[static_cast<size_t>(i) * n + j] += v.ptr()[j];
  }
  return make_result(x.shape(), std::move(y), {x, v}, [m, n](TensorImpl& out) {
    const float* gy = out.grad.data();
    if (float* g = parent_grad(out, 0)) {
      for (size_t i = 0; i < out.data.size(); ++i) g[i] += gy[i];
    }
    if (float* g = parent_grad(out, 1)) {
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) g[j] += gy[static_cast<size_t>(i) * n + j];
      }
    }
  });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](float v) { return v > 0.0f ? v : 0.0f; },
      [](float xv, float) { return xv > 0.0f ? 1.0f : 0.0f; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, sigmoidf,
               [](float, float yv) { return yv * (1.0f - yv); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](float v) { return std::tanh(v); },
      [](float, float yv) { return 1.0f - yv * yv; });
}

Tensor swish(const Tensor& x) {
  return unary(
      x, [](float v) { return v * sigmoidf(v); },
      [](float xv, float) {
        const float s = sigmoidf(xv);
        return s + xv * s * (1.0f - s);
      });
}

Tensor glu(const Tensor& x) {
  const int last = x.dim(-1);
  if (last % 2 != 0) {
    throw DimensionError("glu: last axis must be even, got " +
                         shape_str(x.shape()));
  }
  const int half = last / 2;
  const size_t rows = x.numel() / last;
  Shape shape = x.shape();
  shape.back() = half;
  std::vector<float> y(rows * half);
  const float* xd = x.ptr();
  for (size_t r = 0; r < rows; ++r) {
    const float* row = xd + r * last;
    for (int j = 0; j < half; ++j) y[r * half + j] = row[j] * sigmoidf(row[half + j]);
  }
  return make_result(shape, std::move(y), {x}, [rows, half](TensorImpl& out) {
    float* gx = parent_grad(out, 0);
    if (!gx) return;
    const float* xv = parent_data(out, 0);
    const float* gy = out.grad.data();
    const int last = 2 * half;
    for (size_t r = 0; r < rows; ++r) {
      const float* row = xv + r * last;
      float* grow = gx + r * last;
      for (int j = 0; j < half; ++j) {
        const float s = sigmoidf(row[half + j]);
        const float g = gy[r * half + j];
        grow[j] += g * s;
        grow[half + j] += g * row[j] * s * (1.0f - s);
      }
    }
  });
}

Tensor softmax(const Tensor& x, int axis) {
  axis = normalize_axis(x, axis, "softmax");
  require_softmax_input(x, "softmax");
  const AxisSplit s = split_axis(x.shape(), axis);
  std::vector<float> y(x.numel());
  const float* xd = x.ptr();
  for (size_t o = 0; o < s.outer; ++o) {
    for (size_t in = 0; in < s.inner; ++in) {
      const size_t base = o * s.n * s.inner + in;
      float mx = -std::numeric_limits<float>::infinity();
      for (int i = 0; i < s.n; ++i) mx = std::max(mx, xd[base + i * s.inner]);
      require_live_slice(mx, "softmax");
      float total = 0.0f;
      for (int i = 0; i < s.n; ++i) {
        const float e = std::exp(xd[base + i * s.inner] - mx);
        y[base + i * s.inner] = e;
        total += e;
      }
      const float inv = 1.0f / total;
      for (int i = 0; i < s.n; ++i) y[base + i * s.inner] *= inv;
    }
  }
  return make_result(x.shape(), std::move(y), {x}, [s](TensorImpl& out) {
    float* gx = parent_grad(out, 0);
    if (!gx) return;
    const float* yv = out.data.data();
    const float* gy = out.grad.data();
    for (size_t o = 0; o < s.outer; ++o) {
      for (size_t in = 0; in < s.inner; ++in) {
        const size_t base = o * s.n * s.inner + in;
        float dot = 0.0f;
        for (int i = 0; i < s.n; ++i) {
          dot += gy[base + i * s.inner] * yv[base + i * s.inner];
        }
        for (int i = 0; i < s.n; ++i) {
          const size_t idx = base + i * s.inner;
          gx[idx] += yv[idx] * (gy[idx] - dot);
        }
      }
    }
  });
}

Tensor log_softmax(const Tensor& x, int axis) {
  axis = normalize_axis(x, axis, "log_softmax");
  require_softmax_input(x, "log_softmax");
  const AxisSplit s = split_axis(x.shape(), axis);
  std::vector<float> y(x.numel());
  const float* xd = x.ptr();
  for (size_t o = 0; o < s.outer; ++o) {
    for (size_t in = 0; in < s.inner; ++in) {
      const size_t base = o * s.n * s.inner + in;
      float mx = -std::numeric_limits<float>::infinity();
      for (int i = 0; i < s.n; ++i) mx = std::max(mx, xd[base + i * s.inner]);
      require_live_slice(mx, "log_softmax");
      float total = 0.0f;
      for (int i = 0; i < s.n; ++i) total += std::exp(xd[base + i * s.inner] - mx);
      const float lse = mx + std::log(total);
      for (int i = 0; i < s.n; ++i) {
        y[base + i * s.inner] = xd[base + i * s.inner] - lse;
      }
    }
  }
  return make_result(x.shape(), std::move(y), {x}, [s](TensorImpl& out) {
    float* gx = parent_grad(out, 0);
    if (!gx) return;
    const float* yv = out.data.data();
    const float* gy = out.grad.data();
    for (size_t o = 0; o < s.outer; ++o) {
      for (size_t in = 0; in < s.inner; ++in) {
        const size_t base = o * s.n * s.inner + in;
        float total = 0.0f;
        for (int i = 0; i < s.n; ++i) total += gy[base + i * s.inner];
        for (int i = 0; i < s.n; ++i) {
          const size_t idx = base + i * s.inner;
          gx[idx] += gy[idx] - std::exp(yv[idx]) * total;
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  float eps) {
  require_rank(x, 2, "layer_norm");
  const int m = x.dim(0), n = x.dim(1);
  if (gamma.numel() != static_cast<size_t>(n) ||
      beta.numel() != static_cast<size_t>(n)) {
    throw DimensionError("layer_norm: affine params do not match width of " +
                         shape_str(x.shape()));
  }
  std::vector<float> y(x.numel());
  std::vector<float> xhat(x.numel());
  std::vector<float> rstd(m);
  const float* xd = x.ptr();
  const float* g = gamma.ptr();
  const float* b = beta.ptr();
  for (int i = 0; i < m; ++i) {
    const float* row = xd + static_cast<size_t>(i) * n;
    float mu = 0.0f;
    for (int j = 0; j < n; ++j) mu += row[j];
    mu /= n;
    float var = 0.0f;
    for (int j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= n;
    rstd[i] = 1.0f / std::sqrt(var + eps);
    for (int j = 0; j < n; ++j) {
      const size_t idx = static_cast<size_t>(i) * n + j;
      xhat[idx] = (row[j] - mu) * rstd[i];
      y[idx] = xhat[idx] * g[j] + b[j];
    }
  }
  return make_result(
      x.shape(), std::move(y), {x, gamma, beta},
      [m, n, xhat = std::move(xhat), rstd = std::move(rstd)](TensorImpl& out) {
        const float* gy = out.grad.data();
        const float* gv = parent_data(out, 1);
        float* gx = parent_grad(out, 0);
        float* gg = parent_grad(out, 1);
        float* gb = parent_grad(out, 2);
        for (int i = 0; i < m; ++i) {
          const size_t off = static_cast<size_t>(i) * n;
          float mean_d = 0.0f, mean_dx = 0.0f;
          for (int j = 0; j < n; ++j) {
            const float d = gy[off + j] * gv[j];
            mean_d += d;
            mean_dx += d * xhat[off + j];
            if (gg) gg[j] += gy[off + j] * xhat[off + j];
            if (gb) gb[j] += gy[off + j];
          }
          mean_d /= n;
          mean_dx /= n;
          if (gx) {
            for (int j = 0; j < n; ++j) {
              const float d = gy[off + j] * gv[j];
              gx[off + j] += rstd[i] * (d - mean_d - xhat[off + j] * mean_dx);
            }
          }
        }
      });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  axis = normalize_axis(parts[0], axis, "concat");
  Shape shape = parts[0].shape();
  int total = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != static_cast<int>(shape.size())) {
      throw DimensionError("concat: rank mismatch " + shape_str(p.shape()) +
                           " vs " + shape_str(shape));
    }
    for (int i = 0; i < p.rank(); ++i) {
      if (i != axis && p.shape()[i] != shape[i]) {
        throw DimensionError("concat: shape mismatch " + shape_str(p.shape()) +
                             " vs " + shape_str(shape));
      }
    }
    total += p.shape()[axis];
  }
  shape[axis] = total;
  const AxisSplit s = split_axis(shape, axis);
  std::vector<float> y(shape_numel(shape));
  std::vector<size_t> widths;  // contiguous chunk per part per outer index
  for (const Tensor& p : parts) widths.push_back(p.shape()[axis] * s.inner);
  const size_t row = static_cast<size_t>(total) * s.inner;
  size_t off = 0;
  for (size_t k = 0; k < parts.size(); ++k) {
    const float* pd = parts[k].ptr();
    for (size_t o = 0; o < s.outer; ++o) {
      std::copy(pd + o * widths[k], pd + (o + 1) * widths[k],
                y.data() + o * row + off);
    }
    off += widths[k];
  }
  return make_result(shape, std::move(y), parts,
                     [s, row, widths](TensorImpl& out) {
                       const float* gy = out.grad.data();
                       size_t off = 0;
                       for (size_t k = 0; k < widths.size(); ++k) {
                         if (float* g = parent_grad(out, k)) {
                           for (size_t o = 0; o < s.outer; ++o) {
                             const float* src = gy + o * row + off;
                             float* dst = g + o * widths[k];
                             for (size_t i = 0; i < widths[k]; ++i) dst[i] += src[i];
                           }
                         }
                         off += widths[k];
                       }
                     });
}

Tensor slice(const Tensor& x, int axis, int start, int length) {
  axis = normalize_axis(x, axis, "slice");
  if (start < 0 || length < 1 || start + length > x.shape()[axis]) {
    throw DimensionError("slice: range [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") outside " +
                         shape_str(x.shape()));
  }
  const AxisSplit s = split_axis(x.shape(), axis);
  Shape shape = x.shape();
  shape[axis] = length;
  const size_t src_row = static_cast<size_t>(s.n) * s.inner;
  const size_t dst_row = static_cast<size_t>(length) * s.inner;
  const size_t first = static_cast<size_t>(start) * s.inner;
  std::vector<float> y(s.outer * dst_row);
  const float* xd = x.ptr();
  for (size_t o = 0; o < s.outer; ++o) {
    std::copy(xd + o * src_row + first, xd + o * src_row + first + dst_row,
              y.data() + o * dst_row);
  }
  return make_result(shape, std::move(y), {x},
                     [s, src_row, dst_row, first](TensorImpl& out) {
                       float* g = parent_grad(out, 0);
                       if (!g) return;
                       const float* gy = out.grad.data();
                       for (size_t o = 0; o < s.outer; ++o) {
                         float* dst = g + o * src_row + first;
                         const float* src = gy + o * dst_row;
                         for (size_t i = 0; i < dst_row; ++i) dst[i] += src[i];
                       }
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " to " +
                         shape_str(shape));
  }
  std::vector<float> y(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(y), {x}, [](TensorImpl& out) {
    float* g = parent_grad(out, 0);
    if (!g) return;
    for (size_t i = 0; i < out.grad.size(); ++i) g[i] += out.grad[i];
  });
}

Tensor swap_leading_axes(const Tensor& x) {
  require_rank(x, 3, "swap_leading_axes");
  const int a = x.dim(0), b = x.dim(1), c = x.dim(2);
  std::vector<float> y(x.numel());
  const float* xd = x.ptr();
  for (int i = 0; i < a; ++i) {
    for (int j = 0; j < b; ++j) {
      std::copy(xd + (static_cast<size_t>(i) * b + j) * c,
                xd + (static_cast<size_t>(i) * b + j + 1) * c,
                y.data() + (static_cast<size_t>(j) * a + i) * c);
    }
  }
  return make_result({b, a, c}, std::move(y), {x}, [a, b, c](TensorImpl& out) {
    float* g = parent_grad(out, 0);
    if (!g) return;
    const float* gy = out.grad.data();
    for (int i = 0; i < a; ++i) {
      for (int j = 0; j < b; ++j) {
        const float* src = gy + (static_cast<size_t>(j) * a + i) * c;
        float* dst = g + (static_cast<size_t>(i) * b + j) * c;
        for (int k = 0; k < c; ++k) dst[k] += src[k];
      }
    }
  });
}

Tensor dropout(const Tensor& x, float p, bool training, std::mt19937& rng) {
  if (!training || p <= 0.0f) return x;
  if (p >= 1.0f) throw ContractError("dropout: rate must be below 1");
  const float keep_scale = 1.0f / (1.0f - p);
  std::bernoulli_distribution keep(1.0 - p);
  std::vector<float> mask(x.numel());
  std::vector<float> y(x.numel());
  for (size_t i = 0; i < y.size(); ++i) {
    mask[i] = keep(rng) ? keep_scale : 0.0f;
    y[i] = x.ptr()[i] * mask[i];
  }
  return make_result(x.shape(), std::move(y), {x},
                     [mask = std::move(mask)](TensorImpl& out) {
                       float* g = parent_grad(out, 0);
                       if (!g) return;
                       for (size_t i = 0; i < mask.size(); ++i) {
                         g[i] += out.grad[i] * mask[i];
                       }
                     });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (float v : x.data()) total += v;
  return make_result({1}, {static_cast<float>(total)}, {x}, [](TensorImpl& out) {
    float* g = parent_grad(out, 0);
    if (!g) return;
    const float gy = out.grad[0];
    const size_t n = out.parents[0]->data.size();
    for (size_t i = 0; i < n; ++i) g[i] += gy;
  });
}

Tensor mean(const Tensor& x) {
  return scale(sum(x), 1.0f / static_cast<float>(x.numel()));
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias,
              int stride) {
  require_rank(x, 3, "conv2d");
  require_rank(w, 4, "conv2d");
  const int cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int cout = w.dim(0), k = w.dim(2);
  if (w.dim(1) != cin || w.dim(3) != k) {
    throw DimensionError("conv2d: weight " + shape_str(w.shape()) +
                         " incompatible with input " + shape_str(x.shape()));
  }
  if (bias.numel() != static_cast<size_t>(cout)) {
    throw DimensionError("conv2d: bias does not match output channels");
  }
  if (stride < 1) throw ContractError("conv2d: stride must be positive");
  if (h < k || wd < k) {
    throw DimensionError("conv2d: input " + shape_str(x.shape()) +
                         " smaller than kernel " + std::to_string(k));
  }
  const int ho = (h - k) / stride + 1;
  const int wo = (wd - k) / stride + 1;
  std::vector<float> y(static_cast<size_t>(cout) * ho * wo);
  const float* xd = x.ptr();
  const float* wv = w.ptr();
  for (int o = 0; o < cout; ++o) {
    float* yo = y.data() + static_cast<size_t>(o) * ho * wo;
    std::fill(yo, yo + static_cast<size_t>(ho) * wo, bias.ptr()[o]);
    for (int c = 0; c < cin; ++c) {
      const float* xc = xd + static_cast<size_t>(c) * h * wd;
      const float* wk = wv + (static_cast<size_t>(o) * cin + c) * k * k;
      for (int i = 0; i < ho; ++i) {
        for (int j = 0; j < wo; ++j) {
          float acc = 0.0f;
          for (int u = 0; u < k; ++u) {
            const float* xr = xc + static_cast<size_t>(i * stride + u) * wd + j * stride;
            for (int v = 0; v < k; ++v) acc += wk[u * k + v] * xr[v];
          }
          yo[i * wo + j] += acc;
        }
      }
    }
  }
  return make_result(
      {cout, ho, wo}, std::move(y), {x, w, bias},
      [cin, h, wd, cout, k, ho, wo, stride](TensorImpl& out) {
        const float* gy = out.grad.data();
        const float* xd = parent_data(out, 0);
        const float* wv = parent_data(out, 1);
        float* gx = parent_grad(out, 0);
        float* gw = parent_grad(out, 1);
        float* gb = parent_grad(out, 2);
        for (int o = 0; o < cout; ++o) {
          const float* go = gy + static_cast<size_t>(o) * ho * wo;
          if (gb) {
            for (int i = 0; i < ho * wo; ++i) gb[o] += go[i];
          }
          for (int c = 0; c < cin; ++c) {
            const size_t xoff = static_cast<size_t>(c) * h * wd;
            const size_t woff = (static_cast<size_t>(o) * cin + c) * k * k;
            for (int i = 0; i < ho; ++i) {
              for (int j = 0; j < wo; ++j) {
                const float g = go[i * wo + j];
                if (g == 0.0f) continue;
                for (int u = 0; u < k; ++u) {
                  const size_t xr = xoff + static_cast<size_t>(i * stride + u) * wd + j * stride;
                  for (int v = 0; v < k; ++v) {
                    if (gw) gw[woff + u * k + v] += g * xd[xr + v];
                    if (gx) gx[xr + v] += g * wv[woff + u * k + v];
                  }
                }
              }
            }
          }
        }
      });
}

Tensor depthwise_conv1d(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_rank(x, 2, "depthwise_conv1d");
  require_rank(w, 2, "depthwise_conv1d");
  const int t = x.dim(0), d = x.dim(1), k = w.dim(1);
  if (w.dim(0) != d || bias.numel() != static_cast<size_t>(d)) {
    throw DimensionError("depthwise_conv1d: params " + shape_str(w.shape()) +
                         " do not match input " + shape_str(x.shape()));
  }
  if (k % 2 == 0) {
    throw DimensionError("depthwise_conv1d: kernel size must be odd, got " +
                         std::to_string(k));
  }
  const int pad = (k - 1) / 2;
  std::vector<float> y(x.numel());
  const float* xd = x.ptr();
  const float* wv = w.ptr();
  for (int ti = 0; ti < t; ++ti) {
    for (int c = 0; c < d; ++c) {
      float acc = bias.ptr()[c];
      for (int j = 0; j < k; ++j) {
        const int src = ti + j - pad;
        if (src < 0 || src >= t) continue;
        acc += wv[c * k + j] * xd[static_cast<size_t>(src) * d + c];
      }
      y[static_cast<size_t>(ti) * d + c] = acc;
    }
  }
  return make_result(x.shape(), std::move(y), {x, w, bias},
                     [t, d, k, pad](TensorImpl& out) {
                       const float* gy = out.grad.data();
                       const float* xd = parent_data(out, 0);
                       const float* wv = parent_data(out, 1);
                       float* gx = parent_grad(out, 0);
                       float* gw = parent_grad(out, 1);
                       float* gb = parent_grad(out, 2);
                       for (int ti = 0; ti < t; ++ti) {
                         for (int c = 0; c < d; ++c) {
                           const float g = gy[static_cast<size_t>(ti) * d + c];
                           if (gb) gb[c] += g;
                           for (int j = 0; j < k; ++j) {
                             const int src = ti + j - pad;
                             if (src < 0 || src >= t) continue;
                             const size_t xi = static_cast<size_t>(src) * d + c;
                             if (gw) gw[c * k + j] += g * xd[xi];
                             if (gx) gx[xi] += g * wv[c * k + j];
                           }
                         }
                       }
                     });
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
  require_rank(table, 2, "embedding");
  const int v = table.dim(0), d = table.dim(1);
  if (ids.empty()) throw ContractError("embedding: empty id sequence");
  std::vector<int> idx(ids.begin(), ids.end());
  std::vector<float> y(idx.size() * d);
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= v) {
      throw DimensionError("embedding: id " + std::to_string(idx[i]) +
                           " outside table of " + std::to_string(v));
    }
    std::copy(table.ptr() + static_cast<size_t>(idx[i]) * d,
              table.ptr() + static_cast<size_t>(idx[i] + 1) * d,
              y.data() + i * d);
  }
  const int n = static_cast<int>(idx.size());
  return make_result({n, d}, std::move(y), {table},
                     [d, idx = std::move(idx)](TensorImpl& out) {
                       float* g = parent_grad(out, 0);
                       if (!g) return;
                       for (size_t i = 0; i < idx.size(); ++i) {
                         float* dst = g + static_cast<size_t>(idx[i]) * d;
                         const float* src = out.grad.data() + i * d;
                         for (int j = 0; j < d; ++j) dst[j] += src[j];
                       }
                     });
}

Tensor causal_mask(const Tensor& scores) {
  require_rank(scores, 2, "causal_mask");
  const int n = scores.dim(0);
  if (scores.dim(1) != n) {
    throw DimensionError("causal_mask: scores must be square, got " +
                         shape_str(scores.shape()));
  }
  std::vector<float> y(scores.data().begin(), scores.data().end());
  const float neg_inf = -std::numeric_limits<float>::infinity();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) y[static_cast<size_t>(i) * n + j] = neg_inf;
  }
  return make_result(scores.shape(), std::move(y), {scores},
                     [n](TensorImpl& out) {
                       float* g = parent_grad(out, 0);
                       if (!g) return;
                       for (int i = 0; i < n; ++i) {
                         for (int j = 0; j <= i; ++j) {
                           g[static_cast<size_t>(i) * n + j] +=
                               out.grad[static_cast<size_t>(i) * n + j];
                         }
                       }
                     });
}

Tensor label_smoothed_cross_entropy(const Tensor& logits,
                                    std::span<const int> targets,
                                    float smoothing) {
  require_rank(logits, 2, "label_smoothed_cross_entropy");
  require_finite(logits, "label_smoothed_cross_entropy");
  const int rows = logits.dim(0), v = logits.dim(1);
  if (targets.size() != static_cast<size_t>(rows)) {
    throw DimensionError("label_smoothed_cross_entropy: " +
                         std::to_string(targets.size()) + " targets for " +
                         shape_str(logits.shape()));
  }
  if (v < 2) throw DimensionError("label_smoothed_cross_entropy: V < 2");
  if (smoothing < 0.0f || smoothing >= 1.0f) {
    throw ContractError("label smoothing must lie in [0, 1)");
  }
  const float on = 1.0f - smoothing;
  const float off = smoothing / static_cast<float>(v - 1);
  std::vector<int> tgt(targets.begin(), targets.end());
  std::vector<float> probs(logits.numel());
  double loss = 0.0;
  const float* xd = logits.ptr();
  for (int i = 0; i < rows; ++i) {
    if (tgt[i] < 0 || tgt[i] >= v) {
      throw DimensionError("label_smoothed_cross_entropy: target " +
                           std::to_string(tgt[i]) + " outside vocabulary");
    }
    const float* row = xd + static_cast<size_t>(i) * v;
    const float mx = *std::max_element(row, row + v);
    double total = 0.0;
    for (int c = 0; c < v; ++c) total += std::exp(static_cast<double>(row[c] - mx));
    const double lse = mx + std::log(total);
    for (int c = 0; c < v; ++c) {
      const double lp = row[c] - lse;
      probs[static_cast<size_t>(i) * v + c] = static_cast<float>(std::exp(lp));
      loss -= (c == tgt[i] ? on : off) * lp;
    }
  }
  loss /= rows;
  return make_result(
      {1}, {static_cast<float>(loss)}, {logits},
      [rows, v, on, off, tgt = std::move(tgt),
       probs = std::move(probs)](TensorImpl& out) {
        float* g = parent_grad(out, 0);
        if (!g) return;
        const float gy = out.grad[0] / rows;
        for (int i = 0; i < rows; ++i) {
          for (int c = 0; c < v; ++c) {
            const size_t idx = static_cast<size_t>(i) * v + c;
            g[idx] += gy * (probs[idx] - (c == tgt[i] ? on : off));
          }
        }
      });
}

}  // namespace aformer
