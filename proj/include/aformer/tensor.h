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

#ifndef AFORMER_TENSOR_H_
#define AFORMER_TENSOR_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace aformer {

using Shape = std::vector<int>;

std::string shape_str(const Shape& shape);
size_t shape_numel(const Shape& shape);

struct TensorImpl;
using BackwardFn = std::function<void(TensorImpl& out)>;

// Storage plus the autodiff record of the op that produced it. Graph nodes
// are ordered by `seq`, the global creation counter, so reverse execution
// order is simply descending `seq`.
struct TensorImpl {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty means "no gradient yet"
  bool requires_grad = false;
  uint64_t seq = 0;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  BackwardFn backward_fn;

  // Returns the gradient buffer, allocating zeros on first use.
  float* grad_buffer();
};

// Handle to a dense row-major float32 array. Copies share storage; use
// clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<float> values);
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor scalar(float v);
  static Tensor full(Shape shape, float v);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  int dim(int axis) const;
  size_t numel() const { return impl_->data.size(); }

  std::span<float> data() { return impl_->data; }
  std::span<const float> data() const { return impl_->data; }
  float* ptr() { return impl_->data.data(); }
  const float* ptr() const { return impl_->data.data(); }
  float item() const;
  float at(int r, int c) const;

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const float> grad() const { return impl_->grad; }
  std::span<float> mutable_grad();
  void zero_grad();
  void clear_grad() { impl_->grad.clear(); }

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool flag);

  // Fresh leaf with copied data and no graph history.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  // Throws NumericError naming `where` if data (or grad) holds NaN/Inf.
  void check_finite(const std::string& where) const;

  TensorImpl* raw() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

// Builds an op result. The backward closure is attached only when recording
// is enabled and at least one input requires grad.
Tensor make_result(Shape shape, std::vector<float> values,
                   std::initializer_list<Tensor> inputs, BackwardFn fn);
Tensor make_result(Shape shape, std::vector<float> values,
                   const std::vector<Tensor>& inputs, BackwardFn fn);

// Reverse-mode sweep from a scalar. Every reachable requires_grad leaf ends
// up with d(loss)/d(leaf) accumulated into its grad buffer; `scale`
// multiplies the seed gradient. The traversed graph is released afterwards.
void backward(const Tensor& loss, float scale = 1.0f);

}  // namespace aformer

#endif  // AFORMER_TENSOR_H_
