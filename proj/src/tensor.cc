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

#include "aformer/tensor.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "aformer/errors.h"

namespace aformer {

namespace {

std::atomic<uint64_t> g_next_seq{1};
thread_local bool t_grad_enabled = true;

void validate_shape(const Shape& shape) {
  for (int e : shape) {
    if (e <= 0) {
      throw DimensionError("tensor extents must be positive, got " +
                           shape_str(shape));
    }
  }
}

}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

size_t shape_numel(const Shape& shape) {
  size_t n = 1;
  for (int e : shape) n *= static_cast<size_t>(e);
  return n;
}

float* TensorImpl::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0f);
  return grad.data();
}

Tensor::Tensor(Shape shape) : impl_(std::make_shared<TensorImpl>()) {
  validate_shape(shape);
  impl_->data.assign(shape_numel(shape), 0.0f);
  impl_->shape = std::move(shape);
  impl_->seq = g_next_seq++;
}

Tensor::Tensor(Shape shape, std::vector<float> values)
    : impl_(std::make_shared<TensorImpl>()) {
  validate_shape(shape);
  if (values.size() != shape_numel(shape)) {
    throw DimensionError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
  impl_->seq = g_next_seq++;
}

Tensor Tensor::scalar(float v) { return Tensor({1}, {v}); }

Tensor Tensor::full(Shape shape, float v) {
  Tensor t(std::move(shape));
  std::fill(t.impl_->data.begin(), t.impl_->data.end(), v);
  return t;
}

int Tensor::dim(int axis) const {
  if (axis < 0) axis += rank();
  if (axis < 0 || axis >= rank()) {
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for " + shape_str(shape()));
  }
  return impl_->shape[axis];
}

float Tensor::item() const {
  if (numel() != 1) {
    throw ContractError("item() on non-scalar tensor " + shape_str(shape()));
  }
  return impl_->data[0];
}

float Tensor::at(int r, int c) const {
  return impl_->data[static_cast<size_t>(r) * impl_->shape.back() + c];
}

std::span<float> Tensor::mutable_grad() {
  impl_->grad_buffer();
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) {
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0f);
  }
}

Tensor& Tensor::set_requires_grad(bool flag) {
  impl_->requires_grad = flag;
  return *this;
}

Tensor Tensor::detach() const { return Tensor(impl_->shape, impl_->data); }

void Tensor::check_finite(const std::string& where) const {
  auto bad = [](float v) { return !std::isfinite(v); };
  if (std::any_of(impl_->data.begin(), impl_->data.end(), bad)) {
    throw NumericError("non-finite value in data at " + where);
  }
  if (std::any_of(impl_->grad.begin(), impl_->grad.end(), bad)) {
    throw NumericError("non-finite value in gradient at " + where);
  }
}

NoGradGuard::NoGradGuard() : prev_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = prev_; }

bool grad_enabled() { return t_grad_enabled; }

namespace {

template <typename Inputs>
Tensor make_result_impl(Shape shape, std::vector<float> values,
                        const Inputs& inputs, BackwardFn fn) {
  Tensor out(std::move(shape), std::move(values));
  if (!t_grad_enabled) return out;
  bool needs = false;
  for (const Tensor& in : inputs) needs = needs || in.requires_grad();
  if (!needs) return out;
  TensorImpl* impl = out.raw();
  impl->requires_grad = true;
  impl->parents.reserve(inputs.size());
  for (const Tensor& in : inputs) impl->parents.push_back(in.impl());
  impl->backward_fn = std::move(fn);
  return out;
}

}  // namespace

Tensor make_result(Shape shape, std::vector<float> values,
                   std::initializer_list<Tensor> inputs, BackwardFn fn) {
  return make_result_impl(std::move(shape), std::move(values), inputs,
                          std::move(fn));
}

Tensor make_result(Shape shape, std::vector<float> values,
                   const std::vector<Tensor>& inputs, BackwardFn fn) {
  return make_result_impl(std::move(shape), std::move(values), inputs,
                          std::move(fn));
}

void backward(const Tensor& loss, float scale) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() requires a scalar loss, got " +
                        (loss.defined() ? shape_str(loss.shape())
                                        : std::string("undefined")));
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward() on a loss that does not require grad");
  }

  // Shared handles keep every node alive until the sweep (and the release
  // below) is finished.
  std::vector<std::shared_ptr<TensorImpl>> order;
  std::unordered_set<TensorImpl*> seen;
  std::vector<std::shared_ptr<TensorImpl>> stack{loss.impl()};
  seen.insert(loss.raw());
  while (!stack.empty()) {
    std::shared_ptr<TensorImpl> node = std::move(stack.back());
    stack.pop_back();
    for (const auto& p : node->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) {
        stack.push_back(p);
      }
    }
    order.push_back(std::move(node));
  }
  std::sort(order.begin(), order.end(),
            [](const auto& a, const auto& b) { return a->seq > b->seq; });

  loss.raw()->grad_buffer()[0] += scale;
  for (const auto& node : order) {
    if (node->backward_fn && !node->grad.empty()) {
      node->backward_fn(*node);
    }
  }
  // Release the recorded graph; interior gradients are no longer needed.
  for (const auto& node : order) {
    if (node->backward_fn) {
      node->backward_fn = nullptr;
      node->parents.clear();
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  }
}

}  // namespace aformer
