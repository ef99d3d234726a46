#include "lulcseg/tensor.hpp"

#include <algorithm>
#include <unordered_set>

namespace lulcseg {

namespace {
thread_local bool g_grad_enabled = true;

std::shared_ptr<TensorImpl> new_impl(Shape shape, DType dt) {
  auto impl = std::make_shared<TensorImpl>();
  impl->dtype = dt;
  i64 n = numel_of(shape);
  impl->shape = std::move(shape);
  if (dt == DType::f32)
    impl->f32.assign(static_cast<size_t>(n), 0.0f);
  else
    impl->f64.assign(static_cast<size_t>(n), 0.0);
  return impl;
}
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor Tensor::zeros(Shape shape, DType dt, bool requires_grad) {
  Tensor t(new_impl(std::move(shape), dt));
  t.impl()->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::full(Shape shape, double value, DType dt) {
  Tensor t = zeros(std::move(shape), dt);
  if (dt == DType::f32)
    std::fill(t.impl()->f32.begin(), t.impl()->f32.end(), static_cast<float>(value));
  else
    std::fill(t.impl()->f64.begin(), t.impl()->f64.end(), value);
  return t;
}

Tensor Tensor::scalar(double value, DType dt) { return full(Shape{}, value, dt); }

Tensor Tensor::from_f32(Shape shape, std::vector<float> values) {
  if (numel_of(shape) != static_cast<i64>(values.size()))
    throw ShapeError("from_f32: " + std::to_string(values.size()) +
                     " values do not fill shape " + shape_str(shape));
  auto impl = std::make_shared<TensorImpl>();
  impl->dtype = DType::f32;
  impl->shape = std::move(shape);
  impl->f32 = std::move(values);
  return Tensor(impl);
}

Tensor Tensor::from_f64(Shape shape, std::vector<double> values) {
  if (numel_of(shape) != static_cast<i64>(values.size()))
    throw ShapeError("from_f64: " + std::to_string(values.size()) +
                     " values do not fill shape " + shape_str(shape));
  auto impl = std::make_shared<TensorImpl>();
  impl->dtype = DType::f64;
  impl->shape = std::move(shape);
  impl->f64 = std::move(values);
  return Tensor(impl);
}

Tensor Tensor::from_values(Shape shape, const std::vector<double>& values, DType dt) {
  if (dt == DType::f64) return from_f64(std::move(shape), values);
  std::vector<float> v(values.begin(), values.end());
  return from_f32(std::move(shape), std::move(v));
}

Tensor& Tensor::set_requires_grad(bool v) {
  impl_->requires_grad = v;
  return *this;
}

Tensor Tensor::grad() const {
  if (!impl_->grad) return Tensor();
  return Tensor(impl_->grad);
}

void Tensor::zero_grad() { impl_->grad = nullptr; }

double Tensor::value_at(i64 flat) const {
  return impl_->dtype == DType::f32 ? static_cast<double>(impl_->f32[static_cast<size_t>(flat)])
                                    : impl_->f64[static_cast<size_t>(flat)];
}

void Tensor::set_value_at(i64 flat, double v) {
  if (impl_->dtype == DType::f32)
    impl_->f32[static_cast<size_t>(flat)] = static_cast<float>(v);
  else
    impl_->f64[static_cast<size_t>(flat)] = v;
}

double Tensor::scalar_value() const {
  if (numel() != 1)
    throw ShapeError("scalar_value on tensor of shape " + shape_str(shape()));
  return value_at(0);
}

std::vector<double> Tensor::to_vector() const {
  std::vector<double> out(static_cast<size_t>(numel()));
  for (i64 i = 0; i < numel(); ++i) out[static_cast<size_t>(i)] = value_at(i);
  return out;
}

Tensor Tensor::detach() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->dtype = impl_->dtype;
  impl->f32 = impl_->f32;
  impl->f64 = impl_->f64;
  return Tensor(impl);
}

Tensor Tensor::clone() const { return detach(); }

Tensor Tensor::astype(DType dt) const {
  if (dt == impl_->dtype) return detach();
  Tensor out = Tensor::zeros(impl_->shape, dt);
  for (i64 i = 0; i < numel(); ++i) out.set_value_at(i, value_at(i));
  return out;
}

Tensor make_op_result(Shape shape, DType dt, const char* op, std::vector<Tensor> inputs,
                      std::function<void(const Tensor& out)> backward_fn) {
  Tensor out(new_impl(std::move(shape), dt));
  bool record = g_grad_enabled;
  if (record) {
    record = false;
    for (const Tensor& in : inputs)
      if (in.requires_grad()) {
        record = true;
        break;
      }
  }
  if (record) {
    auto node = std::make_shared<Node>();
    node->op = op;
    node->inputs = std::move(inputs);
    node->out = out.impl();
    node->backward = std::move(backward_fn);
    out.impl()->node = node;
    out.impl()->requires_grad = true;
  }
  return out;
}

void accumulate_grad(const Tensor& t, const Tensor& g) {
  auto& impl = *t.impl();
  if (impl.shape != g.shape())
    throw ShapeError("gradient shape " + shape_str(g.shape()) +
                     " does not match tensor shape " + shape_str(impl.shape));
  if (!impl.grad) {
    impl.grad = new_impl(impl.shape, impl.dtype);
  }
  i64 n = numel_of(impl.shape);
  if (impl.dtype == DType::f32) {
    float* dst = impl.grad->f32.data();
    const float* src = g.f32();
    for (i64 i = 0; i < n; ++i) dst[i] += src[i];
  } else {
    double* dst = impl.grad->f64.data();
    const double* src = g.f64();
    for (i64 i = 0; i < n; ++i) dst[i] += src[i];
  }
}

Tensor grad_or_zeros(const Tensor& t) {
  auto& impl = *t.impl();
  if (!impl.grad) impl.grad = new_impl(impl.shape, impl.dtype);
  return Tensor(impl.grad);
}

void backward(const Tensor& root) {
  if (!root.defined()) throw ShapeError("backward on undefined tensor");
  if (root.numel() != 1)
    throw ShapeError("backward root must be scalar, got shape " + shape_str(root.shape()));

  // Seed d(root)/d(root) = 1.
  Tensor seed = Tensor::full(root.shape(), 1.0, root.dtype());
  accumulate_grad(root, seed);
  if (!root.impl()->node) return;

  // Iterative post-order DFS; reversing the post-order gives a valid
  // reverse-topological schedule, each node visited exactly once.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  struct Frame {
    Node* node;
    size_t next_input;
  };
  std::vector<Frame> stack;
  stack.push_back({root.impl()->node.get(), 0});
  seen.insert(root.impl()->node.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_input < f.node->inputs.size()) {
      const Tensor& in = f.node->inputs[f.next_input++];
      Node* child = in.impl()->node.get();
      if (child && !seen.count(child)) {
        seen.insert(child);
        stack.push_back({child, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    auto out_impl = node->out.lock();
    if (!out_impl) continue;       // output dropped: nothing depends on it
    if (!out_impl->grad) continue;  // no contribution reached this node
    node->backward(Tensor(out_impl));
  }
}

}  // namespace lulcseg
