#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "lulcseg/common.hpp"

namespace lulcseg {

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

inline size_t dtype_size(DType dt) { return dt == DType::f32 ? 4 : 8; }
inline const char* dtype_name(DType dt) { return dt == DType::f32 ? "f32" : "f64"; }

struct TensorImpl;
class Tensor;

// One recorded autodiff operation. `inputs` are the parent tensors (used for
// the topological walk); `backward` reads the output's gradient and
// accumulates contributions into the parents. `out` is weak to keep the
// graph acyclic: a node's output is owned by whoever consumed it.
struct Node {
  const char* op = "";
  std::vector<Tensor> inputs;
  std::weak_ptr<TensorImpl> out;
  std::function<void(const Tensor& out)> backward;
};

struct TensorImpl {
  Shape shape;
  DType dtype = DType::f32;
  std::vector<float> f32;
  std::vector<double> f64;
  bool requires_grad = false;
  std::shared_ptr<TensorImpl> grad;  // same shape/dtype; never on tape
  std::shared_ptr<Node> node;        // producing op, if recorded
};

// Value-semantic handle to a dense row-major array with optional gradient
// tape participation. Copies share the underlying buffer.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, DType dt = DType::f32, bool requires_grad = false);
  static Tensor full(Shape shape, double value, DType dt = DType::f32);
  static Tensor scalar(double value, DType dt = DType::f64);
  static Tensor from_f32(Shape shape, std::vector<float> values);
  static Tensor from_f64(Shape shape, std::vector<double> values);
  // Convenience for tests and small literals; stores at the given dtype.
  static Tensor from_values(Shape shape, const std::vector<double>& values,
                            DType dt = DType::f32);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  i64 dim(int axis) const { return impl_->shape[static_cast<size_t>(axis)]; }
  i64 numel() const { return numel_of(impl_->shape); }
  DType dtype() const { return impl_->dtype; }

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool v);

  // Gradient buffer as a tensor handle; undefined if no gradient yet.
  Tensor grad() const;
  void zero_grad();

  float* f32() { return impl_->f32.data(); }
  const float* f32() const { return impl_->f32.data(); }
  double* f64() { return impl_->f64.data(); }
  const double* f64() const { return impl_->f64.data(); }

  // Dtype-agnostic scalar access by flat row-major index.
  double value_at(i64 flat) const;
  void set_value_at(i64 flat, double v);
  double scalar_value() const;  // numel()==1 convenience

  std::vector<double> to_vector() const;

  // Same buffer, detached from the tape.
  Tensor detach() const;
  // Deep copy of the data, detached from the tape.
  Tensor clone() const;
  Tensor astype(DType dt) const;

  bool same_data(const Tensor& other) const { return impl_ == other.impl_; }

  std::shared_ptr<TensorImpl>& impl() { return impl_; }
  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Reverse-mode sweep from a scalar root. Seeds d(root)/d(root)=1, walks the
// tape once in reverse topological order, and leaves dRoot/dLeaf in the
// grad buffer of every requires_grad leaf. Contributions accumulate
// additively when a tensor feeds several ops.
void backward(const Tensor& root);

// Whether ops currently record tape nodes.
bool grad_enabled();

struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// --- helpers shared by op implementations ---

// Allocate the result of an op and attach a tape node if recording applies.
Tensor make_op_result(Shape shape, DType dt, const char* op, std::vector<Tensor> inputs,
                      std::function<void(const Tensor& out)> backward_fn);

// Add `g` into `t`'s gradient buffer, allocating zeros on first touch.
void accumulate_grad(const Tensor& t, const Tensor& g);

// Gradient of `t` as a tensor, allocating zeros on first access.
Tensor grad_or_zeros(const Tensor& t);

template <class T>
struct TypeTag {
  using type = T;
};

// Invoke f(TypeTag<float/double>) based on a runtime dtype.
template <class F>
decltype(auto) dispatch(DType dt, F&& f) {
  if (dt == DType::f32) return f(TypeTag<float>{});
  return f(TypeTag<double>{});
}

template <class T>
T* data_ptr(Tensor& t);
template <class T>
const T* data_ptr(const Tensor& t);

template <>
inline float* data_ptr<float>(Tensor& t) {
  return t.f32();
}
template <>
inline double* data_ptr<double>(Tensor& t) {
  return t.f64();
}
template <>
inline const float* data_ptr<float>(const Tensor& t) {
  return t.f32();
}
template <>
inline const double* data_ptr<double>(const Tensor& t) {
  return t.f64();
}

}  // namespace lulcseg
