#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpath {

using Shape = std::vector<int64_t>;

inline int64_t numel_of(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << ")";
  return os.str();
}

template <typename T>
struct TensorData {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until backward touches this tensor
  bool requires_grad = false;
};

// Shallow-copy handle over shared storage. Copies alias the same buffer;
// tensors with populated data and no pending backward are safe to read from
// multiple threads.
template <typename T>
class Tensor {
 public:
  Tensor() : d_(std::make_shared<TensorData<T>>()) {}

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    Tensor t;
    t.d_->data.assign(static_cast<size_t>(numel_of(shape)), T(0));
    t.d_->shape = std::move(shape);
    t.d_->requires_grad = requires_grad;
    return t;
  }

  static Tensor full(Shape shape, T value, bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (auto& v : t.d_->data) v = value;
    return t;
  }

  static Tensor from_vector(Shape shape, std::vector<T> values, bool requires_grad = false) {
    if (numel_of(shape) != static_cast<int64_t>(values.size())) {
      throw std::invalid_argument("tensor: shape " + shape_str(shape) + " does not match " +
                                  std::to_string(values.size()) + " values");
    }
    Tensor t;
    t.d_->shape = std::move(shape);
    t.d_->data = std::move(values);
    t.d_->requires_grad = requires_grad;
    return t;
  }

  static Tensor scalar(T value, bool requires_grad = false) {
    return from_vector({1}, {value}, requires_grad);
  }

  const Shape& shape() const { return d_->shape; }
  int64_t numel() const { return static_cast<int64_t>(d_->data.size()); }
  int64_t ndim() const { return static_cast<int64_t>(d_->shape.size()); }
  bool empty() const { return d_->data.empty(); }

  // 2-D accessors; rows()==1 for 1-D tensors viewed as a single row
  int64_t rows() const { return ndim() == 2 ? d_->shape[0] : 1; }
  int64_t cols() const {
    return ndim() == 2 ? d_->shape[1] : (ndim() == 1 ? d_->shape[0] : 0);
  }

  std::span<T> data() { return {d_->data.data(), d_->data.size()}; }
  std::span<const T> data() const { return {d_->data.data(), d_->data.size()}; }

  bool has_grad() const { return !d_->grad.empty(); }
  std::span<T> grad() { return {d_->grad.data(), d_->grad.size()}; }
  std::span<const T> grad() const { return {d_->grad.data(), d_->grad.size()}; }

  // allocates a zero gradient buffer if absent
  void ensure_grad() {
    if (d_->grad.empty()) d_->grad.assign(d_->data.size(), T(0));
  }
  void drop_grad() { d_->grad.clear(); }
  void zero_grad() {
    for (auto& v : d_->grad) v = T(0);
  }

  bool requires_grad() const { return d_->requires_grad; }
  Tensor& set_requires_grad(bool v) {
    d_->requires_grad = v;
    return *this;
  }

  T item() const {
    if (numel() != 1) {
      throw std::invalid_argument("tensor: item() on non-scalar of shape " + shape_str(shape()));
    }
    return d_->data[0];
  }

  T at(int64_t r, int64_t c) const { return d_->data[static_cast<size_t>(r * cols() + c)]; }

  // deep copy of data (grad not copied)
  Tensor clone() const {
    Tensor t;
    t.d_->shape = d_->shape;
    t.d_->data = d_->data;
    t.d_->requires_grad = d_->requires_grad;
    return t;
  }

  // identity of the underlying storage
  TensorData<T>* raw() const { return d_.get(); }

 private:
  std::shared_ptr<TensorData<T>> d_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace mpath
