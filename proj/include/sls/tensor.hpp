#pragma once

#include <cstdint>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "sls/errors.hpp"

namespace sls {

inline std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

// Dense row-major tensor with an accumulating gradient buffer of the same
// shape. data and grad always have numel() elements; grad starts at zero.
template <class T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;
  std::vector<T> grad;

  Tensor() = default;

  explicit Tensor(std::vector<int> shp, T fill = T(0)) : shape(std::move(shp)) {
    std::int64_t n = 1;
    for (int d : shape) {
      if (d <= 0) throw UsageError("tensor dimension must be positive, got shape " + shape_str(shape));
      n *= d;
    }
    data.assign(static_cast<std::size_t>(n), fill);
    grad.assign(static_cast<std::size_t>(n), T(0));
  }

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }

  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape.size()); }

  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

template <class T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

template <class T>
TensorPtr<T> make_tensor(std::vector<int> shape, T fill = T(0)) {
  return std::make_shared<Tensor<T>>(std::move(shape), fill);
}

template <class T>
TensorPtr<T> make_scalar(T value) {
  auto t = make_tensor<T>({1});
  t->data[0] = value;
  return t;
}

// Integer class map aligned with a [N,C,H,W] logits tensor. Values must lie
// in [0, C) or equal the ignore index.
struct LabelMap {
  int n = 1;
  int h = 0;
  int w = 0;
  std::vector<int> v;  // n*h*w, row-major

  std::int64_t size() const { return static_cast<std::int64_t>(v.size()); }
};

inline constexpr int kIgnoreIndex = 255;

}  // namespace sls
