#pragma once

#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace s2pd::nd {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major tensor of doubles. Plain value type: ops never mutate
/// their inputs, so tensors can be shared freely across threads for reads.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
  }

  static Tensor zeros(Shape s) {
    auto n = shape_numel(s);
    return Tensor(std::move(s), std::vector<double>(static_cast<size_t>(n), 0.0));
  }
  static Tensor full(Shape s, double v) {
    auto n = shape_numel(s);
    return Tensor(std::move(s), std::vector<double>(static_cast<size_t>(n), v));
  }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  int64_t size() const { return static_cast<int64_t>(data.size()); }
  bool empty() const { return data.empty(); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }

  // 4-d accessor for NCHW tensors; test and renderer convenience, not a hot path.
  double& at(int n, int c, int h, int w) {
    return data[static_cast<size_t>(((int64_t(n) * shape[1] + c) * shape[2] + h) * shape[3] + w)];
  }
  double at(int n, int c, int h, int w) const {
    return data[static_cast<size_t>(((int64_t(n) * shape[1] + c) * shape[2] + h) * shape[3] + w)];
  }
  double& at(int r, int c) { return data[static_cast<size_t>(int64_t(r) * shape[1] + c)]; }
  double at(int r, int c) const { return data[static_cast<size_t>(int64_t(r) * shape[1] + c)]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                     shape_str(b.shape));
}

}  // namespace s2pd::nd
