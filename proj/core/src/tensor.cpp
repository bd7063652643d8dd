#include "shredder/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "shredder/error.hpp"

namespace shredder {

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return shape.empty() ? 0 : n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have rank >= 1");
  for (auto e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + to_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  validate_shape(shape_);
  data_.assign(element_count(shape_), 0.0f);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  validate_shape(shape_);
  if (data_.size() != element_count(shape_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                     to_string(shape_));
  }
}

Tensor::Tensor(Shape shape, std::initializer_list<float> data)
    : Tensor(std::move(shape), std::vector<float>(data)) {}

Tensor Tensor::filled(Shape shape, float value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (element_count(shape) != size()) {
    throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const noexcept {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_same_shape(const Tensor& a, const Tensor& b, const std::string& what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(what + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

void require_finite(const Tensor& t, const std::string& what) {
  if (!t.all_finite()) throw NumericError(what + ": non-finite value");
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

double sum_abs(const Tensor& t) {
  double s = 0.0;
  for (float v : t.values()) s += std::fabs(static_cast<double>(v));
  return s;
}

double mean_square(const Tensor& t) {
  if (t.empty()) return 0.0;
  double s = 0.0;
  for (float v : t.values()) s += static_cast<double>(v) * v;
  return s / static_cast<double>(t.size());
}

double variance(const Tensor& t) {
  if (t.empty()) return 0.0;
  double mean = 0.0;
  for (float v : t.values()) mean += v;
  mean /= static_cast<double>(t.size());
  double s = 0.0;
  for (float v : t.values()) s += (v - mean) * (v - mean);
  return s / static_cast<double>(t.size());
}

}  // namespace shredder
