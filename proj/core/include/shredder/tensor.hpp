#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace shredder {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

// Dense row-major float32 tensor. Every extent is positive and the data
// length always equals the product of the extents.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);  // zero-filled
  Tensor(Shape shape, std::vector<float> data);
  Tensor(Shape shape, std::initializer_list<float> data);

  static Tensor filled(Shape shape, float value);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<float> values() noexcept { return data_; }
  std::span<const float> values() const noexcept { return data_; }
  float* data() noexcept { return data_.data(); }
  const float* data() const noexcept { return data_.data(); }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  // Same values under a different shape with equal element count.
  Tensor reshaped(Shape shape) const;

  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

// Throws ShapeError when the shapes differ; `what` names the operation.
void require_same_shape(const Tensor& a, const Tensor& b, const std::string& what);

// Throws NumericError naming `what` when any element is NaN or infinite.
void require_finite(const Tensor& t, const std::string& what);

// Elementwise sum; shapes must match exactly (no broadcasting).
Tensor add(const Tensor& a, const Tensor& b);

double sum_abs(const Tensor& t);
double mean_square(const Tensor& t);
// Population variance of the elements.
double variance(const Tensor& t);

}  // namespace shredder
