#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "shredder/tensor.hpp"

namespace shredder {

// N observations of a D-dimensional variable, row-major.
class SampleMatrix {
 public:
  SampleMatrix() = default;
  SampleMatrix(std::size_t rows, std::size_t cols);
  SampleMatrix(std::size_t rows, std::size_t cols, std::vector<float> data);
  // One row per tensor, flattened; all tensors must share a shape.
  static SampleMatrix from_rows(std::span<const Tensor> rows);
  static SampleMatrix from_tensor(const Tensor& t);  // rank-2 [N, D]
  Tensor to_tensor() const;

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const float> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<float> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  std::span<const float> values() const noexcept { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

struct MIEstimate {
  double bits = 0.0;
  double raw_bits = 0.0;  // before clamping at zero
  std::string estimator = "ksg1";
  std::size_t k = 3;
  std::size_t n = 0;
};

// Kraskov-Stoegbauer-Grassberger estimator (algorithm 1) with max-norm
// distances in the joint space, in bits. Rows are aligned observations.
MIEstimate estimate_mi(const SampleMatrix& x, const SampleMatrix& y, std::size_t k = 3);

// Kozachenko-Leonenko kNN differential entropy under the max-norm, in bits.
double estimate_entropy(const SampleMatrix& x, std::size_t k = 3);

// E[a^2] / noise_variance.
double snr(const SampleMatrix& activations, double noise_variance);
double snr(std::span<const Tensor> activations, double noise_variance);
inline double laplace_variance(double scale) { return 2.0 * scale * scale; }

// log(b_y + b_w) - log(b_w) + lambda * ce_sum.
double surrogate_objective(double b_y, double b_w, double lambda, double ce_sum);

}  // namespace shredder
