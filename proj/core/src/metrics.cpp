#include "shredder/metrics.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "shredder/error.hpp"

namespace shredder {

SampleMatrix::SampleMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

SampleMatrix::SampleMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) throw ShapeError("sample matrix: data length does not match rows x cols");
}

SampleMatrix SampleMatrix::from_rows(std::span<const Tensor> rows) {
  if (rows.empty()) throw ShapeError("sample matrix: no rows");
  const auto& shape = rows.front().shape();
  SampleMatrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].shape() != shape) throw ShapeError("sample matrix: rows differ in shape");
    std::copy(rows[i].values().begin(), rows[i].values().end(), m.row(i).begin());
  }
  return m;
}

SampleMatrix SampleMatrix::from_tensor(const Tensor& t) {
  if (t.rank() != 2) throw ShapeError("sample matrix: expected rank-2 tensor, got " + to_string(t.shape()));
  return SampleMatrix(t.shape()[0], t.shape()[1], {t.values().begin(), t.values().end()});
}

Tensor SampleMatrix::to_tensor() const { return Tensor({rows_, cols_}, data_); }

namespace {

constexpr double kJitter = 1e-10;

// Deterministic per-row perturbation in [-1, 1] so exact duplicates have
// nonzero kNN distances. Keyed by (row, col) only.
double jitter(std::size_t row, std::size_t col) {
  std::uint64_t z = row * 0x9E3779B97F4A7C15ull + col * 0xC2B2AE3D27D4EB4Full + 0x165667B19E3779F9ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-52 - 1.0;
}

std::vector<double> prepared(const SampleMatrix& m) {
  std::vector<double> out(m.values().begin(), m.values().end());
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double lo = out[c], hi = out[c];
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const double v = out[r * m.cols() + c];
      if (!std::isfinite(v)) throw NumericError("sample matrix contains non-finite values");
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double scale = std::max(hi - lo, 1.0);
    for (std::size_t r = 0; r < m.rows(); ++r) out[r * m.cols() + c] += kJitter * scale * jitter(r, c);
  }
  return out;
}

double max_norm(const double* a, const double* b, std::size_t d) {
  double m = 0.0;
  for (std::size_t i = 0; i < d; ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

void check_k(std::size_t n, std::size_t k) {
  if (k == 0) throw ConfigError("kNN estimator: k must be >= 1");
  if (n < k + 1) {
    throw NumericError("kNN estimator: need at least k+1 = " + std::to_string(k + 1) + " samples, got " +
                       std::to_string(n));
  }
}

}  // namespace

MIEstimate estimate_mi(const SampleMatrix& x, const SampleMatrix& y, std::size_t k) {
  if (x.rows() != y.rows()) throw ShapeError("estimate_mi: X and Y must have the same number of rows");
  if (x.cols() == 0 || y.cols() == 0) throw ShapeError("estimate_mi: zero-dimensional variable");
  const std::size_t n = x.rows();
  check_k(n, k);
  const auto xs = prepared(x);
  const auto ys = prepared(y);
  const std::size_t dx = x.cols(), dy = y.cols();

  std::vector<double> dist_x(n), dist_y(n), joint(n);
  double psi_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      dist_x[j] = max_norm(&xs[i * dx], &xs[j * dx], dx);
      dist_y[j] = max_norm(&ys[i * dy], &ys[j * dy], dy);
      joint[j] = std::max(dist_x[j], dist_y[j]);
    }
    joint[i] = std::numeric_limits<double>::infinity();
    // k-th smallest joint distance over j != i
    std::nth_element(joint.begin(), joint.begin() + static_cast<std::ptrdiff_t>(k - 1), joint.end());
    const double eps = joint[k - 1];
    std::size_t nx = 0, ny = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      nx += dist_x[j] < eps ? 1 : 0;
      ny += dist_y[j] < eps ? 1 : 0;
    }
    psi_sum += boost::math::digamma(static_cast<double>(nx + 1)) + boost::math::digamma(static_cast<double>(ny + 1));
  }
  const double nats = boost::math::digamma(static_cast<double>(k)) + boost::math::digamma(static_cast<double>(n)) -
                      psi_sum / static_cast<double>(n);
  MIEstimate out;
  out.raw_bits = nats / std::numbers::ln2;
  out.bits = std::max(0.0, out.raw_bits);
  out.k = k;
  out.n = n;
  return out;
}

double estimate_entropy(const SampleMatrix& x, std::size_t k) {
  const std::size_t n = x.rows(), d = x.cols();
  if (d == 0) throw ShapeError("estimate_entropy: zero-dimensional variable");
  check_k(n, k);
  const auto xs = prepared(x);
  std::vector<double> dist(n);
  double log_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) dist[j] = max_norm(&xs[i * d], &xs[j * d], d);
    dist[i] = std::numeric_limits<double>::infinity();
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
    log_sum += std::log(dist[k - 1]);
  }
  // Max-norm ball of radius eps has volume (2 eps)^d.
  const double nats = boost::math::digamma(static_cast<double>(n)) - boost::math::digamma(static_cast<double>(k)) +
                      static_cast<double>(d) * std::numbers::ln2 +
                      static_cast<double>(d) * log_sum / static_cast<double>(n);
  return nats / std::numbers::ln2;
}

double snr(const SampleMatrix& activations, double noise_variance) {
  if (!(noise_variance > 0.0) || !std::isfinite(noise_variance)) {
    throw NumericError("snr: noise variance must be positive (zero noise gives unbounded SNR)");
  }
  if (activations.values().empty()) throw NumericError("snr: no activations");
  double s = 0.0;
  for (float v : activations.values()) s += static_cast<double>(v) * v;
  return s / static_cast<double>(activations.values().size()) / noise_variance;
}

double snr(std::span<const Tensor> activations, double noise_variance) {
  if (!(noise_variance > 0.0) || !std::isfinite(noise_variance)) {
    throw NumericError("snr: noise variance must be positive (zero noise gives unbounded SNR)");
  }
  double s = 0.0;
  std::size_t count = 0;
  for (const auto& a : activations) {
    for (float v : a.values()) s += static_cast<double>(v) * v;
    count += a.size();
  }
  if (count == 0) throw NumericError("snr: no activations");
  return s / static_cast<double>(count) / noise_variance;
}

double surrogate_objective(double b_y, double b_w, double lambda, double ce_sum) {
  if (!(b_y > 0.0) || !(b_w > 0.0)) throw NumericError("surrogate_objective: scales must be positive");
  return std::log(b_y + b_w) - std::log(b_w) + lambda * ce_sum;
}

}  // namespace shredder
