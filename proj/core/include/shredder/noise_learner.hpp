#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shredder/collector.hpp"
#include "shredder/dataset.hpp"
#include "shredder/error.hpp"
#include "shredder/network.hpp"
#include "shredder/rng.hpp"
#include "shredder/tensor.hpp"

namespace shredder {

// The additive noise at the cut; the only trainable quantity.
struct NoiseTensor {
  Tensor values;
};

// Which gate-passing evaluation of a round becomes its candidate.
enum class CandidateSelection {
  first,         // the first evaluation that passes
  most_private,  // the passing evaluation with the highest 1/SNR
};

struct TrainConfig {
  double alpha = 0.003;         // privacy coefficient, decays on a step schedule
  double gamma = 0.0;           // private-label coefficient; 0 disables that term
  double learning_rate = 0.01;  // Adam step size
  double alpha_decay = 0.1;
  std::size_t alpha_period = 500;
  std::size_t batch_size = 32;
  double init_scale = 3.0;        // Laplace scale of the initial noise
  double accuracy_budget = 0.02;  // max hold-out accuracy drop
  double holdout_fraction = 0.1;
  std::uint64_t seed = 1;
  std::size_t target_collection_size = 20;
  std::size_t eval_interval = 100;
  std::size_t max_round_iterations = 2000;
  std::size_t max_total_iterations = 200000;
  double surrogate_lambda = 1.0;  // weight of the CE term in the logged surrogate objective
  std::size_t jobs = 1;           // concurrent learning rounds
  // Gradients are taken at an order-preserving resample of the noise, the
  // tensor the edge will actually add at inference time.
  bool resample_training = true;
  // The accuracy gate scores fresh order-preserving samples (one per
  // hold-out example) instead of the raw learned tensor.
  bool sampled_gate = true;
  // Gate on the lower end of the 95% Wilson interval of the hold-out
  // accuracy rather than the point estimate.
  bool gate_on_lower_bound = true;
  CandidateSelection selection = CandidateSelection::most_private;
  CollectorConfig collector;

  // Throws ConfigError on an invalid combination.
  void validate() const;
};

struct AdamState {
  Tensor first_moment;
  Tensor second_moment;
  std::size_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  explicit AdamState(const Shape& shape) : first_moment(shape), second_moment(shape) {}
};

// Edge activations with their labels; the learner never re-runs the edge.
struct ActivationSet {
  std::vector<Tensor> activations;
  std::vector<std::uint32_t> labels;
  std::vector<std::uint32_t> private_labels;

  std::size_t size() const noexcept { return activations.size(); }
  bool has_private_labels() const noexcept { return !private_labels.empty(); }
};

ActivationSet edge_activations(const Split& split, const Dataset& data);
ActivationSet select(const ActivationSet& set, std::span<const std::size_t> indices);

// iid Laplace(0, init_scale) noise, deterministic in `seed`.
NoiseTensor init_noise(const Shape& shape, double init_scale, std::uint64_t seed);

// cross_entropy(logits, label) - alpha * sum |n_i|
double loss_no_private(const Tensor& logits, std::size_t label, const NoiseTensor& noise, double alpha);
// CE_primary - gamma * CE_private - alpha * sum |n_i|
double loss_private(const Tensor& primary_logits, std::size_t primary_label, const Tensor& private_logits,
                    std::size_t private_label, const NoiseTensor& noise, double alpha, double gamma);

// alpha_0 * decay^floor(iteration / period)
double alpha_at(std::size_t iteration, const TrainConfig& config);

struct StepMetrics {
  double loss = 0.0;  // batch-mean task loss minus the noise magnitude term
  double cross_entropy = 0.0;
  double inverse_snr = 0.0;  // var(n) / E[a^2] over the batch
  double batch_accuracy = 0.0;
  double alpha = 0.0;
};

// One Adam update of the noise from gradients through the cloud partition
// (and the private head when gamma > 0). Network parameters are read-only.
// `rng` drives the per-sample resampling and is required when
// config.resample_training is set.
StepMetrics train_step(const Split& split, NoiseTensor& noise, const ActivationSet& batch, const TrainConfig& config,
                       AdamState& adam, std::size_t iteration, const Network* private_head = nullptr,
                       CounterRng* rng = nullptr);

// A tensor with the same descending element order as `noise`, values drawn
// from the Laplace fit of `noise`.
Tensor order_preserving_resample(const Tensor& noise, CounterRng& rng);

// Top-1 accuracy of the cloud partition on activations + noise.
double holdout_accuracy(const Split& split, const NoiseTensor& noise, const ActivationSet& holdout);
double holdout_accuracy(const Split& split, const NoiseTensor& noise, const Dataset& holdout);
// Top-1 accuracy when each hold-out example gets its own order-preserving
// resample of `noise`.
double sampled_accuracy(const Split& split, const NoiseTensor& noise, const ActivationSet& holdout, CounterRng& rng);
// Top-1 accuracy of `head` (private task) on activations + noise.
double private_accuracy(const Network& head, const NoiseTensor& noise, const ActivationSet& data);

struct LogRecord {
  std::size_t round = 0;
  std::size_t iteration = 0;  // within the round
  std::size_t global_iteration = 0;
  double alpha = 0.0;
  double loss = 0.0;
  double inverse_snr = 0.0;
  double holdout_accuracy = std::numeric_limits<double>::quiet_NaN();
  double surrogate = 0.0;
  std::string event;  // "", "passed", "candidate", "rejected: ...", "budget"
};

struct RoundOutcome {
  std::size_t round = 0;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  std::optional<DistributionEntry> entry;
  std::vector<LogRecord> log;
  NoiseTensor final_noise;
};

struct RoundOptions {
  bool collect = true;              // gate and collect; false only traces
  std::size_t log_interval = 0;     // 0 = eval_interval
  std::optional<std::size_t> iterations;  // fixed length (trace mode)
};

// One learning round: fresh noise from the round's seed, Adam on the
// training activations, hold-out gating every eval_interval iterations.
RoundOutcome run_round(const Split& split, const ActivationSet& train, const ActivationSet& holdout,
                       double clean_accuracy, const TrainConfig& config, std::size_t round,
                       const Network* private_head = nullptr, const RoundOptions& options = {});

std::uint64_t round_seed(std::uint64_t base_seed, std::size_t round);

struct TrainResult {
  DistributionCollection collection;
  std::vector<LogRecord> log;
  double clean_accuracy = 0.0;
  std::size_t rounds = 0;
  std::size_t total_iterations = 0;
  double epochs = 0.0;
  std::size_t holdout_size = 0;
};

class TrainingFailure : public Error {
 public:
  using Error::Error;
};

// Runs rounds until target_collection_size candidates are accepted. Throws
// TrainingFailure when max_total_iterations is exhausted first.
TrainResult train_noise(const Split& split, const Dataset& data, const TrainConfig& config,
                        const Network* private_head = nullptr,
                        const std::function<void(const RoundOutcome&)>& on_round = {});
TrainResult train_noise(const Split& split, const ActivationSet& train, const ActivationSet& holdout,
                        const TrainConfig& config, const Network* private_head = nullptr,
                        const std::function<void(const RoundOutcome&)>& on_round = {});

}  // namespace shredder
