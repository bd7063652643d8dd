#include "shredder/noise_learner.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <sstream>

#include "shredder/error.hpp"
#include "shredder/metrics.hpp"
#include "shredder/rng.hpp"
#include "shredder/sampler.hpp"
#include "shredder/tape.hpp"

namespace shredder {

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("train config: " + msg); };
  if (!(alpha >= 0.0)) fail("alpha must be >= 0");
  if (!(gamma >= 0.0)) fail("gamma must be >= 0");
  if (!(learning_rate > 0.0)) fail("learning rate must be > 0");
  if (!(alpha_decay > 0.0 && alpha_decay <= 1.0)) fail("alpha decay must be in (0, 1]");
  if (alpha_period == 0) fail("alpha decay period must be positive");
  if (batch_size == 0) fail("batch size must be positive");
  if (!(init_scale > 0.0)) fail("initial noise scale must be > 0");
  if (!(accuracy_budget >= 0.0)) fail("accuracy budget must be >= 0");
  if (!(holdout_fraction > 0.0 && holdout_fraction <= 0.5)) fail("hold-out fraction must be in (0, 0.5]");
  if (target_collection_size == 0) fail("target collection size must be positive");
  if (eval_interval == 0) fail("evaluation interval must be positive");
  if (max_round_iterations == 0 || max_total_iterations == 0) fail("iteration budgets must be positive");
  if (jobs == 0) fail("jobs must be positive");
}

ActivationSet edge_activations(const Split& split, const Dataset& data) {
  ActivationSet out;
  out.activations.reserve(data.size());
  for (const auto& x : data.inputs) out.activations.push_back(run_edge(split, x));
  out.labels = data.labels;
  out.private_labels = data.private_labels;
  return out;
}

ActivationSet select(const ActivationSet& set, std::span<const std::size_t> indices) {
  ActivationSet out;
  out.activations.reserve(indices.size());
  for (auto i : indices) {
    out.activations.push_back(set.activations.at(i));
    out.labels.push_back(set.labels.at(i));
    if (set.has_private_labels()) out.private_labels.push_back(set.private_labels.at(i));
  }
  return out;
}

NoiseTensor init_noise(const Shape& shape, double init_scale, std::uint64_t seed) {
  if (!(init_scale > 0.0) || !std::isfinite(init_scale)) throw ConfigError("init_noise: scale must be > 0");
  CounterRng rng(seed, 0x1a17);
  Tensor t(shape);
  for (float& v : t.values()) v = static_cast<float>(rng.laplace(0.0, init_scale));
  return {std::move(t)};
}

double loss_no_private(const Tensor& logits, std::size_t label, const NoiseTensor& noise, double alpha) {
  return cross_entropy(logits, label) - alpha * sum_abs(noise.values);
}

double loss_private(const Tensor& primary_logits, std::size_t primary_label, const Tensor& private_logits,
                    std::size_t private_label, const NoiseTensor& noise, double alpha, double gamma) {
  return cross_entropy(primary_logits, primary_label) - gamma * cross_entropy(private_logits, private_label) -
         alpha * sum_abs(noise.values);
}

double alpha_at(std::size_t iteration, const TrainConfig& config) {
  return config.alpha * std::pow(config.alpha_decay, static_cast<double>(iteration / config.alpha_period));
}

namespace {

double sign(float v) { return v > 0.0f ? 1.0 : (v < 0.0f ? -1.0 : 0.0); }

void adam_update(NoiseTensor& noise, const std::vector<double>& grad, AdamState& adam, double lr) {
  adam.step += 1;
  const double t = static_cast<double>(adam.step);
  const double c1 = 1.0 - std::pow(adam.beta1, t);
  const double c2 = 1.0 - std::pow(adam.beta2, t);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double m = adam.beta1 * adam.first_moment[i] + (1.0 - adam.beta1) * grad[i];
    const double v = adam.beta2 * adam.second_moment[i] + (1.0 - adam.beta2) * grad[i] * grad[i];
    adam.first_moment[i] = static_cast<float>(m);
    adam.second_moment[i] = static_cast<float>(v);
    noise.values[i] -= static_cast<float>(lr * (m / c1) / (std::sqrt(v / c2) + adam.epsilon));
  }
}

double laplace_scale_of(std::span<const Tensor> activations) {
  std::vector<float> all;
  for (const auto& a : activations) all.insert(all.end(), a.values().begin(), a.values().end());
  try {
    return fit_laplace(all).scale;
  } catch (const NumericError&) {
    return 0.0;
  }
}

double signal_power(const ActivationSet& set) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& a : set.activations) {
    for (float v : a.values()) s += static_cast<double>(v) * v;
    n += a.size();
  }
  return n ? s / static_cast<double>(n) : 0.0;
}

}  // namespace

namespace {

// Fit and order computed once, reused for many draws.
struct Resampler {
  LaplaceParams params;
  std::vector<std::uint32_t> order;
  Shape shape;

  explicit Resampler(const Tensor& noise)
      : params(fit_laplace(noise)), order(descending_order(noise.values())), shape(noise.shape()) {}

  Tensor draw(CounterRng& rng) const {
    std::vector<float> d(order.size());
    for (auto& v : d) v = static_cast<float>(rng.laplace(params.location, params.scale));
    return place_by_order(std::move(d), order, shape);
  }
};

}  // namespace

Tensor order_preserving_resample(const Tensor& noise, CounterRng& rng) { return Resampler(noise).draw(rng); }

StepMetrics train_step(const Split& split, NoiseTensor& noise, const ActivationSet& batch, const TrainConfig& config,
                       AdamState& adam, std::size_t iteration, const Network* private_head, CounterRng* rng) {
  if (batch.size() == 0) throw Error("train_step: empty batch");
  require_same_shape(noise.values, Tensor(split.activation_shape()), "train_step noise");
  if (adam.first_moment.shape() != noise.values.shape()) throw ShapeError("train_step: Adam state shape mismatch");
  const bool use_private = config.gamma > 0.0;
  if (use_private && (!private_head || !batch.has_private_labels())) {
    throw ConfigError("train_step: gamma > 0 needs a private head and private labels");
  }

  if (config.resample_training && !rng) throw ConfigError("train_step: resample_training needs an rng");
  std::optional<Resampler> resampler;
  if (config.resample_training) resampler.emplace(noise.values);

  const double alpha = alpha_at(iteration, config);
  const auto cloud = split.cloud_layers();
  std::vector<double> grad(noise.values.size(), 0.0);
  double task_loss = 0.0, ce_sum = 0.0, power = 0.0;
  std::size_t correct = 0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const std::size_t label = batch.labels[s];
    std::size_t predicted = 0;
    const LogitLoss primary = [&](const Tensor& logits) {
      predicted = argmax(logits);
      return cross_entropy_with_grad(logits, label);
    };
    // Straight-through: the gradient at the resample is applied to the noise.
    const Tensor point = resampler ? resampler->draw(*rng) : noise.values;
    const auto g = grad_wrt_noise(cloud, batch.activations[s], point, primary);
    task_loss += g.loss;
    ce_sum += g.loss;
    correct += predicted == label ? 1 : 0;
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g.grad[i];

    if (use_private) {
      const std::size_t secret = batch.private_labels[s];
      const LogitLoss adversary = [&](const Tensor& logits) {
        auto lg = cross_entropy_with_grad(logits, secret);
        lg.loss *= -config.gamma;
        for (float& v : lg.grad.values()) v = static_cast<float>(-config.gamma * v);
        return lg;
      };
      const auto gp = grad_wrt_noise(private_head->layers(), batch.activations[s], point, adversary);
      task_loss += gp.loss;
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += gp.grad[i];
    }
    power += mean_square(batch.activations[s]);
  }

  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = grad[i] * inv_batch - alpha * sign(noise.values[i]);

  StepMetrics m;
  m.alpha = alpha;
  m.cross_entropy = ce_sum * inv_batch;
  m.loss = task_loss * inv_batch - alpha * sum_abs(noise.values);
  m.batch_accuracy = static_cast<double>(correct) * inv_batch;
  power *= inv_batch;
  m.inverse_snr = power > 0.0 ? variance(noise.values) / power : std::numeric_limits<double>::infinity();
  if (!std::isfinite(m.loss)) {
    std::ostringstream os;
    os << "train_step: non-finite loss at iteration " << iteration << " (cross-entropy " << m.cross_entropy
       << ", noise L1 " << sum_abs(noise.values) << ", alpha " << alpha << ")";
    throw NumericError(os.str());
  }
  adam_update(noise, grad, adam, config.learning_rate);
  require_finite(noise.values, "train_step noise update");
  return m;
}

double holdout_accuracy(const Split& split, const NoiseTensor& noise, const ActivationSet& holdout) {
  if (holdout.size() == 0) throw Error("holdout_accuracy: empty hold-out set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < holdout.size(); ++i) {
    correct += argmax(run_cloud(split, add(holdout.activations[i], noise.values))) == holdout.labels[i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(holdout.size());
}

double holdout_accuracy(const Split& split, const NoiseTensor& noise, const Dataset& holdout) {
  return holdout_accuracy(split, noise, edge_activations(split, holdout));
}

double sampled_accuracy(const Split& split, const NoiseTensor& noise, const ActivationSet& holdout, CounterRng& rng) {
  if (holdout.size() == 0) throw Error("sampled_accuracy: empty hold-out set");
  const Resampler resampler(noise.values);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < holdout.size(); ++i) {
    const Tensor noisy = add(holdout.activations[i], resampler.draw(rng));
    correct += argmax(run_cloud(split, noisy)) == holdout.labels[i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(holdout.size());
}

double private_accuracy(const Network& head, const NoiseTensor& noise, const ActivationSet& data) {
  if (!data.has_private_labels() || data.size() == 0) throw Error("private_accuracy: no private labels");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    correct += argmax(head.forward(add(data.activations[i], noise.values))) == data.private_labels[i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::uint64_t round_seed(std::uint64_t base_seed, std::size_t round) {
  CounterRng rng(base_seed, 0x5eed);
  std::uint64_t s = 0;
  for (std::size_t i = 0; i <= round; ++i) s = rng();
  return s;
}

RoundOutcome run_round(const Split& split, const ActivationSet& train, const ActivationSet& holdout,
                       double clean_accuracy, const TrainConfig& config, std::size_t round,
                       const Network* private_head, const RoundOptions& options) {
  config.validate();
  if (train.size() == 0) throw Error("run_round: empty training set");
  RoundOutcome out;
  out.round = round;
  out.seed = round_seed(config.seed, round);
  NoiseTensor noise = init_noise(split.activation_shape(), config.init_scale, out.seed);
  AdamState adam(noise.values.shape());
  CounterRng order_rng(out.seed, 0xba7c);

  const double power = signal_power(train);
  const double b_y = laplace_scale_of(train.activations);
  const std::size_t log_interval = options.log_interval ? options.log_interval : config.eval_interval;
  const std::size_t limit = options.iterations.value_or(config.max_round_iterations);

  std::vector<std::size_t> perm(train.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t cursor = perm.size();
  auto next_batch = [&] {
    std::vector<std::size_t> idx;
    while (idx.size() < config.batch_size) {
      if (cursor == perm.size()) {
        for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[order_rng.below(i)]);
        cursor = 0;
      }
      idx.push_back(perm[cursor++]);
    }
    return select(train, idx);
  };

  auto record = [&](std::size_t t, const StepMetrics& m, double acc, std::string event, const NoiseTensor& at) {
    LogRecord r;
    r.round = round;
    r.iteration = t;
    r.alpha = alpha_at(t, config);
    r.loss = m.loss;
    r.inverse_snr = power > 0.0 ? variance(at.values) / power : std::numeric_limits<double>::infinity();
    r.holdout_accuracy = acc;
    double b_w = 0.0;
    try {
      b_w = fit_laplace(at.values).scale;
    } catch (const NumericError&) {
    }
    r.surrogate = (b_y > 0.0 && b_w > 0.0) ? surrogate_objective(b_y, b_w, config.surrogate_lambda, m.cross_entropy)
                                           : std::numeric_limits<double>::quiet_NaN();
    r.event = std::move(event);
    out.log.push_back(std::move(r));
  };

  StepMetrics last;
  CounterRng step_rng(out.seed, 0x57e9);
  double best_inverse_snr = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0;; ++t) {
    const bool evaluate = t % config.eval_interval == 0 || t == limit;
    double acc = std::numeric_limits<double>::quiet_NaN();
    std::string event;
    if (evaluate) {
      if (config.sampled_gate) {
        CounterRng gate_rng(out.seed, 0x6a7e0000ull + t);
        acc = sampled_accuracy(split, noise, holdout, gate_rng);
      } else {
        acc = holdout_accuracy(split, noise, holdout);
      }
      const auto successes = static_cast<std::size_t>(std::llround(acc * static_cast<double>(holdout.size())));
      const Interval ci = wilson_interval(successes, holdout.size());
      const double gated = config.gate_on_lower_bound ? ci.low : acc;
      if (options.collect && t > 0 && gated >= clean_accuracy - config.accuracy_budget) {
        const double inverse_snr = power > 0.0 ? variance(noise.values) / power : 0.0;
        const bool improves = config.selection == CandidateSelection::first || inverse_snr > best_inverse_snr;
        if (!improves) {
          event = "passed";
        } else {
          auto outcome = try_collect(noise.values, acc, config.collector, out.seed, ci);
          if (outcome.entry) {
            out.entry = std::move(outcome.entry);
            best_inverse_snr = inverse_snr;
            event = "candidate";
          } else {
            event = "rejected: " + outcome.rejection;
          }
        }
      }
    }
    const bool done = t == limit || (config.selection == CandidateSelection::first && out.entry);
    if (done) {
      if (!out.entry && options.collect && event.empty()) event = "budget";
      record(t, last, acc, event, noise);
      out.iterations = t;
      break;
    }
    const auto batch = next_batch();
    // Logged metrics describe the pre-update noise.
    const bool log_now = t % log_interval == 0 || evaluate;
    std::optional<NoiseTensor> before;
    if (log_now) before = noise;
    last = train_step(split, noise, batch, config, adam, t, private_head, &step_rng);
    if (log_now) record(t, last, acc, event, *before);
  }
  out.final_noise = std::move(noise);
  return out;
}

TrainResult train_noise(const Split& split, const ActivationSet& train, const ActivationSet& holdout,
                        const TrainConfig& config, const Network* private_head,
                        const std::function<void(const RoundOutcome&)>& on_round) {
  config.validate();
  if (holdout.size() == 0) throw Error("train_noise: empty hold-out set");
  TrainResult result;
  result.collection = DistributionCollection(split.activation_shape(), split.network().identity(),
                                             static_cast<std::uint32_t>(split.cut()));
  result.holdout_size = holdout.size();
  result.clean_accuracy = holdout_accuracy(split, NoiseTensor{Tensor(split.activation_shape())}, holdout);

  std::size_t next_round = 0;
  while (result.collection.size() < config.target_collection_size) {
    // Rounds run in waves of `jobs`; results merge in round order.
    std::vector<std::future<RoundOutcome>> wave;
    for (std::size_t j = 0; j < config.jobs; ++j) {
      const std::size_t r = next_round++;
      auto task = [&, r] { return run_round(split, train, holdout, result.clean_accuracy, config, r, private_head); };
      wave.push_back(std::async(config.jobs > 1 ? std::launch::async : std::launch::deferred, task));
    }
    for (auto& f : wave) {
      RoundOutcome outcome = f.get();
      if (result.collection.size() >= config.target_collection_size) continue;
      result.rounds += 1;
      result.total_iterations += outcome.iterations;
      for (auto& r : outcome.log) {
        r.global_iteration = result.total_iterations - outcome.iterations + r.iteration;
        result.log.push_back(r);
      }
      if (outcome.entry) result.collection.append(*outcome.entry);
      if (on_round) on_round(outcome);
      if (result.collection.size() < config.target_collection_size &&
          result.total_iterations >= config.max_total_iterations) {
        std::ostringstream os;
        os << "noise learning exhausted its budget of " << config.max_total_iterations << " iterations after "
           << result.rounds << " rounds with " << result.collection.size() << "/" << config.target_collection_size
           << " accepted distributions (clean hold-out accuracy " << result.clean_accuracy << ", budget "
           << config.accuracy_budget << ")";
        throw TrainingFailure(os.str());
      }
    }
  }
  result.epochs = static_cast<double>(result.total_iterations * config.batch_size) / static_cast<double>(train.size());
  return result;
}

TrainResult train_noise(const Split& split, const Dataset& data, const TrainConfig& config,
                        const Network* private_head, const std::function<void(const RoundOutcome&)>& on_round) {
  config.validate();
  const auto parts = split_holdout(data, config.holdout_fraction, config.seed);
  return train_noise(split, edge_activations(split, parts.train), edge_activations(split, parts.holdout), config,
                     private_head, on_round);
}

}  // namespace shredder
