#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "shredder/error.hpp"
#include "shredder/noise_learner.hpp"
#include "shredder/tape.hpp"
#include "test_support.hpp"

namespace shredder {
namespace {

using testing::random_tensor;

double l1(const Tensor& t) {
  double s = 0.0;
  for (float v : t.values()) s += std::fabs(v);
  return s;
}

// Random inputs labelled by the network itself, so clean accuracy is 1.
ActivationSet self_labelled(const Split& split, std::size_t n, std::uint64_t seed, std::size_t private_classes = 0) {
  CounterRng rng(seed);
  Dataset data;
  const auto& net = split.network();
  for (std::size_t i = 0; i < n; ++i) {
    Tensor x = random_tensor(net.spec().input_shape, rng);
    data.labels.push_back(static_cast<std::uint32_t>(argmax(net.forward(x))));
    if (private_classes) data.private_labels.push_back(static_cast<std::uint32_t>(rng.below(private_classes)));
    data.inputs.push_back(std::move(x));
  }
  return edge_activations(split, data);
}

std::shared_ptr<const Network> private_head_for(const Shape& activation, std::uint64_t seed) {
  return testing::build_network("name: head\ninput: [" + std::to_string(element_count(activation)) +
                                    "]\nclasses: 3\nlayers:\n  - {name: fc, kind: fc, out_features: 3}\n",
                                seed);
}

TrainConfig small_config() {
  TrainConfig c;
  c.batch_size = 8;
  c.eval_interval = 10;
  c.max_round_iterations = 50;
  c.max_total_iterations = 2000;
  c.target_collection_size = 3;
  c.gate_on_lower_bound = false;
  c.collector.sse_threshold = 1e9;  // a 16-element tensor cannot pass a meaningful fit check
  return c;
}

TEST(InitNoise, MeanWithinLaplaceStandardError) {
  const double b = 2.0;
  const auto n = init_noise({10000}, b, 3);
  const double mean = std::accumulate(n.values.values().begin(), n.values.values().end(), 0.0) / 10000.0;
  EXPECT_LT(std::fabs(mean), 3.0 * b * std::sqrt(2.0 / 10000.0));
}

TEST(InitNoise, DeterministicAndRejectsZeroScale) {
  EXPECT_EQ(init_noise({5, 5}, 1.0, 9).values, init_noise({5, 5}, 1.0, 9).values);
  EXPECT_NE(init_noise({5, 5}, 1.0, 9).values, init_noise({5, 5}, 1.0, 10).values);
  EXPECT_THROW(init_noise({4}, 0.0, 1), ConfigError);
}

TEST(Losses, WorkedExamples) {
  const Tensor logits({3}, {0.5f, -1.f, 2.f});
  const double ce = cross_entropy(logits, 1);
  const NoiseTensor n{Tensor({3}, {1.f, -2.f, 3.f})};
  EXPECT_NEAR(loss_no_private(logits, 1, n, 0.01), ce - 0.06, 1e-12);
  EXPECT_DOUBLE_EQ(loss_no_private(logits, 1, n, 0.0), ce);

  // alpha * sum|n| = 0.05 needs alpha = 0.05 / 6.
  const Tensor priv({2}, {0.3f, -0.4f});
  const double ce_s = cross_entropy(priv, 0);
  EXPECT_NEAR(loss_private(logits, 1, priv, 0, n, 0.05 / 6.0, 0.01), ce - 0.01 * ce_s - 0.05, 1e-12);
  EXPECT_DOUBLE_EQ(loss_private(logits, 1, priv, 0, n, 0.01, 0.0), loss_no_private(logits, 1, n, 0.01));
  EXPECT_LT(loss_private(logits, 1, priv, 0, n, 0.01, 0.2), loss_private(logits, 1, priv, 0, n, 0.01, 0.1));
}

TEST(Losses, MagnitudeTermGradientIsMinusAlphaSign) {
  const Tensor logits({2}, {1.f, 0.f});
  NoiseTensor n{Tensor({4}, {0.7f, -1.3f, 2.f, -0.2f})};
  const double alpha = 0.05;
  const Tensor fd = testing::finite_difference(
      [&](const Tensor& x) { return loss_no_private(logits, 0, NoiseTensor{x}, alpha); }, n.values, 1e-2);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(fd[i], -alpha * (n.values[i] > 0 ? 1 : -1), 1e-6);
}

TEST(AlphaSchedule, DecaysByTenEveryPeriod) {
  TrainConfig c;
  c.alpha = 0.01;
  EXPECT_DOUBLE_EQ(alpha_at(0, c), 0.01);
  EXPECT_DOUBLE_EQ(alpha_at(499, c), 0.01);
  EXPECT_NEAR(alpha_at(500, c), 0.001, 1e-15);
  EXPECT_NEAR(alpha_at(1000, c), 0.0001, 1e-15);
}

TEST(TrainConfig, RejectsInvalidValues) {
  auto expect_bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), ConfigError);
  };
  expect_bad([](TrainConfig& c) { c.alpha = -1; });
  expect_bad([](TrainConfig& c) { c.learning_rate = 0; });
  expect_bad([](TrainConfig& c) { c.alpha_decay = 1.5; });
  expect_bad([](TrainConfig& c) { c.init_scale = 0; });
  expect_bad([](TrainConfig& c) { c.holdout_fraction = 0.9; });
  expect_bad([](TrainConfig& c) { c.eval_interval = 0; });
  EXPECT_NO_THROW(TrainConfig{}.validate());
}

TEST(TrainStep, LargeAlphaGrowsNoiseMagnitude) {
  const Split split(testing::small_conv_network(1), 6);
  const auto batch = self_labelled(split, 8, 2);
  TrainConfig c = small_config();
  c.alpha = 100.0;
  c.resample_training = false;
  NoiseTensor n = init_noise(split.activation_shape(), 0.5, 3);
  AdamState adam(n.values.shape());
  for (std::size_t it = 0; it < 5; ++it) {
    const double before = l1(n.values);
    train_step(split, n, batch, c, adam, it);
    EXPECT_GT(l1(n.values), before) << it;
  }
}

TEST(TrainStep, NetworkWeightsAreBitwiseUnchanged) {
  const auto net = testing::small_conv_network(4);
  const Split split(net, 6);
  const auto head = private_head_for(split.activation_shape(), 5);
  const auto batch = self_labelled(split, 8, 6, 3);
  const auto net_digest = weights_digest(net->weights());
  const auto head_digest = weights_digest(head->weights());
  TrainConfig c = small_config();
  c.gamma = 0.1;
  NoiseTensor n = init_noise(split.activation_shape(), 1.0, 7);
  AdamState adam(n.values.shape());
  CounterRng rng(8);
  for (std::size_t it = 0; it < 10; ++it) train_step(split, n, batch, c, adam, it, head.get(), &rng);
  EXPECT_EQ(weights_digest(net->weights()), net_digest);
  EXPECT_EQ(weights_digest(head->weights()), head_digest);
}

TEST(TrainStep, PlainCrossEntropyOverfitsOneBatch) {
  const Split split(testing::small_conv_network(9), 6);
  const auto batch = self_labelled(split, 8, 10);
  TrainConfig c = small_config();
  c.alpha = 0.0;
  c.resample_training = false;
  NoiseTensor n = init_noise(split.activation_shape(), 3.0, 11);
  AdamState adam(n.values.shape());
  std::vector<double> losses;
  for (std::size_t it = 0; it < 100; ++it) losses.push_back(train_step(split, n, batch, c, adam, it).loss);
  const double first = std::accumulate(losses.begin(), losses.begin() + 10, 0.0);
  const double last = std::accumulate(losses.end() - 10, losses.end(), 0.0);
  EXPECT_LT(last, first);
  EXPECT_LE(losses.back(), losses.front());
}

TEST(TrainStep, RejectsMissingPrivateHeadOrRng) {
  const Split split(testing::small_conv_network(1), 6);
  const auto batch = self_labelled(split, 4, 2);
  TrainConfig c = small_config();
  NoiseTensor n = init_noise(split.activation_shape(), 1.0, 3);
  AdamState adam(n.values.shape());
  EXPECT_THROW(train_step(split, n, batch, c, adam, 0), ConfigError);  // resampling without rng
  c.gamma = 0.5;
  CounterRng rng(1);
  EXPECT_THROW(train_step(split, n, batch, c, adam, 0, nullptr, &rng), ConfigError);
}

TEST(HoldoutAccuracy, ZeroNoiseIsCleanAndExtremeNoiseIsChance) {
  const Split split(testing::small_conv_network(12), 6);
  const auto holdout = self_labelled(split, 400, 13);
  const NoiseTensor zero{Tensor(split.activation_shape())};
  EXPECT_DOUBLE_EQ(holdout_accuracy(split, zero, holdout), 1.0);
  const auto huge = init_noise(split.activation_shape(), 1e6, 14);
  const double acc = holdout_accuracy(split, huge, holdout);
  // A fixed huge tensor pins every logit vector to one class.
  const auto counts = [&] {
    std::vector<std::size_t> c(5);
    for (auto l : holdout.labels) ++c[l];
    return c;
  }();
  const double max_share = static_cast<double>(*std::max_element(counts.begin(), counts.end())) / 400.0;
  EXPECT_LE(acc, max_share + 1e-12);
  EXPECT_EQ(holdout_accuracy(split, huge, holdout), acc);
  EXPECT_THROW(holdout_accuracy(split, zero, ActivationSet{}), Error);
}

TEST(TrainNoise, FullBudgetAcceptsWithinFirstInterval) {
  const Split split(testing::small_conv_network(15), 6);
  const auto train = self_labelled(split, 64, 16);
  const auto holdout = self_labelled(split, 32, 17);
  TrainConfig c = small_config();
  c.accuracy_budget = 1.0;
  c.selection = CandidateSelection::first;
  const auto result = train_noise(split, train, holdout, c);
  EXPECT_EQ(result.collection.size(), 3u);
  EXPECT_EQ(result.rounds, 3u);
  EXPECT_EQ(result.total_iterations, 3 * c.eval_interval);
  EXPECT_DOUBLE_EQ(result.clean_accuracy, 1.0);
}

TEST(TrainNoise, ImpossibleBudgetReportsFailure) {
  const Split split(testing::small_conv_network(18), 6);
  const auto train = self_labelled(split, 64, 19);
  const auto holdout = self_labelled(split, 64, 20);
  TrainConfig c = small_config();
  c.accuracy_budget = 0.0;
  c.init_scale = 1e4;
  c.max_total_iterations = 200;
  EXPECT_THROW(train_noise(split, train, holdout, c), TrainingFailure);
}

TEST(TrainNoise, SameSeedGivesIdenticalCollection) {
  const Split split(testing::small_conv_network(21), 6);
  const auto train = self_labelled(split, 64, 22);
  const auto holdout = self_labelled(split, 32, 23);
  TrainConfig c = small_config();
  c.accuracy_budget = 0.5;
  const auto a = train_noise(split, train, holdout, c);
  const auto b = train_noise(split, train, holdout, c);
  EXPECT_EQ(encode_collection(a.collection), encode_collection(b.collection));
  c.seed = 2;
  EXPECT_NE(encode_collection(train_noise(split, train, holdout, c).collection), encode_collection(a.collection));
}

TEST(TrainNoise, AcceptedEntriesMeetTheBudget) {
  const Split split(testing::small_conv_network(24), 6);
  const auto train = self_labelled(split, 64, 25);
  const auto holdout = self_labelled(split, 64, 26);
  TrainConfig c = small_config();
  c.accuracy_budget = 0.3;
  const auto result = train_noise(split, train, holdout, c);
  for (const auto& e : result.collection.entries()) EXPECT_GE(e.accuracy, result.clean_accuracy - 0.3);
}

}  // namespace
}  // namespace shredder
