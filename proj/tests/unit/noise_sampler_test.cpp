#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "shredder/error.hpp"
#include "shredder/sampler.hpp"
#include "test_support.hpp"

namespace shredder {
namespace {

DistributionEntry entry_with(const std::vector<std::uint32_t>& order, double location, double scale) {
  DistributionEntry e;
  e.params = {location, scale};
  e.order = order;
  e.accuracy = 0.99;
  return e;
}

std::vector<std::uint32_t> random_permutation(std::size_t n, CounterRng& rng) {
  std::vector<std::uint32_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<std::uint32_t>(i);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

double median(std::vector<float> v) {
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

TEST(PlaceByOrder, WorkedExample) {
  const std::vector<std::uint32_t> order{2, 1, 0, 3};
  const Tensor t = place_by_order({1.f, 9.f, 5.f, 3.f}, order, {4});
  EXPECT_EQ(t, Tensor({4}, {3.f, 5.f, 9.f, 1.f}));
}

TEST(PlaceByOrder, EqualDrawsAreSplitIntoAStrictRanking) {
  const std::vector<std::uint32_t> order{1, 0, 2};
  const Tensor t = place_by_order({2.f, 2.f, 2.f}, order, {3});
  EXPECT_EQ(descending_order(t.values()), order);
  EXPECT_EQ(t[1], 2.f);
  EXPECT_EQ(t[0], std::nextafter(2.f, -1.f));
}

TEST(PlaceByOrder, MismatchedSizesThrow) {
  const std::vector<std::uint32_t> order{0, 1};
  EXPECT_THROW(place_by_order({1.f, 2.f, 3.f}, order, {3}), ShapeError);
  EXPECT_THROW(place_by_order({1.f, 2.f}, order, {3}), ShapeError);
}

TEST(SampleNoise, PreservesStoredOrderForRandomPermutations) {
  CounterRng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Shape shape{1 + rng.below(8), 1 + rng.below(40)};
    DistributionCollection c(shape, Digest{}, 7);
    c.append(entry_with(random_permutation(element_count(shape), rng), rng.normal(), 0.1 + 3.0 * rng.uniform()));
    const auto noise = sample_noise(c, rng);
    EXPECT_EQ(noise.values.shape(), shape);
    EXPECT_EQ(descending_order(noise.values.values()), c.entries()[0].order) << trial;
  }
}

TEST(SampleNoise, SingleEntryCollectionAlwaysUsesIt) {
  DistributionCollection c({4}, Digest{}, 3);
  c.append(entry_with({2, 1, 0, 3}, 0.0, 1.0));
  CounterRng rng(4);
  for (int i = 0; i < 20; ++i) {
    const auto noise = sample_noise(c, rng);
    EXPECT_EQ(noise.entry_index, 0u);
    EXPECT_GT(noise.values[2], noise.values[1]);
    EXPECT_GT(noise.values[1], noise.values[0]);
    EXPECT_GT(noise.values[0], noise.values[3]);
  }
}

TEST(SampleNoise, EntriesArePickedUniformly) {
  DistributionCollection c({3}, Digest{}, 3);
  for (int i = 0; i < 4; ++i) c.append(entry_with({0, 1, 2}, i, 1.0));
  CounterRng rng(5);
  std::vector<int> counts(4);
  constexpr int kDraws = 8000;
  for (int i = 0; i < kDraws; ++i) ++counts[sample_noise(c, rng).entry_index];
  // Binomial sd is about 39 per bucket.
  for (int n : counts) EXPECT_NEAR(n, kDraws / 4, 200);
}

TEST(SampleNoise, MarginalMatchesStoredLaplace) {
  constexpr std::size_t kSize = 200000;
  CounterRng rng(6);
  DistributionCollection c({kSize}, Digest{}, 3);
  c.append(entry_with(random_permutation(kSize, rng), 0.4, 1.7));
  const auto noise = sample_noise(c, rng);
  const std::vector<float> v(noise.values.values().begin(), noise.values.values().end());
  const double med = median(v);
  std::vector<float> dev(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) dev[i] = std::fabs(v[i] - static_cast<float>(med));
  EXPECT_NEAR(med, 0.4, 0.02);
  // Laplace median absolute deviation is b ln 2.
  EXPECT_NEAR(median(dev), 1.7 * std::log(2.0), 0.02);
}

TEST(SampleNoise, FreshDrawsDifferButAreSeedReproducible) {
  DistributionCollection c({64}, Digest{}, 3);
  CounterRng perm(7);
  c.append(entry_with(random_permutation(64, perm), 0.0, 1.0));
  CounterRng a(11), b(11);
  const auto first = sample_noise(c, a);
  const auto second = sample_noise(c, a);
  EXPECT_NE(first.values, second.values);
  EXPECT_EQ(sample_noise(c, b).values, first.values);
  // Advancing a fresh generator to draw_counter replays the tensor.
  CounterRng replay(11);
  while (replay.counter() < second.draw_counter) replay();
  EXPECT_EQ(sample_from_entry(c, second.entry_index, replay).values, second.values);
}

TEST(SampleNoise, EmptyCollectionAndBadIndexThrow) {
  DistributionCollection c({2}, Digest{}, 3);
  CounterRng rng(1);
  EXPECT_THROW(sample_noise(c, rng), Error);
  c.append(entry_with({0, 1}, 0, 1));
  EXPECT_THROW(sample_from_entry(c, 1, rng), Error);
}

TEST(AddNoise, AddsElementwiseWithoutReordering) {
  DistributionCollection c({4}, Digest{}, 3);
  c.append(entry_with({2, 1, 0, 3}, 0.0, 1.0));
  CounterRng rng(8);
  const auto noise = sample_noise(c, rng);
  const Tensor a({4}, {10.f, -1.f, 0.5f, 3.f});
  const Tensor out = add_noise(a, noise);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(out[i], a[i] + noise.values[i]);
  EXPECT_THROW(add_noise(Tensor(Shape{5}), noise), ShapeError);
}

}  // namespace
}  // namespace shredder
