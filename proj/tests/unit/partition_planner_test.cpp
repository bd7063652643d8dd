#include <gtest/gtest.h>

#include <algorithm>

#include "shredder/error.hpp"
#include "shredder/planner.hpp"
#include "shredder/wire.hpp"
#include "test_support.hpp"

namespace shredder {
namespace {

NetworkSpec lenet_spec() { return load_network_spec(testing::data_dir() / "lenet.yaml"); }

DeviceProfile uniform_profile(const NetworkSpec& spec, double edge_ms, double cloud_ms, double bandwidth,
                              double latency_ms = 1.0) {
  DeviceProfile p;
  for (const auto& layer : spec.layers) p.layers[layer.name] = {edge_ms, cloud_ms};
  p.bandwidth_bytes_per_s = bandwidth;
  p.latency_ms = latency_ms;
  return p;
}

CostTable table_of(std::initializer_list<std::pair<std::size_t, double>> rows) {
  CostTable t;
  for (auto [cut, total] : rows) {
    CutCost c;
    c.cut = cut;
    c.total_ms = total;
    t.rows.push_back(c);
  }
  return t;
}

TEST(ChooseCut, PicksArgmin) { EXPECT_EQ(choose_cut(table_of({{1, 10.0}, {2, 7.0}, {3, 9.0}})), 2u); }

TEST(ChooseCut, TiesGoToDeeperCut) { EXPECT_EQ(choose_cut(table_of({{1, 7.0}, {2, 7.0}})), 2u); }

TEST(ChooseCut, EmptyTableThrows) { EXPECT_THROW(choose_cut(CostTable{}), ConfigError); }

TEST(CostTable, RowsAreExactlyTheValidCuts) {
  const auto spec = lenet_spec();
  const auto table = build_cost_table(spec, uniform_profile(spec, 1.0, 1.0, 1e6));
  std::vector<std::size_t> cuts;
  for (const auto& r : table.rows) cuts.push_back(r.cut);
  EXPECT_EQ(cuts, valid_cuts(spec));
  EXPECT_EQ(table.input_only.cut, 0u);
}

TEST(CostTable, BytesAndTotalsFollowTheModel) {
  const auto spec = lenet_spec();
  const auto profile = uniform_profile(spec, 0.5, 0.25, 2e5, 3.0);
  const auto table = build_cost_table(spec, profile);
  for (const auto& r : table.rows) {
    const Shape& shape = spec.layers[r.cut].input_shape;
    EXPECT_EQ(r.transmit_bytes, 4 * element_count(shape) + wire::kHeaderSize + 1 + 4 * shape.size());
    EXPECT_DOUBLE_EQ(r.transmit_ms, 1000.0 * r.transmit_bytes / 2e5);
    EXPECT_DOUBLE_EQ(r.edge_ms, 0.5 * r.cut);
    EXPECT_DOUBLE_EQ(r.cloud_ms, 0.25 * (spec.layers.size() - r.cut));
    EXPECT_DOUBLE_EQ(r.total_ms, r.edge_ms + r.transmit_ms + r.latency_ms + r.cloud_ms);
  }
}

TEST(CostTable, FreeCommunicationFavoursShallowestCut) {
  const auto spec = lenet_spec();
  const auto table = build_cost_table(spec, uniform_profile(spec, 1.0, 0.1, 1e15));
  EXPECT_EQ(choose_cut(table), valid_cuts(spec).front());
}

TEST(CostTable, ExpensiveCommunicationFavoursSmallestActivation) {
  const auto spec = lenet_spec();
  const auto table = build_cost_table(spec, uniform_profile(spec, 1.0, 1.0, 1e-3));
  const auto smallest = std::min_element(table.rows.begin(), table.rows.end(), [](const auto& a, const auto& b) {
    return a.transmit_bytes < b.transmit_bytes;
  });
  EXPECT_EQ(choose_cut(table), smallest->cut);
}

TEST(CostTable, IncompleteProfileThrows) {
  const auto spec = lenet_spec();
  auto profile = uniform_profile(spec, 1.0, 1.0, 1e6);
  profile.layers.erase("fc2");
  EXPECT_THROW(build_cost_table(spec, profile), ConfigError);
}

TEST(Profile, NonPositiveValuesAreRejected) {
  EXPECT_THROW(parse_profile("link: {bandwidth_bytes_per_s: 0, latency_ms: 1}\nlayers: {}\n"), FormatError);
  EXPECT_THROW(parse_profile("link: {bandwidth_bytes_per_s: 10, latency_ms: 1}\nlayers: {a: {edge_ms: -1, "
                             "cloud_ms: 1}}\n"),
               FormatError);
  EXPECT_THROW(parse_profile("layers: {}\n"), FormatError);
}

TEST(BundledProfiles, MobileProfileChoosesLastConvBlock) {
  const auto spec = lenet_spec();
  const auto table = build_cost_table(spec, load_profile(testing::data_dir() / "profiles" / "lenet_mobile.yaml"));
  EXPECT_EQ(choose_cut(table), 7u);
}

TEST(BundledProfiles, FastLinkNeverPicksTheInput) {
  const auto spec = lenet_spec();
  const auto table =
      build_cost_table(spec, load_profile(testing::data_dir() / "profiles" / "lenet_fast_link.yaml"));
  for (const auto& r : table.rows) EXPECT_LT(table.input_only.total_ms, r.total_ms) << r.cut;
  const auto cut = choose_cut(table);
  EXPECT_GT(cut, 0u);
  EXPECT_TRUE(split_violation(spec, cut).empty());
}

// Multiplying every time by c and dividing the bandwidth by c multiplies
// every total by c, so the argmin cannot move.
TEST(CostTable, ArgminInvariantUnderUniformScaling) {
  const auto spec = lenet_spec();
  CounterRng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    DeviceProfile p;
    for (const auto& layer : spec.layers) {
      p.layers[layer.name] = {0.01 + 5.0 * rng.uniform(), 0.01 + 0.5 * rng.uniform()};
    }
    p.bandwidth_bytes_per_s = 1e3 * std::pow(10.0, 4.0 * rng.uniform());
    p.latency_ms = 0.1 + 50.0 * rng.uniform();
    const double c = std::pow(10.0, 4.0 * rng.uniform() - 2.0);
    DeviceProfile scaled = p;
    for (auto& [name, t] : scaled.layers) t = {t.edge_ms * c, t.cloud_ms * c};
    scaled.bandwidth_bytes_per_s = p.bandwidth_bytes_per_s / c;
    scaled.latency_ms = p.latency_ms * c;
    EXPECT_EQ(choose_cut(build_cost_table(spec, p)), choose_cut(build_cost_table(spec, scaled))) << trial;
  }
}

TEST(CostTable, ChosenCutAlwaysSatisfiesSplitRules) {
  const auto spec = lenet_spec();
  CounterRng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto profile = uniform_profile(spec, 0.01 + rng.uniform(), 0.01 + rng.uniform(),
                                         std::pow(10.0, 8.0 * rng.uniform()));
    const auto cut = choose_cut(build_cost_table(spec, profile));
    EXPECT_TRUE(split_violation(spec, cut).empty()) << cut;
  }
}

}  // namespace
}  // namespace shredder
