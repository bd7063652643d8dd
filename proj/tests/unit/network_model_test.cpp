#include <gtest/gtest.h>

#include <cmath>

#include "shredder/error.hpp"
#include "shredder/network.hpp"
#include "shredder/trainer.hpp"
#include "test_support.hpp"

namespace shredder {
namespace {

using testing::random_tensor;

NetworkSpec lenet_spec() { return load_network_spec(testing::data_dir() / "lenet.yaml"); }

std::shared_ptr<const Network> lenet(std::uint64_t seed = 1) {
  const auto spec = lenet_spec();
  return Network::build(spec, init_weights(spec, seed));
}

TEST(NetworkSpec, LenetHasFiveComputationalLayers) {
  EXPECT_EQ(lenet()->computational_layer_count(), 5u);
  EXPECT_EQ(lenet_spec().classes, 10u);
}

TEST(NetworkSpec, ShapesCompose) {
  const auto spec = lenet_spec();
  Shape current = spec.input_shape;
  for (const auto& layer : spec.layers) {
    EXPECT_EQ(layer.input_shape, current) << layer.name;
    current = layer.output_shape;
  }
  EXPECT_EQ(current, Shape{10});
}

TEST(NetworkSpec, YamlRoundTrip) {
  const auto spec = lenet_spec();
  const auto again = parse_network_spec(to_yaml(spec));
  ASSERT_EQ(again.layers.size(), spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    EXPECT_EQ(again.layers[i].name, spec.layers[i].name);
    EXPECT_EQ(again.layers[i].kind, spec.layers[i].kind);
    EXPECT_EQ(again.layers[i].output_shape, spec.layers[i].output_shape);
  }
  EXPECT_EQ(again.input_shape, spec.input_shape);
}

TEST(NetworkSpec, RejectsWrongLogitCount) {
  EXPECT_THROW(parse_network_spec(R"(
name: bad
input: [4]
classes: 3
layers:
  - {name: fc1, kind: fc, out_features: 5}
)"),
               ShapeError);
}

TEST(NetworkSpec, RejectsUnknownKind) {
  EXPECT_THROW(parse_network_spec(R"(
name: bad
input: [4]
classes: 2
layers:
  - {name: s, kind: softmax}
)"),
               FormatError);
}

TEST(Weights, EncodeDecodeIsBitExact) {
  const auto net = lenet(3);
  const auto bytes = encode_weights(net->weights());
  const auto decoded = decode_weights(bytes);
  EXPECT_EQ(encode_weights(decoded), bytes);
  EXPECT_EQ(weights_digest(decoded), weights_digest(net->weights()));
}

TEST(Weights, FileRoundTrip) {
  testing::TempDir dir;
  const auto net = lenet(4);
  save_weights(dir / "w.shrw", net->weights());
  const auto loaded = load_weights(dir / "w.shrw");
  EXPECT_EQ(encode_weights(loaded), encode_weights(net->weights()));
}

TEST(Weights, HeaderLayout) {
  Weights w;
  w.insert("x", Tensor({2}, {1.f, 2.f}));
  const auto bytes = encode_weights(w);
  // magic, version, count u32, name length u16, name, rank u8, extent u32, 2 floats
  ASSERT_EQ(bytes.size(), 4u + 1 + 4 + 2 + 1 + 1 + 4 + 8);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "SHRW");
  EXPECT_EQ(bytes[4], 0x01);
  EXPECT_EQ(bytes[5], 1);
}

TEST(Weights, EveryTruncationIsRejected) {
  const auto net = lenet(5);
  const auto bytes = encode_weights(net->weights());
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{5}, std::size_t{12}, bytes.size() / 2,
                          bytes.size() - 1}) {
    EXPECT_THROW(decode_weights(std::span(bytes).first(cut)), FormatError) << "length " << cut;
  }
}

TEST(Weights, BadMagicAndVersionAreRejected) {
  auto bytes = encode_weights(lenet(6)->weights());
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_weights(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[4] = 0x02;
  EXPECT_THROW(decode_weights(bad_version), FormatError);
}

TEST(Network, MissingTensorIsNamed) {
  const auto spec = lenet_spec();
  const auto full = init_weights(spec, 1);
  Weights partial;
  for (const auto& [name, tensor] : full.entries()) {
    if (name != "fc2.weight") partial.insert(name, *tensor);
  }
  try {
    Network::build(spec, partial);
    FAIL() << "expected an error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("fc2.weight"), std::string::npos) << e.what();
  }
}

TEST(Network, WrongTensorShapeIsRejected) {
  const auto spec = lenet_spec();
  const auto full = init_weights(spec, 1);
  Weights broken;
  for (const auto& [name, tensor] : full.entries()) {
    broken.insert(name, name == "conv1.bias" ? Tensor(Shape{5}) : *tensor);
  }
  EXPECT_THROW(Network::build(spec, broken), ShapeError);
}

TEST(Network, IdentityDependsOnWeights) {
  EXPECT_NE(lenet(1)->identity(), lenet(2)->identity());
  EXPECT_EQ(lenet(1)->identity(), lenet(1)->identity());
}

TEST(Split, LenetValidCuts) {
  EXPECT_EQ(valid_cuts(lenet_spec()), (std::vector<std::size_t>{3, 7, 9, 11}));
}

TEST(Split, CutAfterLastConvBlockLeavesFcStack) {
  const Split split(lenet(), 7);
  EXPECT_EQ(split.cloud_layers().front().spec.name, "fc1");
  for (const auto& layer : split.cloud_layers()) {
    EXPECT_TRUE(layer.spec.kind == LayerKind::fc || layer.spec.kind == LayerKind::relu) << layer.spec.name;
  }
  EXPECT_EQ(split.activation_shape(), Shape{256});
}

TEST(Split, InputCutIsRejected) {
  EXPECT_FALSE(split_violation(lenet_spec(), 0).empty());
  EXPECT_THROW(Split(lenet(), 0), ConfigError);
}

TEST(Split, CloudMustStartWithComputationalLayer) {
  for (std::size_t cut : {1u, 2u, 4u, 5u, 6u, 8u, 10u, 12u}) {
    EXPECT_THROW(Split(lenet(), cut), ConfigError) << cut;
  }
}

TEST(Split, EdgeThenCloudEqualsFullForwardBitwise) {
  const auto net = lenet(7);
  CounterRng rng(1);
  for (std::size_t cut : valid_cuts(net->spec())) {
    const Split split(net, cut);
    for (int i = 0; i < 5; ++i) {
      const Tensor x = random_tensor(net->spec().input_shape, rng, 0.5);
      EXPECT_EQ(run_cloud(split, run_edge(split, x)), net->forward(x)) << "cut " << cut;
    }
  }
}

TEST(Split, WrongActivationShapeIsRejected) {
  const Split split(lenet(), 7);
  EXPECT_THROW(run_cloud(split, Tensor(Shape{255})), ShapeError);
  EXPECT_THROW(run_edge(split, Tensor(Shape{1, 27, 28})), ShapeError);
}

TEST(Split, LargeNoiseStillGivesFiniteLogits) {
  const auto net = lenet(8);
  const Split split(net, 7);
  CounterRng rng(2);
  const Tensor a = run_edge(split, random_tensor(net->spec().input_shape, rng, 0.5));
  const double scale = std::sqrt(mean_square(a));
  const Tensor noisy = add(a, random_tensor(a.shape(), rng, 10.0 * scale));
  EXPECT_TRUE(run_cloud(split, noisy).all_finite());
}

}  // namespace
}  // namespace shredder
