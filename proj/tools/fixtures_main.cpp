// Builds the desk-scale fixture set: synthetic digit data in IDX form, a
// trained LeNet-shape classifier and a trained private-attribute head.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>

#include "shredder/dataset.hpp"
#include "shredder/noise_learner.hpp"
#include "shredder/trainer.hpp"

namespace fs = std::filesystem;
using namespace shredder;

namespace {

struct Options {
  fs::path out;
  fs::path source;
  std::size_t train_count = 10000;
  std::size_t test_count = 2000;
  std::size_t epochs = 3;
  std::size_t head_epochs = 6;
  std::size_t cut = 7;
  std::uint64_t seed = 1;
  bool force = false;
};

std::vector<fs::path> outputs(const fs::path& out) {
  std::vector<fs::path> files;
  for (const char* part : {"train", "test"}) {
    for (const char* kind : {"images.idx3", "labels.idx1", "private.idx1"}) {
      files.push_back(out / (std::string(part) + "-" + kind));
    }
  }
  for (const char* f : {"lenet.yaml", "lenet.shrw", "private_head.yaml", "private_head.shrw"}) files.push_back(out / f);
  return files;
}

void build(const Options& o) {
  fs::create_directories(o.out);
  SyntheticDigitsConfig gen;
  gen.count = o.train_count;
  gen.seed = o.seed;
  const Dataset train = generate_digits(gen);
  gen.count = o.test_count;
  gen.seed = o.seed + 1000;
  const Dataset test = generate_digits(gen);
  save_idx(train, o.out / "train-images.idx3", o.out / "train-labels.idx1", o.out / "train-private.idx1");
  save_idx(test, o.out / "test-images.idx3", o.out / "test-labels.idx1", o.out / "test-private.idx1");

  const auto spec = load_network_spec(o.source / "lenet.yaml");
  ClassifierTrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.learning_rate = 0.02;
  cfg.seed = o.seed;
  auto weights = train_classifier(spec, init_weights(spec, o.seed), train.inputs, train.labels, cfg,
                                  [](std::size_t e, double loss) {
                                    std::cout << "lenet epoch " << e << " loss " << loss << "\n";
                                  });
  save_network_spec(o.out / "lenet.yaml", spec);
  save_weights(o.out / "lenet.shrw", weights);
  const auto net = Network::build(spec, weights);
  std::cout << "lenet test accuracy " << accuracy(*net, test.inputs, test.labels) << "\n";

  const Split split(net, o.cut);
  const auto head_spec = load_network_spec(o.source / "private_head.yaml");
  const auto acts = edge_activations(split, train);
  ClassifierTrainConfig head_cfg;
  head_cfg.epochs = o.head_epochs;
  head_cfg.learning_rate = 0.01;
  head_cfg.seed = o.seed + 1;
  auto head_weights =
      train_classifier(head_spec, init_weights(head_spec, o.seed + 1), acts.activations, acts.private_labels, head_cfg);
  save_network_spec(o.out / "private_head.yaml", head_spec);
  save_weights(o.out / "private_head.shrw", head_weights);
  const auto head = Network::build(head_spec, head_weights);
  const auto test_acts = edge_activations(split, test);
  std::cout << "private head test accuracy " << accuracy(*head, test_acts.activations, test_acts.private_labels)
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate the fixture data set, classifier and private head"};
  Options o;
  app.add_option("--out", o.out, "Output directory")->required();
  app.add_option("--source", o.source, "Directory holding lenet.yaml and private_head.yaml")->required();
  app.add_option("--train-count", o.train_count, "Training images");
  app.add_option("--test-count", o.test_count, "Test images");
  app.add_option("--epochs", o.epochs, "Classifier training epochs");
  app.add_option("--head-epochs", o.head_epochs, "Private head training epochs");
  app.add_option("--cut", o.cut, "Cut whose activation feeds the private head");
  app.add_option("--seed", o.seed, "Generator and training seed");
  app.add_flag("--force", o.force, "Rebuild even when every output exists");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto files = outputs(o.out);
    const bool complete = std::all_of(files.begin(), files.end(), [](const fs::path& p) { return fs::exists(p); });
    if (complete && !o.force) {
      std::cout << "fixtures present in " << o.out << "\n";
      return 0;
    }
    build(o);
  } catch (const std::exception& e) {
    std::cerr << "shredder-fixtures: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
