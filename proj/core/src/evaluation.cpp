#include "shredder/evaluation.hpp"

#include <algorithm>
#include <vector>

#include "shredder/error.hpp"
#include "shredder/metrics.hpp"
#include "shredder/sampler.hpp"

namespace shredder {

MIReference parse_mi_reference(const std::string& text) {
  if (text == "activation") return MIReference::activation;
  if (text == "input") return MIReference::input;
  throw ConfigError("unknown MI reference '" + text + "' (expected activation or input)");
}

std::string to_string(MIReference reference) {
  return reference == MIReference::activation ? "activation" : "input";
}

PrivacyReport evaluate_privacy(const Split& split, const DistributionCollection& collection, const Dataset& test,
                               const EvaluationConfig& config) {
  if (test.size() == 0) throw ConfigError("evaluation data set is empty");
  if (config.mi_samples <= config.k) throw ConfigError("mi_samples must exceed k");
  if (!config.zero_noise) {
    if (collection.empty()) throw ConfigError("collection has no entries");
    if (collection.cut() != split.cut()) throw ConfigError("collection was learned for a different cut");
    if (collection.network_hash() != split.network().identity()) {
      throw ConfigError("collection was learned for a different network");
    }
  }

  const std::size_t mi_n = std::min(config.mi_samples, test.size());
  std::vector<Tensor> reference;
  std::vector<Tensor> clean;
  std::vector<Tensor> noisy;
  reference.reserve(mi_n);
  clean.reserve(mi_n);
  noisy.reserve(mi_n);

  CounterRng rng(config.seed, 0x5e11);
  std::size_t clean_hits = 0;
  std::size_t noisy_hits = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    Tensor a = run_edge(split, test.inputs[i]);
    Tensor sent = config.zero_noise ? a : add_noise(a, sample_noise(collection, rng));
    clean_hits += argmax(run_cloud(split, a)) == test.labels[i];
    noisy_hits += argmax(run_cloud(split, sent)) == test.labels[i];
    if (i < mi_n) {
      reference.push_back(config.reference == MIReference::input ? test.inputs[i] : a);
      clean.push_back(std::move(a));
      noisy.push_back(std::move(sent));
    }
  }

  PrivacyReport report;
  report.mi_samples = mi_n;
  report.accuracy_samples = test.size();
  report.clean_accuracy = static_cast<double>(clean_hits) / static_cast<double>(test.size());
  report.noisy_accuracy = static_cast<double>(noisy_hits) / static_cast<double>(test.size());
  const auto x = SampleMatrix::from_rows(reference);
  report.clean_mi_bits = estimate_mi(x, SampleMatrix::from_rows(clean), config.k).bits;
  report.noisy_mi_bits = estimate_mi(x, SampleMatrix::from_rows(noisy), config.k).bits;
  report.reduction = report.clean_mi_bits > 0.0 ? 1.0 - report.noisy_mi_bits / report.clean_mi_bits : 0.0;
  return report;
}

}  // namespace shredder
