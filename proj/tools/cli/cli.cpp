#include "cli.hpp"

#include <CLI11.hpp>
#include <pthread.h>

#include <algorithm>
#include <cmath>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

#include "csv.hpp"
#include "shredder/collector.hpp"
#include "shredder/dataset.hpp"
#include "shredder/evaluation.hpp"
#include "shredder/hash.hpp"
#include "shredder/network.hpp"
#include "shredder/noise_learner.hpp"
#include "shredder/planner.hpp"
#include "shredder/runtime.hpp"
#include "shredder/sampler.hpp"
#include "yaml_config.hpp"

namespace shredder::cli {

namespace fs = std::filesystem;

namespace {

struct Global {
  std::uint64_t seed = 1;
  fs::path out_dir = ".";
};

struct ModelOptions {
  fs::path spec;
  fs::path weights;
  std::optional<std::size_t> cut;
  fs::path profile;  // chooses the cut when --cut is absent
};

struct DataOptions {
  std::string prefix;
  std::size_t limit = 0;  // 0 keeps every sample
};

struct LinkOptions {
  double bandwidth = 0.0;  // bytes per second; 0 disables the simulator
  double latency_ms = 0.0;

  LinkSimulator simulator() const {
    LinkSimulator link;
    link.enabled = bandwidth > 0.0;
    link.bandwidth_bytes_per_s = bandwidth;
    link.latency_ms = latency_ms;
    return link;
  }
};

struct TrainOptions {
  TrainConfig config;
  std::string selection = "most-private";
  bool private_labels = false;
  fs::path head_spec;
  fs::path head_weights;
  const CLI::Option* gamma_option = nullptr;
};

struct EvalOptions {
  std::size_t samples = 1000;
  std::size_t k = 3;
  std::string reference = "activation";
};

fs::path require_file(const fs::path& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " is required");
  if (!fs::is_regular_file(path)) throw ConfigError(what + " not found: " + path.string());
  return path;
}

fs::path output_path(const Global& global, const std::string& name) {
  fs::create_directories(global.out_dir);
  return global.out_dir / name;
}

std::string join(const std::vector<std::size_t>& values) {
  std::string text;
  for (std::size_t v : values) text += (text.empty() ? "" : ", ") + std::to_string(v);
  return text;
}

std::size_t validated_cut(const NetworkSpec& spec, std::size_t cut) {
  const std::string violation = split_violation(spec, cut);
  if (!violation.empty()) {
    throw ConfigError("invalid cut " + std::to_string(cut) + ": " + violation + " (valid cuts: " +
                      join(valid_cuts(spec)) + ")");
  }
  return cut;
}

std::shared_ptr<const Network> load_network(const ModelOptions& model) {
  return Network::load(require_file(model.spec, "network spec (--spec)"),
                       require_file(model.weights, "weights file (--weights)"));
}

Split resolve_split(std::shared_ptr<const Network> network, const ModelOptions& model) {
  if (model.cut) return Split(network, validated_cut(network->spec(), *model.cut));
  if (!model.profile.empty()) {
    return choose_split(network, load_profile(require_file(model.profile, "device profile")));
  }
  throw ConfigError("either --cut or --profile is required to choose the split point");
}

Dataset load_dataset(const DataOptions& data, const std::string& flag) {
  if (data.prefix.empty()) throw ConfigError(flag + " is required");
  const fs::path images = data.prefix + "-images.idx3";
  const fs::path labels = data.prefix + "-labels.idx1";
  const fs::path private_labels = data.prefix + "-private.idx1";
  require_file(images, flag + " images");
  require_file(labels, flag + " labels");
  Dataset set = load_idx(images, labels,
                         fs::exists(private_labels) ? std::optional<fs::path>(private_labels) : std::nullopt);
  if (data.limit > 0 && data.limit < set.size()) set = set.head(data.limit);
  return set;
}

DistributionCollection load_matching_collection(const fs::path& path, const Network& network) {
  const auto collection = load_collection(require_file(path, "collection file (--collection)"));
  if (collection.network_hash() != network.identity()) {
    throw ConfigError("collection " + path.string() + " was learned for a different network");
  }
  validated_cut(network.spec(), collection.cut());
  return collection;
}

void add_model_options(CLI::App& app, ModelOptions& model, bool with_cut) {
  app.add_option("--spec", model.spec, "Network topology (YAML)");
  app.add_option("--weights", model.weights, "Pretrained weights file");
  if (with_cut) {
    app.add_option("--cut", model.cut, "Number of edge layers; overrides the planner");
    app.add_option("--profile", model.profile, "Device profile used to choose the cut");
  }
}

void add_data_option(CLI::App& app, DataOptions& data, const std::string& name, const std::string& what) {
  app.add_option("--" + name, data.prefix,
                 what + " prefix; reads PREFIX-images.idx3, PREFIX-labels.idx1 and optional PREFIX-private.idx1");
  app.add_option("--" + name.substr(0, name.find('-')) + "-samples", data.limit,
                 "Use only the first N samples (0 = all)");
}

void add_link_options(CLI::App& app, LinkOptions& link) {
  app.add_option("--bandwidth", link.bandwidth, "Simulated link bandwidth in bytes/s (0 = off)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--latency-ms", link.latency_ms, "Simulated per-message latency")->check(CLI::NonNegativeNumber);
}

void add_train_options(CLI::App& app, TrainOptions& train) {
  TrainConfig& c = train.config;
  app.add_option("--alpha", c.alpha, "Initial privacy coefficient");
  app.add_option("--alpha-decay", c.alpha_decay, "Multiplier applied to alpha every period");
  app.add_option("--alpha-period", c.alpha_period, "Iterations between alpha decays");
  train.gamma_option = app.add_option("--gamma", c.gamma, "Private-label coefficient");
  app.add_option("--lr", c.learning_rate, "Adam step size");
  app.add_option("--batch-size", c.batch_size, "Minibatch size");
  app.add_option("--init-scale", c.init_scale, "Laplace scale of the initial noise");
  app.add_option("--epsilon", c.accuracy_budget, "Accuracy budget: max hold-out accuracy drop");
  app.add_option("--holdout-fraction", c.holdout_fraction, "Share of the training data held out for gating");
  app.add_option("--entries", c.target_collection_size, "Distributions to collect");
  app.add_option("--eval-interval", c.eval_interval, "Iterations between hold-out evaluations");
  app.add_option("--max-round-iterations", c.max_round_iterations, "Iteration cap of one round");
  app.add_option("--max-total-iterations", c.max_total_iterations, "Iteration cap over all rounds");
  app.add_option("--sse-threshold", c.collector.sse_threshold, "Max histogram SSE of an accepted Laplace fit");
  app.add_option("--bins", c.collector.bins, "Histogram bins of the fit check");
  app.add_option("--jobs", c.jobs, "Concurrent learning rounds");
  app.add_option("--resample-training", c.resample_training, "Take gradients at resampled noise (true/false)");
  app.add_option("--sampled-gate", c.sampled_gate, "Gate on resampled noise (true/false)");
  app.add_option("--gate-on-lower-bound", c.gate_on_lower_bound, "Gate on the Wilson lower bound (true/false)");
  app.add_option("--selection", train.selection, "Round candidate: first or most-private")
      ->check(CLI::IsMember({"first", "most-private"}));
  app.add_flag("--private-labels", train.private_labels, "Also degrade the private task with a private head");
  app.add_option("--private-head-spec", train.head_spec, "Private head topology (YAML)");
  app.add_option("--private-head-weights", train.head_weights, "Private head weights");
}

TrainConfig finalize_train_config(TrainOptions& train, const Global& global) {
  TrainConfig config = train.config;
  config.seed = global.seed;
  config.selection = train.selection == "first" ? CandidateSelection::first : CandidateSelection::most_private;
  if (train.private_labels && train.gamma_option->count() == 0) config.gamma = 0.01;
  if (!train.private_labels) config.gamma = 0.0;
  config.validate();
  return config;
}

std::shared_ptr<const Network> load_private_head(const TrainOptions& train, const Split& split,
                                                 const Dataset& data) {
  if (!train.private_labels) return nullptr;
  if (!data.has_private_labels()) throw ConfigError("--private-labels needs a data set with private labels");
  auto head = Network::load(require_file(train.head_spec, "private head spec (--private-head-spec)"),
                            require_file(train.head_weights, "private head weights (--private-head-weights)"));
  if (head->spec().input_shape != split.activation_shape()) {
    throw ConfigError("private head input " + to_string(head->spec().input_shape) + " does not match activation " +
                      to_string(split.activation_shape()));
  }
  return head;
}

// Runs the learner and checks that no network parameter changed.
TrainResult train_checked(const Split& split, const Dataset& data, const TrainConfig& config, const Network* head,
                          const fs::path& weights_file, std::ostream& err) {
  const Digest file_before = sha256_file(weights_file);
  const Digest memory_before = weights_digest(split.network().weights());
  auto result = train_noise(split, data, config, head, [&](const RoundOutcome& round) {
    err << "round " << round.round << ": " << (round.entry ? "accepted" : "no candidate") << " after "
        << round.iterations << " iterations\n";
  });
  if (sha256_file(weights_file) != file_before || weights_digest(split.network().weights()) != memory_before) {
    throw Error("network weights changed during noise training");
  }
  return result;
}

void write_collection_csv(const fs::path& path, const DistributionCollection& collection) {
  CsvWriter csv(path, {"entry", "location", "scale", "accuracy", "sse"});
  for (std::size_t i = 0; i < collection.size(); ++i) {
    const auto& e = collection.entries()[i];
    csv.row({format_number(i), format_number(e.params.location), format_number(e.params.scale),
             format_number(e.accuracy), format_number(e.sse)});
  }
}

void write_metrics_csv(const fs::path& path, const std::vector<LogRecord>& log) {
  CsvWriter csv(path, {"round", "iteration", "global_iteration", "alpha", "loss", "inverse_snr", "holdout_accuracy",
                       "surrogate", "event"});
  for (const auto& r : log) {
    csv.row({format_number(r.round), format_number(r.iteration), format_number(r.global_iteration),
             format_number(r.alpha), format_number(r.loss), format_number(r.inverse_snr),
             std::isnan(r.holdout_accuracy) ? "" : format_number(r.holdout_accuracy), format_number(r.surrogate),
             r.event});
  }
}

std::string percent(double fraction) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << 100.0 * fraction << "%";
  return s.str();
}

// partition

struct PartitionCommand {
  ModelOptions model;
  std::optional<std::size_t> cut;

  void attach(CLI::App& app) {
    app.add_option("--spec", model.spec, "Network topology (YAML)");
    app.add_option("--profile", model.profile, "Device profile (YAML)");
    app.add_option("--cut", cut, "Use this cut instead of the planner's choice");
  }

  void run(const Global& global, std::ostream& out, std::ostream&) const {
    const auto spec = load_network_spec(require_file(model.spec, "network spec (--spec)"));
    const auto profile = load_profile(require_file(model.profile, "device profile (--profile)"));
    const auto table = build_cost_table(spec, profile);
    const std::size_t chosen = cut ? validated_cut(spec, *cut) : choose_cut(table);

    CsvWriter csv(output_path(global, "partition.csv"),
                  {"cut", "last_edge_layer", "edge_ms", "transmit_bytes", "transmit_ms", "latency_ms", "cloud_ms",
                   "total_ms", "chosen"});
    auto emit = [&](const CutCost& c, const std::string& layer, bool is_chosen) {
      csv.row({format_number(c.cut), layer, format_number(c.edge_ms), format_number(c.transmit_bytes),
               format_number(c.transmit_ms), format_number(c.latency_ms), format_number(c.cloud_ms),
               format_number(c.total_ms), is_chosen ? "1" : "0"});
      out << "cut " << c.cut << " (" << layer << "): edge " << c.edge_ms << " ms, transmit " << c.transmit_bytes
          << " B in " << c.transmit_ms + c.latency_ms << " ms, cloud " << c.cloud_ms << " ms, total " << c.total_ms
          << " ms" << (is_chosen ? "  <- chosen" : "") << "\n";
    };
    emit(table.input_only, "input", false);
    for (const auto& row : table.rows) emit(row, spec.layers[row.cut - 1].name, row.cut == chosen);
    out << "chosen cut: " << chosen << (cut ? " (override)" : "") << "\n";
  }
};

// train-noise

struct TrainNoiseCommand {
  ModelOptions model;
  DataOptions data;
  TrainOptions train;

  void attach(CLI::App& app) {
    add_model_options(app, model, true);
    add_data_option(app, data, "train-data", "Training data");
    add_train_options(app, train);
  }

  void run(const Global& global, std::ostream& out, std::ostream& err) {
    auto network = load_network(model);
    const Split split = resolve_split(network, model);
    const Dataset set = load_dataset(data, "--train-data");
    const TrainConfig config = finalize_train_config(train, global);
    const auto head = load_private_head(train, split, set);

    const auto result = train_checked(split, set, config, head.get(), model.weights, err);
    save_collection(output_path(global, "collection.shrc"), result.collection);
    write_collection_csv(output_path(global, "collection.csv"), result.collection);
    write_metrics_csv(output_path(global, "train_metrics.csv"), result.log);

    out << "cut " << split.cut() << ", activation " << to_string(split.activation_shape()) << "\n"
        << "collected " << result.collection.size() << " distributions in " << result.rounds << " rounds, "
        << result.total_iterations << " iterations (" << result.epochs << " epochs)\n"
        << "clean hold-out accuracy " << result.clean_accuracy << "\n"
        << "weights sha256 " << to_hex(sha256_file(model.weights)) << " (unchanged)\n";
  }
};

// infer

struct InferCommand {
  ModelOptions model;
  DataOptions data;
  fs::path collection_path;
  bool zero_noise = false;

  void attach(CLI::App& app) {
    add_model_options(app, model, true);
    add_data_option(app, data, "test-data", "Evaluation data");
    app.add_option("--collection", collection_path, "Learned distribution collection");
    app.add_flag("--zero-noise", zero_noise, "Send clean activations");
  }

  void run(const Global& global, std::ostream& out, std::ostream&) const {
    auto network = load_network(model);
    DistributionCollection collection;
    std::optional<Split> split;
    if (zero_noise) {
      split.emplace(resolve_split(network, model));
    } else {
      collection = load_matching_collection(collection_path, *network);
      split.emplace(network, collection.cut());
    }
    const Dataset set = load_dataset(data, "--test-data");

    CsvWriter csv(output_path(global, "predictions.csv"),
                  {"index", "label", "clean_prediction", "noisy_prediction", "entry"});
    CounterRng rng(global.seed, 0x1f3e);
    std::size_t clean_hits = 0;
    std::size_t noisy_hits = 0;
    for (std::size_t i = 0; i < set.size(); ++i) {
      const Tensor a = run_edge(*split, set.inputs[i]);
      const std::size_t clean = argmax(run_cloud(*split, a));
      std::size_t noisy = clean;
      std::string entry;
      if (!zero_noise) {
        const auto noise = sample_noise(collection, rng);
        noisy = argmax(run_cloud(*split, add_noise(a, noise)));
        entry = format_number(noise.entry_index);
      }
      clean_hits += clean == set.labels[i];
      noisy_hits += noisy == set.labels[i];
      csv.row({format_number(i), format_number(std::size_t{set.labels[i]}), format_number(clean),
               format_number(noisy), entry});
    }
    const double n = static_cast<double>(set.size());
    out << "samples " << set.size() << ", clean accuracy " << clean_hits / n << ", noisy accuracy "
        << noisy_hits / n << "\n";
  }
};

// serve

struct ServeCommand {
  ModelOptions model;
  LinkOptions link;
  std::string bind = "127.0.0.1";
  std::uint16_t port = 0;
  fs::path port_file;
  std::size_t max_payload = wire::kMaxPayload;

  void attach(CLI::App& app) {
    add_model_options(app, model, true);
    add_link_options(app, link);
    app.add_option("--bind", bind, "Address to listen on");
    app.add_option("--port", port, "TCP port (0 = ephemeral)");
    app.add_option("--port-file", port_file, "Write the bound port here once listening");
    app.add_option("--max-payload", max_payload, "Largest accepted frame payload in bytes");
  }

  void run(const Global&, std::ostream& out, std::ostream&) const {
    auto network = load_network(model);
    const Split split = resolve_split(network, model);
    ServerOptions options;
    options.bind_address = bind;
    options.port = port;
    options.max_payload = max_payload;
    options.link = link.simulator();

    // Block the stop signals before any server thread exists so that only
    // sigwait below receives them.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    CloudServer server(split, options);
    server.start();
    if (!port_file.empty()) {
      const fs::path tmp = port_file.string() + ".tmp";
      std::ofstream(tmp) << server.port() << "\n";
      fs::rename(tmp, port_file);
    }
    out << "serving cut " << split.cut() << " on " << bind << ":" << server.port() << std::endl;
    int received = 0;
    sigwait(&signals, &received);
    server.stop();
    out << "stopped" << std::endl;
  }
};

// remote-infer

struct RemoteInferCommand {
  ModelOptions model;
  DataOptions data;
  LinkOptions link;
  fs::path collection_path;
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  bool zero_noise = false;
  std::size_t timeout_ms = 30000;
  fs::path timing_csv;

  void attach(CLI::App& app) {
    add_model_options(app, model, true);
    add_data_option(app, data, "test-data", "Evaluation data");
    add_link_options(app, link);
    app.add_option("--collection", collection_path, "Learned distribution collection");
    app.add_option("--host", host, "Server address");
    app.add_option("--port", port, "Server port")->required();
    app.add_flag("--zero-noise", zero_noise, "Send clean activations (debug)");
    app.add_option("--timeout-ms", timeout_ms, "Socket timeout");
    app.add_option("--timing-csv", timing_csv, "Write per-request timings here");
  }

  void run(const Global& global, std::ostream& out, std::ostream&) const {
    auto network = load_network(model);
    DistributionCollection collection;
    std::optional<Split> split;
    if (zero_noise) {
      split.emplace(resolve_split(network, model));
    } else {
      collection = load_matching_collection(collection_path, *network);
      split.emplace(network, collection.cut());
    }
    const Dataset set = load_dataset(data, "--test-data");
    RemoteOptions options;
    options.zero_noise = zero_noise;
    options.link = link.simulator();

    EdgeClient client(host, port, std::chrono::milliseconds(timeout_ms));
    CounterRng rng(global.seed, 0x1f3e);
    CsvWriter csv(output_path(global, "remote_predictions.csv"),
                  {"index", "label", "remote_prediction", "local_clean_prediction", "entry", "frame_bytes"});
    std::optional<CsvWriter> timing;
    if (!timing_csv.empty()) {
      timing.emplace(timing_csv, std::vector<std::string>{"index", "edge_ms", "sample_add_ms", "transmit_ms",
                                                         "round_trip_ms"});
    }
    std::size_t hits = 0;
    std::size_t agree = 0;
    InferenceTiming total;
    for (std::size_t i = 0; i < set.size(); ++i) {
      const auto r = infer_remote(*split, collection, set.inputs[i], client, rng, options);
      const std::size_t local = argmax(split->network().forward(set.inputs[i]));
      hits += r.label == set.labels[i];
      agree += r.label == local;
      csv.row({format_number(i), format_number(std::size_t{set.labels[i]}), format_number(std::size_t{r.label}),
               format_number(local), r.entry_index ? format_number(*r.entry_index) : "",
               format_number(r.request_frame.size())});
      if (timing) {
        timing->row({format_number(i), format_number(r.timing.edge_ms), format_number(r.timing.sample_add_ms),
                      format_number(r.timing.transmit_ms), format_number(r.timing.round_trip_ms)});
      }
      total.edge_ms += r.timing.edge_ms;
      total.sample_add_ms += r.timing.sample_add_ms;
      total.transmit_ms += r.timing.transmit_ms;
      total.round_trip_ms += r.timing.round_trip_ms;
    }
    const double n = static_cast<double>(std::max<std::size_t>(set.size(), 1));
    out << "samples " << set.size() << ", accuracy " << hits / n << ", agreement with local clean inference "
        << agree / n << "\n"
        << "mean ms: edge " << total.edge_ms / n << ", sample+add " << total.sample_add_ms / n << ", transmit "
        << total.transmit_ms / n << ", round trip " << total.round_trip_ms / n << "\n";
  }
};

// eval-mi

void write_report(CsvWriter& csv, const std::string& label, std::size_t cut, const PrivacyReport& r,
                  const std::string& reference) {
  csv.row({label, format_number(cut), format_number(r.clean_mi_bits), format_number(r.noisy_mi_bits),
           format_number(100.0 * r.reduction), format_number(r.clean_accuracy), format_number(r.noisy_accuracy),
           format_number(r.accuracy_loss()), format_number(r.mi_samples), reference});
}

const std::vector<std::string> kReportHeader = {"epsilon",        "cut",            "clean_mi_bits",
                                                "noisy_mi_bits",  "reduction_pct",  "clean_accuracy",
                                                "noisy_accuracy", "accuracy_loss",  "mi_samples",
                                                "reference"};

struct EvalMiCommand {
  ModelOptions model;
  DataOptions train_data;
  DataOptions test_data;
  TrainOptions train;
  EvalOptions eval;
  fs::path collection_path;
  std::vector<double> epsilons;
  bool zero_noise = false;

  void attach(CLI::App& app) {
    add_model_options(app, model, true);
    add_data_option(app, train_data, "train-data", "Training data for --epsilons");
    add_data_option(app, test_data, "test-data", "Evaluation data");
    add_train_options(app, train);
    app.add_option("--collection", collection_path, "Evaluate this collection");
    app.add_option("--epsilons", epsilons, "Train and evaluate one collection per accuracy budget");
    app.add_flag("--zero-noise", zero_noise, "Evaluate clean transmission");
    app.add_option("--samples", eval.samples, "Examples fed to the MI estimator");
    app.add_option("--k", eval.k, "Neighbours used by the MI estimator");
    app.add_option("--mi-reference", eval.reference, "Stand-in for x: activation or input")
        ->check(CLI::IsMember({"activation", "input"}));
  }

  EvaluationConfig evaluation_config(const Global& global) const {
    EvaluationConfig config;
    config.mi_samples = eval.samples;
    config.k = eval.k;
    config.reference = parse_mi_reference(eval.reference);
    config.seed = global.seed;
    config.zero_noise = zero_noise;
    return config;
  }

  void run(const Global& global, std::ostream& out, std::ostream& err) {
    const int modes = !collection_path.empty() + !epsilons.empty() + zero_noise;
    if (modes != 1) throw ConfigError("choose exactly one of --collection, --epsilons or --zero-noise");
    auto network = load_network(model);
    const Dataset test = load_dataset(test_data, "--test-data");
    const EvaluationConfig eval_config = evaluation_config(global);
    CsvWriter csv(output_path(global, "mi.csv"), kReportHeader);
    auto report_line = [&](const std::string& label, const PrivacyReport& r) {
      out << label << ": I(x;a) " << r.clean_mi_bits << " bits, I(x;a') " << r.noisy_mi_bits << " bits, reduction "
          << percent(r.reduction) << ", accuracy " << r.clean_accuracy << " -> " << r.noisy_accuracy << "\n";
    };

    if (!collection_path.empty() || zero_noise) {
      DistributionCollection collection;
      std::optional<Split> split;
      if (zero_noise) {
        split.emplace(resolve_split(network, model));
      } else {
        collection = load_matching_collection(collection_path, *network);
        split.emplace(network, collection.cut());
      }
      const auto report = evaluate_privacy(*split, collection, test, eval_config);
      const std::string label = zero_noise ? "0" : "";
      write_report(csv, label, split->cut(), report, eval.reference);
      report_line(zero_noise ? "zero noise" : collection_path.string(), report);
      return;
    }

    if (std::any_of(epsilons.begin(), epsilons.end(), [](double e) { return !(e > 0.0 && e < 1.0); })) {
      throw ConfigError("every --epsilons value must lie in (0, 1)");
    }
    const Split split = resolve_split(network, model);
    const Dataset set = load_dataset(train_data, "--train-data");
    const auto head = load_private_head(train, split, set);
    for (double epsilon : epsilons) {
      TrainConfig config = finalize_train_config(train, global);
      config.accuracy_budget = epsilon;
      err << "epsilon " << epsilon << "\n";
      const auto result = train_checked(split, set, config, head.get(), model.weights, err);
      save_collection(output_path(global, "collection_eps" + format_number(epsilon) + ".shrc"), result.collection);
      const auto report = evaluate_privacy(split, result.collection, test, eval_config);
      write_report(csv, format_number(epsilon), split.cut(), report, eval.reference);
      report_line("epsilon " + format_number(epsilon), report);
    }
  }
};

// sweep-cuts

struct SweepCutsCommand {
  ModelOptions model;
  DataOptions train_data;
  DataOptions test_data;
  TrainOptions train;
  EvalOptions eval;
  std::vector<std::size_t> cuts;

  void attach(CLI::App& app) {
    app.add_option("--spec", model.spec, "Network topology (YAML)");
    app.add_option("--weights", model.weights, "Pretrained weights file");
    app.add_option("--profile", model.profile, "Device profile supplying edge times");
    app.add_option("--cuts", cuts, "Cuts to evaluate (default: every valid cut)");
    add_data_option(app, train_data, "train-data", "Training data");
    add_data_option(app, test_data, "test-data", "Evaluation data");
    add_train_options(app, train);
    app.add_option("--samples", eval.samples, "Examples fed to the MI estimator");
    app.add_option("--k", eval.k, "Neighbours used by the MI estimator");
    app.add_option("--mi-reference", eval.reference, "Stand-in for x: activation or input")
        ->check(CLI::IsMember({"activation", "input"}));
  }

  void run(const Global& global, std::ostream& out, std::ostream& err) {
    auto network = load_network(model);
    const auto& spec = network->spec();
    std::vector<std::size_t> selected = cuts.empty() ? valid_cuts(spec) : cuts;
    for (std::size_t cut : selected) validated_cut(spec, cut);
    if (selected.empty()) throw ConfigError("network has no valid cut");

    std::optional<CostTable> table;
    if (!model.profile.empty()) table = build_cost_table(spec, load_profile(require_file(model.profile, "device profile")));
    const Dataset set = load_dataset(train_data, "--train-data");
    const Dataset test = load_dataset(test_data, "--test-data");
    const TrainConfig config = finalize_train_config(train, global);
    EvaluationConfig eval_config;
    eval_config.mi_samples = eval.samples;
    eval_config.k = eval.k;
    eval_config.reference = parse_mi_reference(eval.reference);
    eval_config.seed = global.seed;

    CsvWriter csv(output_path(global, "sweep_cuts.csv"),
                  {"cut", "last_edge_layer", "activation_elements", "edge_ms", "epsilon", "clean_mi_bits",
                   "noisy_mi_bits", "reduction_pct", "accuracy_loss", "entries"});
    for (std::size_t cut : selected) {
      const Split split(network, cut);
      const auto head = load_private_head(train, split, set);
      err << "cut " << cut << "\n";
      const auto result = train_checked(split, set, config, head.get(), model.weights, err);
      const auto report = evaluate_privacy(split, result.collection, test, eval_config);
      std::string edge_ms;
      if (table) {
        for (const auto& row : table->rows) {
          if (row.cut == cut) edge_ms = format_number(row.edge_ms);
        }
      }
      csv.row({format_number(cut), spec.layers[cut - 1].name, format_number(element_count(split.activation_shape())),
               edge_ms, format_number(config.accuracy_budget), format_number(report.clean_mi_bits),
               format_number(report.noisy_mi_bits), format_number(100.0 * report.reduction),
               format_number(report.accuracy_loss()), format_number(result.collection.size())});
      out << "cut " << cut << ": reduction " << percent(report.reduction) << ", accuracy loss "
          << percent(report.accuracy_loss()) << "\n";
    }
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Split inference with learned additive noise"};
  app.name("shredder");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.fallthrough();
  app.config_formatter(std::make_shared<YamlConfig>(&app));
  app.set_config("--config", "", "YAML file of option values; command-line flags take precedence");

  Global global;
  app.add_option("--seed", global.seed, "Seed for every random choice");
  app.add_option("--out-dir", global.out_dir, "Directory receiving output files");

  PartitionCommand partition;
  TrainNoiseCommand train_noise_cmd;
  InferCommand infer;
  ServeCommand serve;
  RemoteInferCommand remote_infer;
  EvalMiCommand eval_mi;
  SweepCutsCommand sweep_cuts;

  partition.attach(*app.add_subcommand("partition", "Tabulate per-cut costs and choose the split point"));
  train_noise_cmd.attach(*app.add_subcommand("train-noise", "Learn a collection of noise distributions"));
  infer.attach(*app.add_subcommand("infer", "Local split inference with sampled noise"));
  serve.attach(*app.add_subcommand("serve", "Run the cloud partition as a TCP server"));
  remote_infer.attach(*app.add_subcommand("remote-infer", "Edge client against a running server"));
  eval_mi.attach(*app.add_subcommand("eval-mi", "Mutual information and accuracy of noisy transmission"));
  sweep_cuts.attach(*app.add_subcommand("sweep-cuts", "Privacy and edge cost for each cut point"));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "partition") partition.run(global, out, err);
    else if (name == "train-noise") train_noise_cmd.run(global, out, err);
    else if (name == "infer") infer.run(global, out, err);
    else if (name == "serve") serve.run(global, out, err);
    else if (name == "remote-infer") remote_infer.run(global, out, err);
    else if (name == "eval-mi") eval_mi.run(global, out, err);
    else sweep_cuts.run(global, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kSuccess;
}

}  // namespace shredder::cli
