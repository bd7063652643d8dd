#include "yaml_config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>

namespace shredder::cli {

namespace {

std::string option_key(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

bool has_option(const CLI::App& app, const std::string& name) {
  return app.get_option_no_throw("--" + name) != nullptr;
}

std::vector<std::string> scalar_inputs(const YAML::Node& node, const std::string& key) {
  std::vector<std::string> inputs;
  if (node.IsScalar()) {
    inputs.push_back(node.as<std::string>());
  } else if (node.IsSequence()) {
    for (const auto& value : node) {
      if (!value.IsScalar()) throw CLI::ConfigError("config key '" + key + "' must hold scalars");
      inputs.push_back(value.as<std::string>());
    }
  } else if (!node.IsNull()) {
    throw CLI::ConfigError("config key '" + key + "' must be a scalar or a list");
  }
  return inputs;
}

}  // namespace

std::vector<CLI::ConfigItem> YamlConfig::from_config(std::istream& input) const {
  YAML::Node root;
  try {
    root = YAML::Load(input);
  } catch (const YAML::Exception& e) {
    throw CLI::ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  std::vector<CLI::ConfigItem> items;
  if (root.IsNull()) return items;
  if (!root.IsMap()) throw CLI::ConfigError("config root must be a mapping");

  for (const auto& entry : root) {
    const std::string key = option_key(entry.first.as<std::string>());
    const YAML::Node& value = entry.second;
    if (value.IsMap()) {
      for (const auto& inner : value) {
        const std::string name = option_key(inner.first.as<std::string>());
        items.push_back({{key}, name, scalar_inputs(inner.second, key + "." + name)});
      }
      continue;
    }
    auto inputs = scalar_inputs(value, key);
    if (app_ == nullptr || has_option(*app_, key)) {
      items.push_back({{}, key, inputs});
      continue;
    }
    bool used = false;
    for (const CLI::App* sub : app_->get_subcommands({})) {
      if (has_option(*sub, key)) {
        items.push_back({{sub->get_name()}, key, inputs});
        used = true;
      }
    }
    // Left for CLI11 to report as an unknown key.
    if (!used) items.push_back({{}, key, inputs});
  }
  return items;
}

std::string YamlConfig::to_config(const CLI::App* app, bool default_also, bool, std::string) const {
  YAML::Emitter out;
  out << YAML::BeginMap;
  auto emit = [&](const CLI::App& scope) {
    for (const CLI::Option* opt : scope.get_options({})) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      std::vector<std::string> values = opt->reduced_results();
      if (values.empty() && default_also && !opt->get_default_str().empty()) values = {opt->get_default_str()};
      if (values.empty()) continue;
      out << YAML::Key << opt->get_lnames().front();
      if (values.size() == 1) {
        out << YAML::Value << values.front();
      } else {
        out << YAML::Value << YAML::Flow << values;
      }
    }
  };
  emit(*app);
  for (const CLI::App* sub : app->get_subcommands({})) {
    out << YAML::Key << sub->get_name() << YAML::Value << YAML::BeginMap;
    emit(*sub);
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace shredder::cli
