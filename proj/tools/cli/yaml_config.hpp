#pragma once

#include <CLI11.hpp>

#include <istream>
#include <string>
#include <vector>

namespace shredder::cli {

// Reads YAML config files for CLI11. Keys mirror long flag names, with
// underscores accepted for dashes. A top-level mapping named after a
// subcommand holds that subcommand's options. Other top-level scalars set
// the global option of that name, or else the same-named option of every
// subcommand that has one. Sequences become repeated values.
class YamlConfig : public CLI::Config {
 public:
  explicit YamlConfig(const CLI::App* app) : app_(app) {}

  std::string to_config(const CLI::App* app, bool default_also, bool write_description,
                        std::string prefix) const override;
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;

 private:
  const CLI::App* app_;
};

}  // namespace shredder::cli
