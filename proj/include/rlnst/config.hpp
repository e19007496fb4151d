#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rlnst/trainer.hpp"

namespace rlnst {

// Everything a command needs besides its flags.
struct RunConfig {
  TrainConfig train;
  std::filesystem::path content;     // image file, directory of images, or directory of clip directories
  std::filesystem::path style;       // style image
  std::filesystem::path out = "out";
  std::filesystem::path checkpoint;  // used by stylize / video-stylize / eval
  std::filesystem::path features;    // optional feature-net weight file
  int resolution = 64;               // square training size; 0 keeps the input size
  int steps = 10;                    // inference steps
};

struct ConfigKey {
  std::string name;
  std::string help;
};

// Every accepted key in file order, with a one-line description.
const std::vector<ConfigKey>& config_keys();

// Sets one key from its textual value; throws ConfigError for unknown keys
// or unparsable values.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& cfg, const std::string& key);

// Parses "key = value" lines; '#' starts a comment. Keys may appear once.
// Values are applied on top of `base`.
RunConfig parse_run_config(const std::string& text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

// "key = value" for every key, parseable by parse_run_config.
std::string format_run_config(const RunConfig& cfg);

}  // namespace rlnst
