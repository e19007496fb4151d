#include "rlnst/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace rlnst {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError("invalid value '" + value + "' for " + key + " (expected " + expected + ")");
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad_value(key, v, "a number");
  return out;
}

long to_long(const std::string& key, const std::string& v) {
  long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad_value(key, v, "an integer");
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  const long x = to_long(key, v);
  if (x < -2147483647L || x > 2147483647L) bad_value(key, v, "a 32-bit integer");
  return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "true or false");
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

struct Option {
  ConfigKey key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;  // empty: write-only
};

#define RLNST_DOUBLE(field, help)                                                              \
  Option {                                                                                     \
    {#field, help}, [](RunConfig& c, const std::string& v) { c.train.field = to_double(#field, v); }, \
        [](const RunConfig& c) { return fmt(c.train.field); }                                  \
  }

const std::vector<Option>& options() {
  static const std::vector<Option> table = {
      {{"content", "content image, directory of images, or directory of frame directories"},
       [](RunConfig& c, const std::string& v) { c.content = v; },
       [](const RunConfig& c) { return c.content.string(); }},
      {{"style", "style image"},
       [](RunConfig& c, const std::string& v) { c.style = v; },
       [](const RunConfig& c) { return c.style.string(); }},
      {{"out", "output directory"},
       [](RunConfig& c, const std::string& v) { c.out = v; },
       [](const RunConfig& c) { return c.out.string(); }},
      {{"checkpoint", "checkpoint read by stylize, video-stylize and eval"},
       [](RunConfig& c, const std::string& v) { c.checkpoint = v; },
       [](const RunConfig& c) { return c.checkpoint.string(); }},
      {{"features", "optional feature-net weight file (checkpoint format, featnet.* entries)"},
       [](RunConfig& c, const std::string& v) { c.features = v; },
       [](const RunConfig& c) { return c.features.string(); }},
      {{"resolution", "square training resolution in pixels; 0 keeps the input size"},
       [](RunConfig& c, const std::string& v) {
         c.resolution = to_int("resolution", v);
         if (c.resolution != 0 && c.resolution < 8) bad_value("resolution", v, "0 or at least 8");
       },
       [](const RunConfig& c) { return std::to_string(c.resolution); }},
      {{"steps", "inference steps for stylize, video-stylize and eval"},
       [](RunConfig& c, const std::string& v) {
         c.steps = to_int("steps", v);
         if (c.steps < 1) bad_value("steps", v, "a positive integer");
       },
       [](const RunConfig& c) { return std::to_string(c.steps); }},
      {{"mode", "image or video"},
       [](RunConfig& c, const std::string& v) {
         if (v == "image") c.train.mode = TrainMode::image;
         else if (v == "video") c.train.mode = TrainMode::video;
         else bad_value("mode", v, "image or video");
       },
       [](const RunConfig& c) { return std::string(c.train.mode == TrainMode::image ? "image" : "video"); }},
      {{"frame_gru", "video mode: enable the frame-wise GRU"},
       [](RunConfig& c, const std::string& v) { c.train.frame_gru = to_bool("frame_gru", v); },
       [](const RunConfig& c) { return std::string(c.train.frame_gru ? "true" : "false"); }},
      {{"seed", "random seed"},
       [](RunConfig& c, const std::string& v) {
         std::uint64_t s = 0;
         auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
         if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad_value("seed", v, "an unsigned integer");
         c.train.seed = s;
       },
       [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      {{"iterations", "training iterations (one environment step and one gradient step each)"},
       [](RunConfig& c, const std::string& v) { c.train.iterations = to_long("iterations", v); },
       [](const RunConfig& c) { return std::to_string(c.train.iterations); }},
      {{"episode_length", "steps per episode"},
       [](RunConfig& c, const std::string& v) { c.train.episode_length = to_int("episode_length", v); },
       [](const RunConfig& c) { return std::to_string(c.train.episode_length); }},
      {{"batch_size", "replay batch size"},
       [](RunConfig& c, const std::string& v) { c.train.batch_size = to_int("batch_size", v); },
       [](const RunConfig& c) { return std::to_string(c.train.batch_size); }},
      {{"replay_capacity", "replay pool capacity"},
       [](RunConfig& c, const std::string& v) {
         const long n = to_long("replay_capacity", v);
         if (n < 1) bad_value("replay_capacity", v, "a positive integer");
         c.train.replay_capacity = static_cast<std::size_t>(n);
       },
       [](const RunConfig& c) { return std::to_string(c.train.replay_capacity); }},
      {{"checkpoint_every", "write a checkpoint every K iterations (0: final only)"},
       [](RunConfig& c, const std::string& v) { c.train.checkpoint_every = to_long("checkpoint_every", v); },
       [](const RunConfig& c) { return std::to_string(c.train.checkpoint_every); }},
      RLNST_DOUBLE(gamma, "reward discount"),
      RLNST_DOUBLE(tau, "target critic averaging rate"),
      {{"lr", "sets lr_style, lr_critic, lr_policy and lr_alpha at once"},
       [](RunConfig& c, const std::string& v) {
         const double lr = to_double("lr", v);
         c.train.lr_style = c.train.lr_critic = c.train.lr_policy = c.train.lr_alpha = lr;
       },
       {}},
      RLNST_DOUBLE(lr_style, "actor+stylizer rate for the combined loss"),
      RLNST_DOUBLE(lr_critic, "critic rate"),
      RLNST_DOUBLE(lr_policy, "actor rate for the policy objective"),
      RLNST_DOUBLE(lr_alpha, "rate for log(alpha)"),
      {{"optimizer", "adam or sgd"},
       [](RunConfig& c, const std::string& v) {
         if (v == "adam") c.train.optimizer = OptimizerKind::adam;
         else if (v == "sgd") c.train.optimizer = OptimizerKind::sgd;
         else bad_value("optimizer", v, "adam or sgd");
       },
       [](const RunConfig& c) { return std::string(c.train.optimizer == OptimizerKind::adam ? "adam" : "sgd"); }},
      RLNST_DOUBLE(alpha_init, "initial entropy temperature"),
      {{"target_entropy", "entropy target; auto = minus the action element count"},
       [](RunConfig& c, const std::string& v) {
         if (v == "auto") c.train.target_entropy.reset();
         else c.train.target_entropy = to_double("target_entropy", v);
       },
       [](const RunConfig& c) { return c.train.target_entropy ? fmt(*c.train.target_entropy) : std::string("auto"); }},
      RLNST_DOUBLE(reward_scale, "reward = -reward_scale * style loss"),
      {{"lambda", "style weight"},
       [](RunConfig& c, const std::string& v) { c.train.weights.lambda = to_double("lambda", v); },
       [](const RunConfig& c) { return fmt(c.train.weights.lambda); }},
      {{"beta", "total-variation weight"},
       [](RunConfig& c, const std::string& v) { c.train.weights.beta = to_double("beta", v); },
       [](const RunConfig& c) { return fmt(c.train.weights.beta); }},
      {{"zeta", "temporal weight (video mode)"},
       [](RunConfig& c, const std::string& v) { c.train.weights.zeta = to_double("zeta", v); },
       [](const RunConfig& c) { return fmt(c.train.weights.zeta); }},
      {{"wavy_std", "std of the coarse random motion field"},
       [](RunConfig& c, const std::string& v) { c.train.motion.wavy_std = to_double("wavy_std", v); },
       [](const RunConfig& c) { return fmt(c.train.motion.wavy_std); }},
      {{"translation", "maximum global shift in pixels per axis"},
       [](RunConfig& c, const std::string& v) { c.train.motion.translation = to_double("translation", v); },
       [](const RunConfig& c) { return fmt(c.train.motion.translation); }},
      {{"blur_size", "Gaussian kernel size for motion smoothing"},
       [](RunConfig& c, const std::string& v) { c.train.motion.blur_size = to_double("blur_size", v); },
       [](const RunConfig& c) { return fmt(c.train.motion.blur_size); }},
  };
  return table;
}

#undef RLNST_DOUBLE

const Option& find_option(const std::string& key) {
  for (const auto& o : options()) {
    if (o.key.name == key) return o;
  }
  throw ConfigError("unknown configuration key '" + key + "'");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& o : options()) k.push_back(o.key);
    return k;
  }();
  return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  find_option(key).set(cfg, value);
}

std::string get_config_value(const RunConfig& cfg, const std::string& key) {
  const auto& o = find_option(key);
  if (!o.get) throw ConfigError("configuration key '" + key + "' is write-only");
  return o.get(cfg);
}

RunConfig parse_run_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const auto where = "line " + std::to_string(number) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      set_config_value(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return base;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_run_config(ss.str(), std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string format_run_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& o : options()) {
    if (!o.get) continue;
    out += "# " + o.key.help + "\n" + o.key.name + " = " + o.get(cfg) + "\n";
  }
  return out;
}

}  // namespace rlnst
