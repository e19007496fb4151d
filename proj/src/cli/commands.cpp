#include "rlnst/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <optional>
#include <thread>

#include "rlnst/checkpoint.hpp"
#include "rlnst/config.hpp"
#include "rlnst/image_io.hpp"
#include "rlnst/inference.hpp"
#include "rlnst/ops.hpp"
#include "rlnst/oracle_suite.hpp"

namespace rlnst {

namespace fs = std::filesystem;

unsigned worker_threads() {
  const char* env = std::getenv("RLNST_THREADS");
  if (env == nullptr || *env == '\0') return std::max(1u, std::thread::hardware_concurrency());
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1 || n > 4096) {
    throw ConfigError(std::string("RLNST_THREADS must be a positive integer, got '") + env + "'");
  }
  return static_cast<unsigned>(n);
}

namespace {

using F = Tensor<float>;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonFlags& f, const char* steps_help) {
  cmd->add_option("--config", f.config, "key = value configuration file");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--steps", f.steps, steps_help);
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--set", f.sets, "override one configuration key (key=value); repeatable");
}

RunConfig resolve(const CommonFlags& f, bool steps_is_episode_length) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.seed) cfg.train.seed = *f.seed;
  if (f.steps) {
    if (*f.steps < 1) throw ConfigError("--steps must be at least 1");
    (steps_is_episode_length ? cfg.train.episode_length : cfg.steps) = *f.steps;
  }
  if (!f.out.empty()) cfg.out = f.out;
  return cfg;
}

F pad_to_four(const F& image) {
  const auto h = image.dim(2), w = image.dim(3);
  const auto ph = (4 - h % 4) % 4, pw = (4 - w % 4) % 4;
  if (ph == 0 && pw == 0) return image;
  if (ph >= h || pw >= w) throw ShapeError("image " + to_string(image.shape()) + " is too small");
  return pad_reflect(image, ph, pw);
}

F load_training_image(const fs::path& path, int resolution) {
  auto image = read_image<float>(path);
  if (resolution > 0) image = resize_bilinear(image, resolution, resolution);
  return pad_to_four(image);
}

std::vector<std::vector<F>> load_clips(const RunConfig& cfg) {
  if (cfg.content.empty()) throw ConfigError("no content images configured (key 'content')");
  std::error_code ec;
  if (!fs::exists(cfg.content, ec)) throw ConfigError("content path does not exist: " + cfg.content.string());
  std::vector<std::vector<F>> clips;
  if (fs::is_regular_file(cfg.content, ec)) {
    clips.push_back({load_training_image(cfg.content, cfg.resolution)});
    return clips;
  }
  std::vector<fs::path> subdirs;
  for (const auto& e : fs::directory_iterator(cfg.content)) {
    if (e.is_directory()) subdirs.push_back(e.path());
  }
  std::sort(subdirs.begin(), subdirs.end());
  const bool video = cfg.train.mode == TrainMode::video;
  if (video && !subdirs.empty()) {
    for (const auto& d : subdirs) {
      std::vector<F> frames;
      for (const auto& p : list_images(d)) frames.push_back(load_training_image(p, cfg.resolution));
      if (!frames.empty()) clips.push_back(std::move(frames));
    }
  } else {
    std::vector<F> images;
    for (const auto& p : list_images(cfg.content)) images.push_back(load_training_image(p, cfg.resolution));
    if (video && !images.empty()) {
      clips.push_back(std::move(images));
    } else {
      for (auto& im : images) clips.push_back({std::move(im)});
    }
  }
  if (clips.empty()) throw ConfigError("no .png or .ppm images under " + cfg.content.string());
  if (video) {
    for (const auto& clip : clips) {
      for (const auto& f : clip) {
        if (f.shape() != clip[0].shape()) throw ConfigError("frames of one clip differ in size");
      }
    }
  }
  return clips;
}

F load_style(const RunConfig& cfg) {
  if (cfg.style.empty()) throw ConfigError("no style image configured (key 'style')");
  auto style = read_image<float>(cfg.style);
  if (cfg.resolution > 0) style = resize_bilinear(style, cfg.resolution, cfg.resolution);
  return style;
}

std::unique_ptr<Networks<float>> load_model(const fs::path& path) {
  if (path.empty()) throw ConfigError("no checkpoint given (--ckpt or key 'checkpoint')");
  const auto reg = load_checkpoint<float>(path);
  if (!reg.contains("actor.conv1.weight")) {
    throw CheckpointError(CheckpointError::Kind::missing_entry, path.string() + " holds no actor weights");
  }
  auto nets = std::make_unique<Networks<float>>(infer_arch(reg), 0);
  apply_checkpoint(*nets, reg);
  return nets;
}

std::string step_name(int t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "step_%02d.png", t);
  return buf;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  cfg.train.validate();
  auto clips = load_clips(cfg);
  const auto style = load_style(cfg);
  Networks<float> nets(cfg.train.arch(), cfg.train.seed, cfg.train.alpha_init);
  if (!cfg.features.empty()) apply_checkpoint(nets, load_checkpoint<float>(cfg.features));
  fs::create_directories(cfg.out);
  {
    std::ofstream resolved(cfg.out / "config.txt", std::ios::trunc);
    resolved << format_run_config(cfg);
  }
  const long every = std::max<long>(1, cfg.train.iterations / 20);
  out << "training " << cfg.train.iterations << " iterations on " << clips.size() << " clip(s), "
      << nets.inference_param_count() << " actor+stylizer parameters\n";
  train<float>(nets, cfg.train, std::move(clips), style, cfg.out, [&](const IterationMetrics& m) {
    if (m.iter % every == 0 || m.iter == 1) {
      char line[160];
      std::snprintf(line, sizeof(line), "iter %6ld  L %.5g  Lco %.4g  Lst %.4g  Jq %.4g  Jpi %.4g  alpha %.4g\n", m.iter,
                    m.L, m.Lco, m.Lst, m.Jq, m.Jpi, m.alpha);
      out << line << std::flush;
    }
  });
  out << "wrote " << (cfg.out / "metrics.csv").string() << " and " << (cfg.out / "final.rlnst").string() << "\n";
  return kExitOk;
}

int cmd_stylize(const RunConfig& cfg, const fs::path& input, std::ostream& out) {
  auto nets = load_model(cfg.checkpoint);
  const auto image = read_image<float>(input);
  const auto steps = stylize_steps(*nets, image, cfg.steps);
  fs::create_directories(cfg.out);
  std::vector<Raster> tiles{to_raster(image)};
  for (std::size_t t = 0; t < steps.size(); ++t) {
    tiles.push_back(to_raster(steps[t]));
    write_raster(tiles.back(), cfg.out / step_name(static_cast<int>(t) + 1));
  }
  write_raster(contact_sheet(tiles, static_cast<int>(tiles.size())), cfg.out / "contact_sheet.png");
  out << "wrote " << steps.size() << " steps to " << cfg.out.string() << "\n";
  return kExitOk;
}

int cmd_video_stylize(const RunConfig& cfg, const fs::path& frame_dir, std::ostream& out) {
  auto nets = load_model(cfg.checkpoint);
  const auto paths = list_images(frame_dir);
  if (paths.empty()) throw ConfigError("no .png or .ppm frames in " + frame_dir.string());
  std::vector<F> frames;
  for (const auto& p : paths) {
    frames.push_back(read_image<float>(p));
    if (frames.back().shape() != frames[0].shape()) {
      throw ConfigError("frame " + p.filename().string() + " is " + to_string(frames.back().shape()) + ", expected " +
                        to_string(frames[0].shape()));
    }
  }
  const auto result = stylize_sequence(*nets, frames, cfg.steps);
  for (std::size_t f = 0; f < result.size(); ++f) {
    char dir[32];
    std::snprintf(dir, sizeof(dir), "frame_%04zu", f + 1);
    fs::create_directories(cfg.out / dir);
    for (std::size_t t = 0; t < result[f].size(); ++t) {
      write_image(result[f][t], cfg.out / dir / step_name(static_cast<int>(t) + 1));
    }
  }
  out << "wrote " << result.size() << " frames x " << cfg.steps << " steps to " << cfg.out.string() << "\n";
  return kExitOk;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  auto nets = load_model(cfg.checkpoint);
  if (cfg.content.empty()) throw ConfigError("no content images configured (--content or key 'content')");
  std::vector<fs::path> paths;
  std::error_code ec;
  if (fs::is_regular_file(cfg.content, ec)) {
    paths.push_back(cfg.content);
  } else if (fs::is_directory(cfg.content, ec)) {
    paths = list_images(cfg.content);
  }
  if (paths.empty()) throw ConfigError("no content images under " + cfg.content.string());
  if (cfg.style.empty()) throw ConfigError("no style image configured (--style or key 'style')");
  const auto style = read_image<float>(cfg.style);
  std::vector<F> images;
  for (const auto& p : paths) images.push_back(read_image<float>(p));
  const auto target = StyleTarget<float>::build(nets->features, style);

  const auto steps = static_cast<std::size_t>(cfg.steps);
  struct PerImage {
    std::vector<double> content, style;
    double seconds = 0;
  };
  std::vector<PerImage> results(images.size());
  auto work = [&](std::size_t i) {
    NoGradGuard no_grad;
    const auto start = std::chrono::steady_clock::now();
    const auto outs = stylize_steps(*nets, images[i], cfg.steps);
    results[i].seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (const auto& m : outs) {
      results[i].content.push_back(content_loss(nets->features, m, images[i]).item());
      results[i].style.push_back(style_loss(nets->features, m, target).item());
    }
  };
  const auto threads = std::min<std::size_t>(worker_threads(), images.size());
  if (threads <= 1) {
    for (std::size_t i = 0; i < images.size(); ++i) work(i);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < images.size(); i += threads) work(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  const double n = static_cast<double>(images.size());
  double total_seconds = 0, mean_content = 0, mean_style = 0;
  std::vector<double> content_per_step(steps, 0.0), style_per_step(steps, 0.0);
  for (const auto& r : results) {
    total_seconds += r.seconds;
    for (std::size_t t = 0; t < steps; ++t) {
      content_per_step[t] += r.content[t] / n;
      style_per_step[t] += r.style[t] / n;
    }
  }
  for (std::size_t t = 0; t < steps; ++t) {
    mean_content += content_per_step[t] / static_cast<double>(steps);
    mean_style += style_per_step[t] / static_cast<double>(steps);
  }
  const double per_step = total_seconds / (n * static_cast<double>(steps));

  fs::create_directories(cfg.out);
  std::ofstream table(cfg.out / "eval.csv", std::ios::trunc);
  table << "step,content_loss,style_loss,seconds_per_image\n";
  char line[200];
  out << "step  content_loss  style_loss  seconds_per_image\n";
  for (std::size_t t = 0; t < steps; ++t) {
    std::snprintf(line, sizeof(line), "%zu,%.9g,%.9g,%.6g\n", t + 1, content_per_step[t], style_per_step[t], per_step);
    table << line;
    std::snprintf(line, sizeof(line), "%4zu  %12.6g  %10.6g  %17.6g\n", t + 1, content_per_step[t], style_per_step[t],
                  per_step);
    out << line;
  }
  std::ofstream summary(cfg.out / "eval_summary.csv", std::ios::trunc);
  std::snprintf(line, sizeof(line),
                "metric,value\nimages,%zu\nsteps,%zu\nmean_content_loss,%.9g\nmean_style_loss,%.9g\n"
                "seconds_per_image_per_step,%.6g\nparameter_count,%lld\n",
                images.size(), steps, mean_content, mean_style, per_step,
                static_cast<long long>(nets->inference_param_count()));
  summary << line;
  out << line;
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, bool inject_fault, std::ostream& out, std::ostream& err) {
  debug::set_corrupt_conv_backward(inject_fault);
  std::vector<GradCheckResult> results;
  try {
    results = run_oracle_suite(seed);
  } catch (...) {
    debug::set_corrupt_conv_backward(false);
    throw;
  }
  debug::set_corrupt_conv_backward(false);
  std::vector<std::string> failed;
  char line[200];
  out << "check                                     step    max rel err  tolerance  result\n";
  for (const auto& r : results) {
    std::snprintf(line, sizeof(line), "%-40s  %-6.0e  %11.3e  %9.0e  %s\n", r.name.c_str(), r.step, r.max_rel_error,
                  r.tolerance, r.passed() ? "pass" : "FAIL");
    out << line;
    if (!r.passed()) failed.push_back(r.name);
  }
  out << results.size() << " checks, " << failed.size() << " failed\n";
  if (failed.empty()) return kExitOk;
  err << "failing checks:";
  for (const auto& name : failed) err << "\n  " << name;
  err << "\n";
  return kExitCheckFailed;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Step-wise neural style transfer with a max-entropy actor-critic", "rlnst"};
  app.require_subcommand(1);

  CommonFlags train_flags, stylize_flags, video_flags, eval_flags;
  std::string content, style, ckpt, input, frames;
  std::optional<long> iterations;
  std::uint64_t check_seed = 0;
  bool inject_fault = false;

  auto* train_cmd = app.add_subcommand("train", "train actor, stylizer and critic; writes metrics.csv and checkpoints");
  add_common(train_cmd, train_flags, "episode length T");
  train_cmd->add_option("--content", content, "content image or directory");
  train_cmd->add_option("--style", style, "style image");
  train_cmd->add_option("--iterations", iterations, "training iterations");

  auto* stylize_cmd = app.add_subcommand("stylize", "write the moving image after each of T steps");
  add_common(stylize_cmd, stylize_flags, "number of steps T");
  stylize_cmd->add_option("--ckpt,--checkpoint", ckpt, "checkpoint file");
  stylize_cmd->add_option("--input", input, "content image")->required();

  auto* video_cmd = app.add_subcommand("video-stylize", "stylize a directory of frames (lexicographic order)");
  add_common(video_cmd, video_flags, "number of steps T");
  video_cmd->add_option("--ckpt,--checkpoint", ckpt, "checkpoint file");
  video_cmd->add_option("--frames", frames, "directory of frames")->required();

  auto* eval_cmd = app.add_subcommand("eval", "content/style losses per step, timing and parameter count");
  add_common(eval_cmd, eval_flags, "number of steps T");
  eval_cmd->add_option("--ckpt,--checkpoint", ckpt, "checkpoint file");
  eval_cmd->add_option("--content", content, "content image or directory");
  eval_cmd->add_option("--style", style, "style image");

  auto* check_cmd = app.add_subcommand("gradcheck", "finite-difference checks of every op, layer and loss");
  check_cmd->add_option("--seed", check_seed, "random seed");
  check_cmd->add_flag("--inject-fault", inject_fault, "corrupt the conv backward rule")->group("");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (train_cmd->parsed()) {
      auto cfg = resolve(train_flags, true);
      if (!content.empty()) cfg.content = content;
      if (!style.empty()) cfg.style = style;
      if (iterations) cfg.train.iterations = *iterations;
      return cmd_train(cfg, out);
    }
    if (stylize_cmd->parsed()) {
      auto cfg = resolve(stylize_flags, false);
      if (!ckpt.empty()) cfg.checkpoint = ckpt;
      return cmd_stylize(cfg, input, out);
    }
    if (video_cmd->parsed()) {
      auto cfg = resolve(video_flags, false);
      if (!ckpt.empty()) cfg.checkpoint = ckpt;
      return cmd_video_stylize(cfg, frames, out);
    }
    if (eval_cmd->parsed()) {
      auto cfg = resolve(eval_flags, false);
      if (!ckpt.empty()) cfg.checkpoint = ckpt;
      if (!content.empty()) cfg.content = content;
      if (!style.empty()) cfg.style = style;
      return cmd_eval(cfg, out);
    }
    return cmd_gradcheck(check_seed, inject_fault, out, err);
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const ImageError& e) {
    err << "image error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const fs::filesystem_error& e) {
    err << "file error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const Error& e) {
    // Shape, dimension and argument errors all stem from the inputs given.
    err << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
}

}  // namespace rlnst
