#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rma/checkpoint.hpp"
#include "rma/config.hpp"
#include "rma/dataset.hpp"
#include "rma/errors.hpp"
#include "rma/evaluation.hpp"
#include "rma/gradcheck_suite.hpp"
#include "rma/trainer.hpp"
#include "rma/visualize.hpp"

namespace rma::cli {
namespace {

namespace fs = std::filesystem;

// Flags that map onto configuration keys are collected here and applied
// after the config file.
struct Overrides {
  std::optional<std::string> config_file;
  Settings settings;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(
        flag, [this, key](const std::string& v) { settings.emplace_back(key, v); }, help);
  }

  RunConfig resolve() const {
    RunConfig c;
    if (config_file) apply_settings(c, read_config_file(*config_file));
    apply_settings(c, settings);
    return c;
  }
};

std::string fmt(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

fs::path test_split(const fs::path& root) {
  return fs::exists(root / "test" / "manifest.csv") ? root / "test" : root;
}

int gen_data(const Overrides& o, const fs::path& out_dir, std::ostream& out) {
  auto config = o.resolve();
  config.validate();
  auto gen = config.data;
  gen.samples = config.data.samples + config.test_samples;
  auto all = synthesize(gen);
  std::vector<SyntheticSample> test(all.begin() + static_cast<std::ptrdiff_t>(config.data.samples),
                                    all.end());
  all.resize(config.data.samples);
  write_dataset(out_dir, all);
  if (!test.empty()) write_dataset(out_dir / "test", test);
  write_effective_config(out_dir, config);

  out << "wrote " << all.size() << " training and " << test.size() << " test images ("
      << config.data.image_size << "x" << config.data.image_size << ", " << config.data.classes
      << " classes) to " << out_dir.string() << "\n";
  const auto m = label_marginals(all, config.data.classes);
  for (std::size_t c = 0; c < m.size(); ++c) {
    out << "  class " << c << " " << shape_name(c) << ": " << fmt(m[c], 3) << "\n";
  }
  return kOk;
}

std::size_t infer_classes(const fs::path& root) {
  std::size_t classes = 0;
  for (const auto& s : load_dataset(root)) classes = std::max(classes, s.labels.size());
  return classes;
}

int train_cmd(Overrides o, const fs::path& data, const fs::path& out_dir,
              const std::vector<std::string>& disabled, std::ostream& out, std::ostream& err) {
  const bool classes_given =
      std::any_of(o.settings.begin(), o.settings.end(), [](auto& s) { return s.first == "classes"; });
  for (const auto& d : disabled) {
    if (d == "anchor" || d == "all") o.settings.emplace_back("use_anchor", "false");
    if (d == "scale" || d == "all") o.settings.emplace_back("use_scale", "false");
    if (d == "positive" || d == "all") o.settings.emplace_back("use_positive", "false");
  }
  auto config = o.resolve();
  // Without an explicit class count the training set decides.
  if (!classes_given) apply_setting(config, "classes", std::to_string(infer_classes(data)));
  const auto samples = load_dataset(data, config.data.classes);
  if (!samples.empty()) apply_setting(config, "image_size", std::to_string(samples[0].image.dim(1)));
  config.validate();
  validate_training_set(samples, config.train.model);

  write_effective_config(out_dir, config);
  out << "training on " << samples.size() << " images, K=" << config.train.model.attention.steps
      << ", " << config.train.epochs << " epochs\n";
  TrainOptions options;
  options.out_dir = out_dir;
  options.on_epoch = [&](const EpochLog& e) {
    out << "epoch " << e.epoch << "  total " << fmt(e.total_loss, 6) << "  cls "
        << fmt(e.cls_loss, 6) << "  loc " << fmt(e.loc_loss, 6) << "\n"
        << std::flush;
  };
  try {
    train(samples, config.train, options);
  } catch (const DivergenceError& e) {
    err << "training diverged: " << e.what() << "\n";
    return kDiverged;
  }
  out << "checkpoint: " << (out_dir / "checkpoint.rma").string() << "\n";
  return kOk;
}

int eval_cmd(const Overrides& o, const fs::path& checkpoint, const fs::path& data,
             std::optional<fs::path> out_dir, std::ostream& out) {
  auto config = o.resolve();
  const auto ck = load_checkpoint(checkpoint);
  const auto split = test_split(data);
  const std::size_t classes = ck.model.config.attention.classes;
  if (const auto found = infer_classes(split); found > classes) {
    throw Error("checkpoint is incompatible with " + split.string() + ": the data has " +
                std::to_string(found) + " classes, the checkpoint was trained for " +
                std::to_string(classes));
  }
  const auto samples = load_dataset(split, classes);
  // Configuration checks that do not depend on the checkpoint.
  if (config.top_k < 1) throw ConfigError("top_k must be >= 1");
  if (!(config.threshold >= 0.0 && config.threshold <= 1.0)) {
    throw ConfigError("threshold must be in [0, 1]");
  }
  for (const auto& s : samples) {
    try {
      ck.model.config.backbone.validate_input(s.image.dim(1), s.image.dim(2));
    } catch (const ConfigError& e) {
      throw Error("checkpoint is incompatible with " + s.filename + ": " + e.what());
    }
  }

  EvalOptions options;
  options.top_k = config.top_k;
  options.threshold = config.threshold;
  if (config.views == "ten") {
    options.views = ten_views();
    const std::size_t map = ck.model.config.backbone.feature_size(samples.front().image.dim(1));
    options.crop = config.crop ? config.crop : std::max<std::size_t>(1, map - 1);
  }
  const auto report = evaluate(ck.model, samples, options);
  std::vector<LabelVector> truth;
  for (const auto& s : samples) truth.push_back(s.labels);

  out << "evaluated " << samples.size() << " images from " << split.string() << "\n";
  print_report(out, report);
  out << "  random-predictor mAP " << fmt(random_baseline_map(truth)) << "\n";

  const auto dir = out_dir.value_or(checkpoint.parent_path());
  fs::create_directories(dir);
  const auto name = config.views == "ten" ? "report_ten.csv" : "report.csv";
  std::ofstream csv(dir / name, std::ios::binary);
  if (!csv) throw Error("cannot write " + (dir / name).string());
  write_report_csv(csv, report);
  out << "report: " << (dir / name).string() << "\n";
  return kOk;
}

int viz_cmd(const fs::path& checkpoint, const fs::path& data, const std::vector<std::string>& images,
            std::size_t count, std::size_t scale, const fs::path& out_dir, std::ostream& out) {
  const auto ck = load_checkpoint(checkpoint);
  std::vector<SyntheticSample> picked;
  if (!images.empty()) {
    for (const auto& name : images) {
      fs::path p = fs::exists(data / "images" / name) ? data / "images" / name : data / name;
      if (!fs::exists(p)) throw LoadError("image not found: " + name);
      picked.push_back({p.filename().string(), read_ppm(p), {}, {}});
    }
  } else {
    auto all = load_dataset(data, ck.model.config.attention.classes);
    if (count < all.size()) all.resize(count);
    picked = std::move(all);
  }
  write_visualizations(ck.model, picked, out_dir, scale);
  out << "wrote " << picked.size() << " overlays and regions.csv to " << out_dir.string() << "\n";
  return kOk;
}

int grad_check_cmd(const GradCheckSuiteOptions& options, bool list, std::ostream& out,
                   std::ostream& err) {
  if (list) {
    for (const auto& n : gradcheck_item_names()) out << n << "\n";
    return kOk;
  }
  const auto start = std::chrono::steady_clock::now();
  const auto items = run_gradcheck_suite(options);
  std::size_t failed = 0;
  char buf[160];
  for (const auto& it : items) {
    std::snprintf(buf, sizeof buf, "%-28s %6zu entries  max rel err %.3e  %s\n", it.name.c_str(),
                  it.result.checked, it.result.max_rel_error, it.passed ? "ok" : "FAIL");
    out << buf;
    if (!it.passed) ++failed;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out << items.size() << " items checked in " << fmt(secs, 1) << " s, tolerance "
      << options.tolerance << "\n";
  if (items.empty()) {
    err << "no gradient-check items matched\n";
    return kRuntimeError;
  }
  for (const auto& it : items) {
    if (!it.passed) {
      err << "gradient check failed: " << it.name << " (input " << it.result.worst_input
          << ", entry " << it.result.worst_element << ": analytic " << it.result.analytic_at_worst
          << ", numeric " << it.result.numeric_at_worst << ")\n";
    }
  }
  return failed ? kRuntimeError : kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Recurrent attention multi-label classifier"};
  app.require_subcommand(1);

  Overrides gen_o, train_o, eval_o;
  std::string out_dir, data_dir, checkpoint;
  std::optional<std::string> eval_out;

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic shapes dataset");
  gen->add_option("--config", gen_o.config_file, "key = value configuration file");
  gen_o.add(gen, "--seed", "seed", "Random seed");
  gen_o.add(gen, "--n", "samples", "Training images");
  gen_o.add(gen, "--n-test", "test_samples", "Test images, written to <out>/test");
  gen_o.add(gen, "--classes", "classes", "Shape classes (2-8)");
  gen_o.add(gen, "--size", "image_size", "Image side in pixels");
  gen_o.add(gen, "--noise", "noise", "Background noise amplitude");
  gen->add_option("--out", out_dir, "Output directory")->required();

  std::vector<std::string> disabled;
  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--config", train_o.config_file, "key = value configuration file");
  tr->add_option("--data", data_dir, "Training set root")->required();
  tr->add_option("--out", out_dir, "Output directory for checkpoint and log")->required();
  train_o.add(tr, "--seed", "seed", "Random seed");
  train_o.add(tr, "--k", "steps", "Attention regions per image (K)");
  train_o.add(tr, "--epochs", "epochs", "Training epochs");
  train_o.add(tr, "--batch-size", "batch_size", "Mini-batch size");
  train_o.add(tr, "--lr", "learning_rate", "Adam learning rate");
  train_o.add(tr, "--classes", "classes", "Class count (default: from the data)");
  train_o.add(tr, "--hidden", "hidden", "LSTM hidden size");
  tr->add_option("--no-constraint", disabled, "Disable a localization term")
      ->check(CLI::IsMember({"anchor", "scale", "positive", "all"}));

  std::string views;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--config", eval_o.config_file, "key = value configuration file");
  ev->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  ev->add_option("--data", data_dir, "Dataset root; its test/ split is used when present")
      ->required();
  ev->add_option("--out", eval_out, "Report directory (default: next to the checkpoint)");
  eval_o.add(ev, "--views", "views", "single or ten");
  eval_o.add(ev, "--crop", "crop", "Feature-map crop side for ten-view evaluation");
  eval_o.add(ev, "--top-k", "top_k", "Labels assigned per image");
  eval_o.add(ev, "--threshold", "threshold", "Minimum probability of an assigned label");

  std::vector<std::string> images;
  std::size_t viz_count = 8, viz_scale = 8;
  auto* viz = app.add_subcommand("viz", "Draw attention regions as SVG");
  viz->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  viz->add_option("--data", data_dir, "Dataset root")->required();
  viz->add_option("--image", images, "Image file name (repeatable)");
  viz->add_option("--n", viz_count, "Number of images when --image is not given");
  viz->add_option("--scale", viz_scale, "SVG units per pixel")->check(CLI::PositiveNumber);
  viz->add_option("--out", out_dir, "Output directory")->required();

  GradCheckSuiteOptions gc;
  bool gc_list = false;
  std::string fault;
  auto* gcmd = app.add_subcommand("grad-check", "Finite-difference gradient checks");
  gcmd->add_option("--filter", gc.filter, "Only items containing this text");
  gcmd->add_flag("--list", gc_list, "List item names");
  gcmd->add_option("--inject-fault", fault, "Negate the backward pass of one item");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, eo;
    const int code = app.exit(e, o, eo);
    out << o.str();
    err << eo.str();
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*gen) return gen_data(gen_o, out_dir, out);
    if (*tr) {
      // Validate before reading any data so usage errors are reported first.
      train_o.resolve().train.validate();
      return train_cmd(train_o, data_dir, out_dir, disabled, out, err);
    }
    if (*ev) return eval_cmd(eval_o, checkpoint, data_dir, eval_out, out);
    if (*viz) return viz_cmd(checkpoint, data_dir, images, viz_count, viz_scale, out_dir, out);
    if (*gcmd) {
      if (!fault.empty()) gc.inject_fault = fault;
      return grad_check_cmd(gc, gc_list, out, err);
    }
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kUsageError;
  } catch (const DivergenceError& e) {
    err << "training diverged: " << e.what() << "\n";
    return kDiverged;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}

}  // namespace rma::cli
