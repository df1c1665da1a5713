#include "rma/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "rma/errors.hpp"

namespace rma {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string real_str(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Entry {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define RMA_SIZE(name, field)                                                         \
  Entry{name, [](RunConfig& c, const std::string& v) {                                \
          c.field = parse_integer<std::size_t>(name, v);                              \
        },                                                                            \
        [](const RunConfig& c) { return std::to_string(c.field); }}
#define RMA_REAL(name, field)                                                         \
  Entry{name, [](RunConfig& c, const std::string& v) { c.field = parse_real(name, v); }, \
        [](const RunConfig& c) { return real_str(c.field); }}
#define RMA_BOOL(name, field)                                                         \
  Entry{name, [](RunConfig& c, const std::string& v) { c.field = parse_bool(name, v); }, \
        [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); }}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table{
      Entry{"seed",
            [](RunConfig& c, const std::string& v) {
              c.train.seed = c.data.seed = parse_integer<std::uint64_t>("seed", v);
            },
            [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      RMA_SIZE("samples", data.samples),
      RMA_SIZE("test_samples", test_samples),
      RMA_SIZE("image_size", data.image_size),
      RMA_REAL("noise", data.noise),
      Entry{"classes",
            [](RunConfig& c, const std::string& v) {
              c.data.classes = c.train.model.attention.classes =
                  parse_integer<std::size_t>("classes", v);
            },
            [](const RunConfig& c) { return std::to_string(c.data.classes); }},
      Entry{"channels",
            [](RunConfig& c, const std::string& v) {
              std::vector<std::size_t> ch;
              std::stringstream ss(v);
              std::string item;
              while (std::getline(ss, item, ',')) {
                ch.push_back(parse_integer<std::size_t>("channels", trim(item)));
              }
              if (ch.empty()) throw ConfigError("channels: expected a comma-separated list");
              c.train.model.backbone.channels = ch;
              c.train.model.attention.feature_channels = ch.back();
            },
            [](const RunConfig& c) {
              std::string out;
              for (auto n : c.train.model.backbone.channels) {
                out += (out.empty() ? "" : ",") + std::to_string(n);
              }
              return out;
            }},
      RMA_SIZE("kernel", train.model.backbone.kernel),
      RMA_SIZE("pool", train.model.backbone.pool),
      RMA_SIZE("steps", train.model.attention.steps),
      RMA_SIZE("region", train.model.attention.region_h),
      RMA_SIZE("embed", train.model.attention.embed),
      RMA_SIZE("hidden", train.model.attention.hidden),
      RMA_SIZE("head", train.model.attention.head),
      RMA_BOOL("cell_tanh", train.model.attention.cell_tanh),
      RMA_REAL("alpha", train.loss.alpha),
      RMA_REAL("beta", train.loss.beta),
      RMA_REAL("lambda_anchor", train.loss.lambda_anchor),
      RMA_REAL("lambda_positive", train.loss.lambda_positive),
      RMA_REAL("gamma", train.loss.gamma),
      RMA_BOOL("use_anchor", train.loss.use_anchor),
      RMA_BOOL("use_scale", train.loss.use_scale),
      RMA_BOOL("use_positive", train.loss.use_positive),
      RMA_REAL("learning_rate", train.adam.learning_rate),
      RMA_REAL("adam_beta1", train.adam.beta1),
      RMA_REAL("adam_beta2", train.adam.beta2),
      RMA_REAL("adam_epsilon", train.adam.epsilon),
      RMA_SIZE("batch_size", train.batch_size),
      RMA_SIZE("epochs", train.epochs),
      RMA_SIZE("lr_decay_epoch", train.lr_decay_epoch),
      RMA_SIZE("top_k", top_k),
      RMA_REAL("threshold", threshold),
      Entry{"views",
            [](RunConfig& c, const std::string& v) {
              if (v != "single" && v != "ten") {
                throw ConfigError("views: expected single or ten, got '" + v + "'");
              }
              c.views = v;
            },
            [](const RunConfig& c) { return c.views; }},
      RMA_SIZE("crop", crop),
  };
  return table;
}

#undef RMA_SIZE
#undef RMA_REAL
#undef RMA_BOOL

}  // namespace

void RunConfig::validate() const {
  data.validate();
  train.validate();
  if (train.model.attention.classes != data.classes) {
    throw ConfigError("model and data disagree on the class count");
  }
  train.model.backbone.validate_input(data.image_size, data.image_size);
  if (top_k < 1) throw ConfigError("top_k must be >= 1");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must be in [0, 1]");
  if (views != "single" && views != "ten") throw ConfigError("views must be single or ten");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& e : entries()) k.push_back(e.key);
    return k;
  }();
  return keys;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& e : entries()) {
    if (e.key != key) continue;
    e.set(config, value);
    // The region is square.
    config.train.model.attention.region_w = config.train.model.attention.region_h;
    return;
  }
  throw ConfigError("unknown configuration key '" + key + "'");
}

Settings parse_config_text(const std::string& text, const std::string& origin) {
  Settings out;
  std::istringstream in(text);
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const auto content = trim(line);
    if (content.empty() || content.front() == '#') continue;
    const auto eq = content.find('=');
    const auto where = origin + ":" + std::to_string(n) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    auto key = trim(content.substr(0, eq));
    auto value = trim(content.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + "missing key");
    if (std::find(config_keys().begin(), config_keys().end(), key) == config_keys().end()) {
      throw ConfigError(where + "unknown configuration key '" + key + "'");
    }
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

Settings read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

void apply_settings(RunConfig& config, const Settings& settings) {
  for (const auto& [k, v] : settings) apply_setting(config, k, v);
}

std::string format_config(const RunConfig& config) {
  std::string out;
  for (const auto& e : entries()) out += e.key + " = " + e.get(config) + "\n";
  return out;
}

void write_effective_config(const std::filesystem::path& dir, const RunConfig& config) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "config.txt", std::ios::binary);
  if (!out) throw Error("cannot write " + (dir / "config.txt").string());
  out << format_config(config);
}

}  // namespace rma
