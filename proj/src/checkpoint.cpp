#include "rma/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "rma/errors.hpp"

namespace rma {
namespace {

constexpr char kMagic[4] = {'R', 'M', 'A', '1'};

template <typename T>
void put(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(bytes, sizeof(T));
}

class Reader {
 public:
  Reader(std::string bytes, std::string source) : bytes_(std::move(bytes)), source_(std::move(source)) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    char raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + offset_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    offset_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }

  std::string take(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(offset_, n);
    offset_ += n;
    return s;
  }

  std::size_t offset() const { return offset_; }
  bool done() const { return offset_ == bytes_.size(); }

  [[noreturn]] void fail(const std::string& message) const {
    throw FormatError(source_ + ": " + message + " at offset " + std::to_string(offset_));
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - offset_ < n) {
      fail(std::string("truncated file while reading ") + what);
    }
  }

  std::string bytes_;
  std::string source_;
  std::size_t offset_ = 0;
};

}  // namespace

void write_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > UINT16_MAX) throw FormatError("tensor name too long: " + name.substr(0, 32));
    if (t.rank() > UINT8_MAX) throw FormatError("tensor rank too large: " + name);
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (float v : t.values()) put<float>(out, v);
  }
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open " + tmp.string() + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw Error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<NamedTensor> read_tensors(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << f.rdbuf();
  Reader r(buf.str(), path.string());

  if (r.take(4, "magic") != std::string(kMagic, 4)) r.fail("bad magic (expected RMA1)");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    r.fail("unsupported checkpoint version " + std::to_string(version) + " (this build reads " +
           std::to_string(kCheckpointVersion) + ")");
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  std::vector<NamedTensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint16_t>("name length");
    auto name = r.take(len, "name");
    const auto rank = r.get<std::uint8_t>("rank");
    Shape shape;
    std::size_t numel = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      const auto dim = r.get<std::uint32_t>("dimension");
      if (dim == 0) r.fail("zero dimension in tensor " + name);
      shape.push_back(dim);
      numel *= dim;
    }
    std::vector<float> data(numel);
    for (auto& v : data) v = r.get<float>("tensor data");
    tensors.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
  }
  if (!r.done()) r.fail("trailing bytes after last tensor");
  return tensors;
}

std::vector<float> encode_arch(const ModelConfig& c) {
  std::vector<float> v;
  const auto push = [&](std::size_t x) { v.push_back(static_cast<float>(x)); };
  push(c.backbone.in_channels);
  push(c.backbone.channels.size());
  for (auto ch : c.backbone.channels) push(ch);
  push(c.backbone.kernel);
  push(c.backbone.pool);
  const auto& a = c.attention;
  for (auto x : {a.feature_channels, a.region_h, a.region_w, a.embed, a.hidden, a.head, a.classes,
                 a.steps}) {
    push(x);
  }
  push(a.cell_tanh ? 1 : 0);
  return v;
}

ModelConfig decode_arch(const std::vector<float>& v) {
  std::size_t i = 0;
  const auto next = [&]() -> std::size_t {
    if (i >= v.size()) throw FormatError("architecture descriptor is truncated");
    const float x = v[i++];
    if (!(x >= 0.0f) || x != static_cast<float>(static_cast<std::size_t>(x))) {
      throw FormatError("architecture descriptor holds a non-integer entry");
    }
    return static_cast<std::size_t>(x);
  };
  ModelConfig c;
  c.backbone.in_channels = next();
  const std::size_t blocks = next();
  c.backbone.channels.clear();
  for (std::size_t b = 0; b < blocks; ++b) c.backbone.channels.push_back(next());
  c.backbone.kernel = next();
  c.backbone.pool = next();
  auto& a = c.attention;
  for (auto* x : {&a.feature_channels, &a.region_h, &a.region_w, &a.embed, &a.hidden, &a.head,
                  &a.classes, &a.steps}) {
    *x = next();
  }
  a.cell_tanh = next() != 0;
  if (i != v.size()) throw FormatError("architecture descriptor has trailing entries");
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid architecture in checkpoint: ") + e.what());
  }
  return c;
}

void save_checkpoint(const Model<float>& model, const AdamState* optimizer,
                     const std::filesystem::path& path) {
  std::vector<NamedTensor> out;
  const auto arch = encode_arch(model.config);
  out.push_back({"meta.arch", Tensor(Shape{arch.size()}, arch)});
  model.visit([&](const std::string& name, const Tensor& t) { out.push_back({name, t}); });
  if (optimizer) {
    if (optimizer->step >= (1u << 24)) throw FormatError("optimizer step count too large to store");
    const auto& c = optimizer->config;
    out.push_back({"adam.state",
                   Tensor(Shape{5}, {static_cast<float>(optimizer->step),
                                     static_cast<float>(c.learning_rate),
                                     static_cast<float>(c.beta1), static_cast<float>(c.beta2),
                                     static_cast<float>(c.epsilon)})});
    std::size_t i = 0;
    model.visit([&](const std::string& name, const Tensor&) {
      out.push_back({"adam.m." + name, optimizer->first_moment.at(i)});
      out.push_back({"adam.v." + name, optimizer->second_moment.at(i)});
      ++i;
    });
  }
  write_tensors(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto tensors = read_tensors(path);
  std::map<std::string, Tensor> by_name;
  for (auto& [name, t] : tensors) {
    if (!by_name.emplace(name, std::move(t)).second) {
      throw FormatError(path.string() + ": duplicate tensor " + name);
    }
  }
  const auto take = [&](const std::string& name) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError(path.string() + ": missing tensor " + name);
    Tensor t = std::move(it->second);
    by_name.erase(it);
    return t;
  };

  const auto arch = take("meta.arch");
  Checkpoint ck;
  ck.model.config = decode_arch(arch.storage());
  ck.model.backbone = zero_backbone<float>(ck.model.config.backbone);
  ck.model.attention = zero_attention<float>(ck.model.config.attention);
  ck.model.visit([&](const std::string& name, Tensor& t) {
    auto loaded = take(name);
    if (loaded.shape() != t.shape()) {
      throw FormatError(path.string() + ": tensor " + name + " has shape " +
                        shape_str(loaded.shape()) + ", architecture expects " +
                        shape_str(t.shape()));
    }
    t = std::move(loaded);
  });

  if (by_name.count("adam.state")) {
    const auto s = take("adam.state");
    if (s.size() != 5) throw FormatError(path.string() + ": malformed adam.state");
    AdamState opt;
    opt.step = static_cast<std::uint64_t>(s[0]);
    opt.config = {s[1], s[2], s[3], s[4]};
    ck.model.visit([&](const std::string& name, const Tensor& t) {
      auto m = take("adam.m." + name);
      auto v = take("adam.v." + name);
      if (m.shape() != t.shape() || v.shape() != t.shape()) {
        throw FormatError(path.string() + ": optimizer moments for " + name + " have wrong shape");
      }
      opt.first_moment.push_back(std::move(m));
      opt.second_moment.push_back(std::move(v));
    });
    ck.optimizer = std::move(opt);
  }
  if (!by_name.empty()) {
    throw FormatError(path.string() + ": unexpected tensor " + by_name.begin()->first);
  }
  return ck;
}

}  // namespace rma
