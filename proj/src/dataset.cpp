#include "rma/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "rma/errors.hpp"
#include "rma/random.hpp"

namespace rma {
namespace {

constexpr const char* kShapeNames[kMaxShapeClasses] = {"circle", "square", "triangle", "cross",
                                                       "ring",   "diamond", "bar",    "saltire"};

// Whether the offset (dx, dy) from the shape centre, in units of the half-size,
// falls inside shape `cls`.
bool inside(std::size_t cls, double dx, double dy) {
  const double ax = std::abs(dx), ay = std::abs(dy);
  if (ax > 1.0 || ay > 1.0) return false;
  switch (cls) {
    case 0: return dx * dx + dy * dy <= 1.0;
    case 1: return ax <= 0.8 && ay <= 0.8;
    case 2: return dy >= -0.9 && dy <= 0.9 && ax <= (dy + 0.9) / 1.8;
    case 3: return ax <= 0.3 || ay <= 0.3;
    case 4: {
      const double r2 = dx * dx + dy * dy;
      return r2 <= 1.0 && r2 >= 0.36;
    }
    case 5: return ax + ay <= 1.0;
    case 6: return ay <= 0.3;
    case 7: return std::abs(dx - dy) <= 0.35 || std::abs(dx + dy) <= 0.35;
    default: return false;
  }
}

double overlap_fraction(const PixelBox& a, const PixelBox& b) {
  const double w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  if (w <= 0 || h <= 0) return 0.0;
  const double smaller = std::min(a.width() * a.height(), b.width() * b.height());
  return w * h / smaller;
}

float quantize(double v) {
  const double clamped = std::clamp(v, 0.0, 1.0);
  return static_cast<float>(std::round(clamped * 255.0) / 255.0);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::filesystem::path manifest_path(const std::filesystem::path& root) {
  if (std::filesystem::is_directory(root)) return root / "manifest.csv";
  return root;
}

}  // namespace

const char* shape_name(std::size_t cls) {
  return cls < kMaxShapeClasses ? kShapeNames[cls] : "unknown";
}

void GeneratorConfig::validate() const {
  if (classes < 2 || classes > kMaxShapeClasses) {
    throw ConfigError("class count must be in [2, 8], got " + std::to_string(classes));
  }
  if (samples == 0) throw ConfigError("sample count must be positive");
  if (image_size < 16) throw ConfigError("image size must be at least 16");
  if (!(noise >= 0.0 && noise <= 1.0)) throw ConfigError("noise amplitude must be in [0, 1]");
}

std::vector<SyntheticSample> synthesize(const GeneratorConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const std::size_t size = config.image_size;
  const double side = static_cast<double>(size);
  std::vector<SyntheticSample> out;
  out.reserve(config.samples);

  for (std::size_t n = 0; n < config.samples; ++n) {
    SyntheticSample s;
    char name[32];
    std::snprintf(name, sizeof name, "img_%05zu.ppm", n);
    s.filename = name;
    s.labels.assign(config.classes, 0);

    std::vector<double> pixels(3 * size * size);
    for (auto& p : pixels) p = rng.uniform(0.0, config.noise);

    // Partial Fisher-Yates draw of distinct classes.
    std::vector<std::size_t> order(config.classes);
    for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
    const std::size_t wanted = 1 + rng.below(std::min<std::size_t>(4, config.classes));
    for (std::size_t i = 0; i < wanted; ++i) {
      std::swap(order[i], order[i + rng.below(order.size() - i)]);
    }

    for (std::size_t i = 0; i < wanted; ++i) {
      const std::size_t cls = order[i];
      // Redraw placements that overlap earlier shapes too much; give up on the shape after
      // a bounded number of attempts.
      for (int attempt = 0; attempt < 64; ++attempt) {
        const double half = rng.uniform(0.14, 0.22) * side;
        const double cx = rng.uniform(half, side - half);
        const double cy = rng.uniform(half, side - half);
        const PixelBox box{cx - half, cy - half, cx + half, cy + half};
        bool clash = false;
        for (const auto& other : s.boxes) clash = clash || overlap_fraction(box, other.box) > 0.15;
        if (clash) continue;

        const double color[3] = {rng.uniform(0.4, 1.0), rng.uniform(0.4, 1.0),
                                 rng.uniform(0.4, 1.0)};
        for (std::size_t y = 0; y < size; ++y) {
          for (std::size_t x = 0; x < size; ++x) {
            const double dx = (static_cast<double>(x) + 0.5 - cx) / half;
            const double dy = (static_cast<double>(y) + 0.5 - cy) / half;
            if (!inside(cls, dx, dy)) continue;
            for (std::size_t c = 0; c < 3; ++c) pixels[(c * size + y) * size + x] = color[c];
          }
        }
        s.boxes.push_back({cls, box});
        s.labels[cls] = 1;
        break;
      }
    }

    s.image = Tensor(Shape{3, size, size});
    for (std::size_t i = 0; i < pixels.size(); ++i) s.image[i] = quantize(pixels[i]);
    out.push_back(std::move(s));
  }
  return out;
}

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw DimensionError("write_ppm: expected [3 x H x W], got " + shape_str(image.shape()));
  }
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << "P6\n" << w << " " << h << "\n255\n";
  std::string row(3 * w, '\0');
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp(static_cast<double>(image.at(c, y, x)), 0.0, 1.0);
        row[3 * x + c] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
      }
    }
    f.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  if (!f) throw Error("failed writing " + path.string());
}

Tensor read_ppm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError("cannot open image " + path.string());
  const auto token = [&]() {
    std::string t;
    char ch;
    while (f.get(ch)) {
      if (ch == '#') {
        std::string skip;
        std::getline(f, skip);
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        if (!t.empty()) break;
      } else {
        t += ch;
      }
    }
    return t;
  };
  if (token() != "P6") throw LoadError(path.string() + ": not a binary PPM (P6)");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(token());
    h = std::stoul(token());
    maxval = std::stoul(token());
  } catch (const std::exception&) {
    throw LoadError(path.string() + ": malformed PPM header");
  }
  if (w == 0 || h == 0 || maxval != 255) {
    throw LoadError(path.string() + ": only 8-bit PPM with nonzero size is supported");
  }
  std::string raw(3 * w * h, '\0');
  f.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (f.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw LoadError(path.string() + ": truncated pixel data");
  }
  Tensor image(Shape{3, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        image.at(c, y, x) =
            static_cast<float>(static_cast<unsigned char>(raw[3 * (y * w + x) + c])) / 255.0f;
      }
    }
  }
  return image;
}

void write_dataset(const std::filesystem::path& root, const std::vector<SyntheticSample>& samples) {
  std::error_code ec;
  std::filesystem::create_directories(root / "images", ec);
  if (ec) throw Error("cannot create " + (root / "images").string() + ": " + ec.message());
  std::ofstream manifest(root / "manifest.csv", std::ios::trunc);
  std::ofstream boxes(root / "boxes.csv", std::ios::trunc);
  if (!manifest || !boxes) throw Error("cannot write manifest under " + root.string());
  boxes << "filename,class,x0,y0,x1,y1\n" << std::fixed << std::setprecision(3);
  for (const auto& s : samples) {
    write_ppm(root / "images" / s.filename, s.image);
    manifest << s.filename << ',';
    bool first = true;
    for (std::size_t c = 0; c < s.labels.size(); ++c) {
      if (!s.labels[c]) continue;
      manifest << (first ? "" : ";") << c;
      first = false;
    }
    manifest << '\n';
    for (const auto& b : s.boxes) {
      boxes << s.filename << ',' << b.cls << ',' << b.box.x0 << ',' << b.box.y0 << ','
            << b.box.x1 << ',' << b.box.y1 << '\n';
    }
  }
  if (!manifest || !boxes) throw Error("failed writing dataset under " + root.string());
}

std::vector<SyntheticSample> load_dataset(const std::filesystem::path& root, std::size_t classes) {
  const auto manifest = manifest_path(root);
  std::ifstream f(manifest);
  if (!f) throw LoadError("cannot open manifest " + manifest.string());
  const auto base = manifest.parent_path();

  struct Entry {
    std::string file;
    std::vector<std::size_t> labels;
  };
  std::vector<Entry> entries;
  std::string line;
  std::size_t line_no = 0, largest = 0;
  const auto fail = [&](const std::string& why) {
    throw LoadError(manifest.string() + ":" + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(f, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) fail("expected 'filename,labels'");
    Entry e{trim(line.substr(0, comma)), {}};
    if (e.file.empty()) fail("empty filename");
    const auto field = trim(line.substr(comma + 1));
    if (field.empty()) fail("empty label field");
    std::stringstream ss(field);
    std::string item;
    while (std::getline(ss, item, ';')) {
      item = trim(item);
      std::size_t pos = 0;
      unsigned long v = 0;
      try {
        v = std::stoul(item, &pos);
      } catch (const std::exception&) {
        fail("malformed label '" + item + "'");
      }
      if (pos != item.size() || item.empty() || item[0] == '-') fail("malformed label '" + item + "'");
      if (classes != 0 && v >= classes) {
        fail("label " + item + " out of range for " + std::to_string(classes) + " classes");
      }
      e.labels.push_back(v);
      largest = std::max<std::size_t>(largest, v);
    }
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw LoadError(manifest.string() + ": manifest lists no images");
  const std::size_t count = classes != 0 ? classes : largest + 1;

  std::vector<SyntheticSample> out;
  out.reserve(entries.size());
  for (auto& e : entries) {
    SyntheticSample s;
    s.filename = e.file;
    s.labels.assign(count, 0);
    for (auto l : e.labels) s.labels[l] = 1;
    s.image = read_ppm(base / "images" / e.file);
    out.push_back(std::move(s));
  }
  return out;
}

void load_boxes(const std::filesystem::path& root, std::vector<SyntheticSample>& samples) {
  std::ifstream f(manifest_path(root).parent_path() / "boxes.csv");
  if (!f) return;
  std::map<std::string, SyntheticSample*> index;
  for (auto& s : samples) index[s.filename] = &s;
  std::string line;
  std::getline(f, line);  // header
  while (std::getline(f, line)) {
    std::stringstream ss(line);
    std::string file, cls, x0, y0, x1, y1;
    if (!std::getline(ss, file, ',') || !std::getline(ss, cls, ',') ||
        !std::getline(ss, x0, ',') || !std::getline(ss, y0, ',') || !std::getline(ss, x1, ',') ||
        !std::getline(ss, y1)) {
      continue;
    }
    auto it = index.find(file);
    if (it == index.end()) continue;
    it->second->boxes.push_back(
        {std::stoul(cls), {std::stod(x0), std::stod(y0), std::stod(x1), std::stod(y1)}});
  }
}

std::vector<double> label_marginals(const std::vector<SyntheticSample>& samples,
                                    std::size_t classes) {
  std::vector<double> freq(classes, 0.0);
  for (const auto& s : samples) {
    for (std::size_t c = 0; c < classes && c < s.labels.size(); ++c) freq[c] += s.labels[c];
  }
  for (auto& v : freq) v /= static_cast<double>(std::max<std::size_t>(1, samples.size()));
  return freq;
}

}  // namespace rma
