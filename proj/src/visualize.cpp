#include "rma/visualize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "rma/errors.hpp"

namespace rma {
namespace {

constexpr const char* kPalette[] = {"#00c853", "#ff1744", "#2979ff", "#ffab00",
                                    "#d500f9", "#00e5ff", "#ff6d00", "#76ff03"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

int channel_byte(float v) {
  return static_cast<int>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

const char* region_color(std::size_t k) {
  return kPalette[(k == 0 ? 0 : k - 1) % std::size(kPalette)];
}

std::vector<RegionRow> region_rows(const std::string& image_name, const Tensor& image,
                                   const EpisodeTrace& trace) {
  std::vector<RegionRow> rows;
  const double w = static_cast<double>(image.dim(2));
  const double h = static_cast<double>(image.dim(1));
  for (std::size_t k = 1; k < trace.transforms.size(); ++k) {
    const auto& p = trace.transforms[k];
    // A diverged transform gets an empty box at the origin rather than NaN coordinates.
    const PixelBox box = p.finite() ? region_box(p, w, h) : PixelBox{};
    rows.push_back({image_name, k, p, box});
  }
  return rows;
}

std::string render_svg(const Tensor& image, const EpisodeTrace& trace, std::size_t scale) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw DimensionError("render_svg: expected an RGB image, got " + shape_str(image.shape()));
  }
  if (scale == 0) throw ConfigError("render_svg: scale must be positive");
  const std::size_t h = image.dim(1), w = image.dim(2);
  const double s = static_cast<double>(scale);
  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w * scale) +
         "\" height=\"" + std::to_string(h * scale) + "\" viewBox=\"0 0 " +
         std::to_string(w * scale) + " " + std::to_string(h * scale) + "\">\n";
  out += "<g id=\"image\" shape-rendering=\"crispEdges\">\n";
  char buf[128];
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      std::snprintf(buf, sizeof buf,
                    "<rect x=\"%zu\" y=\"%zu\" width=\"%zu\" height=\"%zu\" fill=\"#%02x%02x%02x\"/>\n",
                    x * scale, y * scale, scale, scale, channel_byte(image.at(0, y, x)),
                    channel_byte(image.at(1, y, x)), channel_byte(image.at(2, y, x)));
      out += buf;
    }
  }
  out += "</g>\n<g id=\"regions\" fill=\"none\" stroke-width=\"2\">\n";
  for (const auto& row : region_rows("", image, trace)) {
    out += "<rect class=\"region\" data-k=\"" + std::to_string(row.region) + "\" x=\"" +
           num(row.box.x0 * s) + "\" y=\"" + num(row.box.y0 * s) + "\" width=\"" +
           num(row.box.width() * s) + "\" height=\"" + num(row.box.height() * s) +
           "\" stroke=\"" + region_color(row.region) + "\"/>\n";
  }
  out += "</g>\n</svg>\n";
  return out;
}

std::string regions_csv(const std::vector<RegionRow>& rows) {
  std::string out = "image,region,scale_x,scale_y,shift_x,shift_y,x0,y0,x1,y1\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%.9g,%.9g,%.9g,%.9g,%.6f,%.6f,%.6f,%.6f\n",
                  r.image.c_str(), r.region, r.params.scale_x, r.params.scale_y,
                  r.params.shift_x, r.params.shift_y, r.box.x0, r.box.y0, r.box.x1, r.box.y1);
    out += buf;
  }
  return out;
}

void write_visualizations(const Model<float>& model, const std::vector<SyntheticSample>& samples,
                          const std::filesystem::path& out_dir, std::size_t scale) {
  std::filesystem::create_directories(out_dir);
  std::vector<RegionRow> rows;
  for (const auto& s : samples) {
    const auto trace = predict(model, s.image);
    const auto stem = std::filesystem::path(s.filename).stem().string();
    std::ofstream svg(out_dir / (stem + ".svg"), std::ios::binary);
    if (!svg) throw Error("cannot write " + (out_dir / (stem + ".svg")).string());
    svg << render_svg(s.image, trace, scale);
    const auto r = region_rows(s.filename, s.image, trace);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  std::ofstream csv(out_dir / "regions.csv", std::ios::binary);
  if (!csv) throw Error("cannot write " + (out_dir / "regions.csv").string());
  csv << regions_csv(rows);
}

}  // namespace rma
