#pragma once

// Synthetic multi-label shapes dataset.
//
// Layout on disk:
//   <root>/images/<name>.ppm   binary P6, 8-bit
//   <root>/manifest.csv        one line per image: "<name>.ppm,<label>;<label>;..."
//                              with 0-based class indices, no header
//   <root>/boxes.csv           diagnostics only: "filename,class,x0,y0,x1,y1"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rma/objective.hpp"
#include "rma/spatial_transformer.hpp"
#include "rma/tensor.hpp"

namespace rma {

inline constexpr std::size_t kMaxShapeClasses = 8;

/// Class index -> shape name.
const char* shape_name(std::size_t cls);

struct GroundTruthBox {
  std::size_t cls = 0;
  PixelBox box;
};

struct SyntheticSample {
  std::string filename;
  /// [3 x H x W], values in [0, 1], quantized to 8 bits.
  Tensor image;
  LabelVector labels;
  std::vector<GroundTruthBox> boxes;
};

struct GeneratorConfig {
  std::uint64_t seed = 1;
  std::size_t samples = 600;
  std::size_t image_size = 32;
  std::size_t classes = 4;
  double noise = 0.1;

  void validate() const;
};

/// Deterministic in-memory generation. Each image holds 1-4 shapes of distinct
/// classes on a uniform-noise background.
std::vector<SyntheticSample> synthesize(const GeneratorConfig& config);

void write_dataset(const std::filesystem::path& root, const std::vector<SyntheticSample>& samples);

/// Reads `<root>/manifest.csv` (or a manifest path directly). With `classes` = 0
/// the class count is inferred from the largest label. Images are not checked
/// against the backbone here.
std::vector<SyntheticSample> load_dataset(const std::filesystem::path& root, std::size_t classes = 0);

/// Reads `<root>/boxes.csv` into the matching samples, if present.
void load_boxes(const std::filesystem::path& root, std::vector<SyntheticSample>& samples);

void write_ppm(const std::filesystem::path& path, const Tensor& image);
Tensor read_ppm(const std::filesystem::path& path);

/// Fraction of samples carrying each class.
std::vector<double> label_marginals(const std::vector<SyntheticSample>& samples, std::size_t classes);

}  // namespace rma
