#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rma/attention.hpp"
#include "rma/dataset.hpp"
#include "rma/model.hpp"

namespace rma {

/// Stroke colour of region k (1-based), cycling through a fixed palette.
const char* region_color(std::size_t k);

/// SVG of the image raster (one rect per pixel, `scale` units each) with the
/// boxes of regions 1..K drawn on top. Output is a pure function of the inputs.
std::string render_svg(const Tensor& image, const EpisodeTrace& trace, std::size_t scale = 8);

struct RegionRow {
  std::string image;
  std::size_t region = 0;
  TransformParams params;
  PixelBox box;
};

std::vector<RegionRow> region_rows(const std::string& image_name, const Tensor& image,
                                   const EpisodeTrace& trace);

/// "image,region,scale_x,scale_y,shift_x,shift_y,x0,y0,x1,y1".
std::string regions_csv(const std::vector<RegionRow>& rows);

/// One `<stem>.svg` per sample plus `regions.csv` in `out_dir`.
void write_visualizations(const Model<float>& model, const std::vector<SyntheticSample>& samples,
                          const std::filesystem::path& out_dir, std::size_t scale = 8);

}  // namespace rma
