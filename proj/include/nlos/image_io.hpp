#pragma once

#include <string>
#include <vector>

#include "nlos/metrics.hpp"

namespace nlos {

/// Binary PGM (P5, maxval 255). Values are clamped to [0, 1] and quantized
/// with round half up.
void write_pgm(const std::string& path, const std::vector<double>& gray, int width, int height);

/// Binary PPM (P6, maxval 255) from interleaved rgb triplets in [0, 1].
void write_ppm(const std::string& path, const std::vector<double>& rgb, int width, int height);

/// Figure-style outputs of a map set:
///   albedo.pgm   normalized albedo;
///   normal.ppm   channel c = round(255 * (n_c + 1) / 2), black off-mask;
///   depth.pgm    depth / max_depth, black off-mask.
void write_map_images(const ReconMaps& maps, const std::string& dir);

}  // namespace nlos
