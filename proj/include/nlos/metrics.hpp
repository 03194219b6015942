#pragma once

#include <cstdint>
#include <vector>

#include "nlos/volume.hpp"

namespace nlos {

/// 2D evaluation maps derived from a directional volume. For each lateral
/// pixel the depth bin with the largest vector norm defines depth and
/// normal; the albedo map is the corresponding maximum norm normalized to
/// [0, 1] by the global maximum.
struct ReconMaps {
    ScanGrid grid;
    std::vector<double> albedo;        ///< side * side, in [0, 1]
    std::vector<double> depth;         ///< meters
    std::vector<double> normal;        ///< 3 per pixel, unit where mask set, else 0
    std::vector<std::uint8_t> mask;    ///< albedo >= threshold

    int side() const { return grid.scan_res; }
    std::size_t pixel(int x, int y) const {
        return static_cast<std::size_t>(x) * grid.scan_res + y;
    }
};

ReconMaps extract_maps(const DirectionalAlbedoVolume& rho, double mask_threshold = 0.1);

/// 10 log10(1 / MSE) for maps with unit dynamic range; +inf on identical
/// inputs. Inputs must share a shape and lie in [0, 1].
double psnr(const std::vector<double>& a, const std::vector<double>& b);

/// Mean local SSIM with the canonical 11x11 Gaussian window (sigma 1.5) and
/// constants C1 = 0.01^2, C2 = 0.03^2 for unit dynamic range. Windows are
/// evaluated where they fit entirely inside the image; side must be >= 11.
double ssim(const std::vector<double>& a, const std::vector<double>& b, int side);

struct AngleStats {
    double median_deg = 0.0;
    double mean_deg = 0.0;
    int pixels = 0;
};

/// Angles between recon and truth normals over the intersection of both
/// masks. Throws if the intersection is empty.
AngleStats normal_angle_error(const ReconMaps& recon, const ReconMaps& truth);

/// RMSE of the depth maps over the intersection mask, meters.
double depth_rmse(const ReconMaps& recon, const ReconMaps& truth);

/// Volume-level PSNR of the voxel vector-norm fields, both normalized by
/// the truth's global maximum norm.
double volume_psnr(const DirectionalAlbedoVolume& recon, const DirectionalAlbedoVolume& truth);

}  // namespace nlos
