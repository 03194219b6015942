#pragma once

#include <cstdint>
#include <stdexcept>

namespace nlos {

/// Geometry and time discretization shared by the scan wall and the
/// reconstruction volume.
///
/// The time axis is stored as optical path length in meters (round trip),
/// so `bin_width` equals c * dt. Datasets that quote temporal resolution in
/// picoseconds convert through `light_speed`.
///
/// Conventions fixed here and used everywhere else:
///   - the relay wall is the plane z = 0, the hidden scene lives at z > 0;
///   - scan points and voxel lateral centers coincide:
///       x_i = (i + 0.5) * lateral_pitch - wall_width / 2;
///   - depth voxel centers sit at z_k = k * depth_pitch;
///   - time bin j is centered on round-trip path j * bin_width, i.e. one-way
///     radius j * bin_width / 2.
struct ScanGrid {
    double wall_width_m = 1.0;  ///< side of the square scan area, meters
    int scan_res = 2;           ///< scan points per side (N_s)
    double bin_width = 1.0;     ///< time bin as optical path length, meters
    int num_bins = 2;           ///< temporal bins (N_t)
    int depth_res = 2;          ///< reconstruction depth voxels (N_z)
    double light_speed = 1.0;   ///< meters per second; 1 for normalized units

    ScanGrid() = default;
    ScanGrid(double wall_width_m_, int scan_res_, double bin_width_, int num_bins_,
             int depth_res_, double light_speed_ = 1.0)
        : wall_width_m(wall_width_m_),
          scan_res(scan_res_),
          bin_width(bin_width_),
          num_bins(num_bins_),
          depth_res(depth_res_),
          light_speed(light_speed_) {
        validate();
    }

    void validate() const {
        if (!(wall_width_m > 0.0)) throw std::invalid_argument("ScanGrid: wall_width_m must be > 0");
        if (!(bin_width > 0.0)) throw std::invalid_argument("ScanGrid: bin_width must be > 0");
        if (scan_res < 2) throw std::invalid_argument("ScanGrid: scan_res must be >= 2");
        if (num_bins < 2) throw std::invalid_argument("ScanGrid: num_bins must be >= 2");
        if (depth_res < 2) throw std::invalid_argument("ScanGrid: depth_res must be >= 2");
        if (!(light_speed > 0.0)) throw std::invalid_argument("ScanGrid: light_speed must be > 0");
    }

    /// Maximum reconstructable one-way depth (round-trip time budget).
    double max_depth() const { return num_bins * bin_width / 2.0; }
    double depth_pitch() const { return max_depth() / depth_res; }
    double lateral_pitch() const { return wall_width_m / scan_res; }
    /// Pitch of the squared-depth (u = z^2) grid used by the cone transform.
    double u_pitch() const { return max_depth() * max_depth() / depth_res; }

    double lateral_pos(int i) const { return (i + 0.5) * lateral_pitch() - wall_width_m / 2.0; }
    double depth_pos(int k) const { return k * depth_pitch(); }

    bool operator==(const ScanGrid&) const = default;
};

}  // namespace nlos
