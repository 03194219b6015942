#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nlos/grid.hpp"
#include "nlos/surfel.hpp"
#include "nlos/volume.hpp"

namespace nlos {

/// Ground-truth scene as a list of oriented surfels.
struct SurfelScene {
    std::vector<Surfel> surfels;

    /// Checks unit normals (1e-9), nonnegative albedo and, if a grid is
    /// given, that every surfel rasterizes inside the reconstruction
    /// frustum.
    void validate(const ScanGrid* frustum = nullptr) const;

    /// CSV export, one "x,y,z,nx,ny,nz,albedo" row per surfel.
    std::string to_csv() const;
};

/// Parameters of the named parametric scenes.
struct SceneParams {
    double depth = 0.5;      ///< plane depth / cap apex depth, meters
    double size = 0.6;       ///< lateral extent as a fraction of the wall width
    double angle_deg = 30.0; ///< inclination of the tilted plane
    double radius = 0.25;    ///< sphere radius, meters
    int dots = 4;            ///< dots per side of the dot grid
    double albedo = 1.0;
};

/// Letter "T" in a flat wall-facing plane: a horizontal bar across the top
/// quarter of the letter cell plus a centered stem of a quarter of the cell
/// width. Surfels sit at lateral voxel centers.
SurfelScene make_t_plane(const ScanGrid& grid, const SceneParams& params);

/// Plane tilted about the y axis: z(x) = depth + tan(angle) * x, normal
/// (sin(angle), 0, -cos(angle)).
SurfelScene make_inclined_plane(const ScanGrid& grid, const SceneParams& params);

/// Wall-facing cap of a sphere whose apex sits at `depth`.
SurfelScene make_sphere_cap(const ScanGrid& grid, const SceneParams& params);

/// Single wall-facing surfel at the voxel center nearest the lateral middle.
SurfelScene make_single_surfel(const ScanGrid& grid, const SceneParams& params);

/// dots x dots grid of single-surfel dots in a wall-facing plane.
SurfelScene make_dot_grid(const ScanGrid& grid, const SceneParams& params);

/// Scene registry by name: t-plane, inclined-plane, sphere-cap,
/// single-surfel, dot-grid.
SurfelScene build_scene(const std::string& name, const ScanGrid& grid, const SceneParams& params);
std::vector<std::string> scene_names();

/// Deposits albedo * normal of every surfel into its nearest voxel
/// (accumulating). Throws listing the offending surfel if one falls outside
/// the frustum.
DirectionalAlbedoVolume rasterize_scene(const SurfelScene& scene, const ScanGrid& grid);

/// Physical renderer: direct-summation single-bounce transport with clamped
/// cosine shading by default.
TransientVolume render_transients(const SurfelScene& scene, const ScanGrid& grid,
                                  bool clamp_cosine = true);

/// Poisson + Gaussian measurement noise.
/// The clean volume is scaled so its brightest bin has expectation
/// peak_photons, Poisson counts are drawn, Gaussian read noise of
/// gaussian_sigma counts is added, and the result is scaled back to the
/// clean volume's units. peak_photons plays the role of exposure time.
struct NoiseSpec {
    double peak_photons = 100.0;
    double gaussian_sigma = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Deterministic given the seed (per-bin counter RNG substreams); an
/// all-zero input yields pure Gaussian noise at unit scale. Negative input
/// bins are rejected.
TransientVolume apply_noise(const TransientVolume& tau_clean, const NoiseSpec& spec);

}  // namespace nlos
