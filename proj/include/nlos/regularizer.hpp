#pragma once

#include <array>
#include <vector>

#include "nlos/volume.hpp"

namespace nlos {

/// Cubic neighborhood window for the structure-sparsity penalty.
/// window_voxels (L) must be a perfect cube of an odd side; L = 1 degenerates
/// to the voxelwise "local" variant. Weights follow a Gaussian of the offset
/// distance in voxel units.
struct WindowSpec {
    int window_voxels = 27;
    double sigma = 0.5;

    int side() const;
    int half() const { return (side() - 1) / 2; }
    void validate() const;

    bool operator==(const WindowSpec&) const = default;
};

/// Window offsets in a fixed raster order (x slowest, z fastest), each in
/// [-half, half]^3.
std::vector<std::array<int, 3>> window_offsets(const WindowSpec& spec);

/// Unit-sum Gaussian weights w_l = exp(-|offset_l|^2 / (2 sigma^2)) / norm.
/// Weights depend only on the offset radius, so they are invariant under the
/// 48 cube symmetries; the center offset carries the maximum.
std::vector<double> gaussian_window_weights(const WindowSpec& spec);

/// 3 x L matrix whose column l holds sqrt(w_l) times the directional-albedo
/// vector of the l-th window neighbor. Column-major storage.
struct PatchMatrix {
    int cols = 0;
    std::vector<double> m;  // m[3 * col + row]

    double at(int row, int col) const { return m[3 * static_cast<std::size_t>(col) + row]; }
    double& at(int row, int col) { return m[3 * static_cast<std::size_t>(col) + row]; }
};

/// Builds the patch matrix at voxel (x, y, z); out-of-volume neighbors
/// contribute zero columns.
PatchMatrix extract_patch_matrix(const DirectionalAlbedoVolume& rho, int x, int y, int z,
                                 const WindowSpec& spec);

/// Singular values (descending) and the matching left singular vectors of a
/// patch matrix, from the eigendecomposition of the 3x3 Gram matrix.
struct PatchFactorization {
    std::array<double, 3> values{0.0, 0.0, 0.0};
    std::array<std::array<double, 3>, 3> vectors{};  // vectors[i] pairs with values[i]
};

PatchFactorization patch_factorize(const PatchMatrix& patch);

/// Sum of singular values.
double patch_nuclear_norm(const PatchMatrix& patch);

/// Structure-sparsity penalty: sum over all voxels of the patch nuclear norm.
double ss_value(const DirectionalAlbedoVolume& rho, const WindowSpec& spec);

/// Local variant (L = 1): sum of voxel vector norms.
double local_ss_value(const DirectionalAlbedoVolume& rho);

/// Componentwise l1 penalty value.
double l1_value(const DirectionalAlbedoVolume& rho);

/// Singular-value soft thresholding: shrinks each singular value by theta
/// (to zero when it falls below), keeping the singular subspaces.
PatchMatrix svt_patch(const PatchMatrix& patch, double theta);

/// Approximate proximal map of theta * ss_value: per-voxel SVT of every
/// window patch followed by weight-renormalized averaging of the overlapping
/// estimates. Exact for L = 1; theta = 0 returns the input unchanged.
DirectionalAlbedoVolume prox_ss(const DirectionalAlbedoVolume& rho, double theta,
                                const WindowSpec& spec);

/// Exact proximal map of theta * local_ss_value: voxelwise group soft
/// thresholding v -> v * max(0, 1 - theta / |v|).
DirectionalAlbedoVolume prox_local_ss(const DirectionalAlbedoVolume& rho, double theta);

/// Exact proximal map of theta * l1_value: componentwise soft thresholding.
DirectionalAlbedoVolume prox_l1(const DirectionalAlbedoVolume& rho, double theta);

}  // namespace nlos
