#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "nlos/grid.hpp"
#include "nlos/surfel.hpp"
#include "nlos/volume.hpp"

namespace nlos {

struct OperatorOptions {
    /// Exponent p of the attenuation compensation a(v) = v^(p/2) applied on
    /// the measurement side. The default is the value selected by the
    /// brute-force calibration sweep over p in {2..5}.
    int attenuation_exponent = 4;
    /// Footprint of the cone shell along the squared-depth axis, in u bins.
    /// 1 deposits each lateral offset into the single nearest bin; larger
    /// values spread it with a triangular profile for anti-aliasing.
    int shell_half_width = 1;

    bool operator==(const OperatorOptions&) const = default;
};

/// Field resampled onto the cone-transformed axes: either a volume over
/// (x, y, u = z^2) or a measurement over (x, y, v = (tc/2)^2). Both axes use
/// depth_res bins of pitch grid.u_pitch(), row major, last axis fastest.
struct TransformedVolume {
    ScanGrid grid;
    std::vector<double> data;

    std::size_t index(int x, int y, int k) const {
        return (static_cast<std::size_t>(x) * grid.scan_res + y) * grid.depth_res + k;
    }
};

/// Attenuation-compensated resampling of a histogram onto the v = (tc/2)^2
/// grid: out(x, y, v_k) = a(v_k) * interp(tau; t = 2 sqrt(v_k) / c) with
/// a(v) = v^(p/2). Linear interpolation, zero extension.
TransformedVolume transform_measurement(const TransientVolume& tau, int attenuation_exponent = 4);

/// Undoes transform_measurement with the reciprocal attenuation factor
/// (the v = 0 bin maps to 0). Inverse of the forward up to resampling error.
TransientVolume inverse_transform_measurement(const TransformedVolume& tv,
                                              int attenuation_exponent = 4);

/// The four cone kernels on the (lateral, lateral, squared-depth) offset
/// grid, lateral size (2 N_s - 1)^2, u size depth_res.
///
/// h_s is the scalar shell kernel, normalized to unit absolute sum; h_x and
/// h_y carry the lateral direction factors (odd in their own offset), h_z is
/// the negated shell (the scene-to-wall direction has negative z). The
/// pre-normalization absolute sum is kept in norm_gain so operators can
/// restore the physical scale.
class ConeKernelSet {
  public:
    ConeKernelSet(const ScanGrid& grid, const OperatorOptions& opts);

    int scan_res() const { return scan_res_; }
    int depth_res() const { return depth_res_; }
    double norm_gain() const { return norm_gain_; }

    /// Kernel entry accessors; a, b are lateral offsets in [-(N-1), N-1],
    /// s is the u bin.
    double hs(int a, int b, int s) const { return hs_[index(a, b, s)]; }
    double hx(int a, int b, int s) const { return hx_[index(a, b, s)]; }
    double hy(int a, int b, int s) const { return hy_[index(a, b, s)]; }
    double hz(int a, int b, int s) const { return hz_[index(a, b, s)]; }

    const std::vector<double>& hs_data() const { return hs_; }

    std::size_t index(int a, int b, int s) const {
        const int n = scan_res_;
        return (static_cast<std::size_t>(a + n - 1) * (2 * n - 1) + (b + n - 1)) * depth_res_ + s;
    }

    struct Spectra {
        std::array<int, 3> pad_shape{0, 0, 0};
        // Half spectra of h_x, h_y, h_z embedded at the origin of the padded
        // grid, in that order.
        std::array<std::vector<std::complex<double>>, 3> directional;
    };

    /// Frequency-domain kernel transforms for the given padded shape,
    /// computed on first use and cached.
    const Spectra& spectra(const std::array<int, 3>& pad_shape) const;

  private:
    int scan_res_;
    int depth_res_;
    double norm_gain_;
    std::vector<double> hs_, hx_, hy_, hz_;

    mutable std::mutex cache_mutex_;
    // Append-only so returned references stay valid if a second padded
    // shape is ever requested.
    mutable std::vector<std::unique_ptr<Spectra>> cache_;
};

ConeKernelSet build_cone_kernels(const ScanGrid& grid, const OperatorOptions& opts = {});

/// Minimal linear-operator view used by spectral estimation and the solvers;
/// both callbacks must be exact adjoints of each other.
struct LinearOperator {
    std::size_t domain_size = 0;
    std::size_t range_size = 0;
    std::function<void(const double*, double*)> apply;          // y = H x
    std::function<void(const double*, double*)> apply_adjoint;  // x = H^T y
};

/// Largest-eigenvalue estimate of H^T H by power iteration from a fixed-seed
/// random start, multiplied by a 1.05 safety factor.
double estimate_lipschitz(const LinearOperator& op, int iters, std::uint64_t seed = 0x6e6c6f73u);

/// One frequency bin of the joint Wiener deconvolution of a 1x3 convolution
/// block: x_d = conj(k_d) y / (sum_d' |k_d'|^2 + 1/alpha).
inline std::array<std::complex<double>, 3> wiener_block_solve(
    const std::array<std::complex<double>, 3>& k, std::complex<double> y, double alpha) {
    const double denom = std::norm(k[0]) + std::norm(k[1]) + std::norm(k[2]) + 1.0 / alpha;
    return {std::conj(k[0]) * y / denom, std::conj(k[1]) * y / denom,
            std::conj(k[2]) * y / denom};
}

/// Discrete confocal DLCT forward model H and its exact adjoint.
///
/// forward() chains: per-component resampling of the volume onto the u = z^2
/// axis (mass-preserving two-tap scatter; the z component additionally
/// carries the depth direction factor z), three shift-invariant 3D
/// convolutions with the cone kernels via zero-padded FFT, and resampling of
/// the v axis back to time bins with the reciprocal attenuation weight.
/// adjoint() is the exact transpose of every stage.
class DlctOperator {
  public:
    explicit DlctOperator(const ScanGrid& grid, const OperatorOptions& opts = {});
    ~DlctOperator();
    DlctOperator(const DlctOperator&) = delete;
    DlctOperator& operator=(const DlctOperator&) = delete;

    const ScanGrid& grid() const { return grid_; }
    const OperatorOptions& options() const { return opts_; }
    const ConeKernelSet& kernels() const { return kernels_; }

    TransientVolume forward(const DirectionalAlbedoVolume& rho) const;
    DirectionalAlbedoVolume adjoint(const TransientVolume& tau) const;

    /// Power-iteration bound on the squared spectral norm; cached per
    /// iteration count (the estimate is deterministic).
    double lipschitz(int iters = 30) const;

    /// Compensated-domain model used by the iterative solvers.
    ///
    /// The raw operator's spectrum is dominated by the near-wall attenuation
    /// compensation (1/r^p over the full time range spans many orders of
    /// magnitude), which makes gradient methods on the raw residual
    /// numerically useless. The deconvolution is therefore solved where the
    /// model is the plain convolution: conv_forward maps the volume to the
    /// physical-scale field on the (x, y, v) grid, and the matching data
    /// term is transform_measurement(tau). Both sides of forward() remain
    /// the authoritative raw-measurement model.
    std::vector<double> conv_forward(const DirectionalAlbedoVolume& rho) const;
    DirectionalAlbedoVolume conv_adjoint(const std::vector<double>& vt) const;
    /// a(v)-weighted resampling of the measurement onto the v grid.
    std::vector<double> compensated_measurement(const TransientVolume& tau) const;
    std::size_t conv_range_size() const;
    /// Spectral bound of the compensated-domain normal operator.
    double conv_lipschitz(int iters = 30) const;
    LinearOperator conv_linear_operator() const;

    /// Closed-form Wiener deconvolution of the transformed measurement with
    /// per-frequency joint inversion of the three-kernel block, followed by
    /// per-component inverse resampling to (x, y, z).
    DirectionalAlbedoVolume wiener_inverse(const TransientVolume& tau, double alpha) const;

    LinearOperator as_linear_operator() const;

    std::size_t domain_size() const;
    std::size_t range_size() const;

  private:
    struct Impl;
    ScanGrid grid_;
    OperatorOptions opts_;
    ConeKernelSet kernels_;
    std::unique_ptr<Impl> impl_;

    mutable std::mutex lipschitz_mutex_;
    mutable int lipschitz_iters_ = -1;
    mutable double lipschitz_value_ = 0.0;
    mutable int conv_lipschitz_iters_ = -1;
    mutable double conv_lipschitz_value_ = 0.0;
};

/// Direct-summation transient renderer used as the physical oracle.
///
/// For every (scene point, scan point) pair with distance r and unit
/// direction w from the scene point to the scan point, deposits
/// dot(v, w) / r^4 (v = albedo * normal) into time bin round(2 r / (c dt)).
/// With clamp_cosine the shading is max(0, dot(n, w)) * albedo / r^4.
/// Cost O(N_scene * N_s^2); intended for small grids and oracle checks.
TransientVolume brute_force_forward(std::span<const Surfel> scene, const ScanGrid& grid,
                                    bool clamp_cosine);
TransientVolume brute_force_forward(const DirectionalAlbedoVolume& rho, bool clamp_cosine);

/// Nested-loop replica of forward(): identical resampling stages, direct
/// space-domain convolution instead of FFT. Must match forward() to near
/// machine precision. Enforces a small-grid cap (scan_res^2 * depth_res
/// <= 4096 voxels).
TransientVolume discrete_conv_oracle(const DirectionalAlbedoVolume& rho,
                                     const ConeKernelSet& kernels,
                                     const OperatorOptions& opts = {});

}  // namespace nlos
