#include "nlos/lct_operator.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "nlos/fft.hpp"
#include "nlos/parallel.hpp"
#include "nlos/rng.hpp"

namespace nlos {

namespace {

double ipow(double base, int e) {
    double r = 1.0;
    for (int i = 0; i < e; ++i) r *= base;
    return r;
}

// Geometry shared by every stage of the operator pipeline.
struct ConeGeometry {
    int n_scan, n_bins, n_depth;
    double lateral_pitch, depth_pitch, u_pitch, bin_width;
    int p_exp;
    double gain;  // norm_gain * bin_width / u_pitch, restores physical scale

    ConeGeometry(const ScanGrid& g, int attenuation_exponent, double norm_gain)
        : n_scan(g.scan_res),
          n_bins(g.num_bins),
          n_depth(g.depth_res),
          lateral_pitch(g.lateral_pitch()),
          depth_pitch(g.depth_pitch()),
          u_pitch(g.u_pitch()),
          bin_width(g.bin_width),
          p_exp(attenuation_exponent),
          gain(norm_gain * g.bin_width / g.u_pitch()) {}

    std::size_t u_index(int x, int y, int m) const {
        return (static_cast<std::size_t>(x) * n_scan + y) * n_depth + m;
    }
};

// Two-tap deposit position of depth voxel k on the u = z^2 grid.
struct UTap {
    int m0;
    double frac;
};

UTap u_tap(const ConeGeometry& geo, int k) {
    const double z = k * geo.depth_pitch;
    const double f = z * z / geo.u_pitch;
    int m0 = static_cast<int>(f);
    if (m0 > geo.n_depth - 2) m0 = geo.n_depth - 2;  // k = n_depth-1 lands just below the top bin
    return {m0, f - m0};
}

// Per-component weight folded into the volume-side resampling: the depth
// channel carries the z factor of the scene-to-wall direction.
double channel_weight(const ConeGeometry& geo, int component, int k) {
    return component == 2 ? k * geo.depth_pitch : 1.0;
}

// rho (one component) -> field on the u grid, mass-preserving scatter.
void resample_z_to_u(const ConeGeometry& geo, const DirectionalAlbedoVolume& rho, int component,
                     std::vector<double>& out) {
    out.assign(static_cast<std::size_t>(geo.n_scan) * geo.n_scan * geo.n_depth, 0.0);
    parallel_for(0, geo.n_scan, [&](int x) {
        for (int y = 0; y < geo.n_scan; ++y) {
            for (int k = 0; k < geo.n_depth; ++k) {
                const double val = rho.at(component, x, y, k) * channel_weight(geo, component, k);
                if (val == 0.0) continue;
                const UTap t = u_tap(geo, k);
                out[geo.u_index(x, y, t.m0)] += val * (1.0 - t.frac);
                out[geo.u_index(x, y, t.m0 + 1)] += val * t.frac;
            }
        }
    });
}

// Exact transpose of resample_z_to_u.
void resample_u_to_z_adjoint(const ConeGeometry& geo, const std::vector<double>& ut, int component,
                             DirectionalAlbedoVolume& rho) {
    parallel_for(0, geo.n_scan, [&](int x) {
        for (int y = 0; y < geo.n_scan; ++y) {
            for (int k = 0; k < geo.n_depth; ++k) {
                const UTap t = u_tap(geo, k);
                const double v = ut[geo.u_index(x, y, t.m0)] * (1.0 - t.frac) +
                                 ut[geo.u_index(x, y, t.m0 + 1)] * t.frac;
                rho.at(component, x, y, k) = v * channel_weight(geo, component, k);
            }
        }
    });
}

// Interpolation tap of time bin j on the v = (tc/2)^2 grid, with the
// reciprocal attenuation a(v) = r^p and the physical gain. Bin 0 sits at
// v = 0 where the attenuation vanishes; it carries no signal.
struct VTap {
    int m0;
    double frac;
    double scale;
};

VTap v_tap(const ConeGeometry& geo, int j) {
    const double r = j * geo.bin_width / 2.0;
    const double v = r * r;
    if (j == 0) return {0, 0.0, 0.0};
    const double f = v / geo.u_pitch;
    const int m0 = static_cast<int>(f);
    return {m0, f - m0, geo.gain / ipow(r, geo.p_exp)};
}

// Transformed-domain field on the v grid -> time histogram.
TransientVolume measurement_from_v(const ConeGeometry& geo, const ScanGrid& grid,
                                   const std::vector<double>& vt) {
    TransientVolume tau(grid);
    parallel_for(0, geo.n_scan, [&](int x) {
        for (int y = 0; y < geo.n_scan; ++y) {
            for (int j = 0; j < geo.n_bins; ++j) {
                const VTap t = v_tap(geo, j);
                if (t.scale == 0.0) continue;
                double v = 0.0;
                if (t.m0 < geo.n_depth) v += vt[geo.u_index(x, y, t.m0)] * (1.0 - t.frac);
                if (t.m0 + 1 < geo.n_depth) v += vt[geo.u_index(x, y, t.m0 + 1)] * t.frac;
                tau.at(x, y, j) = v * t.scale;
            }
        }
    });
    return tau;
}

// Exact transpose of measurement_from_v.
void measurement_to_v_adjoint(const ConeGeometry& geo, const TransientVolume& tau,
                              std::vector<double>& vt) {
    vt.assign(static_cast<std::size_t>(geo.n_scan) * geo.n_scan * geo.n_depth, 0.0);
    parallel_for(0, geo.n_scan, [&](int x) {
        for (int y = 0; y < geo.n_scan; ++y) {
            for (int j = 0; j < geo.n_bins; ++j) {
                const VTap t = v_tap(geo, j);
                if (t.scale == 0.0) continue;
                const double val = tau.at(x, y, j) * t.scale;
                if (t.m0 < geo.n_depth) vt[geo.u_index(x, y, t.m0)] += val * (1.0 - t.frac);
                if (t.m0 + 1 < geo.n_depth) vt[geo.u_index(x, y, t.m0 + 1)] += val * t.frac;
            }
        }
    });
}

std::array<int, 3> padded_shape(int n_scan, int n_depth) {
    const int lateral = Fft3D::good_size(3 * n_scan - 2);
    const int axial = Fft3D::good_size(2 * n_depth - 1);
    return {lateral, lateral, axial};
}

}  // namespace

// ---------------------------------------------------------------------------
// Measurement transform (standalone resampling utilities)

TransformedVolume transform_measurement(const TransientVolume& tau, int attenuation_exponent) {
    const ScanGrid& g = tau.grid();
    ConeGeometry geo(g, attenuation_exponent, 1.0);
    TransformedVolume out{g, std::vector<double>(
                                 static_cast<std::size_t>(g.scan_res) * g.scan_res * g.depth_res, 0.0)};
    parallel_for(0, g.scan_res, [&](int x) {
        for (int y = 0; y < g.scan_res; ++y) {
            for (int m = 0; m < g.depth_res; ++m) {
                const double v = m * geo.u_pitch;
                if (v == 0.0) continue;  // a(0) = 0
                const double r = std::sqrt(v);
                // fractional time bin of round-trip path 2r
                const double f = 2.0 * r / g.bin_width;
                const int j0 = static_cast<int>(f);
                const double frac = f - j0;
                double val = 0.0;
                if (j0 < g.num_bins) val += tau.at(x, y, j0) * (1.0 - frac);
                if (j0 + 1 < g.num_bins) val += tau.at(x, y, j0 + 1) * frac;
                out.data[out.index(x, y, m)] = val * ipow(r, attenuation_exponent);
            }
        }
    });
    return out;
}

TransientVolume inverse_transform_measurement(const TransformedVolume& tv, int attenuation_exponent) {
    const ScanGrid& g = tv.grid;
    ConeGeometry geo(g, attenuation_exponent, 1.0);
    TransientVolume tau(g);
    parallel_for(0, g.scan_res, [&](int x) {
        for (int y = 0; y < g.scan_res; ++y) {
            for (int j = 1; j < g.num_bins; ++j) {
                const double r = j * g.bin_width / 2.0;
                const double f = r * r / geo.u_pitch;
                const int m0 = static_cast<int>(f);
                const double frac = f - m0;
                double val = 0.0;
                if (m0 < g.depth_res) val += tv.data[tv.index(x, y, m0)] * (1.0 - frac);
                if (m0 + 1 < g.depth_res) val += tv.data[tv.index(x, y, m0 + 1)] * frac;
                tau.at(x, y, j) = val / ipow(r, attenuation_exponent);
            }
        }
    });
    return tau;
}

// ---------------------------------------------------------------------------
// Kernels

ConeKernelSet::ConeKernelSet(const ScanGrid& grid, const OperatorOptions& opts)
    : scan_res_(grid.scan_res), depth_res_(grid.depth_res) {
    if (opts.shell_half_width < 1)
        throw std::invalid_argument("OperatorOptions: shell_half_width must be >= 1");
    const int n = scan_res_;
    const int z = depth_res_;
    const std::size_t count = static_cast<std::size_t>(2 * n - 1) * (2 * n - 1) * z;
    hs_.assign(count, 0.0);
    hx_.assign(count, 0.0);
    hy_.assign(count, 0.0);
    hz_.assign(count, 0.0);

    const double dxy = grid.lateral_pitch();
    const double du = grid.u_pitch();
    double total = 0.0;
    for (int a = -(n - 1); a <= n - 1; ++a) {
        for (int b = -(n - 1); b <= n - 1; ++b) {
            const double s_phys = (static_cast<double>(a) * a + static_cast<double>(b) * b) * dxy * dxy;
            const double f = s_phys / du;
            if (opts.shell_half_width == 1) {
                const int sbin = static_cast<int>(std::llround(f));
                if (sbin >= z) continue;
                hs_[index(a, b, sbin)] += 1.0;
                total += 1.0;
            } else {
                // Triangular footprint of the given half width (in u bins).
                const int w = opts.shell_half_width;
                const int lo = std::max(0, static_cast<int>(std::ceil(f - w)));
                const int hi = std::min(z - 1, static_cast<int>(std::floor(f + w)));
                for (int sbin = lo; sbin <= hi; ++sbin) {
                    const double weight = 1.0 - std::abs(sbin - f) / w;
                    if (weight <= 0.0) continue;
                    hs_[index(a, b, sbin)] += weight;
                    total += weight;
                }
            }
        }
    }
    if (total <= 0.0) throw std::runtime_error("ConeKernelSet: empty shell");
    norm_gain_ = total;

    for (int a = -(n - 1); a <= n - 1; ++a) {
        for (int b = -(n - 1); b <= n - 1; ++b) {
            for (int s = 0; s < z; ++s) {
                const std::size_t i = index(a, b, s);
                hs_[i] /= total;
                hx_[i] = hs_[i] * (a * dxy);
                hy_[i] = hs_[i] * (b * dxy);
                hz_[i] = -hs_[i];
            }
        }
    }
}

const ConeKernelSet::Spectra& ConeKernelSet::spectra(const std::array<int, 3>& pad_shape) const {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    for (const auto& entry : cache_)
        if (entry->pad_shape == pad_shape) return *entry;
    auto spectra = std::make_unique<Spectra>();
    spectra->pad_shape = pad_shape;
    Fft3D fft(pad_shape);
    std::vector<double> work(fft.real_size());
    const int lateral = 2 * scan_res_ - 1;
    const std::vector<double>* kernels[3] = {&hx_, &hy_, &hz_};
    for (int d = 0; d < 3; ++d) {
        std::fill(work.begin(), work.end(), 0.0);
        for (int ia = 0; ia < lateral; ++ia)
            for (int ib = 0; ib < lateral; ++ib)
                std::memcpy(&work[(static_cast<std::size_t>(ia) * pad_shape[1] + ib) * pad_shape[2]],
                            &(*kernels[d])[(static_cast<std::size_t>(ia) * lateral + ib) * depth_res_],
                            sizeof(double) * depth_res_);
        spectra->directional[d].resize(fft.complex_size());
        fft.forward(work.data(), spectra->directional[d].data());
    }
    cache_.push_back(std::move(spectra));
    return *cache_.back();
}

ConeKernelSet build_cone_kernels(const ScanGrid& grid, const OperatorOptions& opts) {
    return ConeKernelSet(grid, opts);
}

// ---------------------------------------------------------------------------
// Power iteration

double estimate_lipschitz(const LinearOperator& op, int iters, std::uint64_t seed) {
    if (iters < 1) throw std::invalid_argument("estimate_lipschitz: iters must be >= 1");
    std::vector<double> x(op.domain_size);
    CounterRng rng = CounterRng::substream(seed, op.domain_size);
    for (auto& v : x) v = rng.normal();
    double nx = 0.0;
    for (double v : x) nx += v * v;
    nx = std::sqrt(nx);
    if (nx == 0.0) return 0.0;
    for (auto& v : x) v /= nx;

    std::vector<double> y(op.range_size), z(op.domain_size);
    double rayleigh = 0.0;
    for (int it = 0; it < iters; ++it) {
        op.apply(x.data(), y.data());
        op.apply_adjoint(y.data(), z.data());
        double dot = 0.0, nz = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            dot += x[i] * z[i];
            nz += z[i] * z[i];
        }
        rayleigh = dot;
        nz = std::sqrt(nz);
        if (nz == 0.0) return 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) x[i] = z[i] / nz;
    }
    return 1.05 * rayleigh;
}

// ---------------------------------------------------------------------------
// DlctOperator

struct DlctOperator::Impl {
    ConeGeometry geo;
    std::array<int, 3> pad;
    Fft3D fft;

    Impl(const ScanGrid& grid, const OperatorOptions& opts, double norm_gain)
        : geo(grid, opts.attenuation_exponent, norm_gain),
          pad(padded_shape(grid.scan_res, grid.depth_res)),
          fft(pad) {}

    std::size_t pad_index(int x, int y, int k) const {
        return (static_cast<std::size_t>(x) * pad[1] + y) * pad[2] + k;
    }

    // Copies an (n, n, n_depth) field into the zeroed padded buffer with the
    // given lateral offset.
    void embed(const std::vector<double>& field, int lateral_offset, std::vector<double>& work) const {
        std::fill(work.begin(), work.end(), 0.0);
        const int n = geo.n_scan;
        for (int x = 0; x < n; ++x)
            for (int y = 0; y < n; ++y)
                std::memcpy(&work[pad_index(x + lateral_offset, y + lateral_offset, 0)],
                            &field[(static_cast<std::size_t>(x) * n + y) * geo.n_depth],
                            sizeof(double) * geo.n_depth);
    }

    void crop(const std::vector<double>& work, int lateral_offset, std::vector<double>& field) const {
        const int n = geo.n_scan;
        field.resize(static_cast<std::size_t>(n) * n * geo.n_depth);
        for (int x = 0; x < n; ++x)
            for (int y = 0; y < n; ++y)
                std::memcpy(&field[(static_cast<std::size_t>(x) * n + y) * geo.n_depth],
                            &work[pad_index(x + lateral_offset, y + lateral_offset, 0)],
                            sizeof(double) * geo.n_depth);
    }

    // Convolution stage at stored-kernel scale: vt = sum_d h_d * R_z[rho_d].
    std::vector<double> conv_apply(const ConeKernelSet& kernels, const DirectionalAlbedoVolume& rho,
                                   int crop_offset) const {
        const auto& spec = kernels.spectra(pad);
        std::vector<double> work(fft.real_size());
        std::vector<std::complex<double>> acc(fft.complex_size(), {0.0, 0.0});
        std::vector<std::complex<double>> tmp(fft.complex_size());
        std::vector<double> field;
        for (int d = 0; d < 3; ++d) {
            resample_z_to_u(geo, rho, d, field);
            embed(field, 0, work);
            fft.forward(work.data(), tmp.data());
            const auto& kd = spec.directional[d];
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += tmp[i] * kd[i];
        }
        fft.inverse(acc.data(), work.data());
        std::vector<double> vt;
        crop(work, crop_offset, vt);
        return vt;
    }

    // Its exact transpose.
    void conv_apply_adjoint(const ConeKernelSet& kernels, const std::vector<double>& vt,
                            int embed_offset, DirectionalAlbedoVolume& rho) const {
        const auto& spec = kernels.spectra(pad);
        std::vector<double> work(fft.real_size());
        embed(vt, embed_offset, work);
        std::vector<std::complex<double>> yhat(fft.complex_size());
        fft.forward(work.data(), yhat.data());

        std::vector<std::complex<double>> tmp(fft.complex_size());
        std::vector<double> field;
        for (int d = 0; d < 3; ++d) {
            const auto& kd = spec.directional[d];
            for (std::size_t i = 0; i < tmp.size(); ++i) tmp[i] = std::conj(kd[i]) * yhat[i];
            fft.inverse(tmp.data(), work.data());
            crop(work, 0, field);
            resample_u_to_z_adjoint(geo, field, d, rho);
        }
    }
};

DlctOperator::DlctOperator(const ScanGrid& grid, const OperatorOptions& opts)
    : grid_(grid), opts_(opts), kernels_(grid, opts) {
    grid_.validate();
    if (opts.attenuation_exponent < 0)
        throw std::invalid_argument("OperatorOptions: attenuation_exponent must be >= 0");
    impl_ = std::make_unique<Impl>(grid_, opts_, kernels_.norm_gain());
}

DlctOperator::~DlctOperator() = default;

std::size_t DlctOperator::domain_size() const {
    return 3u * static_cast<std::size_t>(grid_.scan_res) * grid_.scan_res * grid_.depth_res;
}

std::size_t DlctOperator::range_size() const {
    return static_cast<std::size_t>(grid_.scan_res) * grid_.scan_res * grid_.num_bins;
}

TransientVolume DlctOperator::forward(const DirectionalAlbedoVolume& rho) const {
    if (rho.grid() != grid_) throw std::invalid_argument("dlct_forward: grid mismatch");
    const std::vector<double> vt = impl_->conv_apply(kernels_, rho, grid_.scan_res - 1);
    return measurement_from_v(impl_->geo, grid_, vt);
}

DirectionalAlbedoVolume DlctOperator::adjoint(const TransientVolume& tau) const {
    if (tau.grid() != grid_) throw std::invalid_argument("dlct_adjoint: grid mismatch");
    std::vector<double> vt;
    measurement_to_v_adjoint(impl_->geo, tau, vt);
    DirectionalAlbedoVolume rho(grid_);
    impl_->conv_apply_adjoint(kernels_, vt, grid_.scan_res - 1, rho);
    return rho;
}

std::size_t DlctOperator::conv_range_size() const {
    return static_cast<std::size_t>(grid_.scan_res) * grid_.scan_res * grid_.depth_res;
}

std::vector<double> DlctOperator::conv_forward(const DirectionalAlbedoVolume& rho) const {
    if (rho.grid() != grid_) throw std::invalid_argument("conv_forward: grid mismatch");
    std::vector<double> vt = impl_->conv_apply(kernels_, rho, grid_.scan_res - 1);
    for (auto& v : vt) v *= impl_->geo.gain;
    return vt;
}

DirectionalAlbedoVolume DlctOperator::conv_adjoint(const std::vector<double>& vt) const {
    if (vt.size() != conv_range_size()) throw std::invalid_argument("conv_adjoint: size mismatch");
    std::vector<double> scaled = vt;
    for (auto& v : scaled) v *= impl_->geo.gain;
    DirectionalAlbedoVolume rho(grid_);
    impl_->conv_apply_adjoint(kernels_, scaled, grid_.scan_res - 1, rho);
    return rho;
}

std::vector<double> DlctOperator::compensated_measurement(const TransientVolume& tau) const {
    if (tau.grid() != grid_) throw std::invalid_argument("compensated_measurement: grid mismatch");
    return transform_measurement(tau, opts_.attenuation_exponent).data;
}

LinearOperator DlctOperator::as_linear_operator() const {
    LinearOperator op;
    op.domain_size = domain_size();
    op.range_size = range_size();
    op.apply = [this](const double* x, double* y) {
        DirectionalAlbedoVolume rho(grid_, std::vector<double>(x, x + domain_size()));
        TransientVolume tau = forward(rho);
        std::copy(tau.data().begin(), tau.data().end(), y);
    };
    op.apply_adjoint = [this](const double* y, double* x) {
        TransientVolume tau(grid_, std::vector<double>(y, y + range_size()));
        DirectionalAlbedoVolume rho = adjoint(tau);
        std::copy(rho.data().begin(), rho.data().end(), x);
    };
    return op;
}

double DlctOperator::lipschitz(int iters) const {
    std::lock_guard<std::mutex> lock(lipschitz_mutex_);
    if (lipschitz_iters_ == iters) return lipschitz_value_;
    lipschitz_value_ = estimate_lipschitz(as_linear_operator(), iters);
    lipschitz_iters_ = iters;
    return lipschitz_value_;
}

LinearOperator DlctOperator::conv_linear_operator() const {
    LinearOperator op;
    op.domain_size = domain_size();
    op.range_size = conv_range_size();
    op.apply = [this](const double* x, double* y) {
        DirectionalAlbedoVolume rho(grid_, std::vector<double>(x, x + domain_size()));
        const std::vector<double> vt = conv_forward(rho);
        std::copy(vt.begin(), vt.end(), y);
    };
    op.apply_adjoint = [this](const double* y, double* x) {
        DirectionalAlbedoVolume rho = conv_adjoint(std::vector<double>(y, y + conv_range_size()));
        std::copy(rho.data().begin(), rho.data().end(), x);
    };
    return op;
}

double DlctOperator::conv_lipschitz(int iters) const {
    std::lock_guard<std::mutex> lock(lipschitz_mutex_);
    if (conv_lipschitz_iters_ == iters) return conv_lipschitz_value_;
    conv_lipschitz_value_ = estimate_lipschitz(conv_linear_operator(), iters);
    conv_lipschitz_iters_ = iters;
    return conv_lipschitz_value_;
}

DirectionalAlbedoVolume DlctOperator::wiener_inverse(const TransientVolume& tau, double alpha) const {
    if (tau.grid() != grid_) throw std::invalid_argument("wiener_inverse: grid mismatch");
    if (!(alpha > 0.0)) throw std::invalid_argument("wiener_inverse: alpha must be > 0");
    const ConeGeometry& geo = impl_->geo;
    const Fft3D& fft = impl_->fft;
    const auto& spec = kernels_.spectra(impl_->pad);

    // Estimate of the transformed-domain convolution output: undo the
    // measurement-side resampling and the physical gain.
    TransformedVolume tv = transform_measurement(tau, opts_.attenuation_exponent);
    for (auto& v : tv.data) v /= geo.gain;

    std::vector<double> work(fft.real_size());
    impl_->embed(tv.data, grid_.scan_res - 1, work);
    std::vector<std::complex<double>> yhat(fft.complex_size());
    fft.forward(work.data(), yhat.data());

    // Per-frequency joint Wiener solve of the 1x3 kernel block. The stored
    // kernels are unit normalized; scale restores the physical operator.
    const double scale = kernels_.norm_gain();
    std::array<std::vector<std::complex<double>>, 3> sol;
    for (auto& s : sol) s.resize(fft.complex_size());
    for (std::size_t i = 0; i < yhat.size(); ++i) {
        const std::array<std::complex<double>, 3> k = {scale * spec.directional[0][i],
                                                       scale * spec.directional[1][i],
                                                       scale * spec.directional[2][i]};
        const auto x = wiener_block_solve(k, yhat[i], alpha);
        sol[0][i] = x[0];
        sol[1][i] = x[1];
        sol[2][i] = x[2];
    }

    DirectionalAlbedoVolume rho(grid_);
    std::vector<double> field;
    for (int d = 0; d < 3; ++d) {
        fft.inverse(sol[d].data(), work.data());
        impl_->crop(work, 0, field);
        // Inverse resampling u -> z per component, undoing the scatter
        // density and the depth channel's direction factor.
        const double undo = 2.0 * geo.depth_pitch / geo.u_pitch;
        parallel_for(0, geo.n_scan, [&](int x) {
            for (int y = 0; y < geo.n_scan; ++y) {
                for (int k = 0; k < geo.n_depth; ++k) {
                    const UTap t = u_tap(geo, k);
                    const double v = field[geo.u_index(x, y, t.m0)] * (1.0 - t.frac) +
                                     field[geo.u_index(x, y, t.m0 + 1)] * t.frac;
                    const double z = k * geo.depth_pitch;
                    rho.at(d, x, y, k) = v * undo * (d == 2 ? 1.0 : z);
                }
            }
        });
    }
    return rho;
}

// ---------------------------------------------------------------------------
// Oracles

TransientVolume brute_force_forward(std::span<const Surfel> scene, const ScanGrid& grid,
                                    bool clamp_cosine) {
    TransientVolume tau(grid);
    const double path_per_bin = grid.bin_width;
    parallel_for(0, grid.scan_res, [&](int p) {
        const double xp = grid.lateral_pos(p);
        for (int q = 0; q < grid.scan_res; ++q) {
            const double yq = grid.lateral_pos(q);
            for (const Surfel& s : scene) {
                const double dx = xp - s.position[0];
                const double dy = yq - s.position[1];
                const double dz = -s.position[2];
                const double r2 = dx * dx + dy * dy + dz * dz;
                if (r2 <= 0.0) continue;
                const double r = std::sqrt(r2);
                const long long bin = std::llround(2.0 * r / path_per_bin);
                if (bin < 0 || bin >= grid.num_bins) continue;
                double shading =
                    (s.normal[0] * dx + s.normal[1] * dy + s.normal[2] * dz) / r;
                if (clamp_cosine) shading = std::max(0.0, shading);
                tau.at(p, q, static_cast<int>(bin)) += s.albedo * shading / (r2 * r2);
            }
        }
    });
    return tau;
}

TransientVolume brute_force_forward(const DirectionalAlbedoVolume& rho, bool clamp_cosine) {
    const ScanGrid& grid = rho.grid();
    TransientVolume tau(grid);
    parallel_for(0, grid.scan_res, [&](int p) {
        const double xp = grid.lateral_pos(p);
        for (int q = 0; q < grid.scan_res; ++q) {
            const double yq = grid.lateral_pos(q);
            for (int i = 0; i < grid.scan_res; ++i) {
                for (int j = 0; j < grid.scan_res; ++j) {
                    for (int k = 0; k < grid.depth_res; ++k) {
                        const double vx = rho.at(0, i, j, k);
                        const double vy = rho.at(1, i, j, k);
                        const double vz = rho.at(2, i, j, k);
                        if (vx == 0.0 && vy == 0.0 && vz == 0.0) continue;
                        const double dx = xp - grid.lateral_pos(i);
                        const double dy = yq - grid.lateral_pos(j);
                        const double dz = -grid.depth_pos(k);
                        const double r2 = dx * dx + dy * dy + dz * dz;
                        if (r2 <= 0.0) continue;
                        const double r = std::sqrt(r2);
                        const long long bin = std::llround(2.0 * r / grid.bin_width);
                        if (bin < 0 || bin >= grid.num_bins) continue;
                        double num = (vx * dx + vy * dy + vz * dz) / r;
                        if (clamp_cosine) num = std::max(0.0, num);
                        tau.at(p, q, static_cast<int>(bin)) += num / (r2 * r2);
                    }
                }
            }
        }
    });
    return tau;
}

TransientVolume discrete_conv_oracle(const DirectionalAlbedoVolume& rho, const ConeKernelSet& kernels,
                                     const OperatorOptions& opts) {
    const ScanGrid& grid = rho.grid();
    const std::size_t voxels = static_cast<std::size_t>(grid.scan_res) * grid.scan_res * grid.depth_res;
    if (voxels > 4096) throw std::invalid_argument("discrete_conv_oracle: grid cap (4096 voxels) exceeded");
    if (kernels.scan_res() != grid.scan_res || kernels.depth_res() != grid.depth_res)
        throw std::invalid_argument("discrete_conv_oracle: kernel/grid mismatch");

    ConeGeometry geo(grid, opts.attenuation_exponent, kernels.norm_gain());
    const int n = grid.scan_res;
    const int zres = grid.depth_res;

    // Shell entries as an explicit sparse list.
    struct ShellEntry {
        int a, b, s;
        double hs;
    };
    std::vector<ShellEntry> shell;
    for (int a = -(n - 1); a <= n - 1; ++a)
        for (int b = -(n - 1); b <= n - 1; ++b)
            for (int s = 0; s < zres; ++s) {
                const double w = kernels.hs(a, b, s);
                if (w != 0.0) shell.push_back({a, b, s, w});
            }

    const double dxy = grid.lateral_pitch();
    std::vector<double> vt(static_cast<std::size_t>(n) * n * zres, 0.0);
    std::vector<double> field;
    for (int d = 0; d < 3; ++d) {
        resample_z_to_u(geo, rho, d, field);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                for (int m = 0; m < zres; ++m) {
                    const double val = field[geo.u_index(i, j, m)];
                    if (val == 0.0) continue;
                    for (const ShellEntry& e : shell) {
                        const int p = i + e.a;
                        const int q = j + e.b;
                        const int k = m + e.s;
                        if (p < 0 || p >= n || q < 0 || q >= n || k >= zres) continue;
                        double factor = e.hs;
                        if (d == 0)
                            factor *= e.a * dxy;
                        else if (d == 1)
                            factor *= e.b * dxy;
                        else
                            factor = -factor;
                        vt[geo.u_index(p, q, k)] += factor * val;
                    }
                }
            }
        }
    }
    return measurement_from_v(geo, grid, vt);
}

}  // namespace nlos
