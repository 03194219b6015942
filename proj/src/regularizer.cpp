#include "nlos/regularizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nlos/parallel.hpp"

namespace nlos {

namespace {

// Cyclic Jacobi eigensolver for a symmetric 3x3 matrix. Eigenvectors come
// out as columns of v, paired with w. Relative off-diagonal tolerance 1e-12,
// at most 30 sweeps.
void jacobi_eigen3(double a[3][3], double w[3], double v[3][3]) {
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) v[i][j] = (i == j) ? 1.0 : 0.0;

    for (int sweep = 0; sweep < 30; ++sweep) {
        const double off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        double fro = off * 2.0;
        for (int i = 0; i < 3; ++i) fro += a[i][i] * a[i][i];
        if (off <= 1e-24 * fro) break;
        static constexpr int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
        for (const auto& pq : pairs) {
            const int p = pq[0], q = pq[1];
            const double apq = a[p][q];
            if (apq == 0.0) continue;
            const double theta = (a[q][q] - a[p][p]) / (2.0 * apq);
            const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                             (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
            const double c = 1.0 / std::sqrt(t * t + 1.0);
            const double s = t * c;
            const int r = 3 - p - q;
            a[p][p] -= t * apq;
            a[q][q] += t * apq;
            a[p][q] = a[q][p] = 0.0;
            const double arp = a[r][p], arq = a[r][q];
            a[r][p] = a[p][r] = c * arp - s * arq;
            a[r][q] = a[q][r] = s * arp + c * arq;
            for (int i = 0; i < 3; ++i) {
                const double vip = v[i][p], viq = v[i][q];
                v[i][p] = c * vip - s * viq;
                v[i][q] = s * vip + c * viq;
            }
        }
    }
    for (int i = 0; i < 3; ++i) w[i] = a[i][i];
}

struct GramFactor {
    double sigma[3];  // descending
    double u[3][3];   // columns paired with sigma
};

GramFactor factor_gram(const PatchMatrix& patch) {
    double g[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    for (int l = 0; l < patch.cols; ++l) {
        const double* col = &patch.m[3 * static_cast<std::size_t>(l)];
        for (int i = 0; i < 3; ++i)
            for (int j = i; j < 3; ++j) g[i][j] += col[i] * col[j];
    }
    g[1][0] = g[0][1];
    g[2][0] = g[0][2];
    g[2][1] = g[1][2];

    double w[3], v[3][3];
    jacobi_eigen3(g, w, v);

    int order[3] = {0, 1, 2};
    std::sort(order, order + 3, [&](int i, int j) { return w[i] > w[j]; });
    GramFactor f;
    for (int i = 0; i < 3; ++i) {
        f.sigma[i] = std::sqrt(std::max(0.0, w[order[i]]));
        for (int r = 0; r < 3; ++r) f.u[r][i] = v[r][order[i]];
    }
    return f;
}

// Applies U diag(factors) U^T to every column of the patch.
PatchMatrix apply_left_spectral(const PatchMatrix& patch, const GramFactor& f,
                                const double factors[3]) {
    double m[3][3];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 3; ++k) acc += f.u[i][k] * factors[k] * f.u[j][k];
            m[i][j] = acc;
        }
    PatchMatrix out;
    out.cols = patch.cols;
    out.m.resize(patch.m.size());
    for (int l = 0; l < patch.cols; ++l) {
        const double* col = &patch.m[3 * static_cast<std::size_t>(l)];
        double* dst = &out.m[3 * static_cast<std::size_t>(l)];
        for (int i = 0; i < 3; ++i)
            dst[i] = m[i][0] * col[0] + m[i][1] * col[1] + m[i][2] * col[2];
    }
    return out;
}

int icbrt(int n) {
    int s = static_cast<int>(std::lround(std::cbrt(static_cast<double>(n))));
    while (s > 0 && s * s * s > n) --s;
    while ((s + 1) * (s + 1) * (s + 1) <= n) ++s;
    return s;
}

}  // namespace

int WindowSpec::side() const {
    const int s = icbrt(window_voxels);
    if (s * s * s != window_voxels || s % 2 == 0)
        throw std::invalid_argument("WindowSpec: window_voxels must be a perfect cube of an odd side");
    return s;
}

void WindowSpec::validate() const {
    (void)side();
    if (!(sigma > 0.0)) throw std::invalid_argument("WindowSpec: sigma must be > 0");
}

std::vector<std::array<int, 3>> window_offsets(const WindowSpec& spec) {
    spec.validate();
    const int h = spec.half();
    std::vector<std::array<int, 3>> offsets;
    offsets.reserve(spec.window_voxels);
    for (int dx = -h; dx <= h; ++dx)
        for (int dy = -h; dy <= h; ++dy)
            for (int dz = -h; dz <= h; ++dz) offsets.push_back({dx, dy, dz});
    return offsets;
}

std::vector<double> gaussian_window_weights(const WindowSpec& spec) {
    const auto offsets = window_offsets(spec);
    std::vector<double> w(offsets.size());
    double sum = 0.0;
    for (std::size_t l = 0; l < offsets.size(); ++l) {
        const auto& o = offsets[l];
        const double d2 = static_cast<double>(o[0]) * o[0] + static_cast<double>(o[1]) * o[1] +
                          static_cast<double>(o[2]) * o[2];
        w[l] = std::exp(-d2 / (2.0 * spec.sigma * spec.sigma));
        sum += w[l];
    }
    for (auto& v : w) v /= sum;
    return w;
}

PatchMatrix extract_patch_matrix(const DirectionalAlbedoVolume& rho, int x, int y, int z,
                                 const WindowSpec& spec) {
    const auto offsets = window_offsets(spec);
    const auto weights = gaussian_window_weights(spec);
    const ScanGrid& g = rho.grid();
    if (x < 0 || x >= g.scan_res || y < 0 || y >= g.scan_res || z < 0 || z >= g.depth_res)
        throw std::invalid_argument("extract_patch_matrix: voxel outside volume");

    PatchMatrix patch;
    patch.cols = static_cast<int>(offsets.size());
    patch.m.assign(3 * offsets.size(), 0.0);
    for (std::size_t l = 0; l < offsets.size(); ++l) {
        const int nx = x + offsets[l][0];
        const int ny = y + offsets[l][1];
        const int nz = z + offsets[l][2];
        if (nx < 0 || nx >= g.scan_res || ny < 0 || ny >= g.scan_res || nz < 0 || nz >= g.depth_res)
            continue;
        const double sw = std::sqrt(weights[l]);
        for (int c = 0; c < 3; ++c) patch.m[3 * l + c] = sw * rho.at(c, nx, ny, nz);
    }
    return patch;
}

PatchFactorization patch_factorize(const PatchMatrix& patch) {
    const GramFactor f = factor_gram(patch);
    PatchFactorization out;
    for (int i = 0; i < 3; ++i) {
        out.values[i] = f.sigma[i];
        for (int r = 0; r < 3; ++r) out.vectors[i][r] = f.u[r][i];
    }
    return out;
}

double patch_nuclear_norm(const PatchMatrix& patch) {
    const GramFactor f = factor_gram(patch);
    return f.sigma[0] + f.sigma[1] + f.sigma[2];
}

PatchMatrix svt_patch(const PatchMatrix& patch, double theta) {
    if (theta < 0.0) throw std::invalid_argument("svt_patch: theta must be >= 0");
    if (theta == 0.0) return patch;
    const GramFactor f = factor_gram(patch);
    double factors[3];
    for (int i = 0; i < 3; ++i) {
        // 0/0 guard: a vanished singular value stays zero.
        factors[i] = f.sigma[i] > 0.0 ? std::max(f.sigma[i] - theta, 0.0) / f.sigma[i] : 0.0;
    }
    return apply_left_spectral(patch, f, factors);
}

double ss_value(const DirectionalAlbedoVolume& rho, const WindowSpec& spec) {
    spec.validate();
    const ScanGrid& g = rho.grid();
    const auto offsets = window_offsets(spec);
    const auto weights = gaussian_window_weights(spec);
    std::vector<double> sqrt_w(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) sqrt_w[i] = std::sqrt(weights[i]);

    std::vector<double> partial(g.scan_res, 0.0);
    parallel_for(0, g.scan_res, [&](int x) {
        PatchMatrix patch;
        patch.cols = static_cast<int>(offsets.size());
        patch.m.assign(3 * offsets.size(), 0.0);
        double acc = 0.0;
        for (int y = 0; y < g.scan_res; ++y) {
            for (int z = 0; z < g.depth_res; ++z) {
                std::fill(patch.m.begin(), patch.m.end(), 0.0);
                for (std::size_t l = 0; l < offsets.size(); ++l) {
                    const int nx = x + offsets[l][0];
                    const int ny = y + offsets[l][1];
                    const int nz = z + offsets[l][2];
                    if (nx < 0 || nx >= g.scan_res || ny < 0 || ny >= g.scan_res || nz < 0 ||
                        nz >= g.depth_res)
                        continue;
                    for (int c = 0; c < 3; ++c) patch.m[3 * l + c] = sqrt_w[l] * rho.at(c, nx, ny, nz);
                }
                acc += patch_nuclear_norm(patch);
            }
        }
        partial[x] = acc;
    });
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

double local_ss_value(const DirectionalAlbedoVolume& rho) {
    const ScanGrid& g = rho.grid();
    double total = 0.0;
    for (int x = 0; x < g.scan_res; ++x)
        for (int y = 0; y < g.scan_res; ++y)
            for (int z = 0; z < g.depth_res; ++z) total += rho.vector_norm(x, y, z);
    return total;
}

double l1_value(const DirectionalAlbedoVolume& rho) {
    double total = 0.0;
    for (double v : rho.data()) total += std::fabs(v);
    return total;
}

DirectionalAlbedoVolume prox_local_ss(const DirectionalAlbedoVolume& rho, double theta) {
    if (theta < 0.0) throw std::invalid_argument("prox_local_ss: theta must be >= 0");
    const ScanGrid& g = rho.grid();
    DirectionalAlbedoVolume out(g);
    parallel_for(0, g.scan_res, [&](int x) {
        for (int y = 0; y < g.scan_res; ++y) {
            for (int z = 0; z < g.depth_res; ++z) {
                const double n = rho.vector_norm(x, y, z);
                const double f = (n > theta) ? (1.0 - theta / n) : 0.0;
                for (int c = 0; c < 3; ++c) out.at(c, x, y, z) = f * rho.at(c, x, y, z);
            }
        }
    });
    return out;
}

DirectionalAlbedoVolume prox_l1(const DirectionalAlbedoVolume& rho, double theta) {
    if (theta < 0.0) throw std::invalid_argument("prox_l1: theta must be >= 0");
    DirectionalAlbedoVolume out(rho.grid());
    const auto& src = rho.data();
    auto& dst = out.mutable_data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double v = src[i];
        dst[i] = (v > theta) ? v - theta : (v < -theta ? v + theta : 0.0);
    }
    return out;
}

DirectionalAlbedoVolume prox_ss(const DirectionalAlbedoVolume& rho, double theta,
                                const WindowSpec& spec) {
    if (theta < 0.0) throw std::invalid_argument("prox_ss: theta must be >= 0");
    spec.validate();
    if (theta == 0.0) return rho;
    if (spec.window_voxels == 1) return prox_local_ss(rho, theta);

    const ScanGrid& g = rho.grid();
    const int n = g.scan_res;
    const int nz = g.depth_res;
    const int side = spec.side();
    const int h = spec.half();
    const auto offsets = window_offsets(spec);
    const auto weights = gaussian_window_weights(spec);
    const int ncols = static_cast<int>(offsets.size());
    std::vector<double> sqrt_w(weights.size()), inv_sqrt_w(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        sqrt_w[i] = std::sqrt(weights[i]);
        inv_sqrt_w[i] = 1.0 / sqrt_w[i];
    }

    // Ring buffer of shrunk patches for `side` consecutive window-center
    // slices; slice z lives in ring[z % side].
    const std::size_t slice_patches = static_cast<std::size_t>(n) * n;
    std::vector<std::vector<double>> ring(side,
                                          std::vector<double>(slice_patches * 3 * ncols, 0.0));
    DirectionalAlbedoVolume out(g);

    auto compute_slice = [&](int zc) {
        auto& slab = ring[zc % side];
        parallel_for(0, n, [&](int x) {
            PatchMatrix patch;
            patch.cols = ncols;
            patch.m.assign(3 * static_cast<std::size_t>(ncols), 0.0);
            for (int y = 0; y < n; ++y) {
                std::fill(patch.m.begin(), patch.m.end(), 0.0);
                for (int l = 0; l < ncols; ++l) {
                    const int ax = x + offsets[l][0];
                    const int ay = y + offsets[l][1];
                    const int az = zc + offsets[l][2];
                    if (ax < 0 || ax >= n || ay < 0 || ay >= n || az < 0 || az >= nz) continue;
                    for (int c = 0; c < 3; ++c)
                        patch.m[3 * static_cast<std::size_t>(l) + c] = sqrt_w[l] * rho.at(c, ax, ay, az);
                }
                const PatchMatrix shrunk = svt_patch(patch, theta);
                std::copy(shrunk.m.begin(), shrunk.m.end(),
                          slab.begin() + (static_cast<std::size_t>(x) * n + y) * 3 * ncols);
            }
        });
    };

    auto emit_slice = [&](int zo) {
        parallel_for(0, n, [&](int x) {
            for (int y = 0; y < n; ++y) {
                double acc[3] = {0.0, 0.0, 0.0};
                double wsum = 0.0;
                for (int l = 0; l < ncols; ++l) {
                    // window center whose column l lands on this voxel
                    const int cx = x - offsets[l][0];
                    const int cy = y - offsets[l][1];
                    const int cz = zo - offsets[l][2];
                    if (cx < 0 || cx >= n || cy < 0 || cy >= n || cz < 0 || cz >= nz) continue;
                    const double* est =
                        &ring[cz % side][(static_cast<std::size_t>(cx) * n + cy) * 3 * ncols + 3 * l];
                    const double scale = weights[l] * inv_sqrt_w[l];
                    acc[0] += scale * est[0];
                    acc[1] += scale * est[1];
                    acc[2] += scale * est[2];
                    wsum += weights[l];
                }
                for (int c = 0; c < 3; ++c) out.at(c, x, y, zo) = acc[c] / wsum;
            }
        });
    };

    for (int zc = 0; zc < nz + h; ++zc) {
        if (zc < nz) compute_slice(zc);
        const int zo = zc - h;
        if (zo >= 0 && zo < nz) emit_slice(zo);
    }
    return out;
}

}  // namespace nlos
