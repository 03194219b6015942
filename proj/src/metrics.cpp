#include "nlos/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "nlos/parallel.hpp"

namespace nlos {

ReconMaps extract_maps(const DirectionalAlbedoVolume& rho, double mask_threshold) {
    const ScanGrid& g = rho.grid();
    const int n = g.scan_res;
    ReconMaps maps;
    maps.grid = g;
    maps.albedo.assign(static_cast<std::size_t>(n) * n, 0.0);
    maps.depth.assign(static_cast<std::size_t>(n) * n, 0.0);
    maps.normal.assign(3u * n * n, 0.0);
    maps.mask.assign(static_cast<std::size_t>(n) * n, 0);

    parallel_for(0, n, [&](int x) {
        for (int y = 0; y < n; ++y) {
            int best_k = 0;
            double best = -1.0;
            for (int k = 0; k < g.depth_res; ++k) {
                const double v = rho.vector_norm(x, y, k);
                if (v > best) {
                    best = v;
                    best_k = k;
                }
            }
            const std::size_t p = maps.pixel(x, y);
            maps.albedo[p] = best;
            maps.depth[p] = g.depth_pos(best_k);
            if (best > 0.0) {
                for (int c = 0; c < 3; ++c)
                    maps.normal[3 * p + c] = rho.at(c, x, y, best_k) / best;
            }
        }
    });

    double global_max = 0.0;
    for (double v : maps.albedo) global_max = std::max(global_max, v);
    if (global_max > 0.0) {
        for (auto& v : maps.albedo) v /= global_max;
    }
    for (std::size_t p = 0; p < maps.mask.size(); ++p)
        maps.mask[p] = (maps.albedo[p] >= mask_threshold && maps.albedo[p] > 0.0) ? 1 : 0;
    return maps;
}

namespace {

void check_unit_range(const std::vector<double>& m, const char* what) {
    for (double v : m)
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(what) + ": values must lie in [0, 1]");
}

}  // namespace

double psnr(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty()) throw std::invalid_argument("psnr: shape mismatch");
    check_unit_range(a, "psnr");
    check_unit_range(b, "psnr");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

double ssim(const std::vector<double>& a, const std::vector<double>& b, int side) {
    if (side < 11) throw std::invalid_argument("ssim: image side must be >= 11");
    if (a.size() != b.size() || a.size() != static_cast<std::size_t>(side) * side)
        throw std::invalid_argument("ssim: shape mismatch");
    check_unit_range(a, "ssim");
    check_unit_range(b, "ssim");

    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;

    double w[kWin][kWin];
    double wsum = 0.0;
    for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
            const double di = i - (kWin - 1) / 2.0;
            const double dj = j - (kWin - 1) / 2.0;
            w[i][j] = std::exp(-(di * di + dj * dj) / (2.0 * kSigma * kSigma));
            wsum += w[i][j];
        }
    for (auto& row : w)
        for (auto& v : row) v /= wsum;

    const int valid = side - kWin + 1;
    std::vector<double> row_means(valid, 0.0);
    parallel_for(0, valid, [&](int x0) {
        double acc = 0.0;
        for (int y0 = 0; y0 < valid; ++y0) {
            double mu_a = 0.0, mu_b = 0.0;
            for (int i = 0; i < kWin; ++i)
                for (int j = 0; j < kWin; ++j) {
                    const std::size_t p = static_cast<std::size_t>(x0 + i) * side + (y0 + j);
                    mu_a += w[i][j] * a[p];
                    mu_b += w[i][j] * b[p];
                }
            double var_a = 0.0, var_b = 0.0, cov = 0.0;
            for (int i = 0; i < kWin; ++i)
                for (int j = 0; j < kWin; ++j) {
                    const std::size_t p = static_cast<std::size_t>(x0 + i) * side + (y0 + j);
                    const double da = a[p] - mu_a;
                    const double db = b[p] - mu_b;
                    var_a += w[i][j] * da * da;
                    var_b += w[i][j] * db * db;
                    cov += w[i][j] * da * db;
                }
            acc += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
                   ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        }
        row_means[x0] = acc;
    });
    double total = 0.0;
    for (double v : row_means) total += v;
    return total / (static_cast<double>(valid) * valid);
}

AngleStats normal_angle_error(const ReconMaps& recon, const ReconMaps& truth) {
    if (recon.side() != truth.side()) throw std::invalid_argument("normal_angle_error: shape mismatch");
    std::vector<double> angles;
    for (std::size_t p = 0; p < recon.mask.size(); ++p) {
        if (!recon.mask[p] || !truth.mask[p]) continue;
        double dot = 0.0;
        for (int c = 0; c < 3; ++c) dot += recon.normal[3 * p + c] * truth.normal[3 * p + c];
        dot = std::clamp(dot, -1.0, 1.0);
        angles.push_back(std::acos(dot) * 180.0 / 3.14159265358979323846);
    }
    if (angles.empty()) throw std::runtime_error("normal_angle_error: empty intersection mask");

    AngleStats stats;
    stats.pixels = static_cast<int>(angles.size());
    double sum = 0.0;
    for (double v : angles) sum += v;
    stats.mean_deg = sum / static_cast<double>(angles.size());
    std::sort(angles.begin(), angles.end());
    const std::size_t mid = angles.size() / 2;
    stats.median_deg =
        angles.size() % 2 == 1 ? angles[mid] : 0.5 * (angles[mid - 1] + angles[mid]);
    return stats;
}

double depth_rmse(const ReconMaps& recon, const ReconMaps& truth) {
    if (recon.side() != truth.side()) throw std::invalid_argument("depth_rmse: shape mismatch");
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t p = 0; p < recon.mask.size(); ++p) {
        if (!recon.mask[p] || !truth.mask[p]) continue;
        const double d = recon.depth[p] - truth.depth[p];
        acc += d * d;
        ++count;
    }
    if (count == 0) throw std::runtime_error("depth_rmse: empty intersection mask");
    return std::sqrt(acc / static_cast<double>(count));
}

double volume_psnr(const DirectionalAlbedoVolume& recon, const DirectionalAlbedoVolume& truth) {
    if (recon.grid() != truth.grid()) throw std::invalid_argument("volume_psnr: grid mismatch");
    const ScanGrid& g = recon.grid();
    double max_truth = 0.0;
    for (int x = 0; x < g.scan_res; ++x)
        for (int y = 0; y < g.scan_res; ++y)
            for (int k = 0; k < g.depth_res; ++k)
                max_truth = std::max(max_truth, truth.vector_norm(x, y, k));
    if (max_truth == 0.0) throw std::invalid_argument("volume_psnr: truth volume is all zero");
    double mse = 0.0;
    std::size_t count = 0;
    for (int x = 0; x < g.scan_res; ++x)
        for (int y = 0; y < g.scan_res; ++y)
            for (int k = 0; k < g.depth_res; ++k) {
                const double d = (recon.vector_norm(x, y, k) - truth.vector_norm(x, y, k)) / max_truth;
                mse += d * d;
                ++count;
            }
    mse /= static_cast<double>(count);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

}  // namespace nlos
