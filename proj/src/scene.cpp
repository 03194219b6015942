#include "nlos/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "nlos/lct_operator.hpp"
#include "nlos/parallel.hpp"
#include "nlos/rng.hpp"

namespace nlos {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct VoxelIndex {
    int x, y, z;
    bool inside;
};

VoxelIndex nearest_voxel(const ScanGrid& grid, const std::array<double, 3>& pos) {
    const double fx = (pos[0] + grid.wall_width_m / 2.0) / grid.lateral_pitch() - 0.5;
    const double fy = (pos[1] + grid.wall_width_m / 2.0) / grid.lateral_pitch() - 0.5;
    const double fz = pos[2] / grid.depth_pitch();
    const int ix = static_cast<int>(std::lround(fx));
    const int iy = static_cast<int>(std::lround(fy));
    const int iz = static_cast<int>(std::lround(fz));
    const bool inside = ix >= 0 && ix < grid.scan_res && iy >= 0 && iy < grid.scan_res && iz >= 0 &&
                        iz < grid.depth_res;
    return {ix, iy, iz, inside};
}

std::string surfel_str(const Surfel& s) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "(%.6g, %.6g, %.6g)", s.position[0], s.position[1],
                  s.position[2]);
    return buf;
}

}  // namespace

void SurfelScene::validate(const ScanGrid* frustum) const {
    for (const Surfel& s : surfels) {
        const double n2 = s.normal[0] * s.normal[0] + s.normal[1] * s.normal[1] +
                          s.normal[2] * s.normal[2];
        if (std::fabs(n2 - 1.0) > 2e-9)
            throw std::invalid_argument("SurfelScene: non-unit normal at " + surfel_str(s));
        if (!(s.albedo >= 0.0))
            throw std::invalid_argument("SurfelScene: negative albedo at " + surfel_str(s));
        if (frustum && !nearest_voxel(*frustum, s.position).inside)
            throw std::invalid_argument("SurfelScene: surfel outside frustum at " + surfel_str(s));
    }
}

std::string SurfelScene::to_csv() const {
    std::string out = "x,y,z,nx,ny,nz,albedo\n";
    char buf[256];
    for (const Surfel& s : surfels) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      s.position[0], s.position[1], s.position[2], s.normal[0], s.normal[1],
                      s.normal[2], s.albedo);
        out += buf;
    }
    return out;
}

SurfelScene make_t_plane(const ScanGrid& grid, const SceneParams& params) {
    SurfelScene scene;
    const double s = params.size * grid.wall_width_m;
    const double bar_bottom = s / 2.0 - 0.25 * s;  // bar fills the top quarter
    const double stem_half = 0.125 * s;            // stem is a quarter of the cell wide
    for (int i = 0; i < grid.scan_res; ++i) {
        const double x = grid.lateral_pos(i);
        for (int j = 0; j < grid.scan_res; ++j) {
            const double y = grid.lateral_pos(j);
            if (std::fabs(x) > s / 2.0 || std::fabs(y) > s / 2.0) continue;
            const bool bar = y >= bar_bottom;
            const bool stem = !bar && std::fabs(x) <= stem_half;
            if (!bar && !stem) continue;
            scene.surfels.push_back({{x, y, params.depth}, {0.0, 0.0, -1.0}, params.albedo});
        }
    }
    return scene;
}

SurfelScene make_inclined_plane(const ScanGrid& grid, const SceneParams& params) {
    SurfelScene scene;
    const double s = params.size * grid.wall_width_m;
    const double phi = params.angle_deg * kPi / 180.0;
    const double tan_phi = std::tan(phi);
    for (int i = 0; i < grid.scan_res; ++i) {
        const double x = grid.lateral_pos(i);
        if (std::fabs(x) > s / 2.0) continue;
        const double z = params.depth + tan_phi * x;
        if (z <= 0.0 || z >= grid.max_depth()) continue;
        for (int j = 0; j < grid.scan_res; ++j) {
            const double y = grid.lateral_pos(j);
            if (std::fabs(y) > s / 2.0) continue;
            scene.surfels.push_back(
                {{x, y, z}, {std::sin(phi), 0.0, -std::cos(phi)}, params.albedo});
        }
    }
    return scene;
}

SurfelScene make_sphere_cap(const ScanGrid& grid, const SceneParams& params) {
    SurfelScene scene;
    const double r = params.radius;
    const double cap_lateral = std::min(params.size * grid.wall_width_m / 2.0, 0.9 * r);
    const std::array<double, 3> center = {0.0, 0.0, params.depth + r};
    for (int i = 0; i < grid.scan_res; ++i) {
        const double x = grid.lateral_pos(i);
        for (int j = 0; j < grid.scan_res; ++j) {
            const double y = grid.lateral_pos(j);
            const double l2 = x * x + y * y;
            if (l2 > cap_lateral * cap_lateral) continue;
            const double z = center[2] - std::sqrt(r * r - l2);
            scene.surfels.push_back({{x, y, z},
                                     {(x - center[0]) / r, (y - center[1]) / r, (z - center[2]) / r},
                                     params.albedo});
        }
    }
    return scene;
}

SurfelScene make_single_surfel(const ScanGrid& grid, const SceneParams& params) {
    SurfelScene scene;
    const int mid = grid.scan_res / 2;
    const int k = std::clamp(static_cast<int>(std::lround(params.depth / grid.depth_pitch())), 1,
                             grid.depth_res - 1);
    scene.surfels.push_back({{grid.lateral_pos(mid), grid.lateral_pos(mid), grid.depth_pos(k)},
                             {0.0, 0.0, -1.0},
                             params.albedo});
    return scene;
}

SurfelScene make_dot_grid(const ScanGrid& grid, const SceneParams& params) {
    SurfelScene scene;
    if (params.dots < 1) throw std::invalid_argument("dot-grid: dots must be >= 1");
    const double s = params.size * grid.wall_width_m;
    const int m = params.dots;
    for (int a = 0; a < m; ++a) {
        for (int b = 0; b < m; ++b) {
            const double fx = m == 1 ? 0.0 : -s / 2.0 + s * a / (m - 1);
            const double fy = m == 1 ? 0.0 : -s / 2.0 + s * b / (m - 1);
            // snap to the nearest lateral voxel center
            const auto vi = nearest_voxel(grid, {fx, fy, params.depth});
            scene.surfels.push_back({{grid.lateral_pos(std::clamp(vi.x, 0, grid.scan_res - 1)),
                                      grid.lateral_pos(std::clamp(vi.y, 0, grid.scan_res - 1)),
                                      params.depth},
                                     {0.0, 0.0, -1.0},
                                     params.albedo});
        }
    }
    return scene;
}

SurfelScene build_scene(const std::string& name, const ScanGrid& grid, const SceneParams& params) {
    SurfelScene scene;
    if (name == "t-plane")
        scene = make_t_plane(grid, params);
    else if (name == "inclined-plane")
        scene = make_inclined_plane(grid, params);
    else if (name == "sphere-cap")
        scene = make_sphere_cap(grid, params);
    else if (name == "single-surfel")
        scene = make_single_surfel(grid, params);
    else if (name == "dot-grid")
        scene = make_dot_grid(grid, params);
    else
        throw std::invalid_argument("unknown scene '" + name + "'");
    scene.validate(&grid);
    return scene;
}

std::vector<std::string> scene_names() {
    return {"t-plane", "inclined-plane", "sphere-cap", "single-surfel", "dot-grid"};
}

DirectionalAlbedoVolume rasterize_scene(const SurfelScene& scene, const ScanGrid& grid) {
    DirectionalAlbedoVolume rho(grid);
    for (const Surfel& s : scene.surfels) {
        const VoxelIndex vi = nearest_voxel(grid, s.position);
        if (!vi.inside)
            throw std::invalid_argument("rasterize_scene: surfel outside frustum at " +
                                        surfel_str(s));
        for (int c = 0; c < 3; ++c) rho.at(c, vi.x, vi.y, vi.z) += s.albedo * s.normal[c];
    }
    return rho;
}

TransientVolume render_transients(const SurfelScene& scene, const ScanGrid& grid,
                                  bool clamp_cosine) {
    scene.validate();
    return brute_force_forward(std::span<const Surfel>(scene.surfels), grid, clamp_cosine);
}

void NoiseSpec::validate() const {
    if (!(peak_photons > 0.0)) throw std::invalid_argument("NoiseSpec: peak_photons must be > 0");
    if (gaussian_sigma < 0.0) throw std::invalid_argument("NoiseSpec: gaussian_sigma must be >= 0");
}

TransientVolume apply_noise(const TransientVolume& tau_clean, const NoiseSpec& spec) {
    spec.validate();
    double max_val = 0.0;
    for (double v : tau_clean.data()) {
        if (v < 0.0) throw std::invalid_argument("apply_noise: negative input bin");
        max_val = std::max(max_val, v);
    }
    const double scale = max_val > 0.0 ? spec.peak_photons / max_val : 1.0;

    TransientVolume out(tau_clean.grid());
    const auto& src = tau_clean.data();
    auto& dst = out.mutable_data();
    const std::int64_t n = static_cast<std::int64_t>(src.size());
    detail::parallel_for_impl(0, n, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) {
            CounterRng shot = CounterRng::substream(spec.seed, static_cast<std::uint64_t>(i), 0);
            double counts = shot.poisson(scale * src[i]);
            if (spec.gaussian_sigma > 0.0) {
                CounterRng read = CounterRng::substream(spec.seed, static_cast<std::uint64_t>(i), 1);
                counts += spec.gaussian_sigma * read.normal();
            }
            dst[i] = counts / scale;
        }
    });
    return out;
}

}  // namespace nlos
