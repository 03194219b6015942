#include <doctest.h>

#include <cmath>

#include "nlos/scene.hpp"

using namespace nlos;

TEST_CASE("rasterize: single surfel fills exactly one voxel with albedo * normal") {
    ScanGrid g(0.6, 16, 0.04, 32, 32);
    SurfelScene scene;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    scene.surfels.push_back({{g.lateral_pos(5), g.lateral_pos(9), g.depth_pos(12)},
                             {inv_sqrt2, 0.0, -inv_sqrt2},
                             2.0});
    DirectionalAlbedoVolume rho = rasterize_scene(scene, g);

    int nonzero = 0;
    for (int x = 0; x < 16; ++x)
        for (int y = 0; y < 16; ++y)
            for (int z = 0; z < 32; ++z)
                if (rho.vector_norm(x, y, z) > 0.0) ++nonzero;
    CHECK(nonzero == 1);
    CHECK(rho.at(0, 5, 9, 12) == doctest::Approx(2.0 * inv_sqrt2));
    CHECK(rho.at(1, 5, 9, 12) == 0.0);
    CHECK(rho.at(2, 5, 9, 12) == doctest::Approx(-2.0 * inv_sqrt2));
}

TEST_CASE("rasterize: two surfels in one voxel sum their vectors") {
    ScanGrid g(0.6, 16, 0.04, 32, 32);
    SurfelScene scene;
    scene.surfels.push_back({{g.lateral_pos(5), g.lateral_pos(5), g.depth_pos(10)}, {0, 0, -1}, 1.0});
    scene.surfels.push_back({{g.lateral_pos(5), g.lateral_pos(5), g.depth_pos(10)}, {1, 0, 0}, 0.5});
    DirectionalAlbedoVolume rho = rasterize_scene(scene, g);
    CHECK(rho.at(0, 5, 5, 10) == doctest::Approx(0.5));
    CHECK(rho.at(2, 5, 5, 10) == doctest::Approx(-1.0));
}

TEST_CASE("rasterize: surfel outside the frustum names the offender") {
    ScanGrid g(0.6, 16, 0.04, 32, 32);
    SurfelScene scene;
    scene.surfels.push_back({{5.0, 0.0, 0.3}, {0, 0, -1}, 1.0});
    CHECK_THROWS_WITH_AS(rasterize_scene(scene, g), doctest::Contains("outside frustum"),
                         std::invalid_argument);
}

TEST_CASE("t-plane builder matches the analytic letter mask") {
    ScanGrid g(1.0, 32, 1.0 / 16.0, 64, 32);  // 32^3 voxels
    SceneParams params;
    params.depth = 0.5;
    params.size = 0.7;
    SurfelScene scene = make_t_plane(g, params);
    DirectionalAlbedoVolume rho = rasterize_scene(scene, g);

    const int k = static_cast<int>(std::lround(0.5 / g.depth_pitch()));
    const double s = params.size * g.wall_width_m;
    int mask_count = 0;
    for (int i = 0; i < 32; ++i) {
        const double x = g.lateral_pos(i);
        for (int j = 0; j < 32; ++j) {
            const double y = g.lateral_pos(j);
            const bool in_square = std::fabs(x) <= s / 2.0 && std::fabs(y) <= s / 2.0;
            const bool bar = in_square && y >= s / 2.0 - 0.25 * s;
            const bool stem = in_square && !bar && std::fabs(x) <= 0.125 * s;
            const bool expect = bar || stem;
            if (expect) ++mask_count;
            for (int z = 0; z < 32; ++z) {
                const bool nonzero = rho.vector_norm(i, j, z) > 0.0;
                CHECK(nonzero == (expect && z == k));
            }
        }
    }
    CHECK(mask_count > 0);
    CHECK(mask_count == static_cast<int>(scene.surfels.size()));
}

TEST_CASE("inclined plane has the right tilt and unit normals") {
    ScanGrid g(0.6, 16, 0.05, 40, 32);
    SceneParams params;
    params.depth = 0.5;
    params.angle_deg = 30.0;
    params.size = 0.5;
    SurfelScene scene = make_inclined_plane(g, params);
    REQUIRE(!scene.surfels.empty());
    scene.validate(&g);
    const double tan30 = std::tan(30.0 * 3.14159265358979323846 / 180.0);
    for (const auto& s : scene.surfels) {
        CHECK(s.position[2] ==
              doctest::Approx(params.depth + tan30 * s.position[0]).epsilon(1e-12));
        CHECK(s.normal[0] == doctest::Approx(0.5).epsilon(1e-12));            // sin 30
        CHECK(s.normal[2] == doctest::Approx(-std::sqrt(3.0) / 2).epsilon(1e-12));  // -cos 30
    }
}

TEST_CASE("sphere cap normals point from the surface toward the wall side") {
    ScanGrid g(0.6, 16, 0.05, 40, 32);
    SceneParams params;
    params.depth = 0.35;
    params.radius = 0.3;
    params.size = 0.5;
    SurfelScene scene = make_sphere_cap(g, params);
    REQUIRE(!scene.surfels.empty());
    scene.validate(&g);
    for (const auto& s : scene.surfels) {
        CHECK(s.normal[2] < 0.0);
        CHECK(s.position[2] >= params.depth - 1e-12);
    }
}

TEST_CASE("grid convergence: halving the voxel pitch moves a surfel at most one cell") {
    ScanGrid coarse(0.6, 16, 0.04, 32, 32);
    ScanGrid fine(0.6, 32, 0.02, 64, 64);
    SceneParams params;
    params.depth = 0.37;
    SurfelScene scene = make_single_surfel(coarse, params);
    DirectionalAlbedoVolume rc = rasterize_scene(scene, coarse);
    DirectionalAlbedoVolume rf = rasterize_scene(scene, fine);

    auto argmax = [](const DirectionalAlbedoVolume& v) {
        std::array<int, 3> best{0, 0, 0};
        double top = -1.0;
        const ScanGrid& g = v.grid();
        for (int x = 0; x < g.scan_res; ++x)
            for (int y = 0; y < g.scan_res; ++y)
                for (int z = 0; z < g.depth_res; ++z)
                    if (v.vector_norm(x, y, z) > top) {
                        top = v.vector_norm(x, y, z);
                        best = {x, y, z};
                    }
        return best;
    };
    const auto c = argmax(rc);
    const auto f = argmax(rf);
    // a coarse cell maps onto two fine cells in each axis
    CHECK(std::abs(f[0] - 2 * c[0]) <= 1);
    CHECK(std::abs(f[1] - 2 * c[1]) <= 1);
    CHECK(std::abs(f[2] - 2 * c[2]) <= 1);
}

TEST_CASE("render_transients: empty scene, peak bin, albedo linearity") {
    ScanGrid g(0.6, 16, 0.0025, 512, 64);

    SurfelScene empty;
    TransientVolume zero = render_transients(empty, g);
    for (double v : zero.data()) CHECK(v == 0.0);

    SceneParams params;
    params.depth = 0.5;
    SurfelScene one = make_single_surfel(g, params);
    TransientVolume tau = render_transients(one, g);
    const int mid = 8;
    int peak = 0;
    double best = -1.0;
    for (int j = 0; j < g.num_bins; ++j)
        if (tau.at(mid, mid, j) > best) {
            best = tau.at(mid, mid, j);
            peak = j;
        }
    CHECK(peak == 400);  // round(2 * 0.5 / 0.0025)

    SurfelScene doubled = one;
    for (auto& s : doubled.surfels) s.albedo *= 2.0;
    TransientVolume tau2 = render_transients(doubled, g);
    for (std::size_t i = 0; i < tau.size(); ++i)
        CHECK(tau2.data()[i] == doctest::Approx(2.0 * tau.data()[i]).epsilon(1e-12));
}

TEST_CASE("apply_noise: determinism, zero input, large-eta limit") {
    ScanGrid g(0.6, 8, 0.01, 64, 16);
    SceneParams params;
    params.depth = 0.25;
    TransientVolume clean = render_transients(make_dot_grid(g, params), g);

    SUBCASE("same seed twice is bit identical") {
        NoiseSpec spec;
        spec.seed = 7;
        TransientVolume a = apply_noise(clean, spec);
        TransientVolume b = apply_noise(clean, spec);
        CHECK(a.data() == b.data());
        spec.seed = 8;
        TransientVolume c = apply_noise(clean, spec);
        CHECK(a.data() != c.data());
    }

    SUBCASE("zero volume with zero read noise stays zero") {
        TransientVolume zero(g);
        NoiseSpec spec;
        spec.gaussian_sigma = 0.0;
        TransientVolume out = apply_noise(zero, spec);
        for (double v : out.data()) CHECK(v == 0.0);
    }

    SUBCASE("zero volume with read noise gives unit-scale gaussian values") {
        TransientVolume zero(g);
        NoiseSpec spec;
        spec.gaussian_sigma = 2.0;
        spec.seed = 5;
        TransientVolume out = apply_noise(zero, spec);
        double sum2 = 0.0;
        for (double v : out.data()) sum2 += v * v;
        const double sd = std::sqrt(sum2 / static_cast<double>(out.size()));
        CHECK(sd == doctest::Approx(2.0).epsilon(0.1));
    }

    SUBCASE("negative bins are rejected") {
        TransientVolume bad(g);
        bad.at(0, 0, 0) = -1.0;
        CHECK_THROWS_AS(apply_noise(bad, NoiseSpec{}), std::invalid_argument);
    }

    SUBCASE("eta 1e9 with no read noise reproduces the clean volume") {
        NoiseSpec spec;
        spec.peak_photons = 1e9;
        spec.gaussian_sigma = 0.0;
        spec.seed = 11;
        TransientVolume out = apply_noise(clean, spec);
        double diff = 0.0, base = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double d = out.data()[i] - clean.data()[i];
            diff += d * d;
            base += clean.data()[i] * clean.data()[i];
        }
        CHECK(std::sqrt(diff / base) < 1e-3);
    }
}

TEST_CASE("apply_noise: mean preservation over 200 seeds") {
    ScanGrid g(0.6, 8, 0.02, 32, 16);
    TransientVolume smooth(g);
    for (int x = 0; x < 8; ++x)
        for (int y = 0; y < 8; ++y)
            for (int j = 0; j < 32; ++j)
                smooth.at(x, y, j) = 1.0 + std::sin(0.3 * x) * std::cos(0.2 * y) * 0.5 +
                                     0.5 * std::exp(-std::pow((j - 16.0) / 6.0, 2));

    NoiseSpec spec;
    spec.peak_photons = 100.0;
    spec.gaussian_sigma = 1.0;
    std::vector<double> mean(smooth.size(), 0.0);
    const int seeds = 200;
    for (int s = 0; s < seeds; ++s) {
        spec.seed = 1000 + s;
        TransientVolume out = apply_noise(smooth, spec);
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += out.data()[i] / seeds;
    }
    double diff = 0.0, base = 0.0;
    for (std::size_t i = 0; i < mean.size(); ++i) {
        const double d = mean[i] - smooth.data()[i];
        diff += d * d;
        base += smooth.data()[i] * smooth.data()[i];
    }
    CHECK(std::sqrt(diff / base) < 0.05);
}

TEST_CASE("apply_noise: per-bin variance scales like 1/eta") {
    ScanGrid g(0.6, 8, 0.02, 32, 16);
    TransientVolume smooth(g);
    for (int x = 0; x < 8; ++x)
        for (int y = 0; y < 8; ++y)
            for (int j = 0; j < 32; ++j) smooth.at(x, y, j) = 0.5 + 0.02 * x + 0.01 * j;

    const std::vector<double> etas = {10.0, 100.0, 1000.0};
    std::vector<double> log_var;
    const std::size_t probe = smooth.index(4, 4, 16);
    for (double eta : etas) {
        NoiseSpec spec;
        spec.peak_photons = eta;
        spec.gaussian_sigma = 0.0;
        const int seeds = 400;
        double sum = 0.0, sum2 = 0.0;
        for (int s = 0; s < seeds; ++s) {
            spec.seed = 5000 + s;
            TransientVolume out = apply_noise(smooth, spec);
            const double v = out.data()[probe];
            sum += v;
            sum2 += v * v;
        }
        const double m = sum / seeds;
        log_var.push_back(std::log10(sum2 / seeds - m * m));
    }
    // least-squares slope of log variance vs log eta
    const std::vector<double> lx = {1.0, 2.0, 3.0};
    const double mx = 2.0;
    double my = (log_var[0] + log_var[1] + log_var[2]) / 3.0;
    double num = 0.0, den = 0.0;
    for (int i = 0; i < 3; ++i) {
        num += (lx[i] - mx) * (log_var[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    const double slope = num / den;
    CHECK(std::fabs(slope + 1.0) <= 0.15);
}

TEST_CASE("scene registry and CSV export") {
    ScanGrid g(0.6, 16, 0.04, 32, 32);
    SceneParams params;
    params.depth = 0.4;
    for (const auto& name : scene_names()) {
        SurfelScene scene = build_scene(name, g, params);
        CHECK(!scene.surfels.empty());
        const std::string csv = scene.to_csv();
        CHECK(csv.rfind("x,y,z,nx,ny,nz,albedo\n", 0) == 0);
    }
    CHECK_THROWS_AS(build_scene("nope", g, params), std::invalid_argument);
}
