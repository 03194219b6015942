#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>

#include "nlos/regularizer.hpp"
#include "nlos/rng.hpp"

using namespace nlos;

namespace {

Eigen::MatrixXd to_eigen(const PatchMatrix& p) {
    Eigen::MatrixXd m(3, p.cols);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < p.cols; ++c) m(r, c) = p.at(r, c);
    return m;
}

PatchMatrix random_patch(int cols, std::uint64_t seed) {
    PatchMatrix p;
    p.cols = cols;
    p.m.resize(3 * static_cast<std::size_t>(cols));
    CounterRng rng(seed);
    for (auto& v : p.m) v = rng.normal();
    return p;
}

DirectionalAlbedoVolume random_volume(const ScanGrid& g, std::uint64_t seed) {
    DirectionalAlbedoVolume rho(g);
    CounterRng rng(seed);
    for (auto& v : rho.mutable_data()) v = rng.normal();
    return rho;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::fabs(a[i] - b[i]));
    return worst;
}

}  // namespace

TEST_CASE("gaussian window weights: frozen values for sigma 0.5, L 27") {
    WindowSpec spec{27, 0.5};
    const auto w = gaussian_window_weights(spec);
    const auto offsets = window_offsets(spec);
    REQUIRE(w.size() == 27);

    // unnormalized: center 1, face exp(-2), edge exp(-4), corner exp(-6)
    const double norm = 1.0 + 6.0 * std::exp(-2.0) + 12.0 * std::exp(-4.0) + 8.0 * std::exp(-6.0);
    double sum = 0.0;
    for (std::size_t l = 0; l < w.size(); ++l) {
        const auto& o = offsets[l];
        const int d2 = o[0] * o[0] + o[1] * o[1] + o[2] * o[2];
        double expect = 0.0;
        if (d2 == 0) expect = 1.0;
        else if (d2 == 1) expect = std::exp(-2.0);  // ~0.13534
        else if (d2 == 2) expect = std::exp(-4.0);  // ~0.018316
        else expect = std::exp(-6.0);               // ~0.0024788
        CHECK(w[l] == doctest::Approx(expect / norm).epsilon(1e-12));
        sum += w[l];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

    SUBCASE("invariant under the 48 cube symmetries") {
        auto weight_of = [&](int dx, int dy, int dz) {
            for (std::size_t l = 0; l < offsets.size(); ++l)
                if (offsets[l][0] == dx && offsets[l][1] == dy && offsets[l][2] == dz) return w[l];
            FAIL("offset not found");
            return 0.0;
        };
        CHECK(weight_of(1, 0, 0) == weight_of(0, -1, 0));
        CHECK(weight_of(1, 1, 0) == weight_of(0, -1, 1));
        CHECK(weight_of(1, 1, 1) == weight_of(-1, 1, -1));
    }

    SUBCASE("L = 1 gives the single weight 1") {
        const auto w1 = gaussian_window_weights(WindowSpec{1, 0.5});
        REQUIRE(w1.size() == 1);
        CHECK(w1[0] == 1.0);
    }

    SUBCASE("bad specs") {
        CHECK_THROWS_AS(gaussian_window_weights(WindowSpec{27, 0.0}), std::invalid_argument);
        CHECK_THROWS_AS(gaussian_window_weights(WindowSpec{8, 0.5}), std::invalid_argument);
        CHECK_THROWS_AS(gaussian_window_weights(WindowSpec{9, 0.5}), std::invalid_argument);
    }
}

TEST_CASE("extract_patch_matrix") {
    ScanGrid g(1.0, 6, 0.05, 16, 6);
    WindowSpec spec{27, 0.5};
    const auto w = gaussian_window_weights(spec);
    const auto offsets = window_offsets(spec);

    SUBCASE("constant field: every column is sqrt(w_l) v0") {
        DirectionalAlbedoVolume rho(g);
        for (int x = 0; x < 6; ++x)
            for (int y = 0; y < 6; ++y)
                for (int z = 0; z < 6; ++z) {
                    rho.at(0, x, y, z) = 1.0;
                    rho.at(1, x, y, z) = -2.0;
                    rho.at(2, x, y, z) = 0.5;
                }
        PatchMatrix p = extract_patch_matrix(rho, 3, 3, 3, spec);
        for (int l = 0; l < 27; ++l) {
            const double sw = std::sqrt(w[l]);
            CHECK(p.at(0, l) == doctest::Approx(sw * 1.0));
            CHECK(p.at(1, l) == doctest::Approx(sw * -2.0));
            CHECK(p.at(2, l) == doctest::Approx(sw * 0.5));
        }
    }

    SUBCASE("single nonzero center voxel") {
        DirectionalAlbedoVolume rho(g);
        rho.at(0, 3, 3, 3) = 1.0;
        rho.at(1, 3, 3, 3) = 2.0;
        rho.at(2, 3, 3, 3) = 3.0;
        PatchMatrix p = extract_patch_matrix(rho, 3, 3, 3, spec);
        int nonzero_cols = 0;
        for (int l = 0; l < 27; ++l) {
            const bool center = offsets[l][0] == 0 && offsets[l][1] == 0 && offsets[l][2] == 0;
            const bool has = p.at(0, l) != 0.0 || p.at(1, l) != 0.0 || p.at(2, l) != 0.0;
            if (has) ++nonzero_cols;
            if (center) {
                const double sw = std::sqrt(w[l]);
                CHECK(p.at(0, l) == doctest::Approx(sw * 1.0));
                CHECK(p.at(1, l) == doctest::Approx(sw * 2.0));
                CHECK(p.at(2, l) == doctest::Approx(sw * 3.0));
            }
        }
        CHECK(nonzero_cols == 1);
    }

    SUBCASE("corner voxel: 19 of 27 columns out of volume") {
        DirectionalAlbedoVolume rho(g);
        for (auto& v : rho.mutable_data()) v = 1.0;
        PatchMatrix p = extract_patch_matrix(rho, 0, 0, 0, spec);
        int zero_cols = 0;
        for (int l = 0; l < 27; ++l)
            if (p.at(0, l) == 0.0 && p.at(1, l) == 0.0 && p.at(2, l) == 0.0) ++zero_cols;
        CHECK(zero_cols == 19);
    }

    SUBCASE("voxel outside the volume is rejected") {
        DirectionalAlbedoVolume rho(g);
        CHECK_THROWS_AS(extract_patch_matrix(rho, 6, 0, 0, spec), std::invalid_argument);
    }
}

TEST_CASE("patch nuclear norm: closed-form cases") {
    SUBCASE("3x1 column (3,4,0) has nuclear norm 5") {
        // exact zeros of rank-deficient patches resolve to ~sqrt(eps) through
        // the Gram eigendecomposition, hence the 1e-7 tolerance
        PatchMatrix p;
        p.cols = 1;
        p.m = {3.0, 4.0, 0.0};
        CHECK(patch_nuclear_norm(p) == doctest::Approx(5.0).epsilon(1e-7));
    }
    SUBCASE("orthogonal rows of norms 3, 1, 0.5 sum to 4.5") {
        PatchMatrix p;
        p.cols = 4;
        p.m.assign(12, 0.0);
        p.at(0, 0) = 3.0;
        p.at(1, 1) = 1.0;
        p.at(2, 2) = 0.5;
        CHECK(patch_nuclear_norm(p) == doctest::Approx(4.5).epsilon(1e-12));
    }
    SUBCASE("matches the dense SVD on random patches") {
        for (int trial = 0; trial < 50; ++trial) {
            PatchMatrix p = random_patch(27, 900 + trial);
            const auto svd = to_eigen(p).jacobiSvd().singularValues();
            CHECK(patch_nuclear_norm(p) ==
                  doctest::Approx(svd(0) + svd(1) + svd(2)).epsilon(1e-10));
        }
    }
}

TEST_CASE("svt_patch: closed-form and dense-SVD checks") {
    SUBCASE("theta 0 is the identity") {
        PatchMatrix p = random_patch(27, 1);
        PatchMatrix out = svt_patch(p, 0.0);
        CHECK(max_abs_diff(out.m, p.m) <= 1e-12);
    }
    SUBCASE("theta >= sigma_max zeroes the patch") {
        PatchMatrix p = random_patch(27, 2);
        const auto svd = to_eigen(p).jacobiSvd().singularValues();
        PatchMatrix out = svt_patch(p, svd(0) * 1.0000001);
        for (double v : out.m) CHECK(std::fabs(v) <= 1e-10);
    }
    SUBCASE("orthogonal rows (3,1,0.5), theta 1 leaves singular values (2,0,0)") {
        PatchMatrix p;
        p.cols = 4;
        p.m.assign(12, 0.0);
        p.at(0, 0) = 3.0;
        p.at(1, 1) = 1.0;
        p.at(2, 2) = 0.5;
        PatchMatrix out = svt_patch(p, 1.0);
        const auto sv = to_eigen(out).jacobiSvd().singularValues();
        CHECK(sv(0) == doctest::Approx(2.0).epsilon(1e-10));
        CHECK(std::fabs(sv(1)) <= 1e-10);
        CHECK(std::fabs(sv(2)) <= 1e-10);
    }
    SUBCASE("1000 random patches: output singular values are max(sigma - theta, 0)") {
        double worst = 0.0;
        for (int trial = 0; trial < 1000; ++trial) {
            PatchMatrix p = random_patch(27, 5000 + trial);
            const double theta = 0.05 + 0.002 * trial;
            const auto sv_in = to_eigen(p).jacobiSvd().singularValues();
            PatchMatrix out = svt_patch(p, theta);
            const auto sv_out = to_eigen(out).jacobiSvd().singularValues();
            for (int i = 0; i < 3; ++i)
                worst = std::max(worst, std::fabs(sv_out(i) - std::max(sv_in(i) - theta, 0.0)));
        }
        CHECK(worst <= 1e-8);
    }
}

TEST_CASE("patch_factorize agrees with the dense SVD") {
    for (int trial = 0; trial < 20; ++trial) {
        PatchMatrix p = random_patch(27, 7000 + trial);
        const PatchFactorization f = patch_factorize(p);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(p), Eigen::ComputeThinU);
        CHECK(f.values[0] >= f.values[1]);
        CHECK(f.values[1] >= f.values[2]);
        CHECK(f.values[2] >= 0.0);
        for (int i = 0; i < 3; ++i) {
            CHECK(f.values[i] == doctest::Approx(svd.singularValues()(i)).epsilon(1e-9));
            // left vectors defined up to sign
            double dot = 0.0;
            for (int r = 0; r < 3; ++r) dot += f.vectors[i][r] * svd.matrixU()(r, i);
            CHECK(std::fabs(dot) == doctest::Approx(1.0).epsilon(1e-7));
        }
    }
}

TEST_CASE("prox_local_ss closed forms") {
    ScanGrid g(1.0, 4, 0.05, 8, 4);
    DirectionalAlbedoVolume rho(g);
    rho.at(0, 1, 1, 1) = 3.0;
    rho.at(1, 1, 1, 1) = 4.0;
    rho.at(0, 2, 2, 2) = 0.3;

    DirectionalAlbedoVolume out = prox_local_ss(rho, 2.5);
    CHECK(out.at(0, 1, 1, 1) == doctest::Approx(1.5));
    CHECK(out.at(1, 1, 1, 1) == doctest::Approx(2.0));
    CHECK(out.at(2, 1, 1, 1) == 0.0);
    CHECK(out.at(0, 2, 2, 2) == 0.0);  // norm below theta

    DirectionalAlbedoVolume id = prox_local_ss(rho, 0.0);
    CHECK(max_abs_diff(id.data(), rho.data()) == 0.0);
}

TEST_CASE("prox_l1 closed forms") {
    ScanGrid g(1.0, 4, 0.05, 8, 4);
    DirectionalAlbedoVolume rho(g);
    rho.at(0, 0, 0, 0) = 2.0;
    rho.at(1, 0, 0, 0) = -0.3;

    DirectionalAlbedoVolume out = prox_l1(rho, 0.5);
    CHECK(out.at(0, 0, 0, 0) == doctest::Approx(1.5));
    CHECK(out.at(1, 0, 0, 0) == 0.0);

    DirectionalAlbedoVolume id = prox_l1(rho, 0.0);
    CHECK(max_abs_diff(id.data(), rho.data()) == 0.0);
}

TEST_CASE("prox_ss: identity, degeneracy and constant-field shrinkage") {
    ScanGrid g(1.0, 8, 0.05, 16, 8);
    WindowSpec spec{27, 0.5};

    SUBCASE("theta 0 is the identity") {
        DirectionalAlbedoVolume rho = random_volume(g, 11);
        DirectionalAlbedoVolume out = prox_ss(rho, 0.0, spec);
        CHECK(max_abs_diff(out.data(), rho.data()) <= 1e-12);
    }

    SUBCASE("L = 1 equals prox_local_ss") {
        DirectionalAlbedoVolume rho = random_volume(g, 12);
        DirectionalAlbedoVolume a = prox_ss(rho, 0.37, WindowSpec{1, 0.5});
        DirectionalAlbedoVolume b = prox_local_ss(rho, 0.37);
        CHECK(max_abs_diff(a.data(), b.data()) <= 1e-12);
    }

    SUBCASE("constant field shrinks by the analytic factor on the interior") {
        // Interior patches of a constant field are rank one with singular
        // value |v0| (unit weight sum), so SVT scales them by 1 - theta/|v0|.
        DirectionalAlbedoVolume rho(g);
        const double v0[3] = {0.6, -0.8, 1.2};
        const double norm_v0 = std::sqrt(v0[0] * v0[0] + v0[1] * v0[1] + v0[2] * v0[2]);
        for (int x = 0; x < 8; ++x)
            for (int y = 0; y < 8; ++y)
                for (int z = 0; z < 8; ++z)
                    for (int c = 0; c < 3; ++c) rho.at(c, x, y, z) = v0[c];

        const double theta = 0.4;
        DirectionalAlbedoVolume out = prox_ss(rho, theta, spec);
        const double factor = 1.0 - theta / norm_v0;
        for (int x = 2; x < 6; ++x)
            for (int y = 2; y < 6; ++y)
                for (int z = 2; z < 6; ++z)
                    for (int c = 0; c < 3; ++c)
                        CHECK(out.at(c, x, y, z) == doctest::Approx(factor * v0[c]).epsilon(1e-10));
    }
}

TEST_CASE("prox_ss properties: nonexpansive, penalty-decreasing, rotation-equivariant") {
    ScanGrid g(1.0, 8, 0.05, 16, 8);
    WindowSpec spec{27, 0.5};

    SUBCASE("contraction toward zero") {
        for (int trial = 0; trial < 3; ++trial) {
            DirectionalAlbedoVolume rho = random_volume(g, 20 + trial);
            for (double theta : {0.1, 0.5, 2.0}) {
                DirectionalAlbedoVolume out = prox_ss(rho, theta, spec);
                double nin = 0.0, nout = 0.0;
                for (std::size_t i = 0; i < rho.size(); ++i) {
                    nin += rho.data()[i] * rho.data()[i];
                    nout += out.data()[i] * out.data()[i];
                }
                CHECK(nout <= nin * (1.0 + 1e-12));

                DirectionalAlbedoVolume lout = prox_local_ss(rho, theta);
                double nlocal = 0.0;
                for (double v : lout.data()) nlocal += v * v;
                CHECK(nlocal <= nin * (1.0 + 1e-12));
            }
        }
    }

    SUBCASE("ss_value decreases weakly under prox_ss") {
        for (int trial = 0; trial < 3; ++trial) {
            DirectionalAlbedoVolume rho = random_volume(g, 30 + trial);
            const double before = ss_value(rho, spec);
            DirectionalAlbedoVolume out = prox_ss(rho, 0.3, spec);
            const double after = ss_value(out, spec);
            CHECK(after <= before * (1.0 + 1e-12));
        }
    }

    SUBCASE("rotating every vector commutes with the prox") {
        // rotation about (1,1,1) by 120 degrees permutes the axes
        const double rot[3][3] = {{0, 0, 1}, {1, 0, 0}, {0, 1, 0}};
        DirectionalAlbedoVolume rho = random_volume(g, 40);
        DirectionalAlbedoVolume rotated(g);
        for (int x = 0; x < 8; ++x)
            for (int y = 0; y < 8; ++y)
                for (int z = 0; z < 8; ++z)
                    for (int i = 0; i < 3; ++i) {
                        double acc = 0.0;
                        for (int j = 0; j < 3; ++j) acc += rot[i][j] * rho.at(j, x, y, z);
                        rotated.at(i, x, y, z) = acc;
                    }
        const double theta = 0.35;
        DirectionalAlbedoVolume a = prox_ss(rotated, theta, spec);
        DirectionalAlbedoVolume b = prox_ss(rho, theta, spec);
        double worst = 0.0;
        for (int x = 0; x < 8; ++x)
            for (int y = 0; y < 8; ++y)
                for (int z = 0; z < 8; ++z)
                    for (int i = 0; i < 3; ++i) {
                        double acc = 0.0;
                        for (int j = 0; j < 3; ++j) acc += rot[i][j] * b.at(j, x, y, z);
                        worst = std::max(worst, std::fabs(a.at(i, x, y, z) - acc));
                    }
        CHECK(worst <= 1e-10);
    }
}

TEST_CASE("ss_value: zero field and degenerate window") {
    ScanGrid g(1.0, 4, 0.05, 8, 4);
    DirectionalAlbedoVolume zero(g);
    CHECK(ss_value(zero, WindowSpec{27, 0.5}) == 0.0);

    DirectionalAlbedoVolume rho = random_volume(g, 50);
    CHECK(ss_value(rho, WindowSpec{1, 0.5}) == doctest::Approx(local_ss_value(rho)).epsilon(1e-8));
}
