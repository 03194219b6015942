#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "nlos/preprocess.hpp"
#include "nlos/rng.hpp"
#include "nlos/volume.hpp"
#include "nlos/volume_io.hpp"

using namespace nlos;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    auto dir = fs::temp_directory_path() / "nlos_test_volume";
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("ScanGrid validates its fields") {
    CHECK_THROWS_AS(ScanGrid(0.0, 4, 0.01, 8, 4), std::invalid_argument);
    CHECK_THROWS_AS(ScanGrid(1.0, 1, 0.01, 8, 4), std::invalid_argument);
    CHECK_THROWS_AS(ScanGrid(1.0, 4, -0.01, 8, 4), std::invalid_argument);
    CHECK_THROWS_AS(ScanGrid(1.0, 4, 0.01, 1, 4), std::invalid_argument);
    CHECK_THROWS_AS(ScanGrid(1.0, 4, 0.01, 8, 1), std::invalid_argument);

    ScanGrid g(0.6, 64, 0.0025, 512, 64);
    CHECK(g.max_depth() == doctest::Approx(0.64));
    CHECK(g.depth_pitch() == doctest::Approx(0.01));
    CHECK(g.lateral_pitch() == doctest::Approx(0.009375));
}

TEST_CASE("volume containers reject non-finite entries") {
    ScanGrid g(1.0, 4, 0.01, 8, 4);
    std::vector<double> data(4 * 4 * 8, 0.0);
    data[7] = std::nan("");
    CHECK_THROWS_AS(TransientVolume(g, data), std::invalid_argument);
    data[7] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(TransientVolume(g, data), std::invalid_argument);

    std::vector<double> dvol(3 * 4 * 4 * 4, 0.0);
    dvol[0] = -std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(DirectionalAlbedoVolume(g, dvol), std::invalid_argument);
}

TEST_CASE("volume containers reject shape mismatches") {
    ScanGrid g(1.0, 4, 0.01, 8, 4);
    CHECK_THROWS_AS(TransientVolume(g, std::vector<double>(10, 0.0)), std::invalid_argument);
    CHECK_THROWS_AS(DirectionalAlbedoVolume(g, std::vector<double>(10, 0.0)), std::invalid_argument);
}

TEST_CASE("NLV1 transient round-trip is bit exact") {
    ScanGrid g(1.0, 4, 0.01, 8, 4);
    TransientVolume vol(g);
    CounterRng rng(42);
    for (auto& v : vol.mutable_data()) v = rng.normal() * 1e3;

    const auto path = (temp_dir() / "t.nlv").string();
    VolumeMeta meta = VolumeMeta::for_grid(g, "test");
    meta.set_int("seed", 42);
    write_volume(path, vol, meta);

    auto [loaded, meta2] = read_volume(path);
    REQUIRE(std::holds_alternative<TransientVolume>(loaded));
    const auto& t = std::get<TransientVolume>(loaded);
    CHECK(t.grid() == g);
    CHECK(t.data() == vol.data());  // bitwise
    CHECK(meta2 == meta);
}

TEST_CASE("NLV1 directional round-trip keeps component order") {
    ScanGrid g(1.0, 4, 0.01, 8, 4);
    DirectionalAlbedoVolume vol(g);
    // distinct per-component fingerprints
    for (int c = 0; c < 3; ++c)
        for (int x = 0; x < 4; ++x)
            for (int y = 0; y < 4; ++y)
                for (int z = 0; z < 4; ++z) vol.at(c, x, y, z) = 100.0 * c + x + 0.1 * y + 0.01 * z;

    const auto path = (temp_dir() / "d.nlv").string();
    write_volume(path, vol, VolumeMeta::for_grid(g, "test"));
    auto loaded = read_directional(path);
    CHECK(loaded.data() == vol.data());
    CHECK(loaded.at(0, 1, 2, 3) == vol.at(0, 1, 2, 3));
    CHECK(loaded.at(2, 3, 2, 1) == vol.at(2, 3, 2, 1));
}

TEST_CASE("NLV1 decode errors") {
    const auto dir = temp_dir();
    ScanGrid g(1.0, 4, 0.01, 8, 4);
    TransientVolume vol(g);
    const auto path = (dir / "bad.nlv").string();
    write_volume(path, vol, VolumeMeta::for_grid(g, "test"));

    SUBCASE("wrong magic") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.write("XXXX", 4);
        f.close();
        CHECK_THROWS_AS(read_volume(path), DecodeError);
    }
    SUBCASE("truncated payload") {
        fs::resize_file(path, fs::file_size(path) - 16);
        CHECK_THROWS_AS(read_volume(path), DecodeError);
    }
    SUBCASE("dimension overflow") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(12);  // first dim field
        const unsigned char huge[4] = {0xff, 0xff, 0xff, 0xff};
        f.write(reinterpret_cast<const char*>(huge), 4);
        f.close();
        CHECK_THROWS_AS(read_volume(path), DecodeError);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(read_volume((dir / "nope.nlv").string()), DecodeError); }
}

TEST_CASE("downsample: constants stay constant") {
    ScanGrid g(1.0, 8, 0.01, 16, 4);
    TransientVolume vol(g);
    for (auto& v : vol.mutable_data()) v = 5.0;
    TransientVolume out = downsample_transient(vol, 2, 2);
    CHECK(out.grid().scan_res == 4);
    CHECK(out.grid().num_bins == 8);
    CHECK(out.grid().bin_width == doctest::Approx(0.02));
    for (double v : out.data()) CHECK(v == doctest::Approx(5.0));
}

TEST_CASE("downsample: identity factors") {
    ScanGrid g(1.0, 4, 0.01, 8, 4);
    TransientVolume vol(g);
    CounterRng rng(7);
    for (auto& v : vol.mutable_data()) v = rng.uniform();
    TransientVolume out = downsample_transient(vol, 1, 1);
    CHECK(out.data() == vol.data());
    CHECK(out.grid() == vol.grid());
}

TEST_CASE("downsample: mass preservation on random data") {
    ScanGrid g(1.0, 8, 0.01, 32, 4);
    TransientVolume vol(g);
    CounterRng rng(11);
    for (auto& v : vol.mutable_data()) v = rng.uniform();
    double in_sum = 0.0;
    for (double v : vol.data()) in_sum += v;

    TransientVolume out = downsample_transient(vol, 4, 2);
    double out_sum = 0.0;
    for (double v : out.data()) out_sum += v;
    CHECK(out_sum * (4.0 * 4.0 * 2.0) == doctest::Approx(in_sum).epsilon(1e-9));
}

TEST_CASE("downsample: dragon-style 512 grid to 128 with doubled bin width") {
    // 512 x 512 scan, 32 ps bins (0.0096 m at c = 3e8... kept in normalized
    // meter units here), spatial factor 4 and temporal factor 2.
    ScanGrid g(2.0, 512, 0.0096, 64, 4, 1.0);
    TransientVolume vol(g);
    for (auto& v : vol.mutable_data()) v = 1.25;
    TransientVolume out = downsample_transient(vol, 4, 2);
    CHECK(out.grid().scan_res == 128);
    CHECK(out.grid().num_bins == 32);
    CHECK(out.grid().bin_width == doctest::Approx(0.0192));
    CHECK(out.at(0, 0, 0) == doctest::Approx(1.25));
}

TEST_CASE("downsample: non-divisible factors are rejected") {
    ScanGrid g(1.0, 6, 0.01, 8, 4);
    TransientVolume vol(g);
    CHECK_THROWS_AS(downsample_transient(vol, 4, 1), std::invalid_argument);
    CHECK_THROWS_AS(downsample_transient(vol, 1, 3), std::invalid_argument);
}

TEST_CASE("VolumeMeta rejects duplicate-breaking keys and missing lookups") {
    VolumeMeta m;
    m.set("a", "1");
    m.set("a", "2");  // overwrite keeps keys unique
    CHECK(m.get("a") == "2");
    CHECK_THROWS_AS(m.get("missing"), std::out_of_range);
    CHECK_THROWS_AS(m.set("bad=key", "v"), std::invalid_argument);
    m.set_double("x", 0.1 + 0.2);
    CHECK(m.get_double("x") == 0.1 + 0.2);  // round-trips exactly via %.17g
}
