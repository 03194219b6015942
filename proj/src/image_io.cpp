#include "nlos/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace nlos {

namespace {

unsigned char quantize(double v) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    return static_cast<unsigned char>(std::floor(clamped * 255.0 + 0.5));
}

void write_pnm(const std::string& path, const char* magic, int channels,
               const std::vector<double>& data, int width, int height) {
    if (data.size() != static_cast<std::size_t>(channels) * width * height)
        throw std::invalid_argument("image write: data size does not match dimensions");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os << magic << "\n" << width << " " << height << "\n255\n";
    std::vector<unsigned char> bytes(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) bytes[i] = quantize(data[i]);
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace

void write_pgm(const std::string& path, const std::vector<double>& gray, int width, int height) {
    write_pnm(path, "P5", 1, gray, width, height);
}

void write_ppm(const std::string& path, const std::vector<double>& rgb, int width, int height) {
    write_pnm(path, "P6", 3, rgb, width, height);
}

void write_map_images(const ReconMaps& maps, const std::string& dir) {
    const int n = maps.side();
    // Image rows scan y from top to bottom; maps index (x, y) with x along
    // the width.
    std::vector<double> albedo(static_cast<std::size_t>(n) * n);
    std::vector<double> depth(static_cast<std::size_t>(n) * n);
    std::vector<double> normal(3u * n * n);
    const double max_depth = maps.grid.max_depth();
    for (int row = 0; row < n; ++row) {
        for (int col = 0; col < n; ++col) {
            const std::size_t p = maps.pixel(col, n - 1 - row);
            const std::size_t o = static_cast<std::size_t>(row) * n + col;
            const bool on = maps.mask[p] != 0;
            albedo[o] = maps.albedo[p];
            depth[o] = on ? maps.depth[p] / max_depth : 0.0;
            for (int c = 0; c < 3; ++c)
                normal[3 * o + c] = on ? (maps.normal[3 * p + c] + 1.0) / 2.0 : 0.0;
        }
    }
    write_pgm(dir + "/albedo.pgm", albedo, n, n);
    write_pgm(dir + "/depth.pgm", depth, n, n);
    write_ppm(dir + "/normal.ppm", normal, n, n);
}

}  // namespace nlos
