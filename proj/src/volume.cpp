#include "nlos/volume.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace nlos {

namespace {

void throw_if_nonfinite(const std::vector<double>& data, const char* what) {
    for (double v : data) {
        if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite entry");
    }
}

}  // namespace

TransientVolume::TransientVolume(ScanGrid grid, std::vector<double> data)
    : grid_(grid), data_(std::move(data)) {
    grid_.validate();
    const std::size_t expect = static_cast<std::size_t>(grid_.scan_res) * grid_.scan_res * grid_.num_bins;
    if (data_.size() != expect) throw std::invalid_argument("TransientVolume: data size does not match grid");
    check_finite();
}

TransientVolume::TransientVolume(ScanGrid grid)
    : grid_(grid),
      data_(static_cast<std::size_t>(grid.scan_res) * grid.scan_res * grid.num_bins, 0.0) {
    grid_.validate();
}

void TransientVolume::check_finite() const { throw_if_nonfinite(data_, "TransientVolume"); }

DirectionalAlbedoVolume::DirectionalAlbedoVolume(ScanGrid grid, std::vector<double> data)
    : grid_(grid), data_(std::move(data)) {
    grid_.validate();
    const std::size_t expect =
        3u * static_cast<std::size_t>(grid_.scan_res) * grid_.scan_res * grid_.depth_res;
    if (data_.size() != expect) throw std::invalid_argument("DirectionalAlbedoVolume: data size does not match grid");
    check_finite();
}

DirectionalAlbedoVolume::DirectionalAlbedoVolume(ScanGrid grid)
    : grid_(grid),
      data_(3u * static_cast<std::size_t>(grid.scan_res) * grid.scan_res * grid.depth_res, 0.0) {
    grid_.validate();
}

double DirectionalAlbedoVolume::vector_norm(int x, int y, int z) const {
    const double a = at(0, x, y, z);
    const double b = at(1, x, y, z);
    const double c = at(2, x, y, z);
    return std::sqrt(a * a + b * b + c * c);
}

void DirectionalAlbedoVolume::check_finite() const { throw_if_nonfinite(data_, "DirectionalAlbedoVolume"); }

void VolumeMeta::set(const std::string& key, const std::string& value) {
    if (key.empty() || key.find('=') != std::string::npos || key.find('\n') != std::string::npos)
        throw std::invalid_argument("VolumeMeta: bad key '" + key + "'");
    if (value.find('\n') != std::string::npos)
        throw std::invalid_argument("VolumeMeta: value for '" + key + "' contains newline");
    entries_[key] = value;
}

void VolumeMeta::set_double(const std::string& key, double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    set(key, buf);
}

void VolumeMeta::set_int(const std::string& key, long long value) {
    set(key, std::to_string(value));
}

const std::string& VolumeMeta::get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw std::out_of_range("VolumeMeta: missing key '" + key + "'");
    return it->second;
}

double VolumeMeta::get_double(const std::string& key) const {
    const std::string& s = get(key);
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("VolumeMeta: key '" + key + "' is not a number: " + s);
    }
}

VolumeMeta VolumeMeta::for_grid(const ScanGrid& grid, const std::string& provenance) {
    VolumeMeta m;
    m.set_double("wall_width_m", grid.wall_width_m);
    m.set_double("bin_width", grid.bin_width);
    m.set_double("light_speed", grid.light_speed);
    m.set_int("num_bins", grid.num_bins);
    m.set_int("depth_res", grid.depth_res);
    m.set("provenance", provenance);
    return m;
}

ScanGrid VolumeMeta::grid_for_transient(int scan_res, int num_bins) const {
    return ScanGrid(get_double("wall_width_m"), scan_res, get_double("bin_width"), num_bins,
                    static_cast<int>(get_double("depth_res")), get_double("light_speed"));
}

ScanGrid VolumeMeta::grid_for_directional(int scan_res, int depth_res) const {
    return ScanGrid(get_double("wall_width_m"), scan_res, get_double("bin_width"),
                    static_cast<int>(get_double("num_bins")), depth_res, get_double("light_speed"));
}

}  // namespace nlos
