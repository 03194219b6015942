#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "nlos/grid.hpp"

namespace nlos {

/// Dense time-resolved photon histogram cube over (scan-x, scan-y, time bin).
/// Entries are expected photon counts (model output) or measured counts.
/// Row-major with the time axis fastest.
class TransientVolume {
  public:
    TransientVolume(ScanGrid grid, std::vector<double> data);
    /// Zero-filled volume of the grid's shape.
    explicit TransientVolume(ScanGrid grid);

    const ScanGrid& grid() const { return grid_; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& mutable_data() { return data_; }

    std::size_t size() const { return data_.size(); }
    double at(int x, int y, int t) const { return data_[index(x, y, t)]; }
    double& at(int x, int y, int t) { return data_[index(x, y, t)]; }
    std::size_t index(int x, int y, int t) const {
        return (static_cast<std::size_t>(x) * grid_.scan_res + y) * grid_.num_bins + t;
    }

    /// Throws if any entry is non-finite.
    void check_finite() const;

  private:
    ScanGrid grid_;
    std::vector<double> data_;
};

/// 3-component vector field rho = albedo * normal over the reconstruction
/// voxel grid. Shape (3, N, N, N_z) with N = scan_res, row-major, depth
/// fastest. Component order (rho_x, rho_y, rho_z); entries may be negative.
/// The Euclidean norm of a voxel's 3-vector is its scalar albedo and the
/// unit vector its surface normal (undefined for the zero vector).
class DirectionalAlbedoVolume {
  public:
    DirectionalAlbedoVolume(ScanGrid grid, std::vector<double> data);
    explicit DirectionalAlbedoVolume(ScanGrid grid);

    const ScanGrid& grid() const { return grid_; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& mutable_data() { return data_; }

    std::size_t size() const { return data_.size(); }
    /// Voxels per component.
    std::size_t voxels() const { return data_.size() / 3; }
    double at(int c, int x, int y, int z) const { return data_[index(c, x, y, z)]; }
    double& at(int c, int x, int y, int z) { return data_[index(c, x, y, z)]; }
    std::size_t index(int c, int x, int y, int z) const {
        const std::size_t n = grid_.scan_res;
        return ((static_cast<std::size_t>(c) * n + x) * n + y) * grid_.depth_res + z;
    }
    /// Linear voxel index without the component axis, depth fastest.
    std::size_t voxel_index(int x, int y, int z) const {
        return (static_cast<std::size_t>(x) * grid_.scan_res + y) * grid_.depth_res + z;
    }

    /// Euclidean norm of the 3-vector at a voxel.
    double vector_norm(int x, int y, int z) const;

    void check_finite() const;

  private:
    ScanGrid grid_;
    std::vector<double> data_;
};

/// Key/value text metadata persisted beside binary volume payloads.
/// Keys are unique; values are stored verbatim (no newlines allowed).
class VolumeMeta {
  public:
    void set(const std::string& key, const std::string& value);
    void set_double(const std::string& key, double value);
    void set_int(const std::string& key, long long value);

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    const std::string& get(const std::string& key) const;
    double get_double(const std::string& key) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

    /// Grid-describing keys every payload carries.
    static VolumeMeta for_grid(const ScanGrid& grid, const std::string& provenance);
    /// Reconstructs the grid from required keys plus the payload dims.
    ScanGrid grid_for_transient(int scan_res, int num_bins) const;
    ScanGrid grid_for_directional(int scan_res, int depth_res) const;

    bool operator==(const VolumeMeta&) const = default;

  private:
    std::map<std::string, std::string> entries_;
};

}  // namespace nlos
