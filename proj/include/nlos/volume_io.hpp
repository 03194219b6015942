#pragma once

#include <stdexcept>
#include <string>
#include <variant>

#include "nlos/volume.hpp"

namespace nlos {

/// Raised on malformed NLV1 containers (bad magic, truncation, overflow).
struct DecodeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using AnyVolume = std::variant<TransientVolume, DirectionalAlbedoVolume>;

/// NLV1 binary container.
///
/// Layout: bytes 0-3 magic "NLV1"; byte 4 payload kind (0x01 transient,
/// 0x02 directional volume); byte 5 scalar width (0x08, 64-bit IEEE 754
/// little endian); bytes 6-7 reserved zero; uint32 LE rank; rank uint32 LE
/// dims; row-major scalars, last dimension fastest.
///
/// Metadata travels in a sibling UTF-8 text file "<path>.meta" of
/// "key=value" lines, one per key, sorted by key.
void write_volume(const std::string& path, const TransientVolume& vol, const VolumeMeta& meta);
void write_volume(const std::string& path, const DirectionalAlbedoVolume& vol, const VolumeMeta& meta);

std::pair<AnyVolume, VolumeMeta> read_volume(const std::string& path);

TransientVolume read_transient(const std::string& path);
DirectionalAlbedoVolume read_directional(const std::string& path);

VolumeMeta read_meta_file(const std::string& meta_path);

}  // namespace nlos
