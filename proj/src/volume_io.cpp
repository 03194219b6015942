#include "nlos/volume_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

namespace nlos {

namespace {

constexpr char kMagic[4] = {'N', 'L', 'V', '1'};
constexpr std::uint8_t kKindTransient = 0x01;
constexpr std::uint8_t kKindDirectional = 0x02;
constexpr std::uint8_t kWidthF64 = 0x08;
// Caps decoded payloads at 2^33 scalars (64 GiB); anything larger is a
// corrupt or hostile header.
constexpr std::uint64_t kMaxScalars = 1ull << 33;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw DecodeError("NLV1: truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

// Doubles are written as little-endian IEEE 754 bytes. The build targets
// little-endian hosts; a big-endian host would need byte swaps here.
static_assert(sizeof(double) == 8);
static_assert(std::numeric_limits<double>::is_iec559);

void write_payload(std::ostream& os, std::uint8_t kind, const std::vector<std::uint32_t>& dims,
                   const std::vector<double>& data) {
    os.write(kMagic, 4);
    char head[4] = {static_cast<char>(kind), static_cast<char>(kWidthF64), 0, 0};
    os.write(head, 4);
    put_u32(os, static_cast<std::uint32_t>(dims.size()));
    for (std::uint32_t d : dims) put_u32(os, d);
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size() * sizeof(double)));
}

void write_meta(const std::string& path, const VolumeMeta& meta) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    for (const auto& [k, v] : meta.entries()) os << k << "=" << v << "\n";
    if (!os) throw std::runtime_error("write failed: " + path);
}

std::string meta_path_for(const std::string& path) { return path + ".meta"; }

}  // namespace

void write_volume(const std::string& path, const TransientVolume& vol, const VolumeMeta& meta) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    const auto& g = vol.grid();
    write_payload(os, kKindTransient,
                  {static_cast<std::uint32_t>(g.scan_res), static_cast<std::uint32_t>(g.scan_res),
                   static_cast<std::uint32_t>(g.num_bins)},
                  vol.data());
    if (!os) throw std::runtime_error("write failed: " + path);
    os.close();
    write_meta(meta_path_for(path), meta);
}

void write_volume(const std::string& path, const DirectionalAlbedoVolume& vol, const VolumeMeta& meta) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    const auto& g = vol.grid();
    write_payload(os, kKindDirectional,
                  {3u, static_cast<std::uint32_t>(g.scan_res), static_cast<std::uint32_t>(g.scan_res),
                   static_cast<std::uint32_t>(g.depth_res)},
                  vol.data());
    if (!os) throw std::runtime_error("write failed: " + path);
    os.close();
    write_meta(meta_path_for(path), meta);
}

VolumeMeta read_meta_file(const std::string& meta_path) {
    std::ifstream is(meta_path, std::ios::binary);
    if (!is) throw DecodeError("missing metadata file: " + meta_path);
    VolumeMeta meta;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw DecodeError("bad metadata line in " + meta_path + ": " + line);
        meta.set(line.substr(0, eq), line.substr(eq + 1));
    }
    return meta;
}

std::pair<AnyVolume, VolumeMeta> read_volume(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DecodeError("cannot open: " + path);
    char magic[4];
    if (!is.read(magic, 4)) throw DecodeError("NLV1: truncated magic");
    if (std::memcmp(magic, kMagic, 4) != 0) throw DecodeError("NLV1: bad magic bytes");
    unsigned char head[4];
    if (!is.read(reinterpret_cast<char*>(head), 4)) throw DecodeError("NLV1: truncated header");
    const std::uint8_t kind = head[0];
    if (kind != kKindTransient && kind != kKindDirectional)
        throw DecodeError("NLV1: unknown payload kind");
    if (head[1] != kWidthF64) throw DecodeError("NLV1: unsupported scalar width");
    if (head[2] != 0 || head[3] != 0) throw DecodeError("NLV1: reserved bytes not zero");

    const std::uint32_t rank = get_u32(is);
    const std::uint32_t expect_rank = (kind == kKindTransient) ? 3u : 4u;
    if (rank != expect_rank) throw DecodeError("NLV1: unexpected rank for payload kind");
    std::vector<std::uint32_t> dims(rank);
    std::uint64_t count = 1;
    for (auto& d : dims) {
        d = get_u32(is);
        if (d == 0) throw DecodeError("NLV1: zero dimension");
        count *= d;
        if (count > kMaxScalars) throw DecodeError("NLV1: dimension overflow");
    }

    std::vector<double> data(count);
    if (!is.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(count * sizeof(double))))
        throw DecodeError("NLV1: truncated payload");

    VolumeMeta meta = read_meta_file(meta_path_for(path));
    if (kind == kKindTransient) {
        if (dims[0] != dims[1]) throw DecodeError("NLV1: non-square scan dims");
        ScanGrid grid = meta.grid_for_transient(static_cast<int>(dims[0]), static_cast<int>(dims[2]));
        return {AnyVolume(TransientVolume(grid, std::move(data))), meta};
    }
    if (dims[0] != 3) throw DecodeError("NLV1: directional payload must have 3 components");
    if (dims[1] != dims[2]) throw DecodeError("NLV1: non-square lateral dims");
    ScanGrid grid = meta.grid_for_directional(static_cast<int>(dims[1]), static_cast<int>(dims[3]));
    return {AnyVolume(DirectionalAlbedoVolume(grid, std::move(data))), meta};
}

TransientVolume read_transient(const std::string& path) {
    auto [vol, meta] = read_volume(path);
    if (!std::holds_alternative<TransientVolume>(vol))
        throw DecodeError("expected a transient volume: " + path);
    return std::get<TransientVolume>(std::move(vol));
}

DirectionalAlbedoVolume read_directional(const std::string& path) {
    auto [vol, meta] = read_volume(path);
    if (!std::holds_alternative<DirectionalAlbedoVolume>(vol))
        throw DecodeError("expected a directional volume: " + path);
    return std::get<DirectionalAlbedoVolume>(std::move(vol));
}

}  // namespace nlos
