#include "proteus/bitstream.hpp"

#include <algorithm>
#include <string>

#include <zlib.h>

#include "proteus/error.hpp"

namespace proteus::bitstream {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v)
{
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at)
{
    return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at)
{
    return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
           (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

void check_region(const DeviceGeometry& g, std::uint32_t first, std::uint32_t count)
{
    if (count == 0 || first + count > g.columns) {
        throw Error(ErrorCode::RegionOutOfBounds,
                    "columns " + std::to_string(first) + ".." + std::to_string(first + count) + " (exclusive) on a " +
                        std::to_string(g.columns) + "-column device");
    }
}

}  // namespace

void DeviceGeometry::validate() const
{
    if (columns == 0 || frames_per_column == 0 || bytes_per_frame == 0) {
        throw Error(ErrorCode::InvalidArgument, "geometry counts must be positive");
    }
    if (fixed_last != columns - 1) {
        throw Error(ErrorCode::InvalidArgument, "fixed columns must end at the right-most column");
    }
    if (fixed_first > fixed_last) {
        throw Error(ErrorCode::InvalidArgument, "fixed column range is empty");
    }
    if (fixed_first == 0) {
        throw Error(ErrorCode::InvalidArgument, "no columns left for the reconfigurable part");
    }
}

std::uint32_t crc32(std::span<const std::uint8_t> data)
{
    uLong crc = ::crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths
    std::size_t done = 0;
    while (done < data.size()) {
        auto chunk = static_cast<uInt>(std::min<std::size_t>(data.size() - done, 1u << 30));
        crc = ::crc32(crc, data.data() + done, chunk);
        done += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

std::size_t encoded_size(const DeviceGeometry& geometry, std::uint16_t column_count)
{
    return kOverheadBytes + geometry.column_bytes() * column_count;
}

std::vector<std::uint8_t> encode(const DeviceGeometry& geometry, Kind kind, std::uint32_t kernel_id,
                                 std::uint16_t first_column, std::span<const std::uint8_t> frames)
{
    const std::size_t col_bytes = geometry.column_bytes();
    if (frames.empty() || frames.size() % col_bytes != 0) {
        throw Error(ErrorCode::MisalignedPayload, std::to_string(frames.size()) +
                                                      " payload bytes is not a whole number of " +
                                                      std::to_string(col_bytes) + "-byte columns");
    }
    const std::size_t count = frames.size() / col_bytes;
    check_region(geometry, first_column, static_cast<std::uint32_t>(std::min<std::size_t>(count, 0x10000)));
    if (kind == Kind::Full && (first_column != 0 || count != geometry.columns)) {
        throw Error(ErrorCode::RegionOutOfBounds, "a full bitstream must cover every column");
    }

    std::vector<std::uint8_t> out;
    out.reserve(kOverheadBytes + frames.size());
    out.insert(out.end(), kMagic.begin(), kMagic.end());
    out.push_back(static_cast<std::uint8_t>(kind));
    out.insert(out.end(), 3, 0);
    put_u32(out, kernel_id);
    put_u16(out, first_column);
    put_u16(out, static_cast<std::uint16_t>(count));
    put_u16(out, geometry.frames_per_column);
    put_u16(out, geometry.bytes_per_frame);
    put_u32(out, static_cast<std::uint32_t>(frames.size()));
    out.insert(out.end(), frames.begin(), frames.end());
    put_u32(out, crc32(out));
    return out;
}

Bitstream parse(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < kMagic.size()) throw Error(ErrorCode::TruncatedPayload, "shorter than the magic");
    if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) throw Error(ErrorCode::BadMagic, "expected PBIT");
    if (bytes.size() < kOverheadBytes) throw Error(ErrorCode::TruncatedPayload, "shorter than header and checksum");

    const std::uint32_t payload_length = get_u32(bytes, kPayloadLengthOffset);
    const std::size_t expected = kOverheadBytes + std::size_t{payload_length};
    if (bytes.size() < expected) {
        throw Error(ErrorCode::TruncatedPayload,
                    std::to_string(bytes.size()) + " bytes, header announces " + std::to_string(expected));
    }
    if (bytes.size() > expected) {
        throw Error(ErrorCode::MalformedHeader, std::to_string(bytes.size() - expected) + " trailing bytes");
    }

    const std::uint32_t stored = get_u32(bytes, expected - kCrcBytes);
    if (crc32(bytes.first(expected - kCrcBytes)) != stored) throw Error(ErrorCode::BadChecksum, "CRC-32 mismatch");

    Bitstream b;
    const std::uint8_t kind = bytes[4];
    if (kind > 1) throw Error(ErrorCode::MalformedHeader, "unknown kind " + std::to_string(kind));
    if (bytes[5] != 0 || bytes[6] != 0 || bytes[7] != 0) throw Error(ErrorCode::MalformedHeader, "nonzero padding");
    b.kind = static_cast<Kind>(kind);
    b.kernel_id = get_u32(bytes, 8);
    b.first_column = get_u16(bytes, 12);
    b.column_count = get_u16(bytes, 14);
    b.frames_per_column = get_u16(bytes, 16);
    b.bytes_per_frame = get_u16(bytes, 18);
    if (b.column_count == 0 || b.frames_per_column == 0 || b.bytes_per_frame == 0) {
        throw Error(ErrorCode::MalformedHeader, "zero-sized region");
    }
    if (b.column_bytes() * b.column_count != payload_length) {
        throw Error(ErrorCode::MalformedHeader, "payload length disagrees with region");
    }
    if (b.kind == Kind::Full && b.first_column != 0) {
        throw Error(ErrorCode::MalformedHeader, "full bitstream must start at column 0");
    }
    b.payload.assign(bytes.begin() + kHeaderBytes, bytes.begin() + kHeaderBytes + payload_length);
    b.checksum = stored;
    return b;
}

Bitstream parse(std::span<const std::uint8_t> bytes, const DeviceGeometry& geometry)
{
    Bitstream b = parse(bytes);
    if (b.frames_per_column != geometry.frames_per_column || b.bytes_per_frame != geometry.bytes_per_frame) {
        throw Error(ErrorCode::GeometryMismatch, "frame shape " + std::to_string(b.frames_per_column) + "x" +
                                                     std::to_string(b.bytes_per_frame) + " does not match device");
    }
    check_region(geometry, b.first_column, b.column_count);
    if (b.kind == Kind::Full && b.column_count != geometry.columns) {
        throw Error(ErrorCode::RegionOutOfBounds, "full bitstream does not cover the device");
    }
    return b;
}

ConfigurationMemory::ConfigurationMemory(const DeviceGeometry& geometry)
    : geometry_(geometry)
{
    geometry_.validate();
    frames_.assign(geometry_.total_bytes(), 0);
}

std::span<const std::uint8_t> ConfigurationMemory::column(std::uint16_t index) const
{
    if (index >= geometry_.columns) throw Error(ErrorCode::RegionOutOfBounds, "column " + std::to_string(index));
    const std::size_t n = geometry_.column_bytes();
    return std::span<const std::uint8_t>(frames_).subspan(n * index, n);
}

void ConfigurationMemory::reset()
{
    std::fill(frames_.begin(), frames_.end(), 0);
    configured_.clear();
}

void apply(ConfigurationMemory& memory, const Bitstream& bitstream, bool allow_fixed)
{
    const DeviceGeometry& g = memory.geometry_;
    if (bitstream.frames_per_column != g.frames_per_column || bitstream.bytes_per_frame != g.bytes_per_frame) {
        throw Error(ErrorCode::GeometryMismatch, "bitstream frame shape does not match device");
    }
    check_region(g, bitstream.first_column, bitstream.column_count);
    if (bitstream.payload.size() != g.column_bytes() * bitstream.column_count) {
        throw Error(ErrorCode::MisalignedPayload, "payload does not cover the region exactly");
    }
    const std::uint32_t last = std::uint32_t{bitstream.first_column} + bitstream.column_count - 1;
    if (!allow_fixed && last >= g.fixed_first && bitstream.first_column <= g.fixed_last) {
        throw Error(ErrorCode::FixedRegionViolation,
                    "columns " + std::to_string(bitstream.first_column) + ".." + std::to_string(last) +
                        " intersect the fixed part " + std::to_string(g.fixed_first) + ".." +
                        std::to_string(g.fixed_last));
    }
    const std::size_t offset = g.column_bytes() * bitstream.first_column;
    std::copy(bitstream.payload.begin(), bitstream.payload.end(), memory.frames_.begin() + offset);
    for (std::uint32_t c = bitstream.first_column; c <= last; ++c) {
        memory.configured_.insert(static_cast<std::uint16_t>(c));
    }
}

std::vector<std::uint8_t> readback(const ConfigurationMemory& memory, std::uint16_t first_column,
                                   std::uint16_t column_count, std::uint32_t kernel_id)
{
    const DeviceGeometry& g = memory.geometry();
    check_region(g, first_column, column_count);
    std::vector<std::uint8_t> frames;
    frames.reserve(g.column_bytes() * column_count);
    for (std::uint16_t c = first_column; c < first_column + column_count; ++c) {
        auto col = memory.column(c);
        frames.insert(frames.end(), col.begin(), col.end());
    }
    return encode(g, Kind::Partial, kernel_id, first_column, frames);
}

}  // namespace proteus::bitstream
