#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <vector>

namespace proteus::bitstream {

/// Model device: `columns` full-height columns, each a stack of frames.
/// The fixed part occupies a suffix of columns ending at the right edge.
struct DeviceGeometry {
    std::uint16_t columns = 16;
    std::uint16_t frames_per_column = 32;
    std::uint16_t bytes_per_frame = 64;
    std::uint16_t fixed_first = 12;
    std::uint16_t fixed_last = 15;

    std::size_t column_bytes() const { return std::size_t{frames_per_column} * bytes_per_frame; }
    std::size_t total_bytes() const { return column_bytes() * columns; }
    bool is_fixed(std::uint16_t column) const { return column >= fixed_first && column <= fixed_last; }
    std::uint16_t reconfigurable_columns() const { return fixed_first; }

    /// Throws InvalidArgument unless the invariants hold.
    void validate() const;

    bool operator==(const DeviceGeometry&) const = default;
};

enum class Kind : std::uint8_t { Full = 0, Partial = 1 };

inline constexpr std::array<std::uint8_t, 4> kMagic{0x50, 0x42, 0x49, 0x54};  // "PBIT"
inline constexpr std::size_t kHeaderBytes = 24;
inline constexpr std::size_t kCrcBytes = 4;
inline constexpr std::size_t kOverheadBytes = kHeaderBytes + kCrcBytes;
/// Offset of the little-endian u32 payload_length inside the header.
inline constexpr std::size_t kPayloadLengthOffset = 20;

struct Bitstream {
    std::array<std::uint8_t, 4> magic = kMagic;
    Kind kind = Kind::Partial;
    std::uint32_t kernel_id = 0;
    std::uint16_t first_column = 0;
    std::uint16_t column_count = 0;
    std::uint16_t frames_per_column = 0;
    std::uint16_t bytes_per_frame = 0;
    std::vector<std::uint8_t> payload;  // column-major
    std::uint32_t checksum = 0;

    std::size_t column_bytes() const { return std::size_t{frames_per_column} * bytes_per_frame; }
    std::size_t encoded_size() const { return kOverheadBytes + payload.size(); }

    bool operator==(const Bitstream&) const = default;
};

/// CRC-32 (IEEE 802.3, reflected, init and final xor 0xFFFFFFFF).
std::uint32_t crc32(std::span<const std::uint8_t> data);

/// Builds a .pbit image. `frames` must hold a whole number of columns.
std::vector<std::uint8_t> encode(const DeviceGeometry& geometry, Kind kind, std::uint32_t kernel_id,
                                 std::uint16_t first_column, std::span<const std::uint8_t> frames);

/// Structural parse: magic, length, CRC and header consistency.
Bitstream parse(std::span<const std::uint8_t> bytes);

/// As parse(), and additionally checks the image fits `geometry`.
Bitstream parse(std::span<const std::uint8_t> bytes, const DeviceGeometry& geometry);

/// Total .pbit size for a region of `column_count` columns.
std::size_t encoded_size(const DeviceGeometry& geometry, std::uint16_t column_count);

class ConfigurationMemory {
public:
    explicit ConfigurationMemory(const DeviceGeometry& geometry);

    const DeviceGeometry& geometry() const { return geometry_; }
    std::span<const std::uint8_t> column(std::uint16_t index) const;
    const std::set<std::uint16_t>& configured_columns() const { return configured_; }

    /// Power-on state: everything zero, nothing configured.
    void reset();

private:
    friend void apply(ConfigurationMemory&, const Bitstream&, bool);

    DeviceGeometry geometry_;
    std::vector<std::uint8_t> frames_;
    std::set<std::uint16_t> configured_;
};

/// Replaces the frames of exactly the columns addressed by `bitstream`.
/// Partial writes into fixed columns are refused unless `allow_fixed`.
void apply(ConfigurationMemory& memory, const Bitstream& bitstream, bool allow_fixed);

/// Encodes the current contents of a column region as a Partial bitstream.
std::vector<std::uint8_t> readback(const ConfigurationMemory& memory, std::uint16_t first_column,
                                   std::uint16_t column_count, std::uint32_t kernel_id);

}  // namespace proteus::bitstream
