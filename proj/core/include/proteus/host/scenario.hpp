#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "proteus/bitstream.hpp"
#include "proteus/error.hpp"
#include "proteus/sim_kernel.hpp"

namespace proteus::host {

class ParseError : public Error {
public:
    ParseError(int line, int column, const std::string& message);
    int line() const { return line_; }
    int column() const { return column_; }
    const std::string& detail() const { return detail_; }

private:
    int line_;
    int column_;
    std::string detail_;
};

/// "<n>ns", "<n>us", "<n>ms"; decimals allowed when the result is a whole
/// number of picoseconds.
sim::Ticks parse_time(std::string_view text);
std::string format_time(sim::Ticks ps);

std::uint32_t parse_hex32(std::string_view text);

struct ColumnRange {
    std::uint16_t first = 0;
    std::uint16_t last = 0;
    std::uint16_t count() const { return static_cast<std::uint16_t>(last - first + 1); }
    bool operator==(const ColumnRange&) const = default;
};

struct BusOverride {
    std::optional<std::uint32_t> grant_latency_cycles;
    std::optional<std::uint32_t> max_burst_cycles;
    bool operator==(const BusOverride&) const = default;
};

struct BootCmd {
    std::string flash;
    bool operator==(const BootCmd&) const = default;
};

struct BindCmd {
    std::uint32_t id = 0;
    std::string kernel;
    bool operator==(const BindCmd&) const = default;
};

struct RandomFill {
    std::optional<std::uint64_t> seed;  // unset: the run seed
    bool operator==(const RandomFill&) const = default;
};

struct MakebitCmd {
    std::string out;
    bitstream::Kind kind = bitstream::Kind::Partial;
    std::uint32_t id = 0;
    ColumnRange cols;
    std::variant<std::uint8_t, RandomFill> fill;
    bool operator==(const MakebitCmd&) const = default;
};

struct ReconfigCmd {
    std::string file;
    bool operator==(const ReconfigCmd&) const = default;
};

struct ReadbackCmd {
    ColumnRange cols;
    std::string out;
    bool operator==(const ReadbackCmd&) const = default;
};

struct StreamCmd {
    std::string in;
    std::string out;
    std::uint32_t words = 0;
    bool operator==(const StreamCmd&) const = default;
};

struct StallCmd {
    sim::Ticks at = 0;
    sim::Ticks duration = 0;
    bool operator==(const StallCmd&) const = default;
};

enum class Compare { LessEqual, GreaterEqual, Equal };

struct ExpectCmd {
    std::string key;
    Compare op = Compare::Equal;
    double value = 0;
    std::string value_text;  // as written, for messages and round-tripping
    bool operator==(const ExpectCmd&) const = default;
};

using CommandBody =
    std::variant<BootCmd, BindCmd, MakebitCmd, ReconfigCmd, ReadbackCmd, StreamCmd, StallCmd, ExpectCmd>;

struct Command {
    CommandBody body;
    int line = 0;
    bool operator==(const Command&) const = default;
};

struct Scenario {
    std::optional<bitstream::DeviceGeometry> geometry;
    std::optional<BusOverride> bus;
    std::vector<Command> commands;

    bitstream::DeviceGeometry effective_geometry() const { return geometry.value_or(bitstream::DeviceGeometry{}); }
    bool operator==(const Scenario&) const = default;
};

/// Parses and validates a whole script. Input files are looked up relative to
/// `base_dir`; a file written by an earlier command counts as present.
Scenario parse_scenario(std::string_view text, const std::filesystem::path& base_dir = ".");
Scenario load_scenario(const std::filesystem::path& path);

std::string_view command_name(const CommandBody& body);

/// One canonical line per command; parsing the output yields an equal Scenario.
std::string format_command(const CommandBody& body);
std::string format_scenario(const Scenario& scenario);

/// Parses the argument tokens of a makebit command, e.g. for the CLI.
MakebitCmd parse_makebit_args(const std::vector<std::string>& args);
bitstream::DeviceGeometry parse_geometry_args(const std::vector<std::string>& args);

}  // namespace proteus::host
