#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "proteus/bitstream.hpp"
#include "proteus/error.hpp"
#include "proteus/fixed_part.hpp"
#include "proteus/sim_kernel.hpp"
#include "proteus/trace.hpp"

namespace proteus::selectmap {

using sim::SimTime;
using sim::Ticks;

inline constexpr Ticks kPortPeriod = 20'000;            // 50 MHz, one byte per cycle
inline constexpr double kPeakBytesPerSecond = 50e6;

/// Least-significant byte first.
std::array<std::uint8_t, 4> split_word(std::uint32_t word);
std::uint32_t join_word(const std::array<std::uint8_t, 4>& bytes);

enum class Mode { Idle, Configuring, Readback, Paused };
std::string_view to_string(Mode m);

struct MuxState {
    enum class Direction { Write, Read };
    std::uint32_t current_word = 0;
    std::uint8_t byte_index = 0;
    Direction direction = Direction::Write;
};

struct ConfigResult {
    Ticks duration = 0;        // first payload byte to end of last payload byte
    Ticks total_duration = 0;  // configure() call to completion
    std::uint32_t pauses = 0;
    std::uint32_t bytes = 0;
    std::uint32_t payload_bytes = 0;
    std::optional<ErrorCode> error;
    std::string message;
    std::optional<bitstream::Bitstream> applied;
};

struct ReadbackResult {
    Ticks duration = 0;
    Ticks total_duration = 0;
    std::uint32_t pauses = 0;
    std::uint32_t bytes = 0;
    std::uint32_t payload_bytes = 0;
};

struct BootReport {
    Ticks duration = 0;
    bool ok = false;
    std::optional<ErrorCode> error;
    std::string message;
    std::uint32_t kernel_id = 0;
};

/// The configuration controller in the fixed part. Streams 32-bit words from
/// the Select Map Data buffer out as bytes at one byte per configuration
/// clock cycle, stopping that clock whenever the buffer runs dry.
class ConfigController {
public:
    using ConfigDone = std::function<void(const ConfigResult&)>;
    using ReadbackDone = std::function<void(const ReadbackResult&)>;
    using BootDone = std::function<void(const BootReport&)>;

    ConfigController(sim::Simulator& sim, fixed::StreamBuffer& write_buffer, fixed::StreamBuffer& read_buffer,
                     bitstream::ConfigurationMemory& memory, double boot_rate = kPeakBytesPerSecond,
                     Tracer* tracer = nullptr);
    ConfigController(const ConfigController&) = delete;
    ConfigController& operator=(const ConfigController&) = delete;

    Mode mode() const { return mode_; }
    const MuxState& mux() const { return mux_; }
    sim::ClockId port_clock() const { return port_clock_; }
    sim::ClockId flash_clock() const { return flash_clock_; }

    /// Consumes `total_bytes` of .pbit image from the write buffer, validates
    /// it and applies it to configuration memory. Throws ControllerBusy.
    void configure(std::uint32_t total_bytes, ConfigDone done);

    /// Emits a readback image of the region into the read buffer. Returns the
    /// image size in bytes. Throws ControllerBusy or RegionOutOfBounds.
    std::uint32_t readback_stream(std::uint16_t first_column, std::uint16_t column_count, std::uint32_t kernel_id,
                                  ReadbackDone done);

    /// Loads a Full image from flash at the boot rate.
    void power_up_boot(std::vector<std::uint8_t> flash_image, BootDone done);

    /// Configuration-port byte cycles, in order (on by default).
    const std::vector<SimTime>& port_log() const { return port_log_; }
    void set_port_logging(bool on) { port_logging_ = on; }

    std::uint64_t total_pauses() const { return total_pauses_; }

private:
    /// Tracks incoming image bytes and the payload window timing.
    struct Intake {
        std::vector<std::uint8_t> image;
        bool keep = false;
        std::uint32_t total = 0;
        std::optional<std::uint32_t> payload_len;
        std::optional<SimTime> payload_first;
        std::optional<SimTime> payload_end;
        std::optional<SimTime> first_byte;
        SimTime last_end;

        void begin(std::uint32_t total_bytes, bool keep_bytes);
        void take(std::uint8_t byte, std::uint32_t index, SimTime edge, Ticks period);
        Ticks payload_duration() const;
    };

    void port_edge(SimTime t);
    void flash_edge(SimTime t);
    void configure_edge(SimTime t);
    void readback_edge(SimTime t);
    void finish_configure(SimTime t);
    void finish_readback(SimTime t);
    void finish_boot(SimTime t);
    void data_available();
    void space_available();
    void pause(std::string reason);

    sim::Simulator& sim_;
    fixed::StreamBuffer& write_buffer_;
    fixed::StreamBuffer& read_buffer_;
    bitstream::ConfigurationMemory& memory_;
    Tracer* tracer_;
    sim::ClockId port_clock_;
    sim::ClockId flash_clock_;

    Mode mode_ = Mode::Idle;
    Mode paused_from_ = Mode::Idle;
    MuxState mux_;
    bool primed_ = false;
    bool booting_ = false;
    Intake intake_;
    std::uint32_t byte_count_ = 0;
    std::uint32_t pauses_ = 0;
    SimTime job_start_;
    std::optional<std::uint32_t> pending_word_;
    std::vector<std::uint8_t> source_;  // readback or flash image
    ConfigDone config_done_;
    ReadbackDone readback_done_;
    BootDone boot_done_;

    std::vector<SimTime> port_log_;
    bool port_logging_ = true;
    std::uint64_t total_pauses_ = 0;
};

}  // namespace proteus::selectmap
