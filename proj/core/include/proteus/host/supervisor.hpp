#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "proteus/board.hpp"
#include "proteus/host/metrics.hpp"
#include "proteus/host/scenario.hpp"
#include "proteus/trace.hpp"

namespace proteus::host {

/// Host-side driver. Everything goes through the register map and shared
/// host memory, the way a device driver would.
class Supervisor {
public:
    explicit Supervisor(BoardConfig config = {});

    Board& board() { return board_; }

    /// Simulated-time budget per blocking operation (default 1 s).
    void set_watchdog(sim::Ticks budget) { watchdog_ = budget; }

    selectmap::BootReport boot(std::vector<std::uint8_t> flash_image);
    void bind(std::uint32_t kernel_id, std::string_view builtin_name);
    void bind(std::uint32_t kernel_id, std::string name, reconfig::KernelFactory factory);
    selectmap::ConfigResult reconfigure(std::span<const std::uint8_t> image);
    std::vector<std::uint8_t> readback(std::uint16_t first_column, std::uint16_t column_count);
    /// Sends `input` downstream and collects the same number of bytes upstream.
    std::vector<std::uint8_t> stream(std::span<const std::uint8_t> input);
    void stall(sim::SimTime at, sim::Ticks duration);

    Metrics metrics();
    void note_expect_failure() { ++m_.expect_failures; }

private:
    /// Runs until every cause in `bits` is pending, then acknowledges them.
    void wait_for(std::uint32_t bits, const std::string& what);
    void run_until(const std::function<bool()>& done, const std::string& what);
    pci::MappedRegion map(std::size_t bytes);

    Board board_;
    sim::Ticks watchdog_ = sim::kSecond;
    Metrics m_;
};

struct RunOptions {
    std::uint64_t seed = 0;
    bool trace = false;
    std::filesystem::path work_dir = ".";
};

struct RunResult {
    Metrics metrics;
    std::vector<TraceRecord> trace;
    int exit_status = 0;  // 0 ok, 1 expectation failed, 2 runtime fault
    std::vector<std::string> messages;
};

/// Fresh board per call. Commands run in order; a failed expectation is
/// recorded and the run continues, a fault stops it.
RunResult run_scenario(const Scenario& scenario, const RunOptions& options = {});

/// Payload for a makebit command; `run_seed` backs a plain `fill=random`.
std::vector<std::uint8_t> make_bitstream(const MakebitCmd& cmd, const bitstream::DeviceGeometry& geometry,
                                         std::uint64_t run_seed);

void emit_trace(const std::vector<TraceRecord>& records, const std::filesystem::path& path);

}  // namespace proteus::host
