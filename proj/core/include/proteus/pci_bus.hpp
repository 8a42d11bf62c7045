#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "proteus/sim_kernel.hpp"
#include "proteus/trace.hpp"

namespace proteus::pci {

using sim::SimTime;
using sim::Ticks;

struct MappedRegion {
    std::uint32_t id = 0;
    std::uint32_t base = 0;
    std::uint32_t size = 0;  // bytes requested; backing store is rounded up to a word
};

/// Host RAM as seen by the bus master: disjoint page-aligned regions in a
/// 32-bit address space.
class HostMemory {
public:
    static constexpr std::uint32_t kPageSize = 4096;
    static constexpr std::uint64_t kFirstBase = 0x0010'0000;
    static constexpr std::uint64_t kAddressSpaceEnd = 0x1'0000'0000;

    /// Allocates a zero-filled region. Throws InvalidArgument for 0 bytes,
    /// OutOfAddressSpace when the 32-bit space is exhausted.
    MappedRegion map_shared_region(std::size_t bytes);

    std::span<std::uint8_t> bytes(std::uint32_t region_id);
    std::span<const std::uint8_t> bytes(std::uint32_t region_id) const;
    const MappedRegion& region(std::uint32_t region_id) const;

    /// Region containing all of [address, address+length); throws UnmappedAddress.
    const MappedRegion& region_at(std::uint32_t address, std::uint32_t length) const;

    std::uint32_t read_word(std::uint32_t address) const;
    void write(std::uint32_t address, std::span<const std::uint8_t> data);
    void read(std::uint32_t address, std::span<std::uint8_t> out) const;

private:
    struct Backing {
        MappedRegion info;
        std::vector<std::uint8_t> data;
    };
    const Backing& backing_at(std::uint32_t address, std::uint32_t length) const;

    std::vector<Backing> regions_;  // ascending base
    std::uint64_t next_base_ = kFirstBase;
};

struct StallWindow {
    SimTime start;
    Ticks duration = 0;

    SimTime end() const { return start + duration; }
    bool operator==(const StallWindow&) const = default;
};

struct PciConfig {
    Ticks clock_period = 30'303;  // 33 MHz
    std::uint32_t bus_width = 4;
    std::uint32_t grant_latency_cycles = 8;
    std::uint32_t max_burst_cycles = 4096;
    std::vector<StallWindow> stall_windows;  // sorted, disjoint, non-adjacent

    /// Peak throughput in bytes per second.
    double peak_bytes_per_second() const;
};

/// Adds a bus-unavailable window, merging it with overlapping or adjacent ones.
void inject_stall(PciConfig& config, SimTime start, Ticks duration);

/// True if [from, to) intersects any stall window.
bool overlaps_stall(const PciConfig& config, SimTime from, SimTime to);

enum class Direction { ToDevice, ToHost };
enum class TxnState { Waiting, Bursting, Preempted, Done };

std::string_view to_string(TxnState s);

struct BusTransaction {
    std::uint32_t master_id = 0;
    Direction direction = Direction::ToDevice;
    std::uint32_t start_address = 0;
    std::uint32_t total_bytes = 0;
    std::uint32_t transferred_bytes = 0;
    TxnState state = TxnState::Waiting;
};

/// One PCI data cycle [start, start + period) moving `bytes`.
struct DataCycle {
    SimTime start;
    std::uint32_t bytes = 0;
    Direction direction = Direction::ToDevice;
    std::uint32_t master_id = 0;
};

/// Device side of a burst. ToDevice bursts call `deliver` once per data
/// cycle; ToHost bursts call `fetch`.
struct BurstPorts {
    std::function<void(std::uint32_t word, std::uint32_t valid_bytes)> deliver;
    std::function<std::uint32_t()> fetch;
};

struct BurstSchedule {
    SimTime grant_at;       // first PCI edge the master owns the bus
    SimTime first_data_at;  // start of the first data cycle
};

/// The shared 33 MHz / 32-bit bus with a single bus master. Host CPU traffic
/// shows up only as stall windows and burst-length preemption.
class PciBus {
public:
    using EndHandler = std::function<void(const BusTransaction&)>;

    PciBus(sim::Simulator& sim, HostMemory& memory, PciConfig config = {}, Tracer* tracer = nullptr);

    PciConfig& config() { return config_; }
    const PciConfig& config() const { return config_; }
    HostMemory& memory() { return memory_; }

    void inject_stall(SimTime start, Ticks duration);

    bool busy() const { return active_.has_value(); }

    /// Starts a burst at the next free PCI edge. After grant_latency cycles
    /// one word moves per cycle until the job, max_burst_cycles, or a stall
    /// window ends it; `on_end` receives the Done or Preempted transaction.
    BurstSchedule begin_burst(BusTransaction txn, BurstPorts ports, EndHandler on_end);

    const std::vector<DataCycle>& data_cycles() const { return log_; }
    std::uint64_t preemptions() const { return preemptions_; }
    std::uint64_t bursts() const { return bursts_; }

    /// Data-cycle logging is on by default; long runs may switch it off.
    void set_logging(bool on) { logging_ = on; }

private:
    void data_cycle(SimTime cycle_start);
    void finish(TxnState state, SimTime at);

    sim::Simulator& sim_;
    HostMemory& memory_;
    PciConfig config_;
    Tracer* tracer_;

    struct Active {
        BusTransaction txn;
        BurstPorts ports;
        EndHandler on_end;
        std::uint32_t cycles = 0;
    };
    std::optional<Active> active_;
    std::vector<DataCycle> log_;
    bool logging_ = true;
    std::uint64_t preemptions_ = 0;
    std::uint64_t bursts_ = 0;
};

/// Bytes per second moved in [from, to). Each data cycle's bytes are spread
/// uniformly over its cycle, so the result never exceeds bus_width/period.
double measure_throughput(std::span<const DataCycle> cycles, SimTime from, SimTime to, Ticks period,
                          std::optional<Direction> direction = std::nullopt);

}  // namespace proteus::pci
