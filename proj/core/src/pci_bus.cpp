#include "proteus/pci_bus.hpp"

#include <algorithm>

#include "proteus/error.hpp"

namespace proteus::pci {

namespace {

std::uint64_t align_up(std::uint64_t v, std::uint64_t a) { return (v + a - 1) / a * a; }

std::string hex32(std::uint32_t v)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", v);
    return buf;
}

}  // namespace

MappedRegion HostMemory::map_shared_region(std::size_t bytes)
{
    if (bytes == 0) throw Error(ErrorCode::InvalidArgument, "cannot map an empty region");
    const std::uint64_t base = align_up(next_base_, kPageSize);
    const std::uint64_t backing = align_up(bytes, 4);
    if (bytes > kAddressSpaceEnd || base + backing > kAddressSpaceEnd) {
        throw Error(ErrorCode::OutOfAddressSpace, std::to_string(bytes) + " bytes do not fit below 4 GiB");
    }
    Backing b;
    b.info = MappedRegion{static_cast<std::uint32_t>(regions_.size()), static_cast<std::uint32_t>(base),
                          static_cast<std::uint32_t>(bytes)};
    b.data.assign(backing, 0);
    regions_.push_back(std::move(b));
    next_base_ = base + backing;
    return regions_.back().info;
}

std::span<std::uint8_t> HostMemory::bytes(std::uint32_t region_id)
{
    if (region_id >= regions_.size()) throw Error(ErrorCode::UnmappedAddress, "region " + std::to_string(region_id));
    auto& r = regions_[region_id];
    return std::span<std::uint8_t>(r.data).first(r.info.size);
}

std::span<const std::uint8_t> HostMemory::bytes(std::uint32_t region_id) const
{
    if (region_id >= regions_.size()) throw Error(ErrorCode::UnmappedAddress, "region " + std::to_string(region_id));
    const auto& r = regions_[region_id];
    return std::span<const std::uint8_t>(r.data).first(r.info.size);
}

const MappedRegion& HostMemory::region(std::uint32_t region_id) const
{
    if (region_id >= regions_.size()) throw Error(ErrorCode::UnmappedAddress, "region " + std::to_string(region_id));
    return regions_[region_id].info;
}

const HostMemory::Backing& HostMemory::backing_at(std::uint32_t address, std::uint32_t length) const
{
    auto it = std::upper_bound(regions_.begin(), regions_.end(), address,
                               [](std::uint32_t a, const Backing& b) { return a < b.info.base; });
    if (it != regions_.begin()) {
        const Backing& b = *std::prev(it);
        const std::uint64_t end = std::uint64_t{address} + length;
        if (end <= std::uint64_t{b.info.base} + b.data.size()) return b;
    }
    throw Error(ErrorCode::UnmappedAddress, std::to_string(length) + " bytes at " + hex32(address));
}

const MappedRegion& HostMemory::region_at(std::uint32_t address, std::uint32_t length) const
{
    return backing_at(address, length).info;
}

std::uint32_t HostMemory::read_word(std::uint32_t address) const
{
    const Backing& b = backing_at(address, 4);
    const std::size_t off = address - b.info.base;
    return static_cast<std::uint32_t>(b.data[off]) | (static_cast<std::uint32_t>(b.data[off + 1]) << 8) |
           (static_cast<std::uint32_t>(b.data[off + 2]) << 16) | (static_cast<std::uint32_t>(b.data[off + 3]) << 24);
}

void HostMemory::write(std::uint32_t address, std::span<const std::uint8_t> data)
{
    if (data.empty()) return;
    auto& b = const_cast<Backing&>(backing_at(address, static_cast<std::uint32_t>(data.size())));
    std::copy(data.begin(), data.end(), b.data.begin() + (address - b.info.base));
}

void HostMemory::read(std::uint32_t address, std::span<std::uint8_t> out) const
{
    if (out.empty()) return;
    const Backing& b = backing_at(address, static_cast<std::uint32_t>(out.size()));
    auto from = b.data.begin() + (address - b.info.base);
    std::copy(from, from + static_cast<std::ptrdiff_t>(out.size()), out.begin());
}

double PciConfig::peak_bytes_per_second() const
{
    return static_cast<double>(bus_width) * 1e12 / static_cast<double>(clock_period);
}

void inject_stall(PciConfig& config, SimTime start, Ticks duration)
{
    if (duration <= 0) throw Error(ErrorCode::InvalidArgument, "stall duration must be positive");
    StallWindow w{start, duration};
    std::vector<StallWindow> merged;
    merged.reserve(config.stall_windows.size() + 1);
    for (const auto& s : config.stall_windows) {
        if (s.end() < w.start || w.end() < s.start) {
            merged.push_back(s);
        } else {
            const SimTime lo = std::min(s.start, w.start);
            const SimTime hi = std::max(s.end(), w.end());
            w = StallWindow{lo, hi - lo};
        }
    }
    merged.push_back(w);
    std::sort(merged.begin(), merged.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
    config.stall_windows = std::move(merged);
}

bool overlaps_stall(const PciConfig& config, SimTime from, SimTime to)
{
    // windows are sorted by start; find the first that ends after `from`
    auto it = std::partition_point(config.stall_windows.begin(), config.stall_windows.end(),
                                   [&](const StallWindow& s) { return s.end() <= from; });
    return it != config.stall_windows.end() && it->start < to;
}

std::string_view to_string(TxnState s)
{
    switch (s) {
    case TxnState::Waiting: return "Waiting";
    case TxnState::Bursting: return "Bursting";
    case TxnState::Preempted: return "Preempted";
    case TxnState::Done: return "Done";
    }
    return "?";
}

PciBus::PciBus(sim::Simulator& sim, HostMemory& memory, PciConfig config, Tracer* tracer)
    : sim_(sim), memory_(memory), config_(std::move(config)), tracer_(tracer)
{
    if (config_.clock_period <= 0) throw Error(ErrorCode::InvalidArgument, "PCI clock period must be positive");
    if (config_.bus_width != 4) throw Error(ErrorCode::InvalidArgument, "only a 32-bit PCI bus is modeled");
}

void PciBus::inject_stall(SimTime start, Ticks duration)
{
    pci::inject_stall(config_, start, duration);
    if (tracer_) {
        tracer_->emit(sim_.now(), "pci", "stall",
                      "at=" + std::to_string(start.ticks) + " for=" + std::to_string(duration));
    }
}

BurstSchedule PciBus::begin_burst(BusTransaction txn, BurstPorts ports, EndHandler on_end)
{
    if (active_) throw Error(ErrorCode::BusBusy, "a burst is already in progress");
    if (txn.state != TxnState::Waiting) {
        throw Error(ErrorCode::InvalidArgument, "transaction is " + std::string(to_string(txn.state)));
    }
    if (txn.total_bytes == 0 || txn.transferred_bytes != 0) {
        throw Error(ErrorCode::InvalidArgument, "burst needs a fresh, non-empty transaction");
    }
    if (txn.start_address % 4 != 0) throw Error(ErrorCode::InvalidArgument, "unaligned start " + hex32(txn.start_address));
    memory_.region_at(txn.start_address, txn.total_bytes);
    if (config_.max_burst_cycles == 0) throw Error(ErrorCode::InvalidArgument, "max_burst_cycles must be positive");

    const Ticks period = config_.clock_period;
    auto edge_at_or_after = [period](SimTime t) { return SimTime{sim::floor_div(t.ticks + period - 1, period) * period}; };

    SimTime grant = edge_at_or_after(sim_.now());
    for (const auto& s : config_.stall_windows) {
        if (s.end() <= grant) continue;
        if (s.start > grant) break;
        grant = edge_at_or_after(s.end());
    }
    const SimTime first = grant + static_cast<Ticks>(config_.grant_latency_cycles) * period;

    txn.state = TxnState::Bursting;
    active_ = Active{txn, std::move(ports), std::move(on_end), 0};
    ++bursts_;
    if (tracer_) {
        tracer_->emit(sim_.now(), "pci", "request",
                      "master=" + std::to_string(txn.master_id) + " addr=" + hex32(txn.start_address) +
                          " bytes=" + std::to_string(txn.total_bytes));
    }
    sim_.schedule_at(first + period, [this, first] { data_cycle(first); });
    return BurstSchedule{grant, first};
}

void PciBus::data_cycle(SimTime cycle_start)
{
    const Ticks period = config_.clock_period;
    Active& a = *active_;
    if (overlaps_stall(config_, cycle_start, cycle_start + period)) {
        finish(TxnState::Preempted, sim_.now());
        return;
    }
    BusTransaction& t = a.txn;
    const std::uint32_t n = std::min<std::uint32_t>(config_.bus_width, t.total_bytes - t.transferred_bytes);
    const std::uint32_t address = t.start_address + t.transferred_bytes;
    if (t.direction == Direction::ToDevice) {
        std::uint32_t word = memory_.read_word(address);
        if (n < 4) word &= (std::uint32_t{1} << (8 * n)) - 1;
        a.ports.deliver(word, n);
    } else {
        const std::uint32_t word = a.ports.fetch();
        std::uint8_t bytes[4] = {static_cast<std::uint8_t>(word), static_cast<std::uint8_t>(word >> 8),
                                 static_cast<std::uint8_t>(word >> 16), static_cast<std::uint8_t>(word >> 24)};
        memory_.write(address, std::span<const std::uint8_t>(bytes, n));
    }
    if (logging_) log_.push_back(DataCycle{cycle_start, n, t.direction, t.master_id});
    t.transferred_bytes += n;
    ++a.cycles;

    if (t.transferred_bytes == t.total_bytes) {
        finish(TxnState::Done, sim_.now());
    } else if (a.cycles >= config_.max_burst_cycles) {
        finish(TxnState::Preempted, sim_.now());
    } else {
        const SimTime next = cycle_start + period;
        sim_.schedule_at(next + period, [this, next] { data_cycle(next); });
    }
}

void PciBus::finish(TxnState state, SimTime at)
{
    Active a = std::move(*active_);
    active_.reset();
    a.txn.state = state;
    if (state == TxnState::Preempted) ++preemptions_;
    if (tracer_) {
        tracer_->emit(at, "pci", state == TxnState::Done ? "done" : "preempt",
                      "master=" + std::to_string(a.txn.master_id) +
                          " moved=" + std::to_string(a.txn.transferred_bytes) + "/" +
                          std::to_string(a.txn.total_bytes));
    }
    if (a.on_end) a.on_end(a.txn);
}

double measure_throughput(std::span<const DataCycle> cycles, SimTime from, SimTime to, Ticks period,
                          std::optional<Direction> direction)
{
    if (to <= from) return 0.0;
    // cycles are logged in start order
    auto it = std::partition_point(cycles.begin(), cycles.end(),
                                   [&](const DataCycle& c) { return c.start + period <= from; });
    double bytes = 0.0;
    for (; it != cycles.end() && it->start < to; ++it) {
        if (direction && it->direction != *direction) continue;
        const SimTime lo = std::max(it->start, from);
        const SimTime hi = std::min(it->start + period, to);
        if (hi > lo) bytes += static_cast<double>(it->bytes) * static_cast<double>(hi - lo) / static_cast<double>(period);
    }
    return bytes * 1e12 / static_cast<double>(to - from);
}

}  // namespace proteus::pci
