#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "proteus/pci_bus.hpp"
#include "proteus/sim_kernel.hpp"
#include "proteus/trace.hpp"

namespace proteus::fixed {

enum class TargetId : std::uint8_t { Upstream = 0, Downstream = 1, SelectMapRead = 2, SelectMapWrite = 3 };

inline constexpr std::array<TargetId, 4> kAllTargets{TargetId::Upstream, TargetId::Downstream,
                                                     TargetId::SelectMapRead, TargetId::SelectMapWrite};

std::string_view to_string(TargetId t);
constexpr std::size_t index(TargetId t) { return static_cast<std::size_t>(t); }

/// Device-bound targets pull from host RAM; host-bound targets push to it.
constexpr bool is_device_bound(TargetId t) { return t == TargetId::Downstream || t == TargetId::SelectMapWrite; }

class TargetSet {
public:
    TargetSet() = default;
    TargetSet(std::initializer_list<TargetId> targets)
    {
        for (auto t : targets) insert(t);
    }

    void insert(TargetId t) { bits_.set(index(t)); }
    void erase(TargetId t) { bits_.reset(index(t)); }
    bool contains(TargetId t) const { return bits_.test(index(t)); }
    std::size_t size() const { return bits_.count(); }
    bool empty() const { return bits_.none(); }

private:
    std::bitset<4> bits_;
};

/// Dual-port 256x32-bit BRAM FIFO. The write port and read port belong to
/// different clock domains; pushes into a full buffer are refused.
class StreamBuffer {
public:
    static constexpr std::uint32_t kCapacityWords = 256;
    using Listener = std::function<void()>;
    using Tap = std::function<void(std::uint32_t word)>;

    StreamBuffer(std::string name, std::string write_domain, std::string read_domain,
                 std::uint32_t threshold_low = 64, std::uint32_t threshold_high = 192);

    const std::string& name() const { return name_; }
    const std::string& write_domain() const { return write_domain_; }
    const std::string& read_domain() const { return read_domain_; }

    std::uint32_t capacity() const { return kCapacityWords; }
    std::uint32_t occupancy() const { return count_; }
    std::uint32_t free_words() const { return kCapacityWords - count_; }
    bool empty() const { return count_ == 0; }
    bool full() const { return count_ == kCapacityWords; }

    std::uint32_t threshold_low() const { return low_; }
    std::uint32_t threshold_high() const { return high_; }
    void set_thresholds(std::uint32_t low, std::uint32_t high);

    bool try_push(std::uint32_t word);
    std::optional<std::uint32_t> try_pop();
    /// Throwing variants for producers that sized their request to fit.
    void push(std::uint32_t word);
    std::uint32_t pop();

    void on_push(Listener l) { push_listeners_.push_back(std::move(l)); }
    void on_pop(Listener l) { pop_listeners_.push_back(std::move(l)); }
    /// Observes every accepted word, in order.
    void add_tap(Tap t) { taps_.push_back(std::move(t)); }

    std::uint64_t words_in() const { return words_in_; }
    std::uint64_t words_out() const { return words_out_; }

private:
    std::string name_, write_domain_, read_domain_;
    std::uint32_t low_, high_;
    std::array<std::uint32_t, kCapacityWords> ring_{};
    std::uint32_t head_ = 0;
    std::uint32_t count_ = 0;
    std::uint64_t words_in_ = 0, words_out_ = 0;
    std::vector<Listener> push_listeners_, pop_listeners_;
    std::vector<Tap> taps_;
};

struct ArbiterState {
    std::optional<TargetId> last_granted;
};

/// Grants one pending target. With more than one pending, the previous
/// winner is skipped; ties go in cyclic order starting after it.
TargetId arbitrate(ArbiterState& state, TargetSet pending);

struct TransferRequest {
    TargetId target = TargetId::Downstream;
    pci::Direction direction = pci::Direction::ToDevice;
    std::uint32_t address = 0;
    std::uint32_t bytes = 0;

    bool operator==(const TransferRequest&) const = default;
};

/// Busmaster Address Provider: where each target's job continues.
class BusmasterAddressState {
public:
    struct Entry {
        std::uint32_t base = 0;
        std::uint32_t length = 0;
        std::uint32_t next_address = 0;
        std::uint32_t bytes_remaining = 0;
    };

    void start(TargetId t, std::uint32_t base, std::uint32_t length);
    void advance(TargetId t, std::uint32_t bytes);
    const Entry& entry(TargetId t) const { return entries_[index(t)]; }

private:
    std::array<Entry, 4> entries_{};
};

/// Fill-status trigger for the Busmaster Initiator.
std::optional<TransferRequest> on_fill_status(TargetId target, const StreamBuffer& buffer,
                                              const BusmasterAddressState& addresses,
                                              std::uint32_t max_burst_bytes);

/// Continues a preempted burst at the next address.
TransferRequest busmaster_resume(const BusmasterAddressState& addresses, TargetId target,
                                 const pci::BusTransaction& preempted, const StreamBuffer& buffer);

enum class Side { Host, Kernel };
enum class AccessOp { Read, Write };

namespace reg {
inline constexpr unsigned kDownBase = 0;
inline constexpr unsigned kDownLen = 1;
inline constexpr unsigned kUpBase = 2;
inline constexpr unsigned kUpLen = 3;
inline constexpr unsigned kCfgBase = 4;
inline constexpr unsigned kCfgLen = 5;
inline constexpr unsigned kControl = 6;
inline constexpr unsigned kStatus = 7;
inline constexpr unsigned kKernelFirst = 8;
inline constexpr unsigned kKernelLast = 13;
inline constexpr unsigned kIrqMask = 14;
inline constexpr unsigned kIrqCause = 15;
inline constexpr unsigned kCount = 16;

inline constexpr std::uint32_t kStartDown = 1u << 0;
inline constexpr std::uint32_t kStartUp = 1u << 1;
inline constexpr std::uint32_t kStartReconfig = 1u << 2;
inline constexpr std::uint32_t kStartReadback = 1u << 3;

/// cfg_len during readback: first column in bits 0..15, count in 16..31.
constexpr std::uint32_t readback_region(std::uint16_t first, std::uint16_t count)
{
    return std::uint32_t{first} | (std::uint32_t{count} << 16);
}
}  // namespace reg

class RegisterFile {
public:
    std::uint32_t access(Side side, unsigned index, AccessOp op, std::uint32_t value = 0);
    std::uint32_t read(unsigned index) const;
    void write(unsigned index, std::uint32_t value);

private:
    std::array<std::uint32_t, reg::kCount> regs_{};
};

enum class InterruptCause : std::uint8_t {
    ReconfigDone = 0,
    ReadbackDone = 1,
    UpstreamDone = 2,
    DownstreamDone = 3,
    KernelRequest = 4,
};

std::string_view to_string(InterruptCause c);
constexpr std::uint32_t bit(InterruptCause c) { return 1u << static_cast<unsigned>(c); }

/// Pending causes form a set; the line is asserted while any unmasked cause
/// is pending.
class InterruptLine {
public:
    void raise(InterruptCause c) { pending_ |= bit(c); }
    void acknowledge(InterruptCause c) { pending_ &= ~bit(c); }
    void acknowledge_bits(std::uint32_t bits) { pending_ &= ~bits; }
    void set_mask(std::uint32_t bits) { masked_ = bits & kAllCauses; }

    bool pending(InterruptCause c) const { return (pending_ & bit(c)) != 0; }
    std::uint32_t pending_bits() const { return pending_; }
    std::uint32_t mask() const { return masked_; }
    bool asserted() const { return (pending_ & ~masked_) != 0; }

    static constexpr std::uint32_t kAllCauses = 0x1f;

private:
    std::uint32_t pending_ = 0;
    std::uint32_t masked_ = 0;
};

struct InterruptEvent {
    sim::SimTime time;
    InterruptCause cause;
};

struct FixedPartConfig {
    std::uint32_t threshold_low = 64;
    std::uint32_t threshold_high = 192;
};

/// Control and data sections of the boot-resident logic: stream buffers,
/// busmaster initiator with address provider, transfer arbitration, the
/// register file and interrupt generation.
class FixedPart {
public:
    FixedPart(sim::Simulator& sim, pci::PciBus& bus, FixedPartConfig config = {}, Tracer* tracer = nullptr);
    FixedPart(const FixedPart&) = delete;
    FixedPart& operator=(const FixedPart&) = delete;

    StreamBuffer& buffer(TargetId t) { return buffers_[index(t)]; }
    const StreamBuffer& buffer(TargetId t) const { return buffers_[index(t)]; }
    RegisterFile& registers() { return regs_; }
    InterruptLine& interrupts() { return irq_; }
    const InterruptLine& interrupts() const { return irq_; }
    const BusmasterAddressState& addresses() const { return addresses_; }
    const ArbiterState& arbiter() const { return arbiter_; }

    /// Logic comes alive once the boot image is loaded.
    void set_active(bool active) { active_ = active; }
    bool active() const { return active_; }

    /// Host (PCI target) view of the register map.
    std::uint32_t host_read(unsigned index);
    void host_write(unsigned index, std::uint32_t value);

    /// Programs a job for one stream target and wakes the initiator.
    void start_job(TargetId t, std::uint32_t base, std::uint32_t length);
    bool job_active(TargetId t) const { return jobs_[index(t)]; }

    /// Busmaster Initiator: if the bus is free, arbitrate among targets that
    /// want a transfer and start one burst.
    void poll();

    void raise(InterruptCause c);
    void acknowledge(InterruptCause c);

    /// Invoked after a host write to the control register.
    std::function<void(std::uint32_t control)> on_control;

    const std::vector<InterruptEvent>& interrupt_log() const { return irq_log_; }
    std::uint64_t grants(TargetId t) const { return grants_[index(t)]; }

private:
    void launch(const TransferRequest& request);
    void burst_ended(TargetId t, const pci::BusTransaction& txn);
    void sync_irq_registers();

    sim::Simulator& sim_;
    pci::PciBus& bus_;
    Tracer* tracer_;
    std::array<StreamBuffer, 4> buffers_;
    RegisterFile regs_;
    InterruptLine irq_;
    ArbiterState arbiter_;
    BusmasterAddressState addresses_;
    std::array<bool, 4> jobs_{};
    std::array<std::optional<TransferRequest>, 4> resume_{};
    std::array<std::uint64_t, 4> grants_{};
    std::uint32_t burst_left_ = 0;
    bool active_ = false;
    bool polling_ = false;
    std::vector<InterruptEvent> irq_log_;
};

}  // namespace proteus::fixed
