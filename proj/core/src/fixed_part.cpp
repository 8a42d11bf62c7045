#include "proteus/fixed_part.hpp"

#include <algorithm>

#include "proteus/error.hpp"

namespace proteus::fixed {

std::string_view to_string(TargetId t)
{
    switch (t) {
    case TargetId::Upstream: return "Upstream";
    case TargetId::Downstream: return "Downstream";
    case TargetId::SelectMapRead: return "SelectMapRead";
    case TargetId::SelectMapWrite: return "SelectMapWrite";
    }
    return "?";
}

std::string_view to_string(InterruptCause c)
{
    switch (c) {
    case InterruptCause::ReconfigDone: return "ReconfigDone";
    case InterruptCause::ReadbackDone: return "ReadbackDone";
    case InterruptCause::UpstreamDone: return "UpstreamDone";
    case InterruptCause::DownstreamDone: return "DownstreamDone";
    case InterruptCause::KernelRequest: return "KernelRequest";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// StreamBuffer

StreamBuffer::StreamBuffer(std::string name, std::string write_domain, std::string read_domain,
                           std::uint32_t threshold_low, std::uint32_t threshold_high)
    : name_(std::move(name)), write_domain_(std::move(write_domain)), read_domain_(std::move(read_domain)),
      low_(threshold_low), high_(threshold_high)
{
    set_thresholds(threshold_low, threshold_high);
}

void StreamBuffer::set_thresholds(std::uint32_t low, std::uint32_t high)
{
    if (low > high || high > kCapacityWords || high == 0) {
        throw Error(ErrorCode::InvalidArgument, "thresholds need low <= high <= 256 and high > 0");
    }
    low_ = low;
    high_ = high;
}

bool StreamBuffer::try_push(std::uint32_t word)
{
    if (full()) return false;
    ring_[(head_ + count_) % kCapacityWords] = word;
    ++count_;
    ++words_in_;
    for (auto& t : taps_) t(word);
    for (auto& l : push_listeners_) l();
    return true;
}

std::optional<std::uint32_t> StreamBuffer::try_pop()
{
    if (empty()) return std::nullopt;
    const std::uint32_t w = ring_[head_];
    head_ = (head_ + 1) % kCapacityWords;
    --count_;
    ++words_out_;
    for (auto& l : pop_listeners_) l();
    return w;
}

void StreamBuffer::push(std::uint32_t word)
{
    if (!try_push(word)) throw Error(ErrorCode::BufferOverflow, name_ + " is full");
}

std::uint32_t StreamBuffer::pop()
{
    auto w = try_pop();
    if (!w) throw Error(ErrorCode::BufferUnderflow, name_ + " is empty");
    return *w;
}

// ---------------------------------------------------------------------------
// arbitration and addressing

TargetId arbitrate(ArbiterState& state, TargetSet pending)
{
    if (pending.empty()) throw Error(ErrorCode::InvalidArgument, "arbitrate needs at least one request");
    if (pending.size() == 1) {
        for (auto t : kAllTargets) {
            if (pending.contains(t)) return *(state.last_granted = t);
        }
    }
    // cyclic scan starting after the last winner; with >= 2 requests pending
    // the last winner itself is reached only after every other target
    const std::size_t start = state.last_granted ? index(*state.last_granted) + 1 : 0;
    for (std::size_t i = 0; i < kAllTargets.size(); ++i) {
        const TargetId t = kAllTargets[(start + i) % kAllTargets.size()];
        if (pending.contains(t) && t != state.last_granted) return *(state.last_granted = t);
    }
    throw Error(ErrorCode::InvalidArgument, "unreachable arbitration state");
}

void BusmasterAddressState::start(TargetId t, std::uint32_t base, std::uint32_t length)
{
    entries_[index(t)] = Entry{base, length, base, length};
}

void BusmasterAddressState::advance(TargetId t, std::uint32_t bytes)
{
    Entry& e = entries_[index(t)];
    if (bytes > e.bytes_remaining) {
        throw Error(ErrorCode::InvalidArgument, std::string(to_string(t)) + " advanced past the end of its job");
    }
    e.next_address += bytes;
    e.bytes_remaining -= bytes;
}

std::optional<TransferRequest> on_fill_status(TargetId target, const StreamBuffer& buffer,
                                              const BusmasterAddressState& addresses,
                                              std::uint32_t max_burst_bytes)
{
    const auto& e = addresses.entry(target);
    if (e.bytes_remaining == 0) return std::nullopt;

    if (is_device_bound(target)) {
        if (buffer.occupancy() > buffer.threshold_low()) return std::nullopt;
        const std::uint32_t bytes = std::min({buffer.free_words() * 4, e.bytes_remaining, max_burst_bytes});
        if (bytes == 0) return std::nullopt;
        return TransferRequest{target, pci::Direction::ToDevice, e.next_address, bytes};
    }

    const std::uint32_t available = buffer.occupancy() * 4;
    const bool ending = buffer.occupancy() > 0 && available >= e.bytes_remaining;
    if (buffer.occupancy() < buffer.threshold_high() && !ending) return std::nullopt;
    const std::uint32_t bytes = std::min({available, e.bytes_remaining, max_burst_bytes});
    if (bytes == 0) return std::nullopt;
    return TransferRequest{target, pci::Direction::ToHost, e.next_address, bytes};
}

TransferRequest busmaster_resume(const BusmasterAddressState& addresses, TargetId target,
                                 const pci::BusTransaction& preempted, const StreamBuffer& buffer)
{
    if (preempted.state != pci::TxnState::Preempted) {
        throw Error(ErrorCode::InvalidArgument, "only a preempted transaction can be resumed");
    }
    const std::uint32_t next = preempted.start_address + preempted.transferred_bytes;
    const auto& e = addresses.entry(target);
    if (e.next_address != next) {
        throw Error(ErrorCode::InvalidArgument, "address provider out of step with the preempted burst");
    }
    std::uint32_t bytes = preempted.total_bytes - preempted.transferred_bytes;
    if (is_device_bound(target)) {
        bytes = std::min(bytes, buffer.free_words() * 4);
    } else {
        bytes = std::min(bytes, buffer.occupancy() * 4);
    }
    return TransferRequest{target, preempted.direction, next, bytes};
}

// ---------------------------------------------------------------------------
// registers

std::uint32_t RegisterFile::access(Side, unsigned index, AccessOp op, std::uint32_t value)
{
    if (op == AccessOp::Write) {
        write(index, value);
        return value;
    }
    return read(index);
}

std::uint32_t RegisterFile::read(unsigned index) const
{
    if (index >= reg::kCount) throw Error(ErrorCode::BadIndex, "register " + std::to_string(index));
    return regs_[index];
}

void RegisterFile::write(unsigned index, std::uint32_t value)
{
    if (index >= reg::kCount) throw Error(ErrorCode::BadIndex, "register " + std::to_string(index));
    regs_[index] = value;
}

// ---------------------------------------------------------------------------
// FixedPart

FixedPart::FixedPart(sim::Simulator& sim, pci::PciBus& bus, FixedPartConfig config, Tracer* tracer)
    : sim_(sim), bus_(bus), tracer_(tracer),
      buffers_{StreamBuffer("upstream", "user", "pci", config.threshold_low, config.threshold_high),
               StreamBuffer("downstream", "pci", "user", config.threshold_low, config.threshold_high),
               StreamBuffer("selectmap_read", "selectmap", "pci", config.threshold_low, config.threshold_high),
               StreamBuffer("selectmap_write", "pci", "selectmap", config.threshold_low, config.threshold_high)}
{
    // the initiator reacts to fill status on the PCI-side port of each buffer
    for (auto t : kAllTargets) {
        if (is_device_bound(t)) {
            buffer(t).on_pop([this] { poll(); });
        } else {
            buffer(t).on_push([this] { poll(); });
        }
    }
}

std::uint32_t FixedPart::host_read(unsigned index)
{
    if (!active_) throw Error(ErrorCode::DeviceInert, "register read before the device is configured");
    if (index == reg::kIrqCause) return irq_.pending_bits();
    if (index == reg::kIrqMask) return irq_.mask();
    return regs_.access(Side::Host, index, AccessOp::Read);
}

void FixedPart::host_write(unsigned index, std::uint32_t value)
{
    if (!active_) throw Error(ErrorCode::DeviceInert, "register write before the device is configured");
    regs_.access(Side::Host, index, AccessOp::Write, value);
    switch (index) {
    case reg::kIrqCause:
        irq_.acknowledge_bits(value);  // write-one-to-clear
        sync_irq_registers();
        break;
    case reg::kIrqMask:
        irq_.set_mask(value);
        sync_irq_registers();
        break;
    case reg::kControl:
        if (on_control) on_control(value);
        break;
    default: break;
    }
}

void FixedPart::sync_irq_registers()
{
    regs_.write(reg::kIrqCause, irq_.pending_bits());
    regs_.write(reg::kIrqMask, irq_.mask());
}

void FixedPart::raise(InterruptCause c)
{
    irq_.raise(c);
    sync_irq_registers();
    irq_log_.push_back(InterruptEvent{sim_.now(), c});
    if (tracer_) tracer_->emit(sim_.now(), "irq", "raise", std::string(to_string(c)));
}

void FixedPart::acknowledge(InterruptCause c)
{
    irq_.acknowledge(c);
    sync_irq_registers();
}

void FixedPart::start_job(TargetId t, std::uint32_t base, std::uint32_t length)
{
    if (jobs_[index(t)]) {
        throw Error(ErrorCode::BusBusy, std::string(to_string(t)) + " already has a job in progress");
    }
    if (length == 0) throw Error(ErrorCode::InvalidArgument, std::string(to_string(t)) + " job of length 0");
    if (base % 4 != 0) throw Error(ErrorCode::InvalidArgument, std::string(to_string(t)) + " base must be word aligned");
    bus_.memory().region_at(base, length);
    addresses_.start(t, base, length);
    jobs_[index(t)] = true;
    resume_[index(t)].reset();
    if (tracer_) {
        tracer_->emit(sim_.now(), "fixed", "job_start",
                      std::string(to_string(t)) + " bytes=" + std::to_string(length));
    }
    poll();
}

void FixedPart::poll()
{
    if (polling_ || bus_.busy()) return;
    polling_ = true;
    const std::uint32_t max_burst_bytes = bus_.config().max_burst_cycles * bus_.config().bus_width;

    std::array<std::optional<TransferRequest>, 4> wants{};
    TargetSet pending;
    for (auto t : kAllTargets) {
        if (!jobs_[index(t)]) continue;
        if (resume_[index(t)]) {
            wants[index(t)] = resume_[index(t)];
        } else {
            wants[index(t)] = on_fill_status(t, buffer(t), addresses_, max_burst_bytes);
        }
        if (wants[index(t)]) pending.insert(t);
    }
    if (!pending.empty()) {
        const TargetId winner = arbitrate(arbiter_, pending);
        ++grants_[index(winner)];
        resume_[index(winner)].reset();
        if (tracer_) tracer_->emit(sim_.now(), "arbiter", "grant", std::string(to_string(winner)));
        launch(*wants[index(winner)]);
    }
    polling_ = false;
}

void FixedPart::launch(const TransferRequest& request)
{
    pci::BusTransaction txn;
    txn.master_id = static_cast<std::uint32_t>(index(request.target));
    txn.direction = request.direction;
    txn.start_address = request.address;
    txn.total_bytes = request.bytes;
    burst_left_ = request.bytes;

    const TargetId t = request.target;
    pci::BurstPorts ports;
    if (request.direction == pci::Direction::ToDevice) {
        ports.deliver = [this, t](std::uint32_t word, std::uint32_t valid) {
            addresses_.advance(t, valid);
            burst_left_ -= valid;
            buffer(t).push(word);
        };
    } else {
        ports.fetch = [this, t] {
            const std::uint32_t n = std::min<std::uint32_t>(4, burst_left_);
            addresses_.advance(t, n);
            burst_left_ -= n;
            return buffer(t).pop();
        };
    }
    bus_.begin_burst(txn, std::move(ports), [this, t](const pci::BusTransaction& done) { burst_ended(t, done); });
}

void FixedPart::burst_ended(TargetId t, const pci::BusTransaction& txn)
{
    if (txn.state == pci::TxnState::Preempted) {
        resume_[index(t)] = busmaster_resume(addresses_, t, txn, buffer(t));
        if (resume_[index(t)]->bytes == 0) resume_[index(t)].reset();
    } else if (addresses_.entry(t).bytes_remaining == 0) {
        jobs_[index(t)] = false;
        if (tracer_) tracer_->emit(sim_.now(), "fixed", "job_done", std::string(to_string(t)));
        switch (t) {
        case TargetId::Upstream: raise(InterruptCause::UpstreamDone); break;
        case TargetId::Downstream: raise(InterruptCause::DownstreamDone); break;
        case TargetId::SelectMapRead: raise(InterruptCause::ReadbackDone); break;
        case TargetId::SelectMapWrite: break;  // the controller reports completion
        }
    }
    poll();
}

}  // namespace proteus::fixed
