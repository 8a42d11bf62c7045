#include <gtest/gtest.h>

#include <algorithm>
#include <deque>
#include <random>

#include "oracles.hpp"
#include "proteus/error.hpp"
#include "proteus/fixed_part.hpp"

using namespace proteus;
using namespace proteus::fixed;
using sim::SimTime;
using sim::Ticks;

namespace {

ErrorCode code_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::RuntimeFault;
}

void fill(StreamBuffer& b, std::uint32_t words)
{
    for (std::uint32_t i = 0; i < words; ++i) b.push(i);
}

}  // namespace

TEST(StreamBuffer, FifoOrderAndCapacity)
{
    StreamBuffer b("b", "w", "r");
    EXPECT_EQ(b.capacity(), 256u);
    for (std::uint32_t i = 0; i < 256; ++i) ASSERT_TRUE(b.try_push(i * 3));
    EXPECT_TRUE(b.full());
    EXPECT_FALSE(b.try_push(1));
    EXPECT_EQ(code_of([&] { b.push(1); }), ErrorCode::BufferOverflow);
    for (std::uint32_t i = 0; i < 256; ++i) ASSERT_EQ(b.pop(), i * 3);
    EXPECT_EQ(code_of([&] { b.pop(); }), ErrorCode::BufferUnderflow);
}

TEST(StreamBuffer, OccupancyStaysInRangeUnderRandomTraffic)
{
    std::mt19937_64 rng(1);
    StreamBuffer b("b", "w", "r");
    std::deque<std::uint32_t> ref;
    for (int i = 0; i < 100000; ++i) {
        if (rng() % 2) {
            const auto w = static_cast<std::uint32_t>(rng());
            const bool ok = b.try_push(w);
            ASSERT_EQ(ok, ref.size() < 256);
            if (ok) ref.push_back(w);
        } else {
            const auto w = b.try_pop();
            ASSERT_EQ(w.has_value(), !ref.empty());
            if (w) {
                ASSERT_EQ(*w, ref.front());
                ref.pop_front();
            }
        }
        ASSERT_LE(b.occupancy(), 256u);
        ASSERT_EQ(b.occupancy(), ref.size());
    }
}

TEST(Arbiter, SoleRequesterMayRepeat)
{
    ArbiterState s{TargetId::Downstream};
    EXPECT_EQ(arbitrate(s, {TargetId::Downstream}), TargetId::Downstream);
}

TEST(Arbiter, NoRepeatWithTwoPending)
{
    ArbiterState s{TargetId::Downstream};
    EXPECT_EQ(arbitrate(s, {TargetId::Downstream, TargetId::SelectMapWrite}), TargetId::SelectMapWrite);
    EXPECT_EQ(s.last_granted, TargetId::SelectMapWrite);
}

TEST(Arbiter, AllFourPendingShareEqually)
{
    ArbiterState s{TargetId::Upstream};
    const TargetSet all{TargetId::Upstream, TargetId::Downstream, TargetId::SelectMapRead, TargetId::SelectMapWrite};
    std::array<int, 4> counts{};
    int last = 0;
    for (int i = 0; i < 400; ++i) {
        const TargetId g = arbitrate(s, all);
        const int gi = static_cast<int>(index(g));
        ASSERT_EQ(gi, oracle::grant_ref(last, {true, true, true, true}));
        if (i > 0) ASSERT_NE(gi, last);
        last = gi;
        ++counts[gi];
    }
    EXPECT_EQ(counts, (std::array<int, 4>{100, 100, 100, 100}));
}

TEST(Arbiter, MatchesReferenceOnRandomPendingSets)
{
    std::mt19937_64 rng(2);
    ArbiterState s;
    int last = -1;
    for (int i = 0; i < 20000; ++i) {
        std::array<bool, 4> p{};
        TargetSet set;
        do {
            for (int k = 0; k < 4; ++k) {
                p[k] = rng() % 2;
                if (p[k]) set.insert(kAllTargets[k]);
            }
        } while (set.empty());
        const int g = static_cast<int>(index(arbitrate(s, set)));
        ASSERT_EQ(g, oracle::grant_ref(last, p));
        ASSERT_TRUE(p[g]);
        if (set.size() >= 2) ASSERT_NE(g, last);
        last = g;
    }
}

TEST(Arbiter, ContinuouslyPendingTargetServedWithinFourGrants)
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        ArbiterState s;
        const int watched = static_cast<int>(rng() % 4);
        int since = 0;
        for (int i = 0; i < 200; ++i) {
            TargetSet set{kAllTargets[watched]};
            for (int k = 0; k < 4; ++k) {
                if (rng() % 2) set.insert(kAllTargets[k]);
            }
            if (set.size() < 2) set.insert(kAllTargets[(watched + 1) % 4]);
            const int g = static_cast<int>(index(arbitrate(s, set)));
            since = (g == watched) ? 0 : since + 1;
            ASSERT_LT(since, 4);
        }
    }
}

TEST(FillStatus, DownstreamEmptyBufferRequestsFullBuffer)
{
    StreamBuffer b("downstream", "pci", "user");
    BusmasterAddressState a;
    a.start(TargetId::Downstream, 0x10000, 8192);
    const auto r = on_fill_status(TargetId::Downstream, b, a, 4096 * 4);
    ASSERT_TRUE(r);
    EXPECT_EQ(r->bytes, 1024u);
    EXPECT_EQ(r->address, 0x10000u);
    EXPECT_EQ(r->direction, pci::Direction::ToDevice);
}

TEST(FillStatus, DownstreamAboveLowThresholdWaits)
{
    StreamBuffer b("downstream", "pci", "user");
    fill(b, 65);
    BusmasterAddressState a;
    a.start(TargetId::Downstream, 0x10000, 8192);
    EXPECT_FALSE(on_fill_status(TargetId::Downstream, b, a, 1 << 20));
    b.pop();
    const auto r = on_fill_status(TargetId::Downstream, b, a, 1 << 20);
    ASSERT_TRUE(r);
    EXPECT_EQ(r->bytes, (256u - 64u) * 4);
}

TEST(FillStatus, UpstreamAboveHighThreshold)
{
    StreamBuffer b("upstream", "user", "pci");
    fill(b, 255);
    BusmasterAddressState a;
    a.start(TargetId::Upstream, 0x20000, 8192);
    const auto r = on_fill_status(TargetId::Upstream, b, a, 4096 * 4);
    ASSERT_TRUE(r);
    EXPECT_EQ(r->bytes, 1020u);
    EXPECT_EQ(r->direction, pci::Direction::ToHost);
}

TEST(FillStatus, UpstreamJobEndingFlushesRemainder)
{
    StreamBuffer b("upstream", "user", "pci");
    fill(b, 10);
    BusmasterAddressState a;
    a.start(TargetId::Upstream, 0x20000, 40);
    const auto r = on_fill_status(TargetId::Upstream, b, a, 4096 * 4);
    ASSERT_TRUE(r);
    EXPECT_EQ(r->bytes, 40u);
    a.start(TargetId::Upstream, 0x20000, 400);
    EXPECT_FALSE(on_fill_status(TargetId::Upstream, b, a, 4096 * 4));
}

TEST(FillStatus, FinishedJobMakesNoRequest)
{
    StreamBuffer b("downstream", "pci", "user");
    BusmasterAddressState a;
    a.start(TargetId::Downstream, 0x10000, 8);
    a.advance(TargetId::Downstream, 8);
    EXPECT_FALSE(on_fill_status(TargetId::Downstream, b, a, 1 << 20));
}

TEST(Resume, RestartsAtNextAddress)
{
    StreamBuffer b("downstream", "pci", "user");
    BusmasterAddressState a;
    a.start(TargetId::Downstream, 0x10000, 1024);
    a.advance(TargetId::Downstream, 400);
    pci::BusTransaction t;
    t.start_address = 0x10000;
    t.total_bytes = 1024;
    t.transferred_bytes = 400;
    t.state = pci::TxnState::Preempted;
    const auto r = busmaster_resume(a, TargetId::Downstream, t, b);
    EXPECT_EQ(r.address, 0x10000u + 400);
    EXPECT_EQ(r.bytes, 624u);
}

TEST(Resume, PreemptedBeforeAnyData)
{
    StreamBuffer b("downstream", "pci", "user");
    BusmasterAddressState a;
    a.start(TargetId::Downstream, 0x10000, 1024);
    pci::BusTransaction t;
    t.start_address = 0x10000;
    t.total_bytes = 1024;
    t.state = pci::TxnState::Preempted;
    const auto r = busmaster_resume(a, TargetId::Downstream, t, b);
    EXPECT_EQ(r.address, 0x10000u);
    EXPECT_EQ(r.bytes, 1024u);
}

TEST(Registers, BothSidesShareOneArray)
{
    RegisterFile r;
    EXPECT_EQ(r.access(Side::Kernel, 9, AccessOp::Read), 0u);
    r.access(Side::Host, 3, AccessOp::Write, 0x1234);
    EXPECT_EQ(r.access(Side::Kernel, 3, AccessOp::Read), 0x1234u);
    r.access(Side::Kernel, 7, AccessOp::Write, 0xBEEF);
    EXPECT_EQ(r.access(Side::Host, 7, AccessOp::Read), 0xBEEFu);
    EXPECT_EQ(code_of([&] { r.access(Side::Host, 16, AccessOp::Read); }), ErrorCode::BadIndex);
}

TEST(Interrupts, RaiseAndAcknowledge)
{
    InterruptLine l;
    l.raise(InterruptCause::ReconfigDone);
    EXPECT_TRUE(l.asserted());
    l.acknowledge(InterruptCause::ReconfigDone);
    EXPECT_FALSE(l.asserted());
}

TEST(Interrupts, SetSemantics)
{
    InterruptLine l;
    l.raise(InterruptCause::UpstreamDone);
    l.raise(InterruptCause::UpstreamDone);
    l.acknowledge(InterruptCause::UpstreamDone);
    EXPECT_FALSE(l.asserted());
}

TEST(Interrupts, MaskedCauseDoesNotAssert)
{
    InterruptLine l;
    l.set_mask(bit(InterruptCause::KernelRequest));
    l.raise(InterruptCause::KernelRequest);
    EXPECT_FALSE(l.asserted());
    EXPECT_TRUE(l.pending(InterruptCause::KernelRequest));
    l.set_mask(0);
    EXPECT_TRUE(l.asserted());
}

namespace {

/// Fixed part on a bus, with a device-side consumer and producer driven by
/// a user clock of configurable pace.
struct FixedRig {
    sim::Simulator sim;
    pci::HostMemory mem;
    pci::PciBus bus;
    FixedPart fp;

    explicit FixedRig(pci::PciConfig cfg = {}, FixedPartConfig fcfg = {}) : bus(sim, mem, std::move(cfg)), fp(sim, bus, fcfg)
    {
        fp.set_active(true);
    }
};

}  // namespace

TEST(FixedPart, RegistersInaccessibleUntilActive)
{
    sim::Simulator sim;
    pci::HostMemory mem;
    pci::PciBus bus(sim, mem);
    FixedPart fp(sim, bus);
    EXPECT_EQ(code_of([&] { fp.host_read(0); }), ErrorCode::DeviceInert);
    EXPECT_EQ(code_of([&] { fp.host_write(6, 1); }), ErrorCode::DeviceInert);
}

TEST(FixedPart, CauseRegisterIsWriteOneToClear)
{
    FixedRig r;
    r.fp.raise(InterruptCause::ReconfigDone);
    r.fp.raise(InterruptCause::KernelRequest);
    EXPECT_EQ(r.fp.host_read(reg::kIrqCause), bit(InterruptCause::ReconfigDone) | bit(InterruptCause::KernelRequest));
    r.fp.host_write(reg::kIrqCause, bit(InterruptCause::ReconfigDone));
    EXPECT_EQ(r.fp.host_read(reg::kIrqCause), bit(InterruptCause::KernelRequest));
}

TEST(FixedPart, ResumeAfterStallStartsAfterStallEnd)
{
    pci::PciConfig cfg;
    cfg.grant_latency_cycles = 0;
    const Ticks p = cfg.clock_period;
    FixedRig r(cfg);
    r.bus.inject_stall(SimTime{100 * p}, 1'000'000);
    const auto region = r.mem.map_shared_region(1024);
    r.fp.start_job(TargetId::Downstream, region.base, 1024);
    auto& down = r.fp.buffer(TargetId::Downstream);
    // drain on a fast clock so the buffer never blocks the job
    const auto user = r.sim.add_clock("user", 20'000, 0, [&](SimTime) { down.try_pop(); });
    r.sim.set_clock_gate(user, true);
    r.sim.run_until(SimTime{10 * sim::kMillisecond});
    EXPECT_FALSE(r.fp.job_active(TargetId::Downstream));
    const auto& cycles = r.bus.data_cycles();
    ASSERT_EQ(cycles.size(), 256u);
    EXPECT_EQ(cycles[99].start.ticks, 99 * p);
    EXPECT_GE(cycles[100].start.ticks, 100 * p + 1'000'000);
    EXPECT_EQ(r.bus.preemptions(), 1u);
}

TEST(FixedPart, StreamIntegrityUnderRandomStallsAndThresholds)
{
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 40; ++trial) {
        pci::PciConfig cfg;
        cfg.grant_latency_cycles = static_cast<std::uint32_t>(rng() % 10);
        cfg.max_burst_cycles = 1 + static_cast<std::uint32_t>(rng() % 300);
        FixedPartConfig fcfg;
        fcfg.threshold_low = static_cast<std::uint32_t>(rng() % 200);
        fcfg.threshold_high = fcfg.threshold_low + 1 + static_cast<std::uint32_t>(rng() % (256 - fcfg.threshold_low));
        FixedRig r(cfg, fcfg);
        for (int k = 0; k < 8; ++k) {
            r.bus.inject_stall(SimTime{static_cast<Ticks>(rng() % 2'000'000'000)},
                               1 + static_cast<Ticks>(rng() % 20'000'000));
        }
        const std::uint32_t bytes = 4 * (1 + static_cast<std::uint32_t>(rng() % 8000));
        const auto in = r.mem.map_shared_region(bytes);
        const auto out = r.mem.map_shared_region(bytes);
        std::vector<std::uint8_t> data(bytes);
        for (auto& b : data) b = static_cast<std::uint8_t>(rng());
        r.mem.write(in.base, data);

        auto& down = r.fp.buffer(TargetId::Downstream);
        auto& up = r.fp.buffer(TargetId::Upstream);
        const std::uint64_t pace = 1 + rng() % 4;
        std::uint64_t tick = 0;
        const auto user = r.sim.add_clock("user", 20'000, 0, [&](SimTime) {
            if (++tick % pace != 0) return;
            if (!down.empty() && !up.full()) up.push(down.pop());
        });
        r.sim.set_clock_gate(user, true);
        r.fp.start_job(TargetId::Downstream, in.base, bytes);
        r.fp.start_job(TargetId::Upstream, out.base, bytes);
        while (r.fp.job_active(TargetId::Upstream) && r.sim.now().ticks < 50 * sim::kMillisecond) {
            r.sim.run_until(r.sim.now() + 1'000'000);
        }
        ASSERT_FALSE(r.fp.job_active(TargetId::Downstream)) << trial;
        ASSERT_FALSE(r.fp.job_active(TargetId::Upstream)) << trial;
        std::vector<std::uint8_t> got(bytes);
        r.mem.read(out.base, got);
        ASSERT_EQ(got, data) << trial;
        EXPECT_TRUE(r.fp.interrupts().pending(InterruptCause::DownstreamDone));
        EXPECT_TRUE(r.fp.interrupts().pending(InterruptCause::UpstreamDone));
    }
}

TEST(FixedPart, GrantEventsNameTheTarget)
{
    Tracer tracer(true);
    sim::Simulator sim;
    pci::HostMemory mem;
    pci::PciBus bus(sim, mem, {}, &tracer);
    FixedPart fp(sim, bus, {}, &tracer);
    fp.set_active(true);
    const auto region = mem.map_shared_region(64);
    fp.start_job(TargetId::Downstream, region.base, 64);
    sim.run_until(SimTime{sim::kMillisecond});
    const auto& recs = tracer.records();
    const auto it = std::find_if(recs.begin(), recs.end(), [](const TraceRecord& t) { return t.event == "grant"; });
    ASSERT_NE(it, recs.end());
    EXPECT_EQ(it->component, "arbiter");
    EXPECT_EQ(it->detail, "Downstream");
}
