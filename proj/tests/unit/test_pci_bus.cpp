#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "proteus/error.hpp"
#include "proteus/pci_bus.hpp"

using namespace proteus;
using namespace proteus::pci;
using sim::SimTime;

namespace {

constexpr Ticks kP = 30'303;

struct Rig {
    sim::Simulator sim;
    HostMemory mem;
    PciBus bus;
    std::vector<std::uint8_t> received;
    std::vector<BusTransaction> ended;

    explicit Rig(PciConfig cfg = {}) : bus(sim, mem, std::move(cfg)) {}

    BurstPorts sink()
    {
        BurstPorts p;
        p.deliver = [this](std::uint32_t w, std::uint32_t n) {
            for (std::uint32_t i = 0; i < n; ++i) received.push_back(static_cast<std::uint8_t>(w >> (8 * i)));
        };
        return p;
    }

    BusTransaction read_txn(std::uint32_t addr, std::uint32_t bytes)
    {
        BusTransaction t;
        t.direction = Direction::ToDevice;
        t.start_address = addr;
        t.total_bytes = bytes;
        return t;
    }

    /// Drives a device-bound job to completion, resuming after each preemption.
    void run_job(std::uint32_t addr, std::uint32_t bytes)
    {
        std::uint32_t done = 0;
        std::function<void()> start = [&] {
            bus.begin_burst(read_txn(addr + done, bytes - done), sink(), [&](const BusTransaction& t) {
                ended.push_back(t);
                done += t.transferred_bytes;
                if (done < bytes) sim.schedule_in(0, start);
            });
        };
        start();
        sim.run_until(SimTime{sim::kSecond});
        ASSERT_EQ(done, bytes);
    }
};

PciConfig ideal(std::uint32_t grant = 0, std::uint32_t burst = 4096)
{
    PciConfig c;
    c.grant_latency_cycles = grant;
    c.max_burst_cycles = burst;
    return c;
}

std::vector<std::uint8_t> pattern(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::vector<std::uint8_t> v(n);
    for (auto& b : v) b = static_cast<std::uint8_t>(rng());
    return v;
}

}  // namespace

TEST(HostMemory, RegionsArePageAlignedAndDisjoint)
{
    HostMemory m;
    const auto a = m.map_shared_region(32768);
    const auto b = m.map_shared_region(100);
    EXPECT_EQ(a.base % 4096, 0u);
    EXPECT_EQ(b.base % 4096, 0u);
    EXPECT_TRUE(a.base + a.size <= b.base || b.base + b.size <= a.base);
    EXPECT_TRUE(std::ranges::all_of(m.bytes(a.id), [](std::uint8_t x) { return x == 0; }));
}

TEST(HostMemory, ZeroBytesRejected)
{
    HostMemory m;
    EXPECT_THROW(m.map_shared_region(0), Error);
}

TEST(HostMemory, AddressSpaceExhaustion)
{
    HostMemory m;
    try {
        for (int i = 0; i < 10; ++i) m.map_shared_region(std::size_t{1} << 30);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OutOfAddressSpace);
    }
}

TEST(Burst, KilobyteWithoutGrantLatency)
{
    Rig r(ideal());
    const auto reg = r.mem.map_shared_region(1024);
    r.mem.write(reg.base, pattern(1024, 1));
    SimTime end_at;
    r.bus.begin_burst(r.read_txn(reg.base, 1024), r.sink(), [&](const BusTransaction& t) {
        EXPECT_EQ(t.state, TxnState::Done);
        end_at = r.sim.now();
    });
    r.sim.run_until(SimTime{sim::kMillisecond});
    EXPECT_EQ(end_at.ticks, 7'757'568);
    EXPECT_EQ(r.received, pattern(1024, 1));
}

TEST(Burst, GrantLatencyDelaysFirstData)
{
    Rig r(ideal(8));
    const auto reg = r.mem.map_shared_region(64);
    const BurstSchedule s = r.bus.begin_burst(r.read_txn(reg.base, 64), r.sink(), {});
    EXPECT_EQ(s.grant_at.ticks, 0);
    EXPECT_EQ(s.first_data_at.ticks, 8 * kP);
}

TEST(Burst, MaxBurstCyclesPreempts)
{
    Rig r(ideal(0, 128));
    const auto reg = r.mem.map_shared_region(1024);
    std::optional<BusTransaction> t;
    r.bus.begin_burst(r.read_txn(reg.base, 1024), r.sink(), [&](const BusTransaction& x) { t = x; });
    r.sim.run_until(SimTime{sim::kMillisecond});
    ASSERT_TRUE(t);
    EXPECT_EQ(t->state, TxnState::Preempted);
    EXPECT_EQ(t->transferred_bytes, 512u);
}

TEST(Burst, UnmappedAddress)
{
    Rig r;
    try {
        r.bus.begin_burst(r.read_txn(0x4000'0000, 64), r.sink(), {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnmappedAddress);
    }
}

TEST(Burst, SecondBurstWhileBusy)
{
    Rig r;
    const auto reg = r.mem.map_shared_region(64);
    r.bus.begin_burst(r.read_txn(reg.base, 64), r.sink(), {});
    EXPECT_THROW(r.bus.begin_burst(r.read_txn(reg.base, 64), r.sink(), {}), Error);
}

TEST(Stall, IdleBusIsUnaffected)
{
    auto end_time = [](bool stall) {
        Rig r(ideal());
        if (stall) r.bus.inject_stall(SimTime{0}, 1'000'000);
        const auto reg = r.mem.map_shared_region(1024);
        SimTime end;
        r.sim.schedule_at(SimTime{2'000'000}, [&] {
            r.bus.begin_burst(r.read_txn(reg.base, 1024), r.sink(), [&](const BusTransaction&) { end = r.sim.now(); });
        });
        r.sim.run_until(SimTime{sim::kMillisecond});
        return end;
    };
    EXPECT_EQ(end_time(true), end_time(false));
}

TEST(Stall, MidBurstAtByte400)
{
    Rig r(ideal());
    r.bus.inject_stall(SimTime{100 * kP}, 50 * kP);
    const auto reg = r.mem.map_shared_region(1024);
    std::optional<BusTransaction> t;
    r.bus.begin_burst(r.read_txn(reg.base, 1024), r.sink(), [&](const BusTransaction& x) { t = x; });
    r.sim.run_until(SimTime{sim::kMillisecond});
    ASSERT_TRUE(t);
    EXPECT_EQ(t->state, TxnState::Preempted);
    EXPECT_EQ(t->transferred_bytes, 400u);
}

TEST(Stall, PreemptedByteCountIsWordAligned)
{
    std::mt19937_64 rng(2);
    for (int i = 0; i < 200; ++i) {
        Rig r(ideal(static_cast<std::uint32_t>(rng() % 4)));
        r.bus.inject_stall(SimTime{static_cast<Ticks>(rng() % (300 * kP))}, 1 + static_cast<Ticks>(rng() % (20 * kP)));
        const auto reg = r.mem.map_shared_region(1024);
        std::optional<BusTransaction> t;
        r.bus.begin_burst(r.read_txn(reg.base, 1024), r.sink(), [&](const BusTransaction& x) { t = x; });
        r.sim.run_until(SimTime{sim::kMillisecond});
        ASSERT_TRUE(t);
        ASSERT_EQ(t->transferred_bytes % 4, 0u);
    }
}

TEST(Stall, AdjacentWindowsMerge)
{
    PciConfig a = ideal(), b = ideal();
    inject_stall(a, SimTime{1000}, 500);
    inject_stall(a, SimTime{1500}, 700);
    inject_stall(b, SimTime{1000}, 1200);
    EXPECT_EQ(a.stall_windows, b.stall_windows);
    inject_stall(a, SimTime{900}, 150);
    ASSERT_EQ(a.stall_windows.size(), 1u);
    EXPECT_EQ(a.stall_windows[0].start.ticks, 900);
    EXPECT_EQ(a.stall_windows[0].end().ticks, 2200);
}

TEST(Stall, AdjacentWindowsGiveIdenticalTraces)
{
    auto run = [](bool split) {
        Rig r(ideal(2, 64));
        if (split) {
            r.bus.inject_stall(SimTime{40 * kP + 7}, 10 * kP);
            r.bus.inject_stall(SimTime{50 * kP + 7}, 10 * kP);
        } else {
            r.bus.inject_stall(SimTime{40 * kP + 7}, 20 * kP);
        }
        const auto reg = r.mem.map_shared_region(4096);
        r.mem.write(reg.base, pattern(4096, 5));
        r.run_job(reg.base, 4096);
        std::vector<std::pair<Ticks, std::uint32_t>> trace;
        for (const auto& c : r.bus.data_cycles()) trace.emplace_back(c.start.ticks, c.bytes);
        return std::make_pair(trace, r.received);
    };
    EXPECT_EQ(run(true), run(false));
}

TEST(Stall, NoDataCycleInsideAStall)
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        Rig r(ideal(static_cast<std::uint32_t>(rng() % 8), 1 + static_cast<std::uint32_t>(rng() % 300)));
        for (int k = 0; k < 5; ++k) {
            r.bus.inject_stall(SimTime{static_cast<Ticks>(rng() % (3000 * kP))}, 1 + static_cast<Ticks>(rng() % (100 * kP)));
        }
        const auto reg = r.mem.map_shared_region(8192);
        r.run_job(reg.base, 8192);
        for (const auto& c : r.bus.data_cycles()) {
            ASSERT_FALSE(overlaps_stall(r.bus.config(), c.start, c.start + kP)) << c.start.ticks;
        }
    }
}

TEST(Throughput, SaturatedWindowIsBusPeak)
{
    Rig r(ideal(0, 1u << 30));
    const std::uint32_t bytes = 200'000;
    const auto reg = r.mem.map_shared_region(bytes);
    r.bus.begin_burst(r.read_txn(reg.base, bytes), r.sink(), {});
    r.sim.run_until(SimTime{2 * sim::kMillisecond});
    const double bps = measure_throughput(r.bus.data_cycles(), SimTime{0}, SimTime{sim::kMillisecond}, kP);
    EXPECT_NEAR(bps, 4e12 / 30303.0, 1.0);
    EXPECT_NEAR(bps / 1e6, 132.0, 0.001);
}

TEST(Throughput, IdleWindowIsZero)
{
    Rig r;
    EXPECT_EQ(measure_throughput(r.bus.data_cycles(), SimTime{0}, SimTime{sim::kMillisecond}, kP), 0.0);
}

TEST(Throughput, HalfDutyStallPattern)
{
    Rig r(ideal(0, 1u << 30));
    constexpr Ticks half = 10 * sim::kMicrosecond;
    for (Ticks t = half; t < 2 * sim::kMillisecond; t += 2 * half) r.bus.inject_stall(SimTime{t}, half);
    const std::uint32_t bytes = 400'000;
    const auto reg = r.mem.map_shared_region(bytes);
    r.run_job(reg.base, bytes);
    const double bps = measure_throughput(r.bus.data_cycles(), SimTime{0}, SimTime{sim::kMillisecond}, kP);
    EXPECT_NEAR(bps / 1e6, 66.0, 0.66);
}

TEST(Throughput, NeverExceedsOneWordPerCycle)
{
    std::mt19937_64 rng(4);
    Rig r(ideal(0, 37));
    for (int k = 0; k < 20; ++k) {
        r.bus.inject_stall(SimTime{static_cast<Ticks>(rng() % (4000 * kP))}, 1 + static_cast<Ticks>(rng() % (50 * kP)));
    }
    const auto reg = r.mem.map_shared_region(16384);
    r.run_job(reg.base, 16384);
    const double ceiling = 4e12 / static_cast<double>(kP);
    const Ticks span = r.sim.now().ticks;
    for (int i = 0; i < 5000; ++i) {
        const Ticks from = static_cast<Ticks>(rng() % static_cast<std::uint64_t>(std::min<Ticks>(span, 6000 * kP)));
        const Ticks len = kP + static_cast<Ticks>(rng() % (100 * kP));
        const double bps = measure_throughput(r.bus.data_cycles(), SimTime{from}, SimTime{from + len}, kP);
        ASSERT_LE(bps, ceiling * (1 + 1e-12));
    }
}

TEST(Preemption, ResumedStreamEqualsSingleBurst)
{
    std::mt19937_64 rng(6);
    const auto data = pattern(8192, 6);
    Rig plain(ideal(0, 1u << 20));
    {
        const auto reg = plain.mem.map_shared_region(8192);
        plain.mem.write(reg.base, data);
        plain.run_job(reg.base, 8192);
    }
    for (int trial = 0; trial < 100; ++trial) {
        Rig r(ideal(static_cast<std::uint32_t>(rng() % 9), 1 + static_cast<std::uint32_t>(rng() % 512)));
        for (int k = 0; k < 4; ++k) {
            r.bus.inject_stall(SimTime{static_cast<Ticks>(rng() % (2500 * kP))}, 1 + static_cast<Ticks>(rng() % (60 * kP)));
        }
        const auto reg = r.mem.map_shared_region(8192);
        r.mem.write(reg.base, data);
        r.run_job(reg.base, 8192);
        ASSERT_EQ(r.received, plain.received);
        std::uint32_t sum = 0;
        for (const auto& t : r.ended) sum += t.transferred_bytes;
        ASSERT_EQ(sum, 8192u);
    }
}

TEST(Burst, ToHostWritesFetchedWords)
{
    Rig r(ideal());
    const auto reg = r.mem.map_shared_region(10);
    BusTransaction t;
    t.direction = Direction::ToHost;
    t.start_address = reg.base;
    t.total_bytes = 10;
    std::uint32_t next = 0x03020100;
    BurstPorts p;
    p.fetch = [&] {
        const std::uint32_t w = next;
        next += 0x04040404;
        return w;
    };
    r.bus.begin_burst(t, p, {});
    r.sim.run_until(SimTime{sim::kMillisecond});
    std::vector<std::uint8_t> out(10);
    r.mem.read(reg.base, out);
    EXPECT_EQ(out, (std::vector<std::uint8_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
}
