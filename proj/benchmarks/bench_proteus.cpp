#include <benchmark/benchmark.h>

#include <random>

#include "proteus/bitstream.hpp"
#include "proteus/fixed_part.hpp"
#include "proteus/host/scenario.hpp"
#include "proteus/host/supervisor.hpp"
#include "proteus/sim_kernel.hpp"

using namespace proteus;
using bitstream::DeviceGeometry;
using bitstream::Kind;

namespace {

std::vector<std::uint8_t> random_bytes(std::size_t n, std::uint64_t seed = 1)
{
    std::mt19937_64 rng(seed);
    std::vector<std::uint8_t> v(n);
    for (auto& b : v) b = static_cast<std::uint8_t>(rng());
    return v;
}

void BM_EventQueue(benchmark::State& state)
{
    const auto n = static_cast<int>(state.range(0));
    for (auto _ : state) {
        sim::Simulator s;
        std::mt19937_64 rng(1);
        int hits = 0;
        for (int i = 0; i < n; ++i) s.schedule_at(sim::SimTime{static_cast<sim::Ticks>(rng() % 1'000'000)}, [&] { ++hits; });
        s.run_until(sim::SimTime{1'000'000});
        benchmark::DoNotOptimize(hits);
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_EventQueue)->Arg(1 << 10)->Arg(1 << 16);

void BM_ClockEdges(benchmark::State& state)
{
    for (auto _ : state) {
        sim::Simulator s;
        std::int64_t n = 0;
        const auto c = s.add_clock("k", 20'000, 0, [&](sim::SimTime) { ++n; });
        s.set_clock_gate(c, true);
        s.run_until(sim::SimTime{sim::kMillisecond});
        benchmark::DoNotOptimize(n);
    }
    state.SetItemsProcessed(state.iterations() * 50'000);
}
BENCHMARK(BM_ClockEdges);

void BM_Crc32(benchmark::State& state)
{
    const auto data = random_bytes(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(bitstream::crc32(data));
    state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Crc32)->Arg(8192)->Arg(1 << 20);

void BM_ParseBitstream(benchmark::State& state)
{
    const DeviceGeometry g;
    const auto image = bitstream::encode(g, Kind::Full, 1, 0, random_bytes(g.total_bytes()));
    for (auto _ : state) benchmark::DoNotOptimize(bitstream::parse(image, g));
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(image.size()));
}
BENCHMARK(BM_ParseBitstream);

void BM_Arbitrate(benchmark::State& state)
{
    fixed::ArbiterState st;
    std::mt19937_64 rng(2);
    std::vector<fixed::TargetSet> sets(1024);
    for (auto& s : sets) {
        for (auto t : fixed::kAllTargets) {
            if (rng() % 2) s.insert(t);
        }
        if (s.empty()) s.insert(fixed::TargetId::Downstream);
    }
    std::size_t i = 0;
    for (auto _ : state) benchmark::DoNotOptimize(fixed::arbitrate(st, sets[i++ & 1023]));
}
BENCHMARK(BM_Arbitrate);

/// Simulated 8 KB partial reconfiguration, boot excluded.
void BM_Reconfigure8K(benchmark::State& state)
{
    const DeviceGeometry g;
    const auto flash = bitstream::encode(g, Kind::Full, 0, 0, std::vector<std::uint8_t>(g.total_bytes(), 0));
    const auto partial = bitstream::encode(g, Kind::Partial, 1, 0, random_bytes(4 * g.column_bytes()));
    for (auto _ : state) {
        state.PauseTiming();
        host::Supervisor sup;
        sup.boot(flash);
        state.ResumeTiming();
        benchmark::DoNotOptimize(sup.reconfigure(partial));
    }
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(partial.size()));
}
BENCHMARK(BM_Reconfigure8K)->Unit(benchmark::kMillisecond);

/// Simulated identity round trip through the board.
void BM_IdentityStream(benchmark::State& state)
{
    const DeviceGeometry g;
    const auto flash = bitstream::encode(g, Kind::Full, 0, 0, std::vector<std::uint8_t>(g.total_bytes(), 0));
    const auto partial = bitstream::encode(g, Kind::Partial, 1, 0, random_bytes(4 * g.column_bytes()));
    const auto data = random_bytes(static_cast<std::size_t>(state.range(0)));
    host::Supervisor sup;
    sup.boot(flash);
    sup.bind(1, "identity");
    sup.reconfigure(partial);
    sup.board().bus().set_logging(false);
    sup.board().controller().set_port_logging(false);
    for (auto _ : state) benchmark::DoNotOptimize(sup.stream(data));
    state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_IdentityStream)->Arg(64 << 10)->Arg(1 << 20)->Unit(benchmark::kMillisecond);

void BM_ParseScenario(benchmark::State& state)
{
    std::string text;
    for (int i = 0; i < 500; ++i) {
        text += "bind id=0x" + std::to_string(1000 + i) + " kernel=identity\n";
        text += "stall at=" + std::to_string(i) + "us for=250ns\n";
        text += "expect reconfig_pauses <= " + std::to_string(i) + "\n";
    }
    for (auto _ : state) benchmark::DoNotOptimize(host::parse_scenario(text));
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_ParseScenario);

}  // namespace

BENCHMARK_MAIN();
