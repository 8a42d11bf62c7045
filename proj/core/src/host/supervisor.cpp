#include "proteus/host/supervisor.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include "proteus/error.hpp"

namespace proteus::host {

namespace fs = std::filesystem;
using fixed::InterruptCause;
using fixed::bit;
namespace reg = fixed::reg;

namespace {

std::vector<std::uint8_t> read_file(const fs::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f), {});
}

void write_file(const fs::path& path, std::span<const std::uint8_t> data)
{
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!f) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace

Supervisor::Supervisor(BoardConfig config) : board_(std::move(config)) {}

pci::MappedRegion Supervisor::map(std::size_t bytes) { return board_.host_memory().map_shared_region(bytes); }

void Supervisor::run_until(const std::function<bool()>& done, const std::string& what)
{
    auto& sim = board_.sim();
    const sim::SimTime deadline = sim.now() + watchdog_;
    while (!done()) {
        const auto next = sim.next_event_time();
        if (!next) throw Error(ErrorCode::RuntimeFault, what + " stalled at " + std::to_string(sim.now().ticks) + " ps");
        if (*next > deadline) throw Error(ErrorCode::RuntimeFault, what + " timed out");
        sim.step();
    }
}

void Supervisor::wait_for(std::uint32_t bits, const std::string& what)
{
    const auto& irq = board_.fixed_part().interrupts();
    run_until([&] { return (irq.pending_bits() & bits) == bits; }, what);
    board_.host_write(reg::kIrqCause, bits);
}

selectmap::BootReport Supervisor::boot(std::vector<std::uint8_t> flash_image)
{
    board_.power_up(std::move(flash_image));
    run_until([&] { return board_.boot_report().has_value(); }, "boot");
    const auto& r = *board_.boot_report();
    m_.boot_duration = r.duration;
    m_.boot_ok = r.ok;
    return r;
}

void Supervisor::bind(std::uint32_t kernel_id, std::string_view builtin_name)
{
    board_.registry().bind_kernel(kernel_id, builtin_name);
}

void Supervisor::bind(std::uint32_t kernel_id, std::string name, reconfig::KernelFactory factory)
{
    board_.registry().bind_kernel(kernel_id, std::move(name), std::move(factory));
}

selectmap::ConfigResult Supervisor::reconfigure(std::span<const std::uint8_t> image)
{
    if (image.empty()) throw Error(ErrorCode::InvalidArgument, "empty bitstream");
    const auto region = map(image.size());
    board_.host_memory().write(region.base, image);
    board_.host_write(reg::kCfgBase, region.base);
    board_.host_write(reg::kCfgLen, static_cast<std::uint32_t>(image.size()));
    board_.host_write(reg::kControl, reg::kStartReconfig);
    wait_for(bit(InterruptCause::ReconfigDone), "reconfiguration");

    const auto& r = *board_.last_config();
    ++m_.reconfig_count;
    if (r.error) ++m_.reconfig_errors;
    m_.reconfig_duration = r.duration;
    m_.reconfig_total_duration = r.total_duration;
    m_.reconfig_pauses = r.pauses;
    return r;
}

std::vector<std::uint8_t> Supervisor::readback(std::uint16_t first_column, std::uint16_t column_count)
{
    const auto size = bitstream::encoded_size(board_.config().geometry, column_count);
    const auto region = map(size);
    board_.host_write(reg::kCfgBase, region.base);
    board_.host_write(reg::kCfgLen, reg::readback_region(first_column, column_count));
    board_.host_write(reg::kControl, reg::kStartReadback);
    wait_for(bit(InterruptCause::ReadbackDone), "readback");

    const auto& r = *board_.last_readback();
    ++m_.readback_count;
    m_.readback_duration = r.duration;
    m_.readback_pauses = r.pauses;
    std::vector<std::uint8_t> out(size);
    board_.host_memory().read(region.base, out);
    return out;
}

std::vector<std::uint8_t> Supervisor::stream(std::span<const std::uint8_t> input)
{
    if (input.empty() || input.size() % 4 != 0) {
        throw Error(ErrorCode::InvalidArgument, "stream length must be a positive multiple of 4");
    }
    const auto in = map(input.size());
    const auto out = map(input.size());
    board_.host_memory().write(in.base, input);
    const auto len = static_cast<std::uint32_t>(input.size());
    board_.host_write(reg::kDownBase, in.base);
    board_.host_write(reg::kDownLen, len);
    board_.host_write(reg::kUpBase, out.base);
    board_.host_write(reg::kUpLen, len);

    auto& sim = board_.sim();
    const auto& irq = board_.fixed_part().interrupts();
    const sim::SimTime start = sim.now();
    std::optional<sim::SimTime> down_done, up_done;
    board_.host_write(reg::kControl, reg::kStartDown | reg::kStartUp);
    run_until(
        [&] {
            if (!down_done && irq.pending(InterruptCause::DownstreamDone)) down_done = sim.now();
            if (!up_done && irq.pending(InterruptCause::UpstreamDone)) up_done = sim.now();
            return down_done && up_done;
        },
        "stream");
    board_.host_write(reg::kIrqCause, bit(InterruptCause::DownstreamDone) | bit(InterruptCause::UpstreamDone));

    m_.downstream_bytes += len;
    m_.upstream_bytes += len;
    m_.downstream_time += *down_done - start;
    m_.upstream_time += *up_done - start;
    std::vector<std::uint8_t> result(input.size());
    board_.host_memory().read(out.base, result);
    return result;
}

void Supervisor::stall(sim::SimTime at, sim::Ticks duration)
{
    board_.bus().inject_stall(at, duration);
    ++m_.stall_count;
}

Metrics Supervisor::metrics()
{
    Metrics m = m_;
    auto& b = board_;
    m.sim_time = b.sim().now().ticks;
    m.preemptions = b.bus().preemptions();
    m.interrupts = b.fixed_part().interrupt_log();
    m.kernel_id = b.fixed_part().active() ? b.fixed_part().registers().read(reg::kStatus) : 0;
    if (m.sim_time > 0) {
        const double busy = static_cast<double>(b.bus().data_cycles().size()) *
                            static_cast<double>(b.bus().config().clock_period);
        m.bus_utilization = std::min(1.0, busy / static_cast<double>(m.sim_time));
    }
    return m;
}

std::vector<std::uint8_t> make_bitstream(const MakebitCmd& cmd, const bitstream::DeviceGeometry& geometry,
                                         std::uint64_t run_seed)
{
    std::vector<std::uint8_t> frames(geometry.column_bytes() * cmd.cols.count());
    if (const auto* byte = std::get_if<std::uint8_t>(&cmd.fill)) {
        std::fill(frames.begin(), frames.end(), *byte);
    } else {
        std::mt19937_64 rng(std::get<RandomFill>(cmd.fill).seed.value_or(run_seed));
        for (std::size_t i = 0; i < frames.size(); i += 8) {
            std::uint64_t v = rng();
            for (std::size_t j = i; j < std::min(i + 8, frames.size()); ++j, v >>= 8) frames[j] = static_cast<std::uint8_t>(v);
        }
    }
    return bitstream::encode(geometry, cmd.kind, cmd.id, cmd.cols.first, frames);
}

namespace {

bool compare(Compare op, double lhs, double rhs)
{
    switch (op) {
    case Compare::LessEqual: return lhs <= rhs;
    case Compare::GreaterEqual: return lhs >= rhs;
    case Compare::Equal: return lhs == rhs;
    }
    return false;
}

struct Executor {
    Supervisor& sup;
    const Scenario& scenario;
    const RunOptions& opt;
    const Command& cmd;
    RunResult& result;

    fs::path path(const std::string& p) const { return opt.work_dir / p; }

    void operator()(const BootCmd& c) { sup.boot(read_file(path(c.flash))); }
    void operator()(const BindCmd& c) { sup.bind(c.id, c.kernel); }
    void operator()(const MakebitCmd& c)
    {
        write_file(path(c.out), make_bitstream(c, scenario.effective_geometry(), opt.seed));
    }
    void operator()(const ReconfigCmd& c) { sup.reconfigure(read_file(path(c.file))); }
    void operator()(const ReadbackCmd& c) { write_file(path(c.out), sup.readback(c.cols.first, c.cols.count())); }
    void operator()(const StreamCmd& c)
    {
        auto data = read_file(path(c.in));
        const std::size_t bytes = std::size_t{c.words} * 4;
        if (data.size() < bytes) {
            throw Error(ErrorCode::InvalidArgument, c.in + " holds " + std::to_string(data.size()) + " bytes, need " +
                                                        std::to_string(bytes));
        }
        data.resize(bytes);
        write_file(path(c.out), sup.stream(data));
    }
    void operator()(const StallCmd& c) { sup.stall(sim::SimTime{c.at}, c.duration); }
    void operator()(const ExpectCmd& c)
    {
        const auto entries = metric_entries(sup.metrics());
        const MetricValue& v = entries.at(c.key);
        if (!compare(c.op, *v.number, c.value)) {
            sup.note_expect_failure();
            result.messages.push_back("line " + std::to_string(cmd.line) + ": expectation failed: " +
                                      format_command(c) + " (actual " + v.text + ")");
        }
    }
};

}  // namespace

RunResult run_scenario(const Scenario& scenario, const RunOptions& options)
{
    BoardConfig cfg;
    cfg.geometry = scenario.effective_geometry();
    if (scenario.bus) {
        if (scenario.bus->grant_latency_cycles) cfg.pci.grant_latency_cycles = *scenario.bus->grant_latency_cycles;
        if (scenario.bus->max_burst_cycles) cfg.pci.max_burst_cycles = *scenario.bus->max_burst_cycles;
    }
    cfg.trace = options.trace;

    RunResult result;
    Supervisor sup(cfg);
    auto& tracer = sup.board().tracer();
    for (std::size_t i = 0; i < scenario.commands.size(); ++i) {
        const Command& cmd = scenario.commands[i];
        tracer.emit(sup.board().sim().now(), "host", command_name(cmd.body), format_command(cmd.body));
        try {
            std::visit(Executor{sup, scenario, options, cmd, result}, cmd.body);
        } catch (const Error& e) {
            result.messages.push_back("runtime fault at command " + std::to_string(i + 1) + " (line " +
                                      std::to_string(cmd.line) + ", " + std::string(command_name(cmd.body)) +
                                      "): " + e.what());
            result.exit_status = 2;
            break;
        }
    }
    result.metrics = sup.metrics();
    if (result.exit_status == 0 && result.metrics.expect_failures > 0) result.exit_status = 1;
    result.trace = tracer.records();
    return result;
}

void emit_trace(const std::vector<TraceRecord>& records, const fs::path& path) { write_trace_csv(records, path); }

}  // namespace proteus::host
