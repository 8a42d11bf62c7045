#include "proteus/host/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "proteus/error.hpp"

namespace proteus::host {

namespace {

double rate(std::uint64_t bytes, sim::Ticks ps)
{
    if (ps <= 0) return 0.0;
    return static_cast<double>(bytes) * 1e12 / static_cast<double>(ps);
}

MetricValue integer(std::int64_t v)
{
    return MetricValue{std::to_string(v), static_cast<double>(v)};
}

MetricValue fixed3(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return MetricValue{buf, std::strtod(buf, nullptr)};
}

}  // namespace

double Metrics::downstream_throughput() const { return rate(downstream_bytes, downstream_time); }
double Metrics::upstream_throughput() const { return rate(upstream_bytes, upstream_time); }

std::map<std::string, MetricValue> metric_entries(const Metrics& m)
{
    std::map<std::string, MetricValue> e;
    e["boot_duration_ps"] = integer(m.boot_duration);
    e["boot_ok"] = integer(m.boot_ok ? 1 : 0);
    e["bus_utilization"] = fixed3(m.bus_utilization);
    e["downstream_bytes"] = integer(static_cast<std::int64_t>(m.downstream_bytes));
    e["downstream_bytes_per_second"] = fixed3(m.downstream_throughput());
    e["expect_failures"] = integer(static_cast<std::int64_t>(m.expect_failures));
    e["interrupt_count"] = integer(static_cast<std::int64_t>(m.interrupts.size()));
    e["kernel_id"] = integer(m.kernel_id);
    e["preemptions"] = integer(static_cast<std::int64_t>(m.preemptions));
    e["readback_count"] = integer(static_cast<std::int64_t>(m.readback_count));
    e["readback_duration_ps"] = integer(m.readback_duration);
    e["readback_pauses"] = integer(static_cast<std::int64_t>(m.readback_pauses));
    e["reconfig_count"] = integer(static_cast<std::int64_t>(m.reconfig_count));
    e["reconfig_duration_ps"] = integer(m.reconfig_duration);
    e["reconfig_errors"] = integer(static_cast<std::int64_t>(m.reconfig_errors));
    e["reconfig_pauses"] = integer(static_cast<std::int64_t>(m.reconfig_pauses));
    e["reconfig_total_duration_ps"] = integer(m.reconfig_total_duration);
    e["sim_time_ps"] = integer(m.sim_time);
    e["stall_count"] = integer(static_cast<std::int64_t>(m.stall_count));
    e["upstream_bytes"] = integer(static_cast<std::int64_t>(m.upstream_bytes));
    e["upstream_bytes_per_second"] = fixed3(m.upstream_throughput());

    std::string log;
    for (const auto& ev : m.interrupts) {
        if (!log.empty()) log += ';';
        log += std::to_string(ev.time.ticks) + ':' + std::string(fixed::to_string(ev.cause));
    }
    e["interrupt_log"] = MetricValue{log, std::nullopt};
    return e;
}

const std::vector<std::string>& numeric_metric_keys()
{
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [key, v] : metric_entries(Metrics{})) {
            if (v.number) k.push_back(key);
        }
        return k;
    }();
    return keys;
}

std::string format_metrics(const Metrics& m)
{
    std::string out;
    for (const auto& [key, v] : metric_entries(m)) out += key + '=' + v.text + '\n';
    return out;
}

void emit_metrics(const Metrics& m, const std::filesystem::path& path)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    const std::string text = format_metrics(m);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace proteus::host
