#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "proteus/fixed_part.hpp"
#include "proteus/sim_kernel.hpp"

namespace proteus::host {

struct Metrics {
    sim::Ticks boot_duration = 0;
    bool boot_ok = false;

    std::uint64_t reconfig_count = 0;
    std::uint64_t reconfig_errors = 0;
    sim::Ticks reconfig_duration = 0;        // payload phase of the last reconfiguration
    sim::Ticks reconfig_total_duration = 0;  // request to completion, last reconfiguration
    std::uint64_t reconfig_pauses = 0;       // last reconfiguration

    std::uint64_t readback_count = 0;
    sim::Ticks readback_duration = 0;
    std::uint64_t readback_pauses = 0;

    std::uint64_t downstream_bytes = 0;
    std::uint64_t upstream_bytes = 0;
    sim::Ticks downstream_time = 0;
    sim::Ticks upstream_time = 0;

    double bus_utilization = 0;
    std::uint64_t preemptions = 0;
    std::uint64_t stall_count = 0;
    std::uint32_t kernel_id = 0;
    sim::Ticks sim_time = 0;
    std::uint64_t expect_failures = 0;
    std::vector<fixed::InterruptEvent> interrupts;

    double downstream_throughput() const;  // bytes per second
    double upstream_throughput() const;
};

struct MetricValue {
    std::string text;
    std::optional<double> number;  // the value `expect` compares; matches `text`
};

/// Every key, sorted. Durations are integer picoseconds, rates and fractions
/// carry 3 decimals.
std::map<std::string, MetricValue> metric_entries(const Metrics& m);

/// Keys usable in `expect`.
const std::vector<std::string>& numeric_metric_keys();

std::string format_metrics(const Metrics& m);
void emit_metrics(const Metrics& m, const std::filesystem::path& path);

}  // namespace proteus::host
