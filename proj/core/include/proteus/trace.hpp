#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "proteus/sim_kernel.hpp"

namespace proteus {

struct TraceRecord {
    sim::Ticks time_ps = 0;
    std::string component;
    std::string event;
    std::string detail;

    bool operator==(const TraceRecord&) const = default;
};

/// Collects trace records when enabled; a disabled tracer drops everything.
class Tracer {
public:
    explicit Tracer(bool enabled = false) : enabled_(enabled) {}

    bool enabled() const { return enabled_; }
    void set_enabled(bool on) { enabled_ = on; }

    void emit(sim::SimTime time, std::string_view component, std::string_view event, std::string detail = {})
    {
        if (!enabled_) return;
        records_.push_back(TraceRecord{time.ticks, std::string(component), std::string(event), std::move(detail)});
    }

    const std::vector<TraceRecord>& records() const { return records_; }
    void clear() { records_.clear(); }

private:
    bool enabled_;
    std::vector<TraceRecord> records_;
};

/// CSV rendering, header `time_ps,component,event,detail`.
std::string format_trace_csv(const std::vector<TraceRecord>& records);
void write_trace_csv(const std::vector<TraceRecord>& records, const std::filesystem::path& path);

}  // namespace proteus
