#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace proteus::sim {

/// Durations in picoseconds.
using Ticks = std::int64_t;

inline constexpr Ticks kPicosecond = 1;
inline constexpr Ticks kNanosecond = 1'000;
inline constexpr Ticks kMicrosecond = 1'000'000;
inline constexpr Ticks kMillisecond = 1'000'000'000;
inline constexpr Ticks kSecond = 1'000'000'000'000;

/// Absolute simulated time, picoseconds since power-on.
struct SimTime {
    Ticks ticks = 0;

    constexpr SimTime() = default;
    constexpr explicit SimTime(Ticks t) : ticks(t) {}

    constexpr auto operator<=>(const SimTime&) const = default;

    constexpr SimTime operator+(Ticks d) const { return SimTime{ticks + d}; }
    constexpr SimTime operator-(Ticks d) const { return SimTime{ticks - d}; }
    constexpr Ticks operator-(SimTime o) const { return ticks - o.ticks; }
    constexpr SimTime& operator+=(Ticks d) { ticks += d; return *this; }
};

using EventId = std::uint64_t;
using ClockId = std::size_t;

/// Floor division that rounds toward negative infinity.
constexpr Ticks floor_div(Ticks a, Ticks b)
{
    Ticks q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

class ClockDomain {
public:
    using EdgeHandler = std::function<void(SimTime)>;

    ClockDomain(std::string name, Ticks period, Ticks phase);

    const std::string& name() const { return name_; }
    Ticks period() const { return period_; }
    Ticks phase() const { return phase_; }
    bool gated() const { return gated_; }
    std::uint64_t edges_fired() const { return edges_fired_; }

    /// Edges sit at phase + k*period. Returns the first edge at or after t.
    SimTime next_edge_at_or_after(SimTime t) const;

    /// Number of edges of the free-running clock in [t1, t2).
    std::int64_t edges_in(SimTime t1, SimTime t2) const;

private:
    friend class Simulator;

    std::string name_;
    Ticks period_;
    Ticks phase_;
    bool gated_ = true;
    EdgeHandler handler_;
    std::optional<EventId> pending_edge_;
    std::optional<SimTime> last_fired_;
    std::uint64_t edges_fired_ = 0;
};

struct RunStats {
    SimTime now;
    std::uint64_t executed = 0;
};

/// Single-threaded discrete-event engine. Events at equal times run in the
/// order they were scheduled.
class Simulator {
public:
    using Action = std::function<void()>;

    Simulator() = default;
    Simulator(const Simulator&) = delete;
    Simulator& operator=(const Simulator&) = delete;

    SimTime now() const { return now_; }

    EventId schedule_at(SimTime time, Action action);
    EventId schedule_in(Ticks delay, Action action) { return schedule_at(now_ + delay, std::move(action)); }

    /// Cancelling an event that already ran is a no-op.
    void cancel(EventId id);

    /// Executes every event with fire_at <= t_end, then sets now() = t_end.
    RunStats run_until(SimTime t_end);

    /// Executes the next event, if any. now() advances to its fire time.
    bool step();

    bool idle() const;
    std::optional<SimTime> next_event_time() const;
    std::uint64_t executed() const { return executed_; }

    /// Registers a clock domain. Clocks start gated; the handler is invoked on
    /// every edge while ungated.
    ClockId add_clock(std::string name, Ticks period, Ticks phase = 0,
                      ClockDomain::EdgeHandler handler = {});
    void set_edge_handler(ClockId id, ClockDomain::EdgeHandler handler);

    void set_clock_gate(ClockId id, bool enabled);
    void set_clock_gate(std::string_view name, bool enabled);

    ClockId clock_id(std::string_view name) const;
    const ClockDomain& clock(ClockId id) const;

private:
    struct Entry {
        SimTime fire_at;
        EventId sequence;
        Action action;
    };
    struct Later {
        bool operator()(const Entry& a, const Entry& b) const
        {
            if (a.fire_at != b.fire_at) return a.fire_at > b.fire_at;
            return a.sequence > b.sequence;
        }
    };

    void skip_cancelled() const;
    void schedule_edge(ClockId id);
    void fire_edge(ClockId id, SimTime t);

    SimTime now_{};
    EventId next_sequence_ = 0;
    std::uint64_t executed_ = 0;
    mutable std::vector<Entry> heap_;
    mutable std::unordered_set<EventId> cancelled_;
    std::vector<ClockDomain> clocks_;
};

}  // namespace proteus::sim
