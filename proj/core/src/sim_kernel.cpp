#include "proteus/sim_kernel.hpp"

#include <algorithm>

#include "proteus/error.hpp"

namespace proteus::sim {

ClockDomain::ClockDomain(std::string name, Ticks period, Ticks phase)
    : name_(std::move(name)), period_(period), phase_(phase)
{
    if (period_ <= 0) throw Error(ErrorCode::InvalidArgument, "clock '" + name_ + "' needs a positive period");
    if (phase_ < 0) throw Error(ErrorCode::InvalidArgument, "clock '" + name_ + "' phase must be >= 0");
}

SimTime ClockDomain::next_edge_at_or_after(SimTime t) const
{
    // smallest k with phase + k*period >= t
    Ticks k = floor_div(t.ticks - phase_ + period_ - 1, period_);
    if (k < 0) k = 0;
    return SimTime{phase_ + k * period_};
}

std::int64_t ClockDomain::edges_in(SimTime t1, SimTime t2) const
{
    if (t2 <= t1) return 0;
    return floor_div(t2.ticks - phase_ - 1, period_) - floor_div(t1.ticks - phase_ - 1, period_);
}

EventId Simulator::schedule_at(SimTime time, Action action)
{
    if (time < now_) {
        throw Error(ErrorCode::SchedulingInPast,
                    "event at " + std::to_string(time.ticks) + " ps is before now=" + std::to_string(now_.ticks));
    }
    EventId id = next_sequence_++;
    heap_.push_back(Entry{time, id, std::move(action)});
    std::push_heap(heap_.begin(), heap_.end(), Later{});
    return id;
}

void Simulator::cancel(EventId id)
{
    if (id < next_sequence_) cancelled_.insert(id);
}

void Simulator::skip_cancelled() const
{
    while (!heap_.empty() && !cancelled_.empty()) {
        auto it = cancelled_.find(heap_.front().sequence);
        if (it == cancelled_.end()) break;
        cancelled_.erase(it);
        std::pop_heap(heap_.begin(), heap_.end(), Later{});
        heap_.pop_back();
    }
}

bool Simulator::idle() const
{
    skip_cancelled();
    return heap_.empty();
}

std::optional<SimTime> Simulator::next_event_time() const
{
    skip_cancelled();
    if (heap_.empty()) return std::nullopt;
    return heap_.front().fire_at;
}

bool Simulator::step()
{
    skip_cancelled();
    if (heap_.empty()) return false;
    std::pop_heap(heap_.begin(), heap_.end(), Later{});
    Entry e = std::move(heap_.back());
    heap_.pop_back();
    now_ = e.fire_at;
    ++executed_;
    e.action();
    return true;
}

RunStats Simulator::run_until(SimTime t_end)
{
    if (t_end < now_) {
        throw Error(ErrorCode::SchedulingInPast, "run_until target precedes now");
    }
    std::uint64_t before = executed_;
    for (;;) {
        auto next = next_event_time();
        if (!next || *next > t_end) break;
        step();
    }
    now_ = t_end;
    return RunStats{now_, executed_ - before};
}

ClockId Simulator::add_clock(std::string name, Ticks period, Ticks phase, ClockDomain::EdgeHandler handler)
{
    for (const auto& c : clocks_) {
        if (c.name() == name) throw Error(ErrorCode::InvalidArgument, "clock '" + name + "' already registered");
    }
    clocks_.emplace_back(std::move(name), period, phase);
    clocks_.back().handler_ = std::move(handler);
    return clocks_.size() - 1;
}

void Simulator::set_edge_handler(ClockId id, ClockDomain::EdgeHandler handler)
{
    if (id >= clocks_.size()) throw Error(ErrorCode::UnknownDomain, "clock id " + std::to_string(id));
    clocks_[id].handler_ = std::move(handler);
}

ClockId Simulator::clock_id(std::string_view name) const
{
    for (std::size_t i = 0; i < clocks_.size(); ++i) {
        if (clocks_[i].name() == name) return i;
    }
    throw Error(ErrorCode::UnknownDomain, "no clock domain named '" + std::string(name) + "'");
}

const ClockDomain& Simulator::clock(ClockId id) const
{
    if (id >= clocks_.size()) throw Error(ErrorCode::UnknownDomain, "clock id " + std::to_string(id));
    return clocks_[id];
}

void Simulator::set_clock_gate(std::string_view name, bool enabled)
{
    set_clock_gate(clock_id(name), enabled);
}

void Simulator::set_clock_gate(ClockId id, bool enabled)
{
    if (id >= clocks_.size()) throw Error(ErrorCode::UnknownDomain, "clock id " + std::to_string(id));
    ClockDomain& c = clocks_[id];
    if (!enabled) {
        c.gated_ = true;
        if (c.pending_edge_) {
            cancel(*c.pending_edge_);
            c.pending_edge_.reset();
        }
        return;
    }
    if (!c.gated_) return;
    c.gated_ = false;
    schedule_edge(id);
}

void Simulator::schedule_edge(ClockId id)
{
    ClockDomain& c = clocks_[id];
    SimTime at = c.next_edge_at_or_after(now_);
    // an edge that already fired at this instant must not fire twice
    if (c.last_fired_ && at <= *c.last_fired_) at = *c.last_fired_ + c.period_;
    c.pending_edge_ = schedule_at(at, [this, id, at] { fire_edge(id, at); });
}

void Simulator::fire_edge(ClockId id, SimTime t)
{
    {
        ClockDomain& c = clocks_[id];
        c.pending_edge_.reset();
        c.last_fired_ = t;
        ++c.edges_fired_;
        if (c.handler_) {
            auto handler = c.handler_;
            handler(t);
        }
    }
    // the handler may have registered clocks, so re-index
    ClockDomain& c = clocks_[id];
    if (!c.gated_ && !c.pending_edge_) {
        SimTime at = t + c.period_;
        c.pending_edge_ = schedule_at(at, [this, id, at] { fire_edge(id, at); });
    }
}

}  // namespace proteus::sim
