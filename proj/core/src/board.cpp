#include "proteus/board.hpp"

#include <cstdio>

#include "proteus/error.hpp"

namespace proteus {

using fixed::TargetId;

namespace {

std::string hex32(std::uint32_t v)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", v);
    return buf;
}

}  // namespace

bool Board::KernelLines::input_available() const { return !fp_.buffer(TargetId::Downstream).empty(); }
std::uint32_t Board::KernelLines::read_input() { return fp_.buffer(TargetId::Downstream).pop(); }
bool Board::KernelLines::output_space() const { return !fp_.buffer(TargetId::Upstream).full(); }
void Board::KernelLines::write_output(std::uint32_t word) { fp_.buffer(TargetId::Upstream).push(word); }
std::uint32_t Board::KernelLines::read_register(unsigned index) const { return fp_.registers().read(index); }
void Board::KernelLines::write_register(unsigned index, std::uint32_t value) { fp_.registers().write(index, value); }
void Board::KernelLines::request_interrupt() { fp_.raise(fixed::InterruptCause::KernelRequest); }

Board::Board(BoardConfig config)
    : config_(std::move(config)),
      tracer_(config_.trace),
      host_(),
      bus_(sim_, host_, config_.pci, &tracer_),
      memory_(config_.geometry),
      fixed_(sim_, bus_, config_.buffers, &tracer_),
      controller_(sim_, fixed_.buffer(TargetId::SelectMapWrite), fixed_.buffer(TargetId::SelectMapRead), memory_,
                  config_.boot_rate, &tracer_),
      lines_(fixed_)
{
    user_clock_ = sim_.add_clock("user", config_.user_clock_period, 0, [this](sim::SimTime t) { user_edge(t); });
    fixed_.on_control = [this](std::uint32_t v) { on_control(v); };
    fixed_.buffer(TargetId::Downstream).on_push([this] { wake_user_clock(); });
}

void Board::set_geometry(const bitstream::DeviceGeometry& geometry)
{
    if (powered_) throw Error(ErrorCode::InvalidArgument, "geometry can only change before power-up");
    memory_ = bitstream::ConfigurationMemory(geometry);
    config_.geometry = geometry;
}

void Board::power_up(std::vector<std::uint8_t> flash_image)
{
    if (powered_) throw Error(ErrorCode::InvalidArgument, "board is already powered");
    powered_ = true;
    memory_.reset();
    controller_.power_up_boot(std::move(flash_image), [this](const selectmap::BootReport& r) {
        boot_report_ = r;
        if (!r.ok) return;  // stays inert
        fixed_.set_active(true);
        activate(r.kernel_id);
    });
}

void Board::activate(std::uint32_t kernel_id)
{
    last_activation_ = registry_.activate_from_config(kernel_id);
    fixed_.registers().write(fixed::reg::kStatus, last_activation_->inert ? 0 : kernel_id);
    tracer_.emit(sim_.now(), "reconfig", last_activation_->inert ? "inert" : "activate",
                 hex32(kernel_id) + (last_activation_->inert ? "" : " " + last_activation_->name));
    if (last_activation_->inert) sim_.set_clock_gate(user_clock_, false);
}

void Board::on_control(std::uint32_t control)
{
    auto& regs = fixed_.registers();
    namespace reg = fixed::reg;

    if (control & reg::kStartDown) {
        fixed_.start_job(TargetId::Downstream, regs.read(reg::kDownBase), regs.read(reg::kDownLen));
        wake_user_clock();
    }
    if (control & reg::kStartUp) {
        fixed_.start_job(TargetId::Upstream, regs.read(reg::kUpBase), regs.read(reg::kUpLen));
        wake_user_clock();
    }
    if (control & reg::kStartReconfig) {
        const std::uint32_t base = regs.read(reg::kCfgBase);
        const std::uint32_t len = regs.read(reg::kCfgLen);
        if (len == 0) throw Error(ErrorCode::InvalidArgument, "cfg_len is zero");
        host_.region_at(base, len);
        controller_.configure(len, [this](const selectmap::ConfigResult& r) {
            last_config_ = r;
            if (r.applied) activate(r.applied->kernel_id);
            fixed_.raise(fixed::InterruptCause::ReconfigDone);
        });
        fixed_.start_job(TargetId::SelectMapWrite, base, len);
    }
    if (control & reg::kStartReadback) {
        const std::uint32_t base = regs.read(reg::kCfgBase);
        const std::uint32_t region = regs.read(reg::kCfgLen);
        const auto first = static_cast<std::uint16_t>(region & 0xffff);
        const auto count = static_cast<std::uint16_t>(region >> 16);
        if (count == 0 || std::uint32_t{first} + count > config_.geometry.columns) {
            throw Error(ErrorCode::RegionOutOfBounds, "readback region " + std::to_string(first) + "+" +
                                                          std::to_string(count));
        }
        const auto size = static_cast<std::uint32_t>(bitstream::encoded_size(config_.geometry, count));
        host_.region_at(base, size);
        const std::uint32_t id = registry_.active_id().value_or(0);
        controller_.readback_stream(first, count, id,
                                    [this](const selectmap::ReadbackResult& r) { last_readback_ = r; });
        fixed_.start_job(TargetId::SelectMapRead, base, size);
    }
}

void Board::wake_user_clock()
{
    if (registry_.active() && sim_.clock(user_clock_).gated()) sim_.set_clock_gate(user_clock_, true);
}

void Board::user_edge(sim::SimTime)
{
    reconfig::AlgorithmKernel* k = registry_.active();
    if (!k) {
        sim_.set_clock_gate(user_clock_, false);
        return;
    }
    reconfig::kernel_step(*k, lines_);
    ++kernel_steps_;
    if (!fixed_.job_active(TargetId::Downstream) && fixed_.buffer(TargetId::Downstream).empty()) {
        sim_.set_clock_gate(user_clock_, false);
    }
}

}  // namespace proteus
