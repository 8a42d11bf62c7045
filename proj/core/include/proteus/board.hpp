#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "proteus/bitstream.hpp"
#include "proteus/fixed_part.hpp"
#include "proteus/pci_bus.hpp"
#include "proteus/reconfig_part.hpp"
#include "proteus/selectmap.hpp"
#include "proteus/sim_kernel.hpp"
#include "proteus/trace.hpp"

namespace proteus {

struct BoardConfig {
    bitstream::DeviceGeometry geometry{};
    pci::PciConfig pci{};
    fixed::FixedPartConfig buffers{};
    sim::Ticks user_clock_period = 20'000;
    double boot_rate = selectmap::kPeakBytesPerSecond;
    bool trace = false;
};

/// One simulated board: host RAM, the PCI bus and a single FPGA whose fixed
/// part is loaded from flash at power-up. The whole object is one simulation
/// world; it is not shared between threads.
class Board {
public:
    explicit Board(BoardConfig config = {});
    Board(const Board&) = delete;
    Board& operator=(const Board&) = delete;

    const BoardConfig& config() const { return config_; }
    sim::Simulator& sim() { return sim_; }
    Tracer& tracer() { return tracer_; }
    pci::HostMemory& host_memory() { return host_; }
    pci::PciBus& bus() { return bus_; }
    bitstream::ConfigurationMemory& config_memory() { return memory_; }
    fixed::FixedPart& fixed_part() { return fixed_; }
    selectmap::ConfigController& controller() { return controller_; }
    reconfig::KernelRegistry& registry() { return registry_; }
    sim::ClockId user_clock() const { return user_clock_; }

    /// Only allowed before power-up.
    void set_geometry(const bitstream::DeviceGeometry& geometry);

    /// Starts the flash boot; run the simulator to let it complete.
    void power_up(std::vector<std::uint8_t> flash_image);
    bool powered() const { return powered_; }
    bool booted() const { return boot_report_ && boot_report_->ok; }
    const std::optional<selectmap::BootReport>& boot_report() const { return boot_report_; }

    /// PCI target accesses to the register map. Throw DeviceInert before boot.
    std::uint32_t host_read(unsigned index) { return fixed_.host_read(index); }
    void host_write(unsigned index, std::uint32_t value) { fixed_.host_write(index, value); }

    const std::optional<selectmap::ConfigResult>& last_config() const { return last_config_; }
    const std::optional<selectmap::ReadbackResult>& last_readback() const { return last_readback_; }
    const std::optional<reconfig::ActivationReport>& last_activation() const { return last_activation_; }
    std::uint64_t kernel_steps() const { return kernel_steps_; }

private:
    class KernelLines final : public reconfig::BusMacroInterface {
    public:
        explicit KernelLines(fixed::FixedPart& fp) : fp_(fp) {}
        bool input_available() const override;
        std::uint32_t read_input() override;
        bool output_space() const override;
        void write_output(std::uint32_t word) override;
        std::uint32_t read_register(unsigned index) const override;
        void write_register(unsigned index, std::uint32_t value) override;
        void request_interrupt() override;

    private:
        fixed::FixedPart& fp_;
    };

    void on_control(std::uint32_t control);
    void activate(std::uint32_t kernel_id);
    void wake_user_clock();
    void user_edge(sim::SimTime t);

    BoardConfig config_;
    Tracer tracer_;
    sim::Simulator sim_;
    pci::HostMemory host_;
    pci::PciBus bus_;
    bitstream::ConfigurationMemory memory_;
    fixed::FixedPart fixed_;
    selectmap::ConfigController controller_;
    reconfig::KernelRegistry registry_;
    KernelLines lines_;
    sim::ClockId user_clock_;

    bool powered_ = false;
    std::optional<selectmap::BootReport> boot_report_;
    std::optional<selectmap::ConfigResult> last_config_;
    std::optional<selectmap::ReadbackResult> last_readback_;
    std::optional<reconfig::ActivationReport> last_activation_;
    std::uint64_t kernel_steps_ = 0;
};

}  // namespace proteus
