#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace proteus::reconfig {

/// Signal lines crossing the bus-macro boundary. Implemented by the fixed
/// part; a kernel only ever sees it through KernelPort.
class BusMacroInterface {
public:
    virtual ~BusMacroInterface() = default;

    virtual bool input_available() const = 0;
    virtual std::uint32_t read_input() = 0;
    virtual bool output_space() const = 0;
    virtual void write_output(std::uint32_t word) = 0;
    virtual std::uint32_t read_register(unsigned index) const = 0;
    virtual void write_register(unsigned index, std::uint32_t value) = 0;
    virtual void request_interrupt() = 0;
};

/// One user-clock cycle worth of bus-macro access: at most one word in each
/// direction, kernel-side writes only to the general-purpose registers.
class KernelPort {
public:
    static constexpr unsigned kFirstKernelRegister = 8;
    static constexpr unsigned kLastKernelRegister = 13;

    explicit KernelPort(BusMacroInterface& lines) : lines_(lines) {}

    bool input_available() const { return !consumed_ && lines_.input_available(); }
    bool output_space() const { return !produced_ && lines_.output_space(); }

    std::uint32_t read_input();
    void write_output(std::uint32_t word);

    std::uint32_t read_register(unsigned index) const { return lines_.read_register(index); }
    void write_register(unsigned index, std::uint32_t value);
    void request_interrupt() { lines_.request_interrupt(); }

    bool consumed() const { return consumed_; }
    bool produced() const { return produced_; }

private:
    BusMacroInterface& lines_;
    bool consumed_ = false;
    bool produced_ = false;
};

class AlgorithmKernel {
public:
    virtual ~AlgorithmKernel() = default;
    virtual void step(KernelPort& port) = 0;
};

struct StepResult {
    unsigned consumed = 0;
    unsigned produced = 0;
};

/// Runs one user-clock cycle of `kernel`.
StepResult kernel_step(AlgorithmKernel& kernel, BusMacroInterface& lines);

using KernelFactory = std::function<std::unique_ptr<AlgorithmKernel>()>;

struct BuiltinKernel {
    std::string name;
    std::uint32_t catalog_id;
    std::string description;
    KernelFactory factory;
};

/// identity, negate, add_const, fir4.
const std::vector<BuiltinKernel>& builtin_kernels();
const BuiltinKernel* find_builtin(std::string_view name);

struct ActivationReport {
    std::uint32_t kernel_id = 0;
    bool inert = true;
    std::string name;
};

/// Maps bitstream kernel ids to behaviors and owns the single active kernel.
class KernelRegistry {
public:
    void bind_kernel(std::uint32_t kernel_id, std::string name, KernelFactory factory);
    /// Binds to a built-in behavior by name; throws UnknownKernel.
    void bind_kernel(std::uint32_t kernel_id, std::string_view builtin_name);

    bool bound(std::uint32_t kernel_id) const { return factories_.count(kernel_id) != 0; }

    /// Destroys the previous kernel and instantiates the one named by
    /// kernel_id. Unknown ids leave the region inert.
    ActivationReport activate_from_config(std::uint32_t kernel_id);
    void deactivate();

    AlgorithmKernel* active() { return active_.get(); }
    std::optional<std::uint32_t> active_id() const { return active_id_; }

private:
    struct Binding {
        std::string name;
        KernelFactory factory;
    };
    std::map<std::uint32_t, Binding> factories_;
    std::unique_ptr<AlgorithmKernel> active_;
    std::optional<std::uint32_t> active_id_;
};

}  // namespace proteus::reconfig
