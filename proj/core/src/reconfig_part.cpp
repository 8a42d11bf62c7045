#include "proteus/reconfig_part.hpp"

#include <array>

#include "proteus/error.hpp"

namespace proteus::reconfig {

std::uint32_t KernelPort::read_input()
{
    if (consumed_) throw Error(ErrorCode::KernelAccessViolation, "second input word in one cycle");
    if (!lines_.input_available()) throw Error(ErrorCode::BufferUnderflow, "no input word available");
    consumed_ = true;
    return lines_.read_input();
}

void KernelPort::write_output(std::uint32_t word)
{
    if (produced_) throw Error(ErrorCode::KernelAccessViolation, "second output word in one cycle");
    if (!lines_.output_space()) throw Error(ErrorCode::BufferOverflow, "no output space");
    produced_ = true;
    lines_.write_output(word);
}

void KernelPort::write_register(unsigned index, std::uint32_t value)
{
    if (index < kFirstKernelRegister || index > kLastKernelRegister) {
        throw Error(ErrorCode::KernelAccessViolation, "kernel may not write register " + std::to_string(index));
    }
    lines_.write_register(index, value);
}

StepResult kernel_step(AlgorithmKernel& kernel, BusMacroInterface& lines)
{
    KernelPort port(lines);
    kernel.step(port);
    return StepResult{port.consumed() ? 1u : 0u, port.produced() ? 1u : 0u};
}

namespace {

/// Word-for-word transforms share the same flow control.
template <typename Fn>
class MapKernel final : public AlgorithmKernel {
public:
    explicit MapKernel(Fn fn) : fn_(std::move(fn)) {}

    void step(KernelPort& port) override
    {
        if (!port.input_available() || !port.output_space()) return;
        port.write_output(fn_(port.read_input(), port));
    }

private:
    Fn fn_;
};

template <typename Fn>
std::unique_ptr<AlgorithmKernel> make_map(Fn fn)
{
    return std::make_unique<MapKernel<Fn>>(std::move(fn));
}

class Fir4Kernel final : public AlgorithmKernel {
public:
    void step(KernelPort& port) override
    {
        if (!port.input_available() || !port.output_space()) return;
        history_[pos_] = port.read_input();
        pos_ = (pos_ + 1) % history_.size();
        std::uint32_t sum = 0;
        for (auto h : history_) sum += h;
        port.write_output(sum);
    }

private:
    std::array<std::uint32_t, 4> history_{};
    std::size_t pos_ = 0;
};

}  // namespace

const std::vector<BuiltinKernel>& builtin_kernels()
{
    static const std::vector<BuiltinKernel> kernels{
        {"identity", 0x00000001, "out = in",
         [] { return make_map([](std::uint32_t w, KernelPort&) { return w; }); }},
        {"negate", 0x00000002, "out = bitwise NOT in",
         [] { return make_map([](std::uint32_t w, KernelPort&) { return ~w; }); }},
        {"add_const", 0x00000003, "out = in + r8 (mod 2^32)",
         [] { return make_map([](std::uint32_t w, KernelPort& p) { return w + p.read_register(8); }); }},
        {"fir4", 0x00000004, "out = sum of the last 4 inputs (mod 2^32)",
         [] { return std::make_unique<Fir4Kernel>(); }},
    };
    return kernels;
}

const BuiltinKernel* find_builtin(std::string_view name)
{
    for (const auto& k : builtin_kernels()) {
        if (k.name == name) return &k;
    }
    return nullptr;
}

void KernelRegistry::bind_kernel(std::uint32_t kernel_id, std::string name, KernelFactory factory)
{
    if (factories_.count(kernel_id)) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "0x%08x", kernel_id);
        throw Error(ErrorCode::DuplicateId, std::string("kernel id ") + buf + " is already bound");
    }
    factories_.emplace(kernel_id, Binding{std::move(name), std::move(factory)});
}

void KernelRegistry::bind_kernel(std::uint32_t kernel_id, std::string_view builtin_name)
{
    const BuiltinKernel* k = find_builtin(builtin_name);
    if (!k) throw Error(ErrorCode::UnknownKernel, "no built-in kernel named '" + std::string(builtin_name) + "'");
    bind_kernel(kernel_id, k->name, k->factory);
}

ActivationReport KernelRegistry::activate_from_config(std::uint32_t kernel_id)
{
    active_.reset();
    active_id_.reset();
    auto it = factories_.find(kernel_id);
    if (it == factories_.end()) return ActivationReport{kernel_id, true, {}};
    active_ = it->second.factory();
    active_id_ = kernel_id;
    return ActivationReport{kernel_id, false, it->second.name};
}

void KernelRegistry::deactivate()
{
    active_.reset();
    active_id_.reset();
}

}  // namespace proteus::reconfig
