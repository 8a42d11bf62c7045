#include "proteus/selectmap.hpp"

#include <cmath>

namespace proteus::selectmap {

std::array<std::uint8_t, 4> split_word(std::uint32_t word)
{
    return {static_cast<std::uint8_t>(word), static_cast<std::uint8_t>(word >> 8),
            static_cast<std::uint8_t>(word >> 16), static_cast<std::uint8_t>(word >> 24)};
}

std::uint32_t join_word(const std::array<std::uint8_t, 4>& b)
{
    return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
           (std::uint32_t{b[3]} << 24);
}

std::string_view to_string(Mode m)
{
    switch (m) {
    case Mode::Idle: return "Idle";
    case Mode::Configuring: return "Configuring";
    case Mode::Readback: return "Readback";
    case Mode::Paused: return "Paused";
    }
    return "?";
}

void ConfigController::Intake::begin(std::uint32_t total_bytes, bool keep_bytes)
{
    image.clear();
    keep = keep_bytes;
    if (keep) image.reserve(total_bytes);
    total = total_bytes;
    payload_len.reset();
    payload_first.reset();
    payload_end.reset();
    first_byte.reset();
}

void ConfigController::Intake::take(std::uint8_t byte, std::uint32_t index, SimTime edge, Ticks period)
{
    if (!first_byte) first_byte = edge;
    last_end = edge + period;
    if (keep) image.push_back(byte);
    if (index == bitstream::kHeaderBytes - 1 && image.size() == bitstream::kHeaderBytes) {
        const std::size_t at = bitstream::kPayloadLengthOffset;
        payload_len = std::uint32_t{image[at]} | (std::uint32_t{image[at + 1]} << 8) |
                      (std::uint32_t{image[at + 2]} << 16) | (std::uint32_t{image[at + 3]} << 24);
    }
    if (!payload_len || *payload_len == 0) return;
    if (index == bitstream::kHeaderBytes) payload_first = edge;
    if (std::uint64_t{index} + 1 == bitstream::kHeaderBytes + std::uint64_t{*payload_len}) payload_end = edge + period;
}

Ticks ConfigController::Intake::payload_duration() const
{
    if (payload_first && payload_end) return *payload_end - *payload_first;
    if (first_byte) return last_end - *first_byte;
    return 0;
}

ConfigController::ConfigController(sim::Simulator& sim, fixed::StreamBuffer& write_buffer,
                                   fixed::StreamBuffer& read_buffer, bitstream::ConfigurationMemory& memory,
                                   double boot_rate, Tracer* tracer)
    : sim_(sim), write_buffer_(write_buffer), read_buffer_(read_buffer), memory_(memory), tracer_(tracer)
{
    if (!(boot_rate > 0.0) || boot_rate > kPeakBytesPerSecond) {
        throw Error(ErrorCode::InvalidArgument, "flash boot rate must be in (0, 50 MB/s]");
    }
    port_clock_ = sim_.add_clock("selectmap", kPortPeriod, 0, [this](SimTime t) { port_edge(t); });
    const auto flash_period = static_cast<Ticks>(std::llround(1e12 / boot_rate));
    flash_clock_ = sim_.add_clock("flash", flash_period, 0, [this](SimTime t) { flash_edge(t); });
    write_buffer_.on_push([this] { data_available(); });
    read_buffer_.on_pop([this] { space_available(); });
}

void ConfigController::configure(std::uint32_t total_bytes, ConfigDone done)
{
    if (mode_ != Mode::Idle || booting_) {
        throw Error(ErrorCode::ControllerBusy, "controller is " + std::string(to_string(mode_)));
    }
    if (total_bytes == 0) throw Error(ErrorCode::InvalidArgument, "empty configuration job");
    mode_ = Mode::Configuring;
    mux_ = MuxState{0, 0, MuxState::Direction::Write};
    primed_ = false;
    byte_count_ = 0;
    pauses_ = 0;
    job_start_ = sim_.now();
    intake_.begin(total_bytes, true);
    config_done_ = std::move(done);
    if (tracer_) tracer_->emit(sim_.now(), "selectmap", "config_start", "bytes=" + std::to_string(total_bytes));
    // the clock starts with the first word
    if (!write_buffer_.empty()) sim_.set_clock_gate(port_clock_, true);
}

std::uint32_t ConfigController::readback_stream(std::uint16_t first_column, std::uint16_t column_count,
                                                std::uint32_t kernel_id, ReadbackDone done)
{
    if (mode_ != Mode::Idle || booting_) {
        throw Error(ErrorCode::ControllerBusy, "controller is " + std::string(to_string(mode_)));
    }
    source_ = bitstream::readback(memory_, first_column, column_count, kernel_id);
    mode_ = Mode::Readback;
    mux_ = MuxState{0, 0, MuxState::Direction::Read};
    byte_count_ = 0;
    pauses_ = 0;
    pending_word_.reset();
    job_start_ = sim_.now();
    intake_.begin(static_cast<std::uint32_t>(source_.size()), false);
    intake_.payload_len = static_cast<std::uint32_t>(source_.size() - bitstream::kOverheadBytes);
    readback_done_ = std::move(done);
    if (tracer_) {
        tracer_->emit(sim_.now(), "selectmap", "readback_start",
                      "cols=" + std::to_string(first_column) + "+" + std::to_string(column_count));
    }
    sim_.set_clock_gate(port_clock_, true);
    return static_cast<std::uint32_t>(source_.size());
}

void ConfigController::power_up_boot(std::vector<std::uint8_t> flash_image, BootDone done)
{
    if (mode_ != Mode::Idle || booting_) {
        throw Error(ErrorCode::ControllerBusy, "controller is " + std::string(to_string(mode_)));
    }
    boot_done_ = std::move(done);
    job_start_ = sim_.now();
    if (flash_image.empty()) {
        BootReport r;
        r.error = ErrorCode::BadFlashImage;
        r.message = "flash is empty";
        if (tracer_) tracer_->emit(sim_.now(), "boot", "failed", r.message);
        if (boot_done_) boot_done_(r);
        return;
    }
    booting_ = true;
    mode_ = Mode::Configuring;
    source_ = std::move(flash_image);
    byte_count_ = 0;
    intake_.begin(static_cast<std::uint32_t>(source_.size()), true);
    if (tracer_) tracer_->emit(sim_.now(), "boot", "start", "bytes=" + std::to_string(source_.size()));
    sim_.set_clock_gate(flash_clock_, true);
}

void ConfigController::port_edge(SimTime t)
{
    if (mode_ == Mode::Configuring && !booting_) {
        configure_edge(t);
    } else if (mode_ == Mode::Readback) {
        readback_edge(t);
    } else {
        sim_.set_clock_gate(port_clock_, false);
    }
}

void ConfigController::pause(std::string reason)
{
    sim_.set_clock_gate(port_clock_, false);
    paused_from_ = mode_;
    mode_ = Mode::Paused;
    ++pauses_;
    ++total_pauses_;
    if (tracer_) tracer_->emit(sim_.now(), "selectmap", "pause", std::move(reason));
}

void ConfigController::configure_edge(SimTime t)
{
    if (mux_.byte_index == 0) {
        auto word = write_buffer_.try_pop();
        if (!word) {
            if (primed_) {
                pause("buffer empty");
            } else {
                sim_.set_clock_gate(port_clock_, false);
            }
            return;
        }
        mux_.current_word = *word;
        primed_ = true;
    }
    const std::uint8_t b = split_word(mux_.current_word)[mux_.byte_index];
    mux_.byte_index = static_cast<std::uint8_t>((mux_.byte_index + 1) % 4);
    if (port_logging_) port_log_.push_back(t);
    intake_.take(b, byte_count_++, t, kPortPeriod);
    if (byte_count_ == intake_.total) finish_configure(t);
}

void ConfigController::readback_edge(SimTime t)
{
    if (pending_word_) {
        if (!read_buffer_.try_push(*pending_word_)) {
            pause("buffer full");
            return;
        }
        pending_word_.reset();
        if (byte_count_ == intake_.total) {
            finish_readback(t);
            return;
        }
    }
    const std::uint8_t b = source_[byte_count_];
    mux_.current_word |= std::uint32_t{b} << (8 * mux_.byte_index);
    ++mux_.byte_index;
    if (port_logging_) port_log_.push_back(t);
    intake_.take(b, byte_count_++, t, kPortPeriod);
    if (mux_.byte_index == 4 || byte_count_ == intake_.total) {
        const std::uint32_t word = mux_.current_word;
        mux_.current_word = 0;
        mux_.byte_index = 0;
        if (!read_buffer_.try_push(word)) {
            pending_word_ = word;
        } else if (byte_count_ == intake_.total) {
            finish_readback(t);
        }
    }
}

void ConfigController::data_available()
{
    if (mode_ == Mode::Paused && paused_from_ == Mode::Configuring) {
        mode_ = Mode::Configuring;
        if (tracer_) tracer_->emit(sim_.now(), "selectmap", "resume", "data available");
        sim_.set_clock_gate(port_clock_, true);
    } else if (mode_ == Mode::Configuring && !booting_ && !primed_) {
        sim_.set_clock_gate(port_clock_, true);
    }
}

void ConfigController::space_available()
{
    if (mode_ == Mode::Paused && paused_from_ == Mode::Readback) {
        mode_ = Mode::Readback;
        if (tracer_) tracer_->emit(sim_.now(), "selectmap", "resume", "space available");
        sim_.set_clock_gate(port_clock_, true);
    }
}

void ConfigController::finish_configure(SimTime t)
{
    sim_.set_clock_gate(port_clock_, false);
    mode_ = Mode::Idle;
    mux_ = MuxState{};

    ConfigResult r;
    r.duration = intake_.payload_duration();
    r.total_duration = (t + kPortPeriod) - job_start_;
    r.pauses = pauses_;
    r.bytes = intake_.total;
    r.payload_bytes = intake_.payload_len.value_or(0);
    try {
        bitstream::Bitstream b = bitstream::parse(intake_.image, memory_.geometry());
        bitstream::apply(memory_, b, false);
        r.applied = std::move(b);
    } catch (const Error& e) {
        r.error = e.code() == ErrorCode::BadChecksum ? ErrorCode::ChecksumMismatch : e.code();
        r.message = e.what();
    }
    intake_.image.clear();
    intake_.image.shrink_to_fit();
    if (tracer_) {
        tracer_->emit(t, "selectmap", "config_done",
                      r.error ? r.message : "payload_ps=" + std::to_string(r.duration));
    }
    if (config_done_) {
        auto done = std::move(config_done_);
        config_done_ = nullptr;
        done(r);
    }
}

void ConfigController::finish_readback(SimTime t)
{
    sim_.set_clock_gate(port_clock_, false);
    mode_ = Mode::Idle;
    mux_ = MuxState{};
    ReadbackResult r;
    r.duration = intake_.payload_duration();
    r.total_duration = intake_.last_end - job_start_;
    r.pauses = pauses_;
    r.bytes = intake_.total;
    r.payload_bytes = intake_.payload_len.value_or(0);
    source_.clear();
    if (tracer_) tracer_->emit(t, "selectmap", "readback_done", "payload_ps=" + std::to_string(r.duration));
    if (readback_done_) {
        auto done = std::move(readback_done_);
        readback_done_ = nullptr;
        done(r);
    }
}

void ConfigController::flash_edge(SimTime t)
{
    if (!booting_) {
        sim_.set_clock_gate(flash_clock_, false);
        return;
    }
    const Ticks period = sim_.clock(flash_clock_).period();
    intake_.take(source_[byte_count_], byte_count_, t, period);
    ++byte_count_;
    if (byte_count_ == intake_.total) finish_boot(t);
}

void ConfigController::finish_boot(SimTime t)
{
    sim_.set_clock_gate(flash_clock_, false);
    booting_ = false;
    mode_ = Mode::Idle;
    BootReport r;
    r.duration = intake_.payload_duration();
    try {
        bitstream::Bitstream b = bitstream::parse(intake_.image, memory_.geometry());
        if (b.kind != bitstream::Kind::Full) throw Error(ErrorCode::BadFlashImage, "flash holds a partial bitstream");
        bitstream::apply(memory_, b, true);
        r.ok = true;
        r.kernel_id = b.kernel_id;
    } catch (const Error& e) {
        r.ok = false;
        r.error = ErrorCode::BadFlashImage;
        r.message = e.what();
    }
    intake_.image.clear();
    source_.clear();
    if (tracer_) tracer_->emit(t, "boot", r.ok ? "done" : "failed", r.ok ? "payload_ps=" + std::to_string(r.duration) : r.message);
    if (boot_done_) {
        auto done = std::move(boot_done_);
        boot_done_ = nullptr;
        done(r);
    }
}

}  // namespace proteus::selectmap
