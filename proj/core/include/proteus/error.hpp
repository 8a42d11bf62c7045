#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace proteus {

enum class ErrorCode {
    // sim kernel
    SchedulingInPast,
    UnknownDomain,
    InvalidArgument,
    // bitstream
    BadMagic,
    BadChecksum,
    TruncatedPayload,
    MalformedHeader,
    RegionOutOfBounds,
    MisalignedPayload,
    GeometryMismatch,
    FixedRegionViolation,
    // pci bus
    OutOfAddressSpace,
    UnmappedAddress,
    BusBusy,
    // fixed part
    BadIndex,
    BufferOverflow,
    BufferUnderflow,
    // reconfigurable part
    DuplicateId,
    UnknownKernel,
    KernelAccessViolation,
    // configuration controller
    ControllerBusy,
    ChecksumMismatch,
    BadFlashImage,
    DeviceInert,
    // host
    ParseError,
    RuntimeFault,
    IoError,
};

std::string_view to_string(ErrorCode code);

/// All library failures are reported as proteus::Error carrying a code that
/// tests and the host runner can dispatch on.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace proteus
