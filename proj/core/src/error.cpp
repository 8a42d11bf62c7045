#include "proteus/error.hpp"

namespace proteus {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::SchedulingInPast: return "SchedulingInPast";
    case ErrorCode::UnknownDomain: return "UnknownDomain";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::BadChecksum: return "BadChecksum";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::RegionOutOfBounds: return "RegionOutOfBounds";
    case ErrorCode::MisalignedPayload: return "MisalignedPayload";
    case ErrorCode::GeometryMismatch: return "GeometryMismatch";
    case ErrorCode::FixedRegionViolation: return "FixedRegionViolation";
    case ErrorCode::OutOfAddressSpace: return "OutOfAddressSpace";
    case ErrorCode::UnmappedAddress: return "UnmappedAddress";
    case ErrorCode::BusBusy: return "BusBusy";
    case ErrorCode::BadIndex: return "BadIndex";
    case ErrorCode::BufferOverflow: return "BufferOverflow";
    case ErrorCode::BufferUnderflow: return "BufferUnderflow";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::UnknownKernel: return "UnknownKernel";
    case ErrorCode::KernelAccessViolation: return "KernelAccessViolation";
    case ErrorCode::ControllerBusy: return "ControllerBusy";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::BadFlashImage: return "BadFlashImage";
    case ErrorCode::DeviceInert: return "DeviceInert";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::RuntimeFault: return "RuntimeFault";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace proteus
