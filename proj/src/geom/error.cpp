#include "hsdf/geom/error.hpp"

namespace hsdf {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::SizeMismatch: return "size-mismatch";
    case ErrorCode::OutOfDomain: return "out-of-domain";
    case ErrorCode::BehindCamera: return "point-behind-camera";
    case ErrorCode::Singular: return "singular-system";
    case ErrorCode::Io: return "io-error";
    case ErrorCode::Rejected: return "rejected";
    case ErrorCode::NonFinite: return "non-finite";
    }
    return "unknown";
}

} // namespace hsdf
