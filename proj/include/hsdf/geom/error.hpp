#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hsdf {

enum class ErrorCode {
    InvalidArgument,
    SizeMismatch,
    OutOfDomain,
    BehindCamera,
    Singular,
    Io,
    Rejected,
    NonFinite,
};

std::string_view to_string(ErrorCode code);

/// Exception type thrown by every module. The code is stable and is what
/// tests and the CLI dispatch on; the message is for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what)
{
    if (!cond) {
        throw Error(code, what);
    }
}

} // namespace hsdf
