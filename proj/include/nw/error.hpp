#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nw {

enum class ErrorKind {
    DuplicateEdge,
    BadIndex,
    SelfLoop,
    ParseError,
    IoError,
    TooManyWalks,
    BadLength,
    BadRate,
    Unsupported,
    NeverCovers,
    BadWindow,
    ShapeError,
    BadSchedule,
    BadKernel,
    BadHeads,
    BadTimestep,
    TooLarge,
    NumericError,
    ConfigError,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Single exception type; callers branch on kind().
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace nw
