#include "nw/error.hpp"

namespace nw {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::DuplicateEdge: return "DuplicateEdge";
    case ErrorKind::BadIndex: return "BadIndex";
    case ErrorKind::SelfLoop: return "SelfLoop";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::TooManyWalks: return "TooManyWalks";
    case ErrorKind::BadLength: return "BadLength";
    case ErrorKind::BadRate: return "BadRate";
    case ErrorKind::Unsupported: return "Unsupported";
    case ErrorKind::NeverCovers: return "NeverCovers";
    case ErrorKind::BadWindow: return "BadWindow";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::BadSchedule: return "BadSchedule";
    case ErrorKind::BadKernel: return "BadKernel";
    case ErrorKind::BadHeads: return "BadHeads";
    case ErrorKind::BadTimestep: return "BadTimestep";
    case ErrorKind::TooLarge: return "TooLarge";
    case ErrorKind::NumericError: return "NumericError";
    case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

} // namespace nw
