#pragma once

// Walks as JSON lines: {"walk": j, "nodes": [...], "slots": [...], "mask": [...]}
// with an optional "p" (probability) field.

#include "nw/walk_sampler.hpp"

#include <iosfwd>
#include <span>

namespace nw {

void write_walks(std::ostream& out, const WalkBatch& walks, std::span<const double> probabilities = {});
/// Throws ParseError on malformed or inconsistent records.
WalkBatch read_walks(std::istream& in);

} // namespace nw
