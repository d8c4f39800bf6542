#pragma once

namespace nw {

/// Keeps freed tensor buffers in the heap instead of returning them to the
/// OS on every release. No-op outside glibc.
void tune_allocator();

} // namespace nw
