#pragma once

// NWTF: "NWTF", u8 rank, rank x u64 dims, f64 payload; little-endian.

#include "nw/tensor.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace nw {

void write_nwtf(std::ostream& out, const Tensor& t);
Tensor read_nwtf(std::istream& in);

void save_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor load_tensor(const std::filesystem::path& path);

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// Concatenated NWTF records plus a JSON manifest of names, shapes and offsets.
void save_named(const NamedTensors& tensors, const std::filesystem::path& weights,
                const std::filesystem::path& manifest);
NamedTensors load_named(const std::filesystem::path& weights, const std::filesystem::path& manifest);

} // namespace nw
