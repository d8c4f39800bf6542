#include "nw/tensor_io.hpp"

#include "nw/error.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace nw {
namespace {

static_assert(std::endian::native == std::endian::little, "NWTF I/O assumes a little-endian host");

constexpr char kMagic[4] = {'N', 'W', 'T', 'F'};

template <typename T>
void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(std::istream& in) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
        fail(ErrorKind::ParseError, "NWTF: truncated record");
    }
    return value;
}

} // namespace

void write_nwtf(std::ostream& out, const Tensor& t) {
    out.write(kMagic, 4);
    if (t.rank() > 255) {
        fail(ErrorKind::ShapeError, "NWTF: rank above 255");
    }
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) {
        put<std::uint64_t>(out, d);
    }
    const auto v = t.values();
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!out) {
        fail(ErrorKind::IoError, "NWTF: write failed");
    }
}

Tensor read_nwtf(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        fail(ErrorKind::ParseError, "NWTF: bad magic");
    }
    const auto rank = take<std::uint8_t>(in);
    Shape shape(rank);
    for (auto& d : shape) {
        d = take<std::uint64_t>(in);
    }
    std::vector<double> values(shape_numel(shape));
    if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)))) {
        fail(ErrorKind::ParseError, "NWTF: truncated payload");
    }
    return Tensor::from(std::move(shape), std::move(values));
}

void save_tensor(const Tensor& t, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        fail(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    }
    write_nwtf(out, t);
}

Tensor load_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorKind::IoError, "cannot open " + path.string());
    }
    return read_nwtf(in);
}

void save_named(const NamedTensors& tensors, const std::filesystem::path& weights,
                const std::filesystem::path& manifest) {
    std::ofstream out(weights, std::ios::binary);
    if (!out) {
        fail(ErrorKind::IoError, "cannot open " + weights.string() + " for writing");
    }
    auto entries = nlohmann::json::array();
    for (const auto& [name, t] : tensors) {
        entries.push_back({{"name", name}, {"shape", t.shape()}, {"offset", static_cast<std::uint64_t>(out.tellp())}});
        write_nwtf(out, t);
    }
    std::ofstream m(manifest);
    if (!m) {
        fail(ErrorKind::IoError, "cannot open " + manifest.string() + " for writing");
    }
    m << nlohmann::json{{"format", "NWTF"}, {"tensors", entries}}.dump(2) << '\n';
}

NamedTensors load_named(const std::filesystem::path& weights, const std::filesystem::path& manifest) {
    std::ifstream m(manifest);
    if (!m) {
        fail(ErrorKind::IoError, "cannot open " + manifest.string());
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(m);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ParseError, manifest.string() + ": " + e.what());
    }
    std::ifstream in(weights, std::ios::binary);
    if (!in) {
        fail(ErrorKind::IoError, "cannot open " + weights.string());
    }
    NamedTensors out;
    for (const auto& entry : doc.at("tensors")) {
        in.seekg(static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
        Tensor t = read_nwtf(in);
        if (t.shape() != entry.at("shape").get<Shape>()) {
            fail(ErrorKind::ParseError, "manifest shape mismatch for " + entry.at("name").get<std::string>());
        }
        out.emplace_back(entry.at("name").get<std::string>(), std::move(t));
    }
    return out;
}

} // namespace nw
