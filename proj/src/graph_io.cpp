#include "nw/graph.hpp"

#include "nw/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace nw {
namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) {
            ++i;
        }
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') {
            ++j;
        }
        if (j > i) {
            out.push_back(line.substr(i, j - i));
        }
        i = j;
    }
    return out;
}

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
    fail(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": " + what);
}

template <typename T>
T parse_number(std::string_view s, std::size_t line_no) {
    T value{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        parse_fail(line_no, "cannot parse '" + std::string(s) + "'");
    }
    return value;
}

void append_double(std::string& out, double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, ptr);
}

} // namespace

Graph parse_graph(const std::string& text) {
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;

    bool have_header = false;
    std::size_t n = 0, d = 0, d_edge = 0;
    bool directed = false;
    Matrix nodes;
    std::vector<char> node_seen;
    std::size_t nodes_read = 0;
    std::vector<EdgeRecord> edges;

    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line(raw);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        const auto fields = split_fields(line);
        if (fields.empty()) {
            continue;
        }
        if (!have_header) {
            if (fields.size() != 5 || fields[0] != "graph") {
                parse_fail(line_no, "expected header 'graph <n_nodes> <d> <d'> <directed>'");
            }
            n = parse_number<std::size_t>(fields[1], line_no);
            d = parse_number<std::size_t>(fields[2], line_no);
            d_edge = parse_number<std::size_t>(fields[3], line_no);
            const int dir = parse_number<int>(fields[4], line_no);
            if (dir != 0 && dir != 1) {
                parse_fail(line_no, "directed flag must be 0 or 1");
            }
            directed = dir == 1;
            nodes = Matrix(n, d);
            node_seen.assign(n, 0);
            have_header = true;
            continue;
        }
        if (nodes_read < n) {
            if (fields.size() != 1 + d) {
                parse_fail(line_no, "node record needs " + std::to_string(1 + d) + " fields, got " +
                                        std::to_string(fields.size()));
            }
            const auto v = parse_number<std::size_t>(fields[0], line_no);
            if (v >= n) {
                fail(ErrorKind::BadIndex, "line " + std::to_string(line_no) + ": node " + std::to_string(v) +
                                              " out of range");
            }
            if (node_seen[v]) {
                parse_fail(line_no, "node " + std::to_string(v) + " listed twice");
            }
            node_seen[v] = 1;
            for (std::size_t k = 0; k < d; ++k) {
                nodes(v, k) = parse_number<double>(fields[1 + k], line_no);
            }
            ++nodes_read;
            continue;
        }
        if (fields.size() != 2 + d_edge) {
            parse_fail(line_no, "edge record needs " + std::to_string(2 + d_edge) + " fields, got " +
                                    std::to_string(fields.size()));
        }
        EdgeRecord e;
        const auto u = parse_number<std::size_t>(fields[0], line_no);
        const auto v = parse_number<std::size_t>(fields[1], line_no);
        if (u >= n || v >= n) {
            fail(ErrorKind::BadIndex, "line " + std::to_string(line_no) + ": edge (" + std::to_string(u) + "," +
                                          std::to_string(v) + ") out of range for " + std::to_string(n) +
                                          " nodes");
        }
        e.u = static_cast<NodeId>(u);
        e.v = static_cast<NodeId>(v);
        e.features.reserve(d_edge);
        for (std::size_t k = 0; k < d_edge; ++k) {
            e.features.push_back(parse_number<double>(fields[2 + k], line_no));
        }
        edges.push_back(std::move(e));
    }
    if (!have_header) {
        parse_fail(line_no, "missing header");
    }
    if (nodes_read < n) {
        parse_fail(line_no, "expected " + std::to_string(n) + " node records, got " + std::to_string(nodes_read));
    }
    return build_graph(edges, std::move(nodes), directed, d_edge);
}

Graph load_graph(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorKind::IoError, "cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_graph(buf.str());
}

std::string format_graph(const Graph& g) {
    std::string out = "graph " + std::to_string(g.num_nodes()) + " " + std::to_string(g.node_dim()) + " " +
                      std::to_string(g.edge_dim()) + " " + (g.directed() ? "1" : "0") + "\n";
    for (std::size_t v = 0; v < g.num_nodes(); ++v) {
        out += std::to_string(v);
        for (double x : g.node_features().row(v)) {
            out += ' ';
            append_double(out, x);
        }
        out += '\n';
    }
    for (std::size_t s = 0; s < g.num_slots(); ++s) {
        const NodeId u = g.slot_source(s);
        const NodeId v = g.slot_target(s);
        if (!g.directed() && u > v) {
            continue;
        }
        out += std::to_string(u) + " " + std::to_string(v);
        for (double x : g.edge_features().row(s)) {
            out += ' ';
            append_double(out, x);
        }
        out += '\n';
    }
    return out;
}

void save_graph(const Graph& g, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        fail(ErrorKind::IoError, "cannot write " + path.string());
    }
    out << format_graph(g);
}

} // namespace nw
