#include "nw/walk_io.hpp"

#include "nw/error.hpp"

#include <json.hpp>

#include <istream>
#include <ostream>

namespace nw {

void write_walks(std::ostream& out, const WalkBatch& walks, std::span<const double> probabilities) {
    for (std::size_t j = 0; j < walks.num_walks; ++j) {
        const auto nodes = walks.walk(j);
        const auto slots = walks.walk_slots(j);
        const auto mask = walks.walk_mask(j);
        nlohmann::json rec = {{"walk", j},
                              {"nodes", std::vector<NodeId>(nodes.begin(), nodes.end())},
                              {"slots", std::vector<SlotId>(slots.begin(), slots.end())},
                              {"mask", std::vector<int>(mask.begin(), mask.end())}};
        if (!probabilities.empty()) {
            rec["p"] = probabilities[j];
        }
        out << rec.dump() << '\n';
    }
}

WalkBatch read_walks(std::istream& in) {
    WalkBatch out;
    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const auto rec = nlohmann::json::parse(line);
            const auto nodes = rec.at("nodes").get<std::vector<NodeId>>();
            const auto slots = rec.at("slots").get<std::vector<SlotId>>();
            auto mask = rec.contains("mask") ? rec.at("mask").get<std::vector<int>>()
                                             : std::vector<int>(nodes.size(), 1);
            if (nodes.empty() || slots.size() + 1 != nodes.size() || mask.size() != nodes.size()) {
                fail(ErrorKind::ParseError, "walks:" + std::to_string(line_no) + ": inconsistent record lengths");
            }
            if (first) {
                out.length = slots.size();
                first = false;
            } else if (slots.size() != out.length) {
                fail(ErrorKind::ParseError, "walks:" + std::to_string(line_no) + ": walk lengths differ");
            }
            out.nodes.insert(out.nodes.end(), nodes.begin(), nodes.end());
            out.edge_slots.insert(out.edge_slots.end(), slots.begin(), slots.end());
            for (int m : mask) {
                out.mask.push_back(m ? 1 : 0);
            }
            ++out.num_walks;
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::ParseError, "walks:" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

} // namespace nw
