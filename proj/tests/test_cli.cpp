#include <doctest.h>

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

std::string quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) {
        if (c == '\'') {
            q += "'\\''";
        } else {
            q += c;
        }
    }
    return q + "'";
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

Run nw(const fs::path& cwd, const std::vector<std::string>& args) {
    std::string cmd = "cd " + quote(cwd.string()) + " && " + quote(NW_CLI_PATH);
    for (const auto& a : args) {
        cmd += " " + quote(a);
    }
    const fs::path out = cwd / ".stdout";
    const fs::path err = cwd / ".stderr";
    cmd += " > " + quote(out.string()) + " 2> " + quote(err.string());
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    fs::remove(out);
    fs::remove(err);
    return r;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("nw_test_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

nlohmann::json error_of(const Run& r) {
    const auto line = r.err.substr(0, r.err.find('\n'));
    return nlohmann::json::parse(line);
}

std::size_t count_lines(const std::string& s) {
    std::size_t n = 0;
    for (char c : s) {
        n += c == '\n' ? 1 : 0;
    }
    return n;
}

const char* kConfig = R"({"n_blocks":1,"hidden":8,"node_dim":1,"edge_dim":0,"task":"classification","outputs":2,
"pooling":"mean","sequence":{"kind":"conv","kernel":3},"sampler":{"length":6,"rate":1.0},"encoding":{"window":4},
"train":{"epochs":2,"warmup_epochs":1,"batch_size":4,"lr":0.003,"seed":3}})";

struct Step {
    std::vector<std::string> args;
    std::vector<std::string> files;
};

std::vector<Step> pipeline() {
    return {
        {{"make-toy", "--task", "cycles", "--out", "data", "--train", "8", "--val", "4", "--test", "4"},
         {"data/train/targets.jsonl", "data/test/g00003.graph"}},
        {{"gen", "--kind", "cycle", "--n", "5", "--out", "c5.graph"}, {"c5.graph"}},
        {{"train", "--config", "cfg.json", "--data", "data", "--out", "ck"},
         {"ck/weights.nwtf", "ck/config.json", "ck/metrics.jsonl"}},
        {{"eval", "--model", "ck", "--data", "data", "--split", "test", "--repeat", "2"}, {}},
        {{"sample", "--graph", "c5.graph", "--length", "4", "--no-backtrack", "--out", "w.jsonl"}, {"w.jsonl"}},
        {{"encode", "--graph", "c5.graph", "--walks", "w.jsonl", "--window", "3", "--out", "e.nwtf"}, {"e.nwtf"}},
        {{"forward", "--graph", "c5.graph", "--model", "ck", "--walks", "w.jsonl", "--out", "f.nwtf"}, {"f.nwtf"}},
        {{"forward", "--graph", "c5.graph", "--model", "ck"}, {}},
        {{"oracle", "enumerate", "--graph", "c5.graph", "--length", "3"}, {}},
        {{"oracle", "separate", "--graph", "c5.graph", "--other", "data/test/g00000.graph", "--length", "3"}, {}},
    };
}

} // namespace

TEST_CASE("exit codes and error records") {
    unsetenv("NW_SEED");
    const auto dir = scratch("codes");
    REQUIRE(nw(dir, {"gen", "--kind", "complete", "--n", "3", "--out", "k3.graph"}).code == 0);

    const Run usage = nw(dir, {"sample"});
    CHECK(usage.code == 2);
    CHECK(error_of(usage)["error"] == "usage");

    const Run bad_len = nw(dir, {"sample", "--graph", "k3.graph", "--length", "0"});
    CHECK(bad_len.code == 3);
    CHECK(error_of(bad_len)["error"] == "BadLength");
    CHECK(bad_len.out.empty());

    const Run missing = nw(dir, {"oracle", "triangles", "--graph", "nope.graph"});
    CHECK(missing.code == 3);
    CHECK(error_of(missing)["error"] == "IoError");

    REQUIRE(nw(dir, {"gen", "--kind", "complete", "--n", "8", "--out", "k8.graph"}).code == 0);
    const Run big = nw(dir, {"oracle", "enumerate", "--graph", "k8.graph", "--length", "12"});
    CHECK(big.code == 4);
    CHECK(error_of(big)["error"] == "TooLarge");

    const Run bad_seed = nw(dir, {"--seed", "abc", "gen", "--kind", "path", "--n", "3"});
    CHECK(bad_seed.code == 2);
}

TEST_CASE("small known outputs") {
    unsetenv("NW_SEED");
    const auto dir = scratch("known");
    REQUIRE(nw(dir, {"gen", "--kind", "complete", "--n", "4", "--out", "k4.graph"}).code == 0);
    const Run tri = nw(dir, {"oracle", "triangles", "--graph", "k4.graph"});
    REQUIRE(tri.code == 0);
    CHECK(nlohmann::json::parse(tri.out)["triangles"] == 4);

    REQUIRE(nw(dir, {"gen", "--kind", "complete", "--n", "3", "--out", "k3.graph"}).code == 0);
    const Run walks = nw(dir, {"sample", "--graph", "k3.graph", "--length", "5", "--rate", "1"});
    REQUIRE(walks.code == 0);
    CHECK(count_lines(walks.out) == 3);
    std::istringstream lines(walks.out);
    std::string line;
    while (std::getline(lines, line)) {
        const auto rec = nlohmann::json::parse(line);
        const auto nodes = rec["nodes"].get<std::vector<int>>();
        CHECK(nodes.size() == 6);
        for (std::size_t i = 1; i < nodes.size(); ++i) {
            CHECK(nodes[i] != nodes[i - 1]);
        }
    }

    const Run manifest = nw(dir, {"--no-timing", "oracle", "triangles", "--graph", "k4.graph"});
    const auto m = nlohmann::json::parse(manifest.err.substr(0, manifest.err.find('\n')))["manifest"];
    CHECK(m["command"] == "oracle triangles");
    CHECK(m["seed"] == 0);
    CHECK_FALSE(m.contains("wall_seconds"));
    CHECK(m["args"].size() == 5);
}

TEST_CASE("sample, encode and forward compose") {
    unsetenv("NW_SEED");
    const auto dir = scratch("compose");
    std::ofstream(dir / "cfg.json") << kConfig;
    REQUIRE(nw(dir, {"gen", "--kind", "cycle", "--n", "6", "--out", "c6.graph"}).code == 0);
    REQUIRE(nw(dir, {"sample", "--graph", "c6.graph", "--length", "4", "--out", "w.jsonl"}).code == 0);
    CHECK(count_lines(slurp(dir / "w.jsonl")) == 6);

    const Run enc = nw(dir, {"encode", "--graph", "c6.graph", "--walks", "w.jsonl", "--window", "3", "--out", "e.nwtf"});
    REQUIRE(enc.code == 0);
    const auto shape = nlohmann::json::parse(enc.out);
    CHECK(shape["rows"] == 30);
    CHECK(shape["cols"] == 5);

    const Run fwd = nw(dir, {"forward", "--graph", "c6.graph", "--config", "cfg.json", "--init-seed", "9", "--walks",
                             "w.jsonl"});
    REQUIRE(fwd.code == 0);
    const auto out = nlohmann::json::parse(fwd.out);
    CHECK(out["shape"] == nlohmann::json::array({1, 2}));

    // Walks from the sampler with the model's sampler settings reproduce forward's own sampling.
    REQUIRE(nw(dir, {"sample", "--graph", "c6.graph", "--length", "6", "--no-backtrack", "--out", "w6.jsonl"}).code ==
            0);
    const Run given = nw(dir, {"forward", "--graph", "c6.graph", "--config", "cfg.json", "--init-seed", "9", "--walks",
                               "w6.jsonl"});
    const Run self = nw(dir, {"forward", "--graph", "c6.graph", "--config", "cfg.json", "--init-seed", "9"});
    REQUIRE(self.code == 0);
    CHECK(self.out == given.out);
}

TEST_CASE("pipeline replays byte-identically from its manifests") {
    unsetenv("NW_SEED");
    const auto first = scratch("replay_a");
    const auto second = scratch("replay_b");
    for (const auto& dir : {first, second}) {
        std::ofstream(dir / "cfg.json") << kConfig;
    }

    std::vector<std::string> stdouts;
    std::vector<std::string> manifest_text;
    std::vector<nlohmann::json> manifests;
    for (const auto& step : pipeline()) {
        std::vector<std::string> args = {"--no-timing", "--seed", "17", "--manifest", "run.json"};
        args.insert(args.end(), step.args.begin(), step.args.end());
        const Run r = nw(first, args);
        INFO(r.err);
        REQUIRE(r.code == 0);
        stdouts.push_back(r.out);
        manifest_text.push_back(slurp(first / "run.json"));
        manifests.push_back(nlohmann::json::parse(manifest_text.back()));
    }

    const auto steps = pipeline();
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto args = manifests[i]["args"].get<std::vector<std::string>>();
        const Run r = nw(second, args);
        INFO(manifests[i]["command"].get<std::string>());
        REQUIRE(r.code == 0);
        CHECK(r.out == stdouts[i]);
        CHECK(slurp(second / "run.json") == manifest_text[i]);
        for (const auto& f : steps[i].files) {
            INFO(f);
            REQUIRE(fs::exists(second / f));
            CHECK(slurp(first / f) == slurp(second / f));
        }
    }
}

TEST_CASE("thread count and seed source do not change outputs") {
    const auto dir = scratch("threads");
    unsetenv("NW_SEED");
    REQUIRE(nw(dir, {"gen", "--kind", "regular", "--n", "200", "--degree", "4", "--out", "r.graph"}).code == 0);
    const Run one = nw(dir, {"--threads", "1", "--seed", "5", "sample", "--graph", "r.graph", "--length", "20"});
    const Run many = nw(dir, {"--threads", "4", "--seed", "5", "sample", "--graph", "r.graph", "--length", "20"});
    REQUIRE(one.code == 0);
    CHECK(one.out == many.out);

    setenv("NW_SEED", "5", 1);
    const Run env = nw(dir, {"sample", "--graph", "r.graph", "--length", "20"});
    unsetenv("NW_SEED");
    CHECK(env.out == one.out);

    const Run other = nw(dir, {"--seed", "6", "sample", "--graph", "r.graph", "--length", "20"});
    CHECK(other.out != one.out);
}
