#include <doctest.h>

#include "nw/error.hpp"
#include "nw/graph_gen.hpp"
#include "nw/oracle.hpp"
#include "nw/train.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

using namespace nw;

namespace {

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("nw_test_train_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

ModelConfig toy_config(TaskKind task) {
    ModelConfig c;
    c.n_blocks = 1;
    c.hidden = 8;
    c.sequence.kind = SequenceKind::conv;
    c.sequence.kernel = 3;
    c.sampler.length = 6;
    c.encoding.window = 4;
    c.task = task;
    c.outputs = task == TaskKind::classification ? 2 : 1;
    c.pooling = task == TaskKind::classification ? Pooling::mean : Pooling::sum;
    c.train.epochs = 3;
    c.train.warmup_epochs = 1;
    c.train.batch_size = 8;
    c.train.lr = 3e-3;
    c.train.seed = 5;
    return c;
}

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

} // namespace

TEST_CASE("toy datasets") {
    const Dataset cycles = make_cycles_vs_paths(40, 4, 10, 1);
    CHECK(cycles.size() == 40);
    std::size_t ones = 0;
    for (const auto& s : cycles) {
        ones += s.label == 1;
        const std::size_t n = s.graph.num_nodes();
        CHECK(n >= 4);
        CHECK(n <= 10);
        CHECK(s.graph.num_edges() == (s.label == 1 ? n : n - 1));
        CHECK(is_connected(s.graph));
    }
    CHECK(ones == 20);
    const Dataset tri = make_triangle_regression(30, 4, 10, 2);
    for (const auto& s : tri) {
        REQUIRE(s.target.size() == 1);
        CHECK(s.target[0] == static_cast<double>(oracle::triangle_count(s.graph)));
    }
    CHECK(make_triangle_regression(30, 4, 10, 2)[7].graph == tri[7].graph);
}

TEST_CASE("dataset directory round trip") {
    const auto dir = scratch("data");
    DataSplits splits{make_cycles_vs_paths(6, 4, 6, 3), make_cycles_vs_paths(4, 4, 6, 4), make_triangle_regression(3, 4, 6, 5)};
    save_splits(splits, dir);
    const DataSplits back = load_splits(dir);
    REQUIRE(back.train.size() == 6);
    REQUIRE(back.test.size() == 3);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(back.train[i].graph == splits.train[i].graph);
        CHECK(back.train[i].label == splits.train[i].label);
    }
    CHECK(back.test[2].target == splits.test[2].target);
    std::filesystem::remove_all(dir);
}

TEST_CASE("training is reproducible and emits per-epoch metrics") {
    const Dataset train_set = make_cycles_vs_paths(24, 4, 8, 6);
    const Dataset val_set = make_cycles_vs_paths(8, 4, 8, 7);
    const ModelConfig c = toy_config(TaskKind::classification);
    auto run = [&] {
        Model model(c, 11);
        std::vector<MetricRecord> seen;
        TrainOptions opts;
        opts.sink = [&](const MetricRecord& r) { seen.push_back(r); };
        const TrainResult result = train(model, train_set, val_set, opts);
        CHECK(seen.size() == result.trace.size());
        return std::make_pair(result, evaluate(model, val_set, 3));
    };
    const auto [a, ma] = run();
    const auto [b, mb] = run();
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        CHECK(a.trace[i].epoch == b.trace[i].epoch);
        CHECK(a.trace[i].metric == b.trace[i].metric);
        CHECK(std::abs(a.trace[i].value - b.trace[i].value) <= 1e-9);
    }
    CHECK(std::abs(ma.loss - mb.loss) <= 1e-9);
    CHECK(a.best_epoch == b.best_epoch);
    std::set<std::string> splits;
    for (const auto& r : a.trace) {
        splits.insert(r.split);
        CHECK(std::isfinite(r.value));
    }
    CHECK(splits == std::set<std::string>{"train", "val"});
    const auto j = to_json(a.trace.front());
    CHECK(j.contains("epoch"));
    CHECK(j.contains("split"));
    CHECK(j.contains("metric"));
    CHECK(j.contains("value"));
}

TEST_CASE("evaluation is deterministic and repeat mode varies walks") {
    const Dataset data = make_triangle_regression(10, 4, 8, 8);
    const Model model(toy_config(TaskKind::regression), 12);
    const Metrics a = evaluate(model, data, 1);
    const Metrics b = evaluate(model, data, 1);
    CHECK(a.loss == b.loss);
    CHECK(a.mae == b.mae);
    const RepeatedMetrics rep = evaluate_repeated(model, data, 4, 2);
    CHECK(rep.runs.size() == 4);
    CHECK(rep.stddev.mae >= 0.0);
    double mean = 0.0;
    for (const auto& r : rep.runs) {
        mean += r.mae / 4;
    }
    CHECK(rep.mean.mae == doctest::Approx(mean));
}

TEST_CASE("checkpoint round trip reproduces outputs") {
    const auto dir = scratch("ckpt");
    ModelConfig c = toy_config(TaskKind::classification);
    c.global_mp = GlobalMp::virtual_node;
    c.sequence.kind = SequenceKind::ssm_selective;
    c.sequence.state = 4;
    Model model(c, 13);
    train(model, make_cycles_vs_paths(8, 4, 6, 9), {});
    save_checkpoint(model, dir);
    CHECK(std::filesystem::exists(dir / "config.json"));
    CHECK(std::filesystem::exists(dir / "weights.nwtf"));
    CHECK(std::filesystem::exists(dir / "weights.json"));
    const Model loaded = load_checkpoint(dir);
    const GraphBatch batch = make_batch(cycle_graph(6));
    CHECK(vals(loaded.forward(batch, 4).output) == vals(model.forward(batch, 4).output));
    std::filesystem::remove_all(dir);
}

TEST_CASE("non-finite loss aborts with a dump") {
    const auto dir = scratch("nan");
    Dataset data = make_triangle_regression(8, 4, 6, 10);
    data[3].target[0] = std::nan("");
    Model model(toy_config(TaskKind::regression), 14);
    TrainOptions opts;
    opts.dump_dir = dir;
    try {
        train(model, data, {}, opts);
        FAIL("NaN loss accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NumericError);
    }
    CHECK(std::filesystem::exists(dir / "nan_dump.json"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("bad schedule configuration is rejected") {
    ModelConfig c = toy_config(TaskKind::regression);
    c.train.warmup_epochs = 10;
    c.train.epochs = 2;
    Model model(c, 15);
    try {
        train(model, make_triangle_regression(4, 4, 5, 11), {});
        FAIL("warmup longer than training accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::BadSchedule);
    }
}

TEST_CASE("a few epochs reduce the training loss") {
    const Dataset data = make_cycles_vs_paths(32, 4, 8, 16);
    ModelConfig c = toy_config(TaskKind::classification);
    c.train.epochs = 15;
    Model model(c, 17);
    const double before = evaluate(model, data, 1).loss;
    train(model, data, {});
    CHECK(evaluate(model, data, 1).loss < before);
}
