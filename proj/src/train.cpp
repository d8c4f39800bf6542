#include "nw/train.hpp"

#include "nw/error.hpp"
#include "nw/optim.hpp"
#include "nw/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace nw {
namespace {

std::vector<std::vector<std::size_t>> batches_of(std::vector<std::size_t> order, std::size_t batch_size) {
    std::vector<std::vector<std::size_t>> out;
    const std::size_t bs = std::max<std::size_t>(1, batch_size);
    for (std::size_t i = 0; i < order.size(); i += bs) {
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + bs)));
    }
    return out;
}

GraphBatch batch_graphs(const Dataset& data, std::span<const std::size_t> idx) {
    std::vector<const Graph*> graphs;
    graphs.reserve(idx.size());
    for (auto i : idx) {
        graphs.push_back(&data[i].graph);
    }
    return make_batch(graphs);
}

std::vector<const Sample*> samples_of(const Dataset& data, std::span<const std::size_t> idx) {
    std::vector<const Sample*> out;
    for (auto i : idx) {
        out.push_back(&data[i]);
    }
    return out;
}

std::vector<NodeId> random_permutation(std::size_t n, Engine& rng) {
    std::vector<NodeId> perm(n);
    std::iota(perm.begin(), perm.end(), NodeId{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    return perm;
}

// Accumulates per-batch loss and metric sums for one pass.
struct Tally {
    double loss = 0.0;
    double correct = 0.0;
    double abs_err = 0.0;
    double items = 0.0;
    double values = 0.0;

    void add(const Model& model, const Tensor& output, const Tensor& loss_value,
             std::span<const Sample* const> samples) {
        const auto& cfg = model.config();
        const auto out = output.values();
        if (cfg.task == TaskKind::classification) {
            const std::size_t k = cfg.outputs;
            for (std::size_t i = 0; i < samples.size(); ++i) {
                const auto row = out.subspan(i * k, k);
                const auto pred = std::max_element(row.begin(), row.end()) - row.begin();
                correct += pred == samples[i]->label ? 1.0 : 0.0;
            }
            values += static_cast<double>(samples.size());
        } else {
            std::size_t offset = 0;
            for (const Sample* s : samples) {
                for (double t : s->target) {
                    abs_err += std::abs(out[offset++] - t);
                }
            }
            values += static_cast<double>(offset);
        }
        loss += loss_value.item() * static_cast<double>(samples.size());
        items += static_cast<double>(samples.size());
    }

    Metrics metrics() const {
        Metrics m;
        if (items > 0) {
            m.loss = loss / items;
        }
        if (values > 0) {
            m.accuracy = correct / values;
            m.mae = abs_err / values;
        }
        return m;
    }
};

void write_nan_dump(const std::filesystem::path& dir, std::size_t epoch, std::size_t step, double loss,
                    const ParameterStore& params) {
    std::filesystem::create_directories(dir);
    nlohmann::json norms = nlohmann::json::object();
    for (const auto& [name, t] : params.named()) {
        double s = 0.0;
        for (double v : t.values()) {
            s += v * v;
        }
        norms[name] = std::sqrt(s);
    }
    std::ofstream out(dir / "nan_dump.json");
    out << nlohmann::json{{"epoch", epoch}, {"step", step}, {"loss", std::to_string(loss)}, {"param_norms", norms}}.dump(2)
        << '\n';
}

} // namespace

nlohmann::json to_json(const MetricRecord& r) {
    return {{"epoch", r.epoch}, {"split", r.split}, {"metric", r.metric}, {"value", r.value}};
}

Dataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream in(dir / "targets.jsonl");
    if (!in) {
        fail(ErrorKind::IoError, "cannot open " + (dir / "targets.jsonl").string());
    }
    Dataset out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const auto rec = nlohmann::json::parse(line);
            Sample s{load_graph(dir / rec.at("graph").get<std::string>()), {}, -1};
            if (rec.contains("label")) {
                s.label = rec.at("label").get<std::int64_t>();
            }
            if (rec.contains("target")) {
                const auto& t = rec.at("target");
                s.target = t.is_array() ? t.get<std::vector<double>>() : std::vector<double>{t.get<double>()};
            }
            out.push_back(std::move(s));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::ParseError, (dir / "targets.jsonl").string() + ":" + std::to_string(line_no) + ": " +
                                            e.what());
        }
    }
    return out;
}

void save_dataset(const Dataset& data, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "targets.jsonl");
    if (!out) {
        fail(ErrorKind::IoError, "cannot write " + (dir / "targets.jsonl").string());
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "g%05zu.graph", i);
        save_graph(data[i].graph, dir / name);
        nlohmann::json rec = {{"graph", name}};
        if (data[i].label >= 0) {
            rec["label"] = data[i].label;
        }
        if (!data[i].target.empty()) {
            rec["target"] = data[i].target;
        }
        out << rec.dump() << '\n';
    }
}

DataSplits load_splits(const std::filesystem::path& dir) {
    DataSplits s;
    s.train = load_dataset(dir / "train");
    s.val = load_dataset(dir / "val");
    if (std::filesystem::exists(dir / "test")) {
        s.test = load_dataset(dir / "test");
    }
    return s;
}

void save_splits(const DataSplits& splits, const std::filesystem::path& dir) {
    save_dataset(splits.train, dir / "train");
    save_dataset(splits.val, dir / "val");
    if (!splits.test.empty()) {
        save_dataset(splits.test, dir / "test");
    }
}

Dataset make_cycles_vs_paths(std::size_t count, std::size_t min_k, std::size_t max_k, std::uint64_t seed) {
    if (min_k < 3 || max_k < min_k) {
        fail(ErrorKind::ConfigError, "cycle sizes need 3 <= min_k <= max_k");
    }
    Engine rng(seed);
    Dataset out;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t k = min_k + uniform_index(rng, max_k - min_k + 1);
        const bool cycle = i % 2 == 0;
        const Graph base = cycle ? cycle_graph(k) : path_graph(k);
        out.push_back({relabel(base, random_permutation(k, rng)), {}, cycle ? 1 : 0});
    }
    std::shuffle(out.begin(), out.end(), rng);
    return out;
}

Dataset make_triangle_regression(std::size_t count, std::size_t min_n, std::size_t max_n, std::uint64_t seed) {
    if (min_n == 0 || max_n < min_n) {
        fail(ErrorKind::ConfigError, "graph sizes need 1 <= min_n <= max_n");
    }
    Engine rng(seed);
    Dataset out;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t n = min_n + uniform_index(rng, max_n - min_n + 1);
        const double p = uniform_real(rng, 0.1, 0.5);
        Graph g = erdos_renyi(n, p, rng);
        const auto t = static_cast<double>(oracle::triangle_count(g));
        out.push_back({std::move(g), {t}, -1});
    }
    return out;
}

Tensor batch_loss(const Model& model, const Tensor& output, std::span<const Sample* const> samples) {
    const auto& cfg = model.config();
    if (cfg.task == TaskKind::classification) {
        std::vector<std::int64_t> labels;
        for (const Sample* s : samples) {
            labels.push_back(s->label);
        }
        return ops::cross_entropy(output, labels);
    }
    std::vector<double> targets;
    for (const Sample* s : samples) {
        targets.insert(targets.end(), s->target.begin(), s->target.end());
    }
    if (targets.size() != output.numel()) {
        fail(ErrorKind::ShapeError, "expected " + std::to_string(output.numel()) + " targets, got " +
                                        std::to_string(targets.size()));
    }
    return ops::l1_loss(output, targets);
}

Metrics evaluate(const Model& model, const Dataset& data, std::uint64_t seed) {
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto batches = batches_of(order, model.config().train.batch_size);
    Tally tally;
    for (std::size_t b = 0; b < batches.size(); ++b) {
        const GraphBatch gb = batch_graphs(data, batches[b]);
        const auto samples = samples_of(data, batches[b]);
        const ForwardResult r = model.forward(gb, child_seed(seed, b));
        tally.add(model, r.output, batch_loss(model, r.output, samples), samples);
    }
    return tally.metrics();
}

RepeatedMetrics evaluate_repeated(const Model& model, const Dataset& data, std::size_t k, std::uint64_t seed) {
    RepeatedMetrics out;
    for (std::size_t r = 0; r < k; ++r) {
        out.runs.push_back(evaluate(model, data, child_seed(seed, r)));
    }
    auto stats = [&](auto field, double& mean, double& sd) {
        double s = 0.0;
        for (const auto& m : out.runs) {
            s += m.*field;
        }
        mean = k ? s / static_cast<double>(k) : 0.0;
        double v = 0.0;
        for (const auto& m : out.runs) {
            v += (m.*field - mean) * (m.*field - mean);
        }
        sd = k > 1 ? std::sqrt(v / static_cast<double>(k - 1)) : 0.0;
    };
    stats(&Metrics::loss, out.mean.loss, out.stddev.loss);
    stats(&Metrics::accuracy, out.mean.accuracy, out.stddev.accuracy);
    stats(&Metrics::mae, out.mean.mae, out.stddev.mae);
    return out;
}

TrainResult train(Model& model, const Dataset& train_set, const Dataset& val_set, const TrainOptions& options) {
    const TrainConfig& tc = model.config().train;
    if (train_set.empty()) {
        fail(ErrorKind::ConfigError, "empty training set");
    }
    const std::size_t per_epoch = (train_set.size() + std::max<std::size_t>(1, tc.batch_size) - 1) /
                                  std::max<std::size_t>(1, tc.batch_size);
    const std::size_t total = per_epoch * tc.epochs;
    if (tc.warmup_epochs > tc.epochs) {
        fail(ErrorKind::BadSchedule, "warmup_epochs " + std::to_string(tc.warmup_epochs) + " exceeds epochs " +
                                         std::to_string(tc.epochs));
    }
    const std::size_t warmup = per_epoch * tc.warmup_epochs;
    AdamW opt(model.params().tensors(), AdamWConfig{0.9, 0.999, 1e-8, tc.weight_decay});
    const std::uint64_t walk_stream = child_seed(tc.seed, 1);
    const std::uint64_t order_stream = child_seed(tc.seed, 2);

    TrainResult result;
    auto emit = [&](std::size_t epoch, const char* split, const char* metric, double value) {
        MetricRecord r{epoch, split, metric, value};
        if (options.sink) {
            options.sink(r);
        }
        result.trace.push_back(std::move(r));
    };

    NamedTensors best = model.params().snapshot();
    double best_loss = INFINITY;
    std::size_t step = 0;
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
        Engine shuffle_rng(child_seed(order_stream, epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        Tally tally;
        for (const auto& idx : batches_of(order, tc.batch_size)) {
            const GraphBatch gb = batch_graphs(train_set, idx);
            const auto samples = samples_of(train_set, idx);
            const ForwardResult r = model.forward(gb, child_seed(walk_stream, step));
            const Tensor loss = batch_loss(model, r.output, samples);
            if (!std::isfinite(loss.item())) {
                if (options.dump_dir) {
                    write_nan_dump(*options.dump_dir, epoch, step, loss.item(), model.params());
                }
                fail(ErrorKind::NumericError, "non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                                  std::to_string(step));
            }
            opt.zero_grad();
            backward(loss);
            opt.step(lr_schedule(step + 1, warmup, total, tc.lr));
            tally.add(model, r.output, loss, samples);
            ++step;
        }
        const Metrics tm = tally.metrics();
        emit(epoch, "train", "loss", tm.loss);
        emit(epoch, "train", model.config().task == TaskKind::classification ? "accuracy" : "mae",
             model.config().task == TaskKind::classification ? tm.accuracy : tm.mae);
        if (!val_set.empty()) {
            const Metrics vm = evaluate(model, val_set, tc.eval_seed);
            emit(epoch, "val", "loss", vm.loss);
            emit(epoch, "val", model.config().task == TaskKind::classification ? "accuracy" : "mae",
                 model.config().task == TaskKind::classification ? vm.accuracy : vm.mae);
            if (vm.loss < best_loss) {
                best_loss = vm.loss;
                best = model.params().snapshot();
                result.best_epoch = epoch;
            }
        } else {
            best_loss = tm.loss;
            best = model.params().snapshot();
            result.best_epoch = epoch;
        }
    }
    model.params().assign(best);
    result.best_val_loss = best_loss;
    return result;
}

void save_checkpoint(const Model& model, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream cfg(dir / "config.json");
    if (!cfg) {
        fail(ErrorKind::IoError, "cannot write " + (dir / "config.json").string());
    }
    cfg << to_json(model.config()).dump(2) << '\n';
    save_named(model.params().named(), dir / "weights.nwtf", dir / "weights.json");
}

Model load_checkpoint(const std::filesystem::path& dir) {
    Model model(load_model_config(dir / "config.json"), 0);
    model.params().assign(load_named(dir / "weights.nwtf", dir / "weights.json"));
    return model;
}

} // namespace nw
