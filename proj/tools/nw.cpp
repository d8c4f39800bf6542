#include "nw/error.hpp"
#include "nw/graph.hpp"
#include "nw/graph_gen.hpp"
#include "nw/kernels.hpp"
#include "nw/model.hpp"
#include "nw/oracle.hpp"
#include "nw/runtime.hpp"
#include "nw/tensor_io.hpp"
#include "nw/train.hpp"
#include "nw/walk_encoding.hpp"
#include "nw/walk_io.hpp"
#include "nw/walk_sampler.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#ifndef NW_GIT_DESCRIBE
#define NW_GIT_DESCRIBE "unknown"
#endif

using nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kGuard = 4 };

struct Globals {
    std::uint64_t seed = 0;
    bool no_timing = false;
    unsigned threads = 1;
    std::string manifest_path;
    std::string kernels;
};

struct Manifest {
    std::string command;
    std::vector<std::string> args;
    std::string config;
    std::vector<std::string> outputs;
};

std::uint64_t effective_seed(std::uint64_t flag) {
    if (const char* env = std::getenv("NW_SEED"); env != nullptr && *env != '\0') {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw nw::Error(nw::ErrorKind::ConfigError, std::string("NW_SEED is not an integer: ") + env);
        }
    }
    return flag;
}

void emit_manifest(const Globals& g, const Manifest& m, double seconds) {
    json doc = {{"command", m.command},
                {"args", m.args},
                {"config", m.config},
                {"seed", g.seed},
                {"git", NW_GIT_DESCRIBE},
                {"kernels", nw::kernels::active().name},
                {"outputs", m.outputs}};
    if (!g.no_timing) {
        doc["wall_seconds"] = seconds;
    }
    std::cerr << json{{"manifest", doc}}.dump() << '\n';
    if (!g.manifest_path.empty()) {
        std::ofstream out(g.manifest_path);
        if (!out) {
            throw nw::Error(nw::ErrorKind::IoError, "cannot write " + g.manifest_path);
        }
        out << doc.dump(2) << '\n';
    }
}

// Writes to the file when a path is given, else to stdout.
template <typename F>
void with_output(const std::string& path, Manifest& manifest, F&& body) {
    if (path.empty()) {
        body(std::cout);
        return;
    }
    std::ofstream out(path);
    if (!out) {
        throw nw::Error(nw::ErrorKind::IoError, "cannot write " + path);
    }
    body(out);
    manifest.outputs.push_back(path);
}

nw::WalkBatch read_walk_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw nw::Error(nw::ErrorKind::IoError, "cannot open " + path);
    }
    return nw::read_walks(in);
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(std::stod(item));
    }
    return out;
}

nw::oracle::WalkFunctional named_functional(const std::string& name, const nw::Graph& g, std::size_t length,
                                            std::size_t window) {
    const std::size_t s = window == 0 ? length : window;
    const std::size_t pe0 = g.node_dim() + g.edge_dim();
    auto block_mean = [](const nw::Matrix& x, std::size_t c0, std::size_t c1) {
        double sum = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) {
            for (std::size_t c = c0; c < c1; ++c) {
                sum += x(i, c);
            }
        }
        return c1 > c0 ? sum / static_cast<double>(x.rows * (c1 - c0)) : 0.0;
    };
    if (name == "one") {
        return [](const nw::Matrix&) { return 1.0; };
    }
    if (name == "identity") {
        return [=](const nw::Matrix& x) { return block_mean(x, pe0, pe0 + s); };
    }
    if (name == "adjacency") {
        return [=](const nw::Matrix& x) { return block_mean(x, pe0 + s, x.cols); };
    }
    if (name.rfind("column:", 0) == 0) {
        const std::size_t col = std::stoul(name.substr(7));
        return [=](const nw::Matrix& x) {
            if (col >= x.cols) {
                throw nw::Error(nw::ErrorKind::BadIndex, "column " + std::to_string(col) + " out of range");
            }
            return block_mean(x, col, col + 1);
        };
    }
    throw nw::Error(nw::ErrorKind::ConfigError, "unknown functional '" + name + "'");
}

void fill_dims_from_data(nw::ModelConfig& c, const nw::Dataset& data) {
    if (data.empty()) {
        return;
    }
    c.node_dim = data.front().graph.node_dim();
    c.edge_dim = data.front().graph.edge_dim();
}

} // namespace

int main(int argc, char** argv) {
    nw::tune_allocator();
    CLI::App app{"NeuralWalker random-walk engine and reference model"};
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed_flag = 0;
    app.add_option("--seed", seed_flag, "Master seed (NW_SEED overrides)");
    app.add_flag("--no-timing", g.no_timing, "Omit timing fields from outputs");
    app.add_option("--threads", g.threads, "Worker cap; never changes results")->check(CLI::PositiveNumber);
    app.add_option("--manifest", g.manifest_path, "Also write the run manifest to this file");
    app.add_option("--kernels", g.kernels, "Force kernel set")->check(CLI::IsMember({"scalar", "avx2"}));
    app.fallthrough();

    Manifest manifest;
    manifest.args.assign(argv + 1, argv + argc);
    std::function<void()> run;

    // sample
    auto* sample = app.add_subcommand("sample", "Sample random walks as JSON lines");
    std::string graph_path, out_path, walks_path, model_path, config_path, data_path, graph2_path;
    std::size_t length = 10, window = 0, count = 0, repeat = 1;
    double rate = 1.0;
    bool no_backtrack = false, stationary = false, features = false;
    sample->add_option("--graph", graph_path)->required();
    sample->add_option("--length", length);
    sample->add_option("--rate", rate);
    sample->add_option("--count", count, "Explicit number of walks");
    sample->add_flag("--no-backtrack", no_backtrack);
    sample->add_flag("--stationary-start", stationary);
    sample->add_option("--out", out_path);
    sample->callback([&] {
        run = [&] {
            const nw::Graph graph = nw::load_graph(graph_path);
            nw::SamplerConfig sc;
            sc.length = length;
            sc.rate = rate;
            if (count > 0) {
                sc.count = count;
            }
            sc.non_backtracking = no_backtrack;
            sc.start = stationary ? nw::StartDistribution::stationary : nw::StartDistribution::uniform;
            sc.seed = g.seed;
            sc.threads = g.threads;
            const nw::WalkBatch walks = nw::sample_walks(graph, sc);
            with_output(out_path, manifest, [&](std::ostream& os) { nw::write_walks(os, walks); });
        };
    });

    // encode
    auto* encode = app.add_subcommand("encode", "Positional encodings (or walk feature matrices) as NWTF");
    bool no_identity = false, no_adjacency = false;
    encode->add_option("--graph", graph_path)->required();
    encode->add_option("--walks", walks_path)->required();
    encode->add_option("--window", window, "Window s (0 = walk length)");
    encode->add_flag("--features", features, "Emit stacked walk feature matrices instead");
    encode->add_flag("--no-identity", no_identity);
    encode->add_flag("--no-adjacency", no_adjacency);
    encode->add_option("--out", out_path)->required();
    encode->callback([&] {
        run = [&] {
            const nw::Graph graph = nw::load_graph(graph_path);
            const nw::WalkBatch walks = read_walk_file(walks_path);
            nw::Matrix m;
            if (features) {
                for (std::size_t j = 0; j < walks.num_walks; ++j) {
                    const nw::Matrix x = nw::walk_feature_matrix(graph, walks, j, window);
                    m.cols = x.cols;
                    m.rows += x.rows;
                    m.values.insert(m.values.end(), x.values.begin(), x.values.end());
                }
            } else {
                const nw::EncodingConfig ec{window == 0 ? walks.length : window, !no_identity, !no_adjacency};
                m = nw::encode_walks(graph, walks, ec);
            }
            nw::save_tensor(nw::Tensor::from({m.rows, m.cols}, m.values), out_path);
            manifest.outputs.push_back(out_path);
            std::cout << json{{"rows", m.rows}, {"cols", m.cols}, {"out", out_path}}.dump() << '\n';
        };
    });

    // forward
    auto* forward = app.add_subcommand("forward", "Run the model on one graph");
    std::uint64_t init_seed = 0;
    forward->add_option("--graph", graph_path)->required();
    forward->add_option("--model", model_path, "Checkpoint directory");
    forward->add_option("--config", config_path, "Model config for a freshly initialized model");
    forward->add_option("--init-seed", init_seed, "Parameter seed with --config");
    forward->add_option("--walks", walks_path, "Use these walks instead of sampling");
    forward->add_option("--out", out_path, "Write node embeddings as NWTF");
    forward->callback([&] {
        run = [&] {
            if (model_path.empty() == config_path.empty()) {
                throw CLI::ValidationError("forward", "exactly one of --model and --config is required");
            }
            const nw::Graph graph = nw::load_graph(graph_path);
            nw::Model model = model_path.empty() ? nw::Model(nw::load_model_config(config_path), init_seed)
                                                 : nw::load_checkpoint(model_path);
            manifest.config = model_path.empty() ? config_path : model_path;
            const nw::GraphBatch batch = nw::make_batch(graph);
            nw::WalkBatch walks;
            if (!walks_path.empty()) {
                walks = read_walk_file(walks_path);
            } else {
                nw::SamplerConfig sc = model.config().sampler;
                sc.seed = g.seed;
                sc.threads = g.threads;
                walks = nw::sample_walks(graph, sc);
            }
            const nw::ForwardResult r = model.forward(batch, walks);
            if (!out_path.empty()) {
                nw::save_tensor(r.nodes.detach(), out_path);
                manifest.outputs.push_back(out_path);
            }
            const auto v = r.output.values();
            std::cout << json{{"output", std::vector<double>(v.begin(), v.end())}, {"shape", r.output.shape()}}.dump()
                      << '\n';
        };
    });

    // train
    auto* train = app.add_subcommand("train", "Train on a dataset directory (train/, val/, test/)");
    std::optional<std::uint64_t> train_seed;
    train->add_option("--config", config_path)->required();
    train->add_option("--data", data_path)->required();
    train->add_option("--out", out_path)->required();
    train->callback([&] {
        run = [&] {
            nw::ModelConfig cfg = nw::load_model_config(config_path);
            manifest.config = config_path;
            const nw::DataSplits data = nw::load_splits(data_path);
            fill_dims_from_data(cfg, data.train);
            if (std::getenv("NW_SEED") != nullptr || app.get_option("--seed")->count() > 0) {
                cfg.train.seed = g.seed;
            }
            nw::Model model(cfg, nw::child_seed(cfg.train.seed, 0));
            std::filesystem::create_directories(out_path);
            std::ofstream metrics(std::filesystem::path(out_path) / "metrics.jsonl");
            nw::TrainOptions opts;
            opts.dump_dir = std::filesystem::path(out_path);
            opts.sink = [&](const nw::MetricRecord& r) {
                const std::string line = nw::to_json(r).dump();
                metrics << line << '\n';
                std::cout << line << '\n';
            };
            const nw::TrainResult res = nw::train(model, data.train, data.val, opts);
            nw::save_checkpoint(model, out_path);
            json summary = {{"best_epoch", res.best_epoch}, {"best_val_loss", res.best_val_loss}};
            if (!data.test.empty()) {
                const nw::Metrics tm = nw::evaluate(model, data.test, cfg.train.eval_seed);
                summary["test"] = {{"loss", tm.loss}, {"accuracy", tm.accuracy}, {"mae", tm.mae}};
            }
            std::cout << json{{"summary", summary}}.dump() << '\n';
            manifest.outputs.push_back(out_path);
        };
    });

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint over K walk resamplings");
    std::string split = "test";
    eval->add_option("--model", model_path)->required();
    eval->add_option("--data", data_path)->required();
    eval->add_option("--split", split)->check(CLI::IsMember({"train", "val", "test"}));
    eval->add_option("--repeat", repeat)->check(CLI::PositiveNumber);
    eval->callback([&] {
        run = [&] {
            const nw::Model model = nw::load_checkpoint(model_path);
            manifest.config = model_path;
            const nw::Dataset data = nw::load_dataset(std::filesystem::path(data_path) / split);
            const std::uint64_t s = app.get_option("--seed")->count() > 0 || std::getenv("NW_SEED") != nullptr
                                        ? g.seed
                                        : model.config().train.eval_seed;
            const nw::RepeatedMetrics r = nw::evaluate_repeated(model, data, repeat, s);
            json runs = json::array();
            for (const auto& m : r.runs) {
                runs.push_back({{"loss", m.loss}, {"accuracy", m.accuracy}, {"mae", m.mae}});
            }
            std::cout << json{{"split", split},
                              {"repeat", repeat},
                              {"mean", {{"loss", r.mean.loss}, {"accuracy", r.mean.accuracy}, {"mae", r.mean.mae}}},
                              {"local_std",
                               {{"loss", r.stddev.loss}, {"accuracy", r.stddev.accuracy}, {"mae", r.stddev.mae}}},
                              {"runs", runs}}
                             .dump()
                      << '\n';
        };
    });

    // oracle
    auto* oracle = app.add_subcommand("oracle", "Brute-force references");
    oracle->require_subcommand(1);
    auto* o_enum = oracle->add_subcommand("enumerate", "Complete walk set with probabilities");
    o_enum->add_option("--graph", graph_path)->required();
    o_enum->add_option("--length", length);
    o_enum->add_flag("--no-backtrack", no_backtrack);
    o_enum->callback([&] {
        run = [&] {
            const nw::Graph graph = nw::load_graph(graph_path);
            const auto set = nw::oracle::enumerate_walks(graph, length, no_backtrack);
            nw::write_walks(std::cout, set.walks, set.probabilities);
        };
    });
    auto* o_expect = oracle->add_subcommand("expect", "Exact expectation of a walk functional");
    std::string functional = "one";
    o_expect->add_option("--graph", graph_path)->required();
    o_expect->add_option("--length", length);
    o_expect->add_option("--window", window);
    o_expect->add_flag("--no-backtrack", no_backtrack);
    o_expect->add_option("--functional", functional, "one | identity | adjacency | column:K");
    o_expect->callback([&] {
        run = [&] {
            const nw::Graph graph = nw::load_graph(graph_path);
            const double v = nw::oracle::exact_expectation(graph, length, no_backtrack,
                                                           named_functional(functional, graph, length, window), window);
            std::cout << json{{"functional", functional}, {"expectation", v}}.dump() << '\n';
        };
    });
    auto* o_wl = oracle->add_subcommand("wl", "1-WL stable coloring (joint when two graphs are given)");
    o_wl->add_option("--graph", graph_path)->required();
    o_wl->add_option("--other", graph2_path);
    o_wl->callback([&] {
        run = [&] {
            const nw::Graph a = nw::load_graph(graph_path);
            if (graph2_path.empty()) {
                const auto c = nw::oracle::wl_refinement(a);
                json hist = json::object();
                for (auto [color, n] : c.histogram) {
                    hist[std::to_string(color)] = n;
                }
                std::cout << json{{"rounds", c.rounds.size() - 1}, {"histogram", hist}}.dump() << '\n';
                return;
            }
            const nw::Graph b = nw::load_graph(graph2_path);
            std::cout << json{{"indistinguishable", nw::oracle::wl_indistinguishable(a, b)}}.dump() << '\n';
        };
    });
    auto* o_sep = oracle->add_subcommand("separate", "Separation witness over the moment battery");
    o_sep->add_option("--graph", graph_path)->required();
    o_sep->add_option("--other", graph2_path)->required();
    o_sep->add_option("--length", length);
    o_sep->add_flag("--no-backtrack", no_backtrack);
    o_sep->callback([&] {
        run = [&] {
            const auto w = nw::oracle::separation_witness(nw::load_graph(graph_path), nw::load_graph(graph2_path),
                                                          length, no_backtrack);
            std::cout << json{{"gap", w.gap}, {"functional", w.functional}, {"a", w.value_a}, {"b", w.value_b}}.dump()
                      << '\n';
        };
    });
    auto* o_tri = oracle->add_subcommand("triangles", "Triangle count");
    o_tri->add_option("--graph", graph_path)->required();
    o_tri->callback([&] {
        run = [&] {
            std::cout << json{{"triangles", nw::oracle::triangle_count(nw::load_graph(graph_path))}}.dump() << '\n';
        };
    });

    // bench
    auto* bench = app.add_subcommand("bench", "Sampling wall times over a rate/length sweep (CSV)");
    std::string sweep = "rate=0.1,0.5,1.0;length=25,50,100";
    std::size_t bench_repeat = 3;
    bench->add_option("--graph", graph_path)->required();
    bench->add_option("--sweep", sweep);
    bench->add_option("--repeat", bench_repeat, "Best-of-N timing")->check(CLI::PositiveNumber);
    bench->add_flag("--no-backtrack", no_backtrack);
    bench->callback([&] {
        run = [&] {
            const nw::Graph graph = nw::load_graph(graph_path);
            std::vector<double> rates{1.0};
            std::vector<double> lengths{static_cast<double>(length)};
            std::stringstream ss(sweep);
            std::string part;
            while (std::getline(ss, part, ';')) {
                const auto eq = part.find('=');
                if (eq == std::string::npos) {
                    throw CLI::ValidationError("--sweep", "expected key=v1,v2 groups");
                }
                const std::string key = part.substr(0, eq);
                if (key == "rate") {
                    rates = parse_list(part.substr(eq + 1));
                } else if (key == "length") {
                    lengths = parse_list(part.substr(eq + 1));
                } else {
                    throw CLI::ValidationError("--sweep", "unknown axis '" + key + "'");
                }
            }
            std::cout << (g.no_timing ? "rate,length,walks,steps\n" : "rate,length,walks,steps,seconds\n");
            for (double r : rates) {
                for (double l : lengths) {
                    nw::SamplerConfig sc;
                    sc.rate = r;
                    sc.length = static_cast<std::size_t>(l);
                    sc.non_backtracking = no_backtrack;
                    sc.seed = g.seed;
                    sc.threads = g.threads;
                    double best = INFINITY;
                    std::size_t m = 0;
                    for (std::size_t k = 0; k < bench_repeat; ++k) {
                        const auto t0 = std::chrono::steady_clock::now();
                        const nw::WalkBatch w = nw::sample_walks(graph, sc);
                        best = std::min(best,
                                        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
                        m = w.num_walks;
                    }
                    std::cout << r << ',' << sc.length << ',' << m << ',' << m * sc.length;
                    if (!g.no_timing) {
                        std::cout << ',' << best;
                    }
                    std::cout << '\n';
                }
            }
        };
    });

    // gen
    auto* gen = app.add_subcommand("gen", "Write a generated graph");
    std::string kind = "cycle";
    std::size_t n = 6, degree = 3;
    double p = 0.3;
    gen->add_option("--kind", kind)->check(CLI::IsMember({"complete", "cycle", "path", "star", "regular", "er"}));
    gen->add_option("--n", n);
    gen->add_option("--degree", degree);
    gen->add_option("--p", p);
    gen->add_option("--out", out_path);
    gen->callback([&] {
        run = [&] {
            nw::Engine rng(g.seed);
            const nw::Graph graph = kind == "complete" ? nw::complete_graph(n)
                                    : kind == "cycle"  ? nw::cycle_graph(n)
                                    : kind == "path"   ? nw::path_graph(n)
                                    : kind == "star"   ? nw::star_graph(n)
                                    : kind == "regular" ? nw::random_regular(n, degree, g.seed)
                                                        : nw::erdos_renyi(n, p, rng);
            with_output(out_path, manifest, [&](std::ostream& os) { os << nw::format_graph(graph); });
        };
    });

    // make-toy
    auto* toy = app.add_subcommand("make-toy", "Write a toy dataset directory");
    std::string task = "cycles";
    std::size_t n_train = 200, n_val = 50, n_test = 100;
    toy->add_option("--task", task)->check(CLI::IsMember({"cycles", "triangles"}));
    toy->add_option("--out", out_path)->required();
    toy->add_option("--train", n_train);
    toy->add_option("--val", n_val);
    toy->add_option("--test", n_test);
    toy->callback([&] {
        run = [&] {
            auto make = [&](std::size_t count, std::uint64_t stream) {
                const std::uint64_t s = nw::child_seed(g.seed, stream);
                return task == "cycles" ? nw::make_cycles_vs_paths(count, 4, 10, s)
                                        : nw::make_triangle_regression(count, 4, 10, s);
            };
            nw::save_splits({make(n_train, 0), make(n_val, 1), make(n_test, 2)}, out_path);
            manifest.outputs.push_back(out_path);
            std::cout << json{{"task", task}, {"train", n_train}, {"val", n_val}, {"test", n_test}}.dump() << '\n';
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
        return kUsage;
    }

    const auto t0 = std::chrono::steady_clock::now();
    try {
        g.seed = effective_seed(seed_flag);
        if (g.kernels == "scalar") {
            nw::kernels::select(nw::kernels::Isa::scalar);
        } else if (g.kernels == "avx2") {
            nw::kernels::select(nw::kernels::Isa::avx2);
        }
        for (auto* sub : app.get_subcommands()) {
            manifest.command = sub->get_name();
            for (auto* inner : sub->get_subcommands()) {
                manifest.command += " " + inner->get_name();
            }
        }
        run();
        std::cout.flush();
        emit_manifest(g, manifest, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        return kOk;
    } catch (const CLI::ValidationError& e) {
        std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
        return kUsage;
    } catch (const nw::Error& e) {
        std::cerr << json{{"error", std::string(nw::to_string(e.kind()))}, {"message", e.what()}}.dump() << '\n';
        return e.kind() == nw::ErrorKind::TooLarge ? kGuard : kData;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
        return kData;
    }
}
