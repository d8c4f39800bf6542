#include "nw/model.hpp"

#include "nw/error.hpp"

#include <fstream>

namespace nw {
namespace {

Tensor matrix_tensor(const Matrix& m) { return Tensor::from({m.rows, m.cols}, m.values); }

template <typename E>
struct EnumName {
    E value;
    const char* name;
};

constexpr EnumName<LocalMp> kLocal[] = {{LocalMp::gin, "gin"}, {LocalMp::none, "none"}};
constexpr EnumName<GlobalMp> kGlobal[] = {
    {GlobalMp::virtual_node, "virtual_node"}, {GlobalMp::transformer, "transformer"}, {GlobalMp::none, "none"}};
constexpr EnumName<Pooling> kPooling[] = {{Pooling::mean, "mean"}, {Pooling::sum, "sum"}, {Pooling::none, "none"}};
constexpr EnumName<TaskKind> kTask[] = {
    {TaskKind::regression, "regression"}, {TaskKind::classification, "classification"}, {TaskKind::node, "node"}};
constexpr EnumName<Normalization> kNorm[] = {{Normalization::visits, "visits"}, {Normalization::constant, "constant"}};
constexpr EnumName<StartDistribution> kStart[] = {{StartDistribution::uniform, "uniform"},
                                                  {StartDistribution::stationary, "stationary"}};
constexpr EnumName<ops::ScanMode> kScan[] = {{ops::ScanMode::sequential, "sequential"},
                                             {ops::ScanMode::chunked, "chunked"}};

template <typename E, std::size_t N>
const char* name_of(const EnumName<E> (&table)[N], E value) {
    for (const auto& e : table) {
        if (e.value == value) {
            return e.name;
        }
    }
    return "?";
}

template <typename E, std::size_t N>
void read_enum(const nlohmann::json& doc, const char* key, const EnumName<E> (&table)[N], E& out) {
    if (!doc.contains(key)) {
        return;
    }
    const auto text = doc.at(key).get<std::string>();
    for (const auto& e : table) {
        if (text == e.name) {
            out = e.value;
            return;
        }
    }
    fail(ErrorKind::ConfigError, std::string("unknown value '") + text + "' for " + key);
}

template <typename T>
void read(const nlohmann::json& doc, const char* key, T& out) {
    if (doc.contains(key)) {
        out = doc.at(key).get<T>();
    }
}

} // namespace

nlohmann::json to_json(const ModelConfig& c) {
    nlohmann::json sampler = {{"length", c.sampler.length},
                              {"rate", c.sampler.rate},
                              {"non_backtracking", c.sampler.non_backtracking},
                              {"start", name_of(kStart, c.sampler.start)}};
    if (c.sampler.count) {
        sampler["count"] = *c.sampler.count;
    }
    return {
        {"n_blocks", c.n_blocks},
        {"hidden", c.hidden},
        {"node_dim", c.node_dim},
        {"edge_dim", c.edge_dim},
        {"sequence",
         {{"kind", std::string(to_string(c.sequence.kind))},
          {"bidirectional", c.sequence.bidirectional},
          {"kernel", c.sequence.kernel},
          {"heads", c.sequence.heads},
          {"state", c.sequence.state},
          {"dt_min", c.sequence.dt_min},
          {"dt_max", c.sequence.dt_max},
          {"scan", name_of(kScan, c.sequence.scan)}}},
        {"local_mp", name_of(kLocal, c.local_mp)},
        {"global_mp", name_of(kGlobal, c.global_mp)},
        {"global_heads", c.global_heads},
        {"pooling", name_of(kPooling, c.pooling)},
        {"task", name_of(kTask, c.task)},
        {"outputs", c.outputs},
        {"normalization", name_of(kNorm, c.normalization)},
        {"layer_norm", c.layer_norm},
        {"sampler", sampler},
        {"encoding", {{"window", c.encoding.window}, {"identity", c.encoding.identity}, {"adjacency", c.encoding.adjacency}}},
        {"train",
         {{"lr", c.train.lr},
          {"weight_decay", c.train.weight_decay},
          {"epochs", c.train.epochs},
          {"warmup_epochs", c.train.warmup_epochs},
          {"batch_size", c.train.batch_size},
          {"seed", c.train.seed},
          {"eval_seed", c.train.eval_seed}}},
    };
}

ModelConfig model_config_from_json(const nlohmann::json& doc) {
    ModelConfig c;
    try {
        read(doc, "n_blocks", c.n_blocks);
        read(doc, "hidden", c.hidden);
        read(doc, "node_dim", c.node_dim);
        read(doc, "edge_dim", c.edge_dim);
        if (doc.contains("sequence")) {
            const auto& s = doc.at("sequence");
            if (s.contains("kind")) {
                c.sequence.kind = parse_sequence_kind(s.at("kind").get<std::string>());
            }
            read(s, "bidirectional", c.sequence.bidirectional);
            read(s, "kernel", c.sequence.kernel);
            read(s, "heads", c.sequence.heads);
            read(s, "state", c.sequence.state);
            read(s, "dt_min", c.sequence.dt_min);
            read(s, "dt_max", c.sequence.dt_max);
            read_enum(s, "scan", kScan, c.sequence.scan);
        }
        read_enum(doc, "local_mp", kLocal, c.local_mp);
        read_enum(doc, "global_mp", kGlobal, c.global_mp);
        read(doc, "global_heads", c.global_heads);
        read_enum(doc, "pooling", kPooling, c.pooling);
        read_enum(doc, "task", kTask, c.task);
        read(doc, "outputs", c.outputs);
        read_enum(doc, "normalization", kNorm, c.normalization);
        read(doc, "layer_norm", c.layer_norm);
        if (doc.contains("sampler")) {
            const auto& s = doc.at("sampler");
            read(s, "length", c.sampler.length);
            read(s, "rate", c.sampler.rate);
            if (s.contains("count")) {
                c.sampler.count = s.at("count").get<std::size_t>();
            }
            read(s, "non_backtracking", c.sampler.non_backtracking);
            read_enum(s, "start", kStart, c.sampler.start);
        }
        if (doc.contains("encoding")) {
            const auto& e = doc.at("encoding");
            read(e, "window", c.encoding.window);
            read(e, "identity", c.encoding.identity);
            read(e, "adjacency", c.encoding.adjacency);
        }
        if (doc.contains("train")) {
            const auto& t = doc.at("train");
            read(t, "lr", c.train.lr);
            read(t, "weight_decay", c.train.weight_decay);
            read(t, "epochs", c.train.epochs);
            read(t, "warmup_epochs", c.train.warmup_epochs);
            read(t, "batch_size", c.train.batch_size);
            read(t, "seed", c.train.seed);
            read(t, "eval_seed", c.train.eval_seed);
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ConfigError, std::string("model config: ") + e.what());
    }
    if (c.hidden == 0) {
        fail(ErrorKind::ConfigError, "hidden width must be positive");
    }
    if (c.pooling == Pooling::none && c.task != TaskKind::node) {
        fail(ErrorKind::ConfigError, "graph-level tasks need mean or sum pooling");
    }
    return c;
}

ModelConfig load_model_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::IoError, "cannot open " + path.string());
    }
    try {
        return model_config_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::ParseError, path.string() + ": " + e.what());
    }
}

GinLayer::GinLayer(ParameterStore& store, const std::string& name, std::size_t dim)
    : eps(store.constant(name + ".eps", {1}, 0.0)),
      edge_proj(store, name + ".edge_proj", dim, dim, false),
      mlp(store, name + ".mlp", dim, dim, dim) {}

Tensor GinLayer::message(const Graph& g, const Tensor& h, const Tensor& h_edge) const {
    const std::size_t n = g.num_nodes();
    std::vector<std::int64_t> targets(g.num_slots());
    std::vector<std::int64_t> sources(g.num_slots());
    for (std::size_t s = 0; s < g.num_slots(); ++s) {
        targets[s] = g.slot_target(s);
        sources[s] = g.slot_source(s);
    }
    Tensor self = ops::add(h, ops::mul_row(h, ops::tile_cols(ops::reshape(eps, {1, 1}), h.cols())));
    if (g.num_slots() > 0) {
        const Tensor msg = ops::relu(ops::add(ops::gather_rows(h, targets), edge_proj(h_edge)));
        self = ops::add(self, ops::segment_sum(msg, sources, n));
    }
    return mlp(self);
}

Tensor GinLayer::operator()(const Graph& g, const Tensor& h, const Tensor& h_edge) const {
    return ops::add(h, message(g, h, h_edge));
}

VirtualNode::VirtualNode(ParameterStore& store, const std::string& name, std::size_t dim)
    : mlp(store, name + ".mlp", dim, dim, dim) {}

Tensor VirtualNode::update(const Tensor& h, const Tensor& state, std::span<const std::int64_t> node_graph) const {
    return mlp(ops::add(state, ops::segment_sum(h, node_graph, state.rows())));
}

std::pair<Tensor, Tensor> VirtualNode::operator()(const Tensor& h, const Tensor& state,
                                                  std::span<const std::int64_t> node_graph) const {
    Tensor next = update(h, state, node_graph);
    return {ops::add(h, ops::gather_rows(next, node_graph)), next};
}

NodeTransformer::NodeTransformer(ParameterStore& store, const std::string& name, std::size_t dim, std::size_t heads)
    : mha(store, name + ".mha", dim, heads), ffn(store, name + ".ffn", dim, 2 * dim, dim, Activation::gelu) {}

Tensor NodeTransformer::attend(const Tensor& h, std::span<const std::int64_t> node_graph) const {
    const std::size_t n = h.rows();
    std::vector<double> bias(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (node_graph[i] != node_graph[j]) {
                bias[i * n + j] = -1e30;
            }
        }
    }
    return mha(h, n, Tensor::from({1, n, n}, std::move(bias)));
}

Tensor NodeTransformer::operator()(const Tensor& h, std::span<const std::int64_t> node_graph) const {
    const Tensor a = ops::add(h, attend(h, node_graph));
    return ops::add(a, ffn(a));
}

WalkContext make_walk_context(const GraphBatch& batch, const WalkBatch& walks, const EncodingConfig& encoding,
                              Normalization normalization) {
    const Graph& g = batch.merged;
    const std::size_t L = walks.length;
    const std::size_t P = walks.positions();
    const std::size_t rows = walks.num_walks * P;
    WalkContext ctx;
    ctx.positions = P;
    ctx.mask = walks.mask;
    ctx.nodes.assign(rows, -1);
    ctx.slots.assign(rows, -1);
    ctx.edge_keys.assign(rows, -1);

    ctx.slot_key.resize(g.num_slots());
    for (std::size_t s = 0; s < g.num_slots(); ++s) {
        ctx.slot_key[s] = static_cast<std::int64_t>(s);
        if (!g.directed()) {
            const auto mirror = g.slot_of(g.slot_target(s), g.slot_source(s));
            ctx.slot_key[s] = static_cast<std::int64_t>(std::min(s, *mirror));
        }
    }
    std::vector<double> node_visits(g.num_nodes(), 0.0);
    std::vector<double> key_visits(g.num_slots(), 0.0);
    for (std::size_t j = 0; j < walks.num_walks; ++j) {
        for (std::size_t i = 0; i < P; ++i) {
            const std::size_t r = j * P + i;
            if (!walks.mask[r]) {
                continue;
            }
            ctx.nodes[r] = walks.nodes[r];
            node_visits[walks.nodes[r]] += 1.0;
            if (i < L) {
                const SlotId slot = walks.edge_slots[j * L + i];
                if (slot != kNoSlot) {
                    ctx.slots[r] = slot;
                    ctx.edge_keys[r] = ctx.slot_key[static_cast<std::size_t>(slot)];
                    key_visits[static_cast<std::size_t>(ctx.edge_keys[r])] += 1.0;
                }
            }
        }
    }

    ctx.node_norm.assign(g.num_nodes(), 0.0);
    ctx.edge_norm.assign(g.num_slots(), 0.0);
    if (normalization == Normalization::visits) {
        for (std::size_t v = 0; v < g.num_nodes(); ++v) {
            ctx.node_norm[v] = node_visits[v] > 0.0 ? 1.0 / node_visits[v] : 0.0;
        }
        for (std::size_t k = 0; k < g.num_slots(); ++k) {
            ctx.edge_norm[k] = key_visits[k] > 0.0 ? 1.0 / key_visits[k] : 0.0;
        }
    } else {
        const std::size_t G = batch.num_graphs();
        std::vector<double> walks_per_graph(G, 0.0);
        for (std::size_t j = 0; j < walks.num_walks; ++j) {
            walks_per_graph[static_cast<std::size_t>(batch.node_graph[walks.start_node(j)])] += 1.0;
        }
        std::vector<double> keys_per_graph(G, 0.0);
        for (std::size_t s = 0; s < g.num_slots(); ++s) {
            if (ctx.slot_key[s] == static_cast<std::int64_t>(s)) {
                keys_per_graph[static_cast<std::size_t>(batch.node_graph[g.slot_source(s)])] += 1.0;
            }
        }
        for (std::size_t v = 0; v < g.num_nodes(); ++v) {
            const auto gi = static_cast<std::size_t>(batch.node_graph[v]);
            const double nv = static_cast<double>(batch.node_offsets[gi + 1] - batch.node_offsets[gi]);
            const double total = walks_per_graph[gi] * static_cast<double>(P);
            ctx.node_norm[v] = total > 0.0 ? nv / total : 0.0;
        }
        for (std::size_t s = 0; s < g.num_slots(); ++s) {
            const auto gi = static_cast<std::size_t>(batch.node_graph[g.slot_source(s)]);
            const double total = walks_per_graph[gi] * static_cast<double>(L);
            ctx.edge_norm[s] = total > 0.0 ? keys_per_graph[gi] / total : 0.0;
        }
    }

    const Matrix pe = encode_walks(g, walks, encoding);
    ctx.pe = matrix_tensor(pe);
    return ctx;
}

Tensor embed_walks(const WalkContext& ctx, const Tensor& h_nodes, const Tensor& h_edges, const Linear& edge_proj,
                   const Linear& pe_proj) {
    Tensor hw = ops::gather_rows(h_nodes, ctx.nodes);
    if (h_edges.rows() > 0) {
        hw = ops::add(hw, edge_proj(ops::gather_rows(h_edges, ctx.slots)));
    }
    if (ctx.pe.cols() > 0) {
        hw = ops::add(hw, pe_proj(ctx.pe));
    }
    return apply_mask(hw, ctx.mask);
}

Tensor aggregate_walks(const WalkContext& ctx, const Tensor& features, std::size_t n_nodes) {
    return ops::scale_rows(ops::segment_sum(features, ctx.nodes, n_nodes), ctx.node_norm);
}

Tensor aggregate_edges(const WalkContext& ctx, const Tensor& features) {
    const std::size_t n_slots = ctx.slot_key.size();
    const Tensor per_key = ops::scale_rows(ops::segment_sum(features, ctx.edge_keys, n_slots), ctx.edge_norm);
    return ops::gather_rows(per_key, ctx.slot_key);
}

Model::Model(ModelConfig config, std::uint64_t init_seed) : config_(std::move(config)), store_(init_seed) {
    const std::size_t d = config_.hidden;
    const std::size_t d_pe = config_.encoding.pe_dim();
    node_encoder_ = Linear(store_, "node_encoder", config_.node_dim, d);
    edge_encoder_ = Linear(store_, "edge_encoder", config_.edge_dim, d);
    for (std::size_t b = 0; b < config_.n_blocks; ++b) {
        const std::string p = "block" + std::to_string(b);
        Block block;
        block.edge_proj = Linear(store_, p + ".edge_proj", d, d, false);
        block.pe_proj = Linear(store_, p + ".pe_proj", d_pe, d, false);
        block.walk_norm = LayerNorm(store_, p + ".walk_norm", d);
        block.sequence = make_sequence_layer(store_, p + ".sequence", d, config_.sequence);
        if (config_.local_mp == LocalMp::gin) {
            block.mp_norm = LayerNorm(store_, p + ".mp_norm", d);
            block.gin = GinLayer(store_, p + ".gin", d);
        }
        if (config_.global_mp == GlobalMp::virtual_node) {
            block.global_norm = LayerNorm(store_, p + ".global_norm", d);
            block.vn = VirtualNode(store_, p + ".vn", d);
        } else if (config_.global_mp == GlobalMp::transformer) {
            block.global_norm = LayerNorm(store_, p + ".global_norm", d);
            block.ffn_norm = LayerNorm(store_, p + ".ffn_norm", d);
            block.transformer = NodeTransformer(store_, p + ".transformer", d, config_.global_heads);
        }
        blocks_.push_back(std::move(block));
    }
    head_ = Linear(store_, "head", d, config_.outputs);
}

WalkBatch Model::sample(const GraphBatch& batch, std::uint64_t seed) const {
    std::vector<std::uint64_t> seeds(batch.num_graphs());
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        seeds[i] = i;
    }
    SamplerConfig sc = config_.sampler;
    sc.seed = seed;
    return sample_walks_batched(batch, sc, seeds);
}

ForwardResult Model::forward(const GraphBatch& batch, std::uint64_t seed) const {
    return forward(batch, sample(batch, seed));
}

ForwardResult Model::forward(const GraphBatch& batch, const WalkBatch& walks) const {
    const Graph& g = batch.merged;
    if (g.node_dim() != config_.node_dim || (g.num_slots() > 0 && g.edge_dim() != config_.edge_dim)) {
        fail(ErrorKind::ShapeError, "graph features (" + std::to_string(g.node_dim()) + ", " +
                                        std::to_string(g.edge_dim()) + ") do not match the model config");
    }
    const std::size_t n = g.num_nodes();
    const std::size_t G = batch.num_graphs();
    const bool norm = config_.layer_norm;
    auto pre = [norm](const LayerNorm& ln, const Tensor& x) { return norm ? ln(x) : x; };

    Tensor h = node_encoder_(matrix_tensor(g.node_features()));
    Tensor he = edge_encoder_(g.num_slots() > 0 ? matrix_tensor(g.edge_features())
                                                : Tensor::zeros({0, config_.edge_dim}));
    Tensor vn_state = Tensor::zeros({G, config_.hidden});

    if (!blocks_.empty()) {
        if (walks.num_walks > 0 && walks.nodes.size() != walks.num_walks * walks.positions()) {
            fail(ErrorKind::ShapeError, "walk batch is inconsistent");
        }
        const WalkContext ctx = make_walk_context(batch, walks, config_.encoding, config_.normalization);
        for (const Block& block : blocks_) {
            const Tensor hw = embed_walks(ctx, pre(block.walk_norm, h), he, block.edge_proj, block.pe_proj);
            const Tensor f = block.sequence->forward(hw, ctx.positions, ctx.mask);
            h = ops::add(h, aggregate_walks(ctx, f, n));
            if (g.num_slots() > 0) {
                he = ops::add(he, aggregate_edges(ctx, f));
            }
            if (config_.local_mp == LocalMp::gin) {
                h = ops::add(h, block.gin.message(g, pre(block.mp_norm, h), he));
            }
            if (config_.global_mp == GlobalMp::virtual_node) {
                vn_state = block.vn.update(pre(block.global_norm, h), vn_state, batch.node_graph);
                h = ops::add(h, ops::gather_rows(vn_state, batch.node_graph));
            } else if (config_.global_mp == GlobalMp::transformer) {
                h = ops::add(h, block.transformer.attend(pre(block.global_norm, h), batch.node_graph));
                h = ops::add(h, block.transformer.ffn(pre(block.ffn_norm, h)));
            }
        }
    }

    ForwardResult result;
    result.nodes = h;
    if (config_.task == TaskKind::node || config_.pooling == Pooling::none) {
        result.output = head_(h);
    } else if (config_.pooling == Pooling::sum) {
        result.output = head_(ops::segment_sum(h, batch.node_graph, G));
    } else {
        result.output = head_(ops::segment_mean(h, batch.node_graph, G));
    }
    return result;
}

} // namespace nw
