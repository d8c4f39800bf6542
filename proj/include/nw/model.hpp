#pragma once

#include "nw/graph_gen.hpp"
#include "nw/nn.hpp"
#include "nw/sequence_layers.hpp"
#include "nw/walk_encoding.hpp"
#include "nw/walk_sampler.hpp"

#include <json.hpp>

#include <memory>
#include <string>
#include <vector>

namespace nw {

enum class LocalMp { gin, none };
enum class GlobalMp { virtual_node, transformer, none };
enum class Pooling { mean, sum, none };
enum class TaskKind { regression, classification, node };
/// visits: divide by N_v. constant: divide by m(l+1)/|V| per graph.
enum class Normalization { visits, constant };

struct TrainConfig {
    double lr = 1e-3;
    double weight_decay = 0.0;
    std::size_t epochs = 100;
    std::size_t warmup_epochs = 5;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    std::uint64_t eval_seed = 12345;
};

struct ModelConfig {
    std::size_t n_blocks = 1;
    std::size_t hidden = 32;
    std::size_t node_dim = 1;
    std::size_t edge_dim = 0;
    SequenceLayerConfig sequence;
    LocalMp local_mp = LocalMp::gin;
    GlobalMp global_mp = GlobalMp::none;
    std::size_t global_heads = 4;
    Pooling pooling = Pooling::mean;
    TaskKind task = TaskKind::regression;
    std::size_t outputs = 1;  // regression targets or class count
    Normalization normalization = Normalization::visits;
    bool layer_norm = true;
    SamplerConfig sampler;
    EncodingConfig encoding;
    TrainConfig train;
};

nlohmann::json to_json(const ModelConfig& config);
/// Missing keys keep their defaults; unknown enum values throw ConfigError.
ModelConfig model_config_from_json(const nlohmann::json& doc);
ModelConfig load_model_config(const std::filesystem::path& path);

/// One GIN layer: MLP((1 + eps) h(v) + sum over out-neighbors u of relu(h(u) + proj(h_E(vu)))).
struct GinLayer {
    GinLayer() = default;
    GinLayer(ParameterStore& store, const std::string& name, std::size_t dim);

    Tensor message(const Graph& g, const Tensor& h, const Tensor& h_edge) const;
    /// h + message(h)
    Tensor operator()(const Graph& g, const Tensor& h, const Tensor& h_edge) const;

    Tensor eps;  // [1]
    Linear edge_proj;
    Mlp mlp;
};

/// state' = MLP(state + per-graph sum of h); h' = h + state'[graph(v)].
struct VirtualNode {
    VirtualNode() = default;
    VirtualNode(ParameterStore& store, const std::string& name, std::size_t dim);

    Tensor update(const Tensor& h, const Tensor& state, std::span<const std::int64_t> node_graph) const;
    /// (h + state'[graph(v)], state')
    std::pair<Tensor, Tensor> operator()(const Tensor& h, const Tensor& state,
                                         std::span<const std::int64_t> node_graph) const;

    Mlp mlp;
};

/// Attention over the nodes of each graph: a = h + MHA(h); out = a + MLP(a).
struct NodeTransformer {
    NodeTransformer() = default;
    NodeTransformer(ParameterStore& store, const std::string& name, std::size_t dim, std::size_t heads);

    Tensor attend(const Tensor& h, std::span<const std::int64_t> node_graph) const;
    Tensor operator()(const Tensor& h, std::span<const std::int64_t> node_graph) const;

    MultiHeadAttention mha;
    Mlp ffn;
};

/// Walk-level index data shared by every block of one forward pass.
struct WalkContext {
    std::size_t positions = 0;
    std::vector<std::int64_t> nodes;        // per walk row; -1 on padding
    std::vector<std::int64_t> slots;        // per walk row; -1 on padding and the last position
    std::vector<std::int64_t> edge_keys;    // aggregation key per walk row (-1 = none)
    std::vector<std::int64_t> slot_key;     // per slot: key shared by the two slots of an undirected edge
    std::vector<std::uint8_t> mask;
    std::vector<double> node_norm;          // per node aggregation weight
    std::vector<double> edge_norm;          // per key aggregation weight
    Tensor pe;                              // [(m*(l+1)), d_pe]
};

WalkContext make_walk_context(const GraphBatch& batch, const WalkBatch& walks, const EncodingConfig& encoding,
                              Normalization normalization);

/// h_W[i] = h_V(w_i) + edge_proj(h_E(w_i w_{i+1})) + pe_proj(h_pe[i]); padded rows zero.
Tensor embed_walks(const WalkContext& ctx, const Tensor& h_nodes, const Tensor& h_edges, const Linear& edge_proj,
                   const Linear& pe_proj);
/// Per-node average of walk features (zero for unvisited nodes).
Tensor aggregate_walks(const WalkContext& ctx, const Tensor& features, std::size_t n_nodes);
/// Per-edge average of walk features at the rows whose step uses that edge.
Tensor aggregate_edges(const WalkContext& ctx, const Tensor& features);

struct Block {
    Linear edge_proj;
    Linear pe_proj;
    LayerNorm walk_norm;
    std::unique_ptr<SequenceLayer> sequence;
    LayerNorm mp_norm;
    GinLayer gin;
    LayerNorm global_norm;
    LayerNorm ffn_norm;
    VirtualNode vn;
    NodeTransformer transformer;
};

struct ForwardResult {
    Tensor nodes;   // final node embeddings [n, hidden]
    Tensor output;  // [n_graphs, outputs] or [n, outputs] for node tasks
};

class Model {
public:
    Model(ModelConfig config, std::uint64_t init_seed);

    const ModelConfig& config() const noexcept { return config_; }
    ParameterStore& params() noexcept { return store_; }
    const ParameterStore& params() const noexcept { return store_; }

    /// Forward with the given walks (e.g. a complete walk set).
    ForwardResult forward(const GraphBatch& batch, const WalkBatch& walks) const;
    /// Samples walks per graph with child_seed(seed, i), then runs forward.
    ForwardResult forward(const GraphBatch& batch, std::uint64_t seed) const;
    WalkBatch sample(const GraphBatch& batch, std::uint64_t seed) const;

    const std::vector<Block>& blocks() const noexcept { return blocks_; }

private:
    ModelConfig config_;
    ParameterStore store_;
    Linear node_encoder_;
    Linear edge_encoder_;
    std::vector<Block> blocks_;
    Linear head_;
};

} // namespace nw
