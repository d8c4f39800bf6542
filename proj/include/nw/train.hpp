#pragma once

#include "nw/model.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nw {

struct Sample {
    Graph graph;
    std::vector<double> target;  // regression: `outputs` values (per node for node tasks)
    std::int64_t label = -1;     // classification
};

using Dataset = std::vector<Sample>;

/// Directory with targets.jsonl; each line {"graph": file, "target": [..]} or {"graph": file, "label": k}.
Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const Dataset& data, const std::filesystem::path& dir);

struct DataSplits {
    Dataset train;
    Dataset val;
    Dataset test;
};

/// dir/train, dir/val and, when present, dir/test.
DataSplits load_splits(const std::filesystem::path& dir);
void save_splits(const DataSplits& splits, const std::filesystem::path& dir);

/// Cycles C_k (label 1) and paths P_k (label 0), k uniform in [min_k, max_k],
/// randomly relabeled.
Dataset make_cycles_vs_paths(std::size_t count, std::size_t min_k, std::size_t max_k, std::uint64_t seed);
/// Erdos-Renyi graphs with n in [min_n, max_n], target = triangle count.
Dataset make_triangle_regression(std::size_t count, std::size_t min_n, std::size_t max_n, std::uint64_t seed);

struct Metrics {
    double loss = 0.0;
    double accuracy = 0.0;  // classification only
    double mae = 0.0;       // regression only
};

struct MetricRecord {
    std::size_t epoch;
    std::string split;
    std::string metric;
    double value;
};

nlohmann::json to_json(const MetricRecord& record);

using MetricSink = std::function<void(const MetricRecord&)>;

struct TrainOptions {
    MetricSink sink;
    std::optional<std::filesystem::path> dump_dir;  // receives nan_dump.json on abort
};

struct TrainResult {
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    std::vector<MetricRecord> trace;
};

/// AdamW with warmup-cosine decay; walks are resampled every step. The
/// parameters with the lowest validation loss are restored at the end
/// (the last epoch when val is empty). Throws NumericError on a NaN loss.
TrainResult train(Model& model, const Dataset& train_set, const Dataset& val_set, const TrainOptions& options = {});

/// Loss of one batch; labels or targets are read from the samples.
Tensor batch_loss(const Model& model, const Tensor& output, std::span<const Sample* const> samples);

/// Deterministic evaluation; batch b samples walks with child_seed(seed, b).
Metrics evaluate(const Model& model, const Dataset& data, std::uint64_t seed);

struct RepeatedMetrics {
    std::vector<Metrics> runs;
    Metrics mean;
    Metrics stddev;  // sample standard deviation across runs (local std)
};

/// k evaluations with walk seeds child_seed(seed, r).
RepeatedMetrics evaluate_repeated(const Model& model, const Dataset& data, std::size_t k, std::uint64_t seed);

/// config.json, weights.nwtf and weights.json in dir.
void save_checkpoint(const Model& model, const std::filesystem::path& dir);
Model load_checkpoint(const std::filesystem::path& dir);

} // namespace nw
