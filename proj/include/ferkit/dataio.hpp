#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ferkit/label_core.hpp"
#include "ferkit/report.hpp"
#include "ferkit/tensor.hpp"
#include "ferkit/tensornet.hpp"

namespace ferkit {

enum class Split { Train, Validation, Test };

std::string split_name(Split s);

struct DatasetItem {
    Tensor image; // (1,H,W), values in [0,1]
    VoteCounts votes;
    LabelDistribution dist;
    Split split = Split::Train;
};

struct LoadOptions {
    std::size_t source_size = 48;  // declared side length of the stored pixels
    std::size_t target_size = 64;  // network input side length
    long outlier_threshold = 1;
    bool keep_rejected_raw = false; // keep pre-rejection counts instead of dropping
};

struct LoadStats {
    std::size_t loaded = 0;
    std::size_t dropped_unusable = 0;
    std::size_t dropped_vote_columns = 0;
};

// CSV schema: header `usage,pixels,<emotion names...>`; usage is one of
// Training / PublicTest / PrivateTest (train / validation / test);
// pixels is source_size^2 space-separated integers in [0,255], row-major.
// Vote columns not in the emotion set are dropped (counted in stats).
// Malformed rows raise std::runtime_error naming the line number.
std::vector<DatasetItem> load_dataset(const std::string& path,
                                      const EmotionSet& set,
                                      const LoadOptions& opts,
                                      LoadStats* stats = nullptr);

// Bilinear resize of a (1,H,W) image to (1,n,n).
Tensor resize_bilinear(const Tensor& image, std::size_t n);

std::vector<const DatasetItem*> filter_split(const std::vector<DatasetItem>& items, Split s);

// Checkpoint container: "FKPT" magic + version byte, a JSON header with
// the layer specs and metadata, then raw little-endian doubles per
// parameter tensor. load(save(m)) is bit-exact. Write is atomic
// (temp file + rename).
void save_checkpoint(const Model& model, const nlohmann::json& metadata,
                     const std::string& path);

struct Checkpoint {
    Model model;
    nlohmann::json metadata;
};

// expected_k > 0 validates the model head size against the caller's
// emotion count (shape-disagreement error otherwise). Truncated or
// corrupt files raise distinct messages, never a partial model.
Checkpoint load_checkpoint(const std::string& path, std::size_t expected_k = 0);

// Emits <prefix>metrics.json (stable key order) and <prefix>confusion.csv
// (header row/column of category names).
void write_metrics(const RunResult& run, const nlohmann::json& config_echo,
                   const EmotionSet& set, const std::string& prefix);

// FNV-1a 64 over a file's bytes; used in run manifests.
std::uint64_t file_hash(const std::string& path);

} // namespace ferkit
