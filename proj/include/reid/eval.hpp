#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <variant>
#include <vector>

#include "reid/dataset.hpp"
#include "reid/metric.hpp"

namespace reid {

struct EuclideanDistance {};

// Euclidean ranking uses squared distances internally, so an identity-matrix
// Mahalanobis model reproduces it exactly, ties included.
using DistanceModel = std::variant<EuclideanDistance, MahalanobisModel, XqdaModel>;

struct ProtocolConfig {
    bool exclude_same_camera_positives = true;
    DistanceModel distance = EuclideanDistance{};
};

struct RankedList {
    int64_t query_id = 0;
    int64_t query_camera = 0;
    std::vector<size_t> gallery_indices;  // into the original gallery, best first
    std::vector<double> distances;
    std::vector<char> relevant;
};

// Ascending by distance, ties broken by ascending gallery index. Gallery
// records sharing both id and camera with the query are excluded when the
// protocol says so.
RankedList rank_gallery(const LabeledFeature& query, const FeatureDataset& gallery,
                        const ProtocolConfig& protocol);

// Fraction of usable queries whose first relevant record appears at rank <= k.
double cmc_at_k(const std::vector<RankedList>& lists, size_t k,
                size_t* num_skipped = nullptr);

// Mean of precision at each relevant rank; nullopt when nothing is relevant.
std::optional<double> average_precision(const std::vector<char>& relevance);

struct EvalReport {
    double rank1 = 0.0;
    double rank5 = 0.0;
    double map = 0.0;
    size_t num_queries = 0;
    size_t num_skipped = 0;

    bool operator==(const EvalReport&) const = default;
};

EvalReport evaluate(const FeatureDataset& queries, const FeatureDataset& gallery,
                    const ProtocolConfig& protocol);

void save_eval_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport load_eval_report(const std::filesystem::path& path);
void save_eval_report_csv(const EvalReport& report, const std::filesystem::path& path);

}  // namespace reid
