#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "reid/eval.hpp"

namespace reid {

struct ThroughputResult {
    std::string method;
    size_t items_processed = 0;      // across all timed repetitions
    double elapsed_seconds = 0.0;    // timed repetitions only
    double images_per_second = 0.0;  // items_processed / elapsed_seconds
    size_t warmup_items = 0;
    size_t repetitions = 0;
    size_t threads = 1;
    std::vector<double> per_repetition_rates;
};

// Times `process_item(i)` over all items, `repetitions` times, on a monotonic
// clock. Warmup passes are excluded from the timing. With threads > 1 the
// item range is split across that many workers per repetition and the wall
// time of the whole pass is charged.
ThroughputResult measure_throughput(const std::string& method,
                                    const std::function<void(size_t)>& process_item,
                                    size_t num_items, size_t warmup_count,
                                    size_t repetitions, size_t threads = 1);

struct TradeoffRow {
    std::string method;
    double rank1_pct = 0.0;
    double rank5_pct = 0.0;
    double map_pct = 0.0;
    double images_per_second = 0.0;
    size_t feature_dim = 0;
    std::optional<size_t> param_count;

    bool operator==(const TradeoffRow&) const = default;
};

struct TradeoffRowInput {
    std::string method;
    EvalReport eval;
    ThroughputResult throughput;
    size_t feature_dim = 0;
    std::optional<size_t> param_count;
    std::string manifest;  // identifies the producing run
};

struct TradeoffReport {
    std::vector<TradeoffRow> rows;  // sorted by map_pct descending, stable
    std::string manifest;
};

// All inputs must come from the same run manifest; rows are ordered by mAP
// descending with ties keeping their input order.
TradeoffReport build_tradeoff_report(const std::vector<TradeoffRowInput>& inputs);

void save_throughput(const ThroughputResult& result, const std::string& manifest,
                     const std::filesystem::path& path);
ThroughputResult load_throughput(const std::filesystem::path& path,
                                 std::string* manifest = nullptr);

void save_tradeoff_csv(const TradeoffReport& report, const std::filesystem::path& path);
TradeoffReport load_tradeoff_csv(const std::filesystem::path& path);
void save_tradeoff_json(const TradeoffReport& report, const std::filesystem::path& path);
void save_scatter_csv(const TradeoffReport& report, const std::filesystem::path& path);

}  // namespace reid
