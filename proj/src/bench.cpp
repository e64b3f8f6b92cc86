#include "reid/bench.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <thread>

#include "reid/serial.hpp"

namespace reid {

namespace {

using Clock = std::chrono::steady_clock;

void run_pass(const std::function<void(size_t)>& process_item, size_t num_items,
              size_t threads) {
    if (threads <= 1) {
        for (size_t i = 0; i < num_items; ++i) process_item(i);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(threads);
    size_t chunk = (num_items + threads - 1) / threads;
    for (size_t t = 0; t < threads; ++t) {
        size_t begin = t * chunk;
        size_t end = std::min(begin + chunk, num_items);
        if (begin >= end) break;
        workers.emplace_back([&, begin, end] {
            for (size_t i = begin; i < end; ++i) process_item(i);
        });
    }
    for (auto& w : workers) w.join();
}

}  // namespace

ThroughputResult measure_throughput(const std::string& method,
                                    const std::function<void(size_t)>& process_item,
                                    size_t num_items, size_t warmup_count,
                                    size_t repetitions, size_t threads) {
    if (num_items == 0) throw ConfigError("throughput needs at least one item");
    if (repetitions < 3) throw ConfigError("throughput needs at least 3 repetitions");
    if (threads < 1) throw ConfigError("threads must be >= 1");

    auto guarded = [&](size_t i) {
        try {
            process_item(i);
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            throw UsageError("extractor failed on item " + std::to_string(i) + ": " +
                             e.what());
        }
    };

    for (size_t i = 0; i < warmup_count; ++i) guarded(i % num_items);

    ThroughputResult result;
    result.method = method;
    result.warmup_items = warmup_count;
    result.repetitions = repetitions;
    result.threads = threads;

    double total = 0.0;
    for (size_t rep = 0; rep < repetitions; ++rep) {
        auto start = Clock::now();
        run_pass(guarded, num_items, threads);
        auto stop = Clock::now();
        double secs = std::chrono::duration<double>(stop - start).count();
        if (secs <= 0.0) secs = 1e-9;  // clock resolution floor
        total += secs;
        result.per_repetition_rates.push_back(static_cast<double>(num_items) / secs);
    }
    result.items_processed = num_items * repetitions;
    result.elapsed_seconds = total;
    result.images_per_second = static_cast<double>(result.items_processed) / total;
    return result;
}

TradeoffReport build_tradeoff_report(const std::vector<TradeoffRowInput>& inputs) {
    if (inputs.empty()) throw ProtocolError("tradeoff report needs at least one row");
    const std::string& manifest = inputs.front().manifest;
    for (const auto& in : inputs) {
        if (in.manifest != manifest) {
            throw ProtocolError("tradeoff rows mix run manifests: '" + manifest +
                                "' vs '" + in.manifest + "'");
        }
    }
    TradeoffReport report;
    report.manifest = manifest;
    for (const auto& in : inputs) {
        TradeoffRow row;
        row.method = in.method;
        row.rank1_pct = in.eval.rank1 * 100.0;
        row.rank5_pct = in.eval.rank5 * 100.0;
        row.map_pct = in.eval.map * 100.0;
        row.images_per_second = in.throughput.images_per_second;
        row.feature_dim = in.feature_dim;
        row.param_count = in.param_count;
        report.rows.push_back(std::move(row));
    }
    std::stable_sort(report.rows.begin(), report.rows.end(),
                     [](const TradeoffRow& a, const TradeoffRow& b) {
                         return a.map_pct > b.map_pct;
                     });
    return report;
}

void save_throughput(const ThroughputResult& result, const std::string& manifest,
                     const std::filesystem::path& path) {
    Json j{{"kind", "throughput"},
           {"method", result.method},
           {"items_processed", result.items_processed},
           {"elapsed_seconds", result.elapsed_seconds},
           {"images_per_second", result.images_per_second},
           {"warmup_items", result.warmup_items},
           {"repetitions", result.repetitions},
           {"threads", result.threads},
           {"per_repetition_rates", result.per_repetition_rates},
           {"manifest", manifest}};
    save_json(j, path);
}

ThroughputResult load_throughput(const std::filesystem::path& path,
                                 std::string* manifest) {
    Json j = load_json(path);
    expect_kind(j, "throughput", path);
    return parse_guard(path, [&] {
        ThroughputResult result;
        result.method = j.at("method").get<std::string>();
        result.items_processed = j.at("items_processed").get<size_t>();
        result.elapsed_seconds = j.at("elapsed_seconds").get<double>();
        result.images_per_second = j.at("images_per_second").get<double>();
        result.warmup_items = j.at("warmup_items").get<size_t>();
        result.repetitions = j.at("repetitions").get<size_t>();
        result.threads = j.at("threads").get<size_t>();
        result.per_repetition_rates =
            j.at("per_repetition_rates").get<std::vector<double>>();
        if (manifest) *manifest = j.at("manifest").get<std::string>();
        return result;
    });
}

void save_tradeoff_csv(const TradeoffReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "method,rank1_pct,rank5_pct,map_pct,images_per_sec,feature_dim,param_count\n";
    for (const TradeoffRow& r : report.rows) {
        out << r.method << ',' << format_double(r.rank1_pct) << ','
            << format_double(r.rank5_pct) << ',' << format_double(r.map_pct) << ','
            << format_double(r.images_per_second) << ',' << r.feature_dim << ',';
        if (r.param_count) out << *r.param_count;
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

TradeoffReport load_tradeoff_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty file: " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "method,rank1_pct,rank5_pct,map_pct,images_per_sec,feature_dim,param_count") {
        throw ParseError("bad header in " + path.string());
    }
    TradeoffReport report;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::string where = path.string() + ":" + std::to_string(line_no);
        std::vector<std::string> cells = split_string(line, ',');
        if (cells.size() != 7) throw ParseError(where + ": expected 7 columns");
        TradeoffRow row;
        row.method = cells[0];
        row.rank1_pct = parse_double_strict(cells[1], where);
        row.rank5_pct = parse_double_strict(cells[2], where);
        row.map_pct = parse_double_strict(cells[3], where);
        row.images_per_second = parse_double_strict(cells[4], where);
        row.feature_dim = static_cast<size_t>(parse_int_strict(cells[5], where));
        if (!cells[6].empty()) {
            row.param_count = static_cast<size_t>(parse_int_strict(cells[6], where));
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

void save_tradeoff_json(const TradeoffReport& report, const std::filesystem::path& path) {
    Json rows = Json::array();
    for (const TradeoffRow& r : report.rows) {
        Json row{{"method", r.method},
                 {"rank1_pct", r.rank1_pct},
                 {"rank5_pct", r.rank5_pct},
                 {"map_pct", r.map_pct},
                 {"images_per_sec", r.images_per_second},
                 {"feature_dim", r.feature_dim}};
        if (r.param_count) {
            row["param_count"] = *r.param_count;
        } else {
            row["param_count"] = nullptr;
        }
        rows.push_back(std::move(row));
    }
    Json j{{"kind", "tradeoff"}, {"manifest", report.manifest}, {"rows", rows}};
    save_json(j, path);
}

void save_scatter_csv(const TradeoffReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "method,images_per_sec,map_pct\n";
    for (const TradeoffRow& r : report.rows) {
        out << r.method << ',' << format_double(r.images_per_second) << ','
            << format_double(r.map_pct) << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace reid
