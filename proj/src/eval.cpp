#include "reid/eval.hpp"

#include <algorithm>
#include <fstream>

#include "reid/serial.hpp"

namespace reid {

namespace {

double pair_distance(const DistanceModel& model, std::span<const double> x,
                     std::span<const double> y) {
    return std::visit(
        [&](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, EuclideanDistance>) {
                return squared_euclidean(x, y);
            } else if constexpr (std::is_same_v<T, MahalanobisModel>) {
                return mahalanobis_distance(m, x, y);
            } else {
                return xqda_distance(m, x, y);
            }
        },
        model);
}

}  // namespace

RankedList rank_gallery(const LabeledFeature& query, const FeatureDataset& gallery,
                        const ProtocolConfig& protocol) {
    if (gallery.records.empty()) throw ProtocolError("empty gallery");
    if (query.values.size() != gallery.dim) {
        throw ShapeError("query dim " + std::to_string(query.values.size()) +
                         ", gallery dim " + std::to_string(gallery.dim));
    }

    std::vector<std::pair<double, size_t>> scored;
    scored.reserve(gallery.records.size());
    for (size_t i = 0; i < gallery.records.size(); ++i) {
        const LabeledFeature& g = gallery.records[i];
        if (protocol.exclude_same_camera_positives && g.id == query.id &&
            g.camera == query.camera) {
            continue;
        }
        scored.emplace_back(pair_distance(protocol.distance, query.values, g.values), i);
    }
    if (scored.empty()) {
        throw ProtocolError("gallery is empty after same-camera exclusion for query id " +
                            std::to_string(query.id));
    }
    std::sort(scored.begin(), scored.end());

    RankedList out;
    out.query_id = query.id;
    out.query_camera = query.camera;
    out.gallery_indices.reserve(scored.size());
    out.distances.reserve(scored.size());
    out.relevant.reserve(scored.size());
    for (const auto& [dist, idx] : scored) {
        out.gallery_indices.push_back(idx);
        out.distances.push_back(dist);
        out.relevant.push_back(gallery.records[idx].id == query.id ? 1 : 0);
    }
    return out;
}

double cmc_at_k(const std::vector<RankedList>& lists, size_t k, size_t* num_skipped) {
    if (k < 1) throw UsageError("cmc_at_k requires k >= 1");
    size_t skipped = 0;
    size_t hits = 0;
    size_t usable = 0;
    for (const RankedList& list : lists) {
        size_t first = list.relevant.size();
        for (size_t i = 0; i < list.relevant.size(); ++i) {
            if (list.relevant[i]) {
                first = i;
                break;
            }
        }
        if (first == list.relevant.size()) {
            ++skipped;
            continue;
        }
        ++usable;
        if (first < k) ++hits;
    }
    if (num_skipped) *num_skipped = skipped;
    if (usable == 0) return 0.0;
    return static_cast<double>(hits) / static_cast<double>(usable);
}

std::optional<double> average_precision(const std::vector<char>& relevance) {
    size_t total_relevant = 0;
    for (char r : relevance) {
        if (r) ++total_relevant;
    }
    if (total_relevant == 0) return std::nullopt;
    double sum = 0.0;
    size_t seen = 0;
    for (size_t i = 0; i < relevance.size(); ++i) {
        if (relevance[i]) {
            ++seen;
            sum += static_cast<double>(seen) / static_cast<double>(i + 1);
        }
    }
    return sum / static_cast<double>(total_relevant);
}

EvalReport evaluate(const FeatureDataset& queries, const FeatureDataset& gallery,
                    const ProtocolConfig& protocol) {
    if (queries.records.empty()) throw ProtocolError("no queries");
    if (queries.dim != gallery.dim) {
        throw ShapeError("query dim " + std::to_string(queries.dim) +
                         ", gallery dim " + std::to_string(gallery.dim));
    }

    // XQDA projections depend only on each record, so apply them once and
    // rank inside the subspace with the kernel; results are identical.
    if (const XqdaModel* xqda = std::get_if<XqdaModel>(&protocol.distance)) {
        FeatureDataset pq, pg;
        pq.dim = pg.dim = xqda->w.cols();
        pq.records.reserve(queries.records.size());
        pg.records.reserve(gallery.records.size());
        for (const auto& r : queries.records) {
            pq.records.push_back({r.id, r.camera, xqda_project(*xqda, r.values)});
        }
        for (const auto& r : gallery.records) {
            pg.records.push_back({r.id, r.camera, xqda_project(*xqda, r.values)});
        }
        ProtocolConfig inner;
        inner.exclude_same_camera_positives = protocol.exclude_same_camera_positives;
        MahalanobisModel kernel;
        kernel.m = xqda->kernel;
        inner.distance = kernel;
        return evaluate(pq, pg, inner);
    }

    EvalReport report;
    report.num_queries = queries.records.size();
    size_t usable = 0;
    size_t rank1_hits = 0;
    size_t rank5_hits = 0;
    double ap_sum = 0.0;
    for (const LabeledFeature& q : queries.records) {
        RankedList list = rank_gallery(q, gallery, protocol);
        std::optional<double> ap = average_precision(list.relevant);
        if (!ap) {
            ++report.num_skipped;
            continue;
        }
        ++usable;
        ap_sum += *ap;
        size_t first = 0;
        while (!list.relevant[first]) ++first;
        if (first < 1) ++rank1_hits;
        if (first < 5) ++rank5_hits;
    }
    if (usable > 0) {
        report.rank1 = static_cast<double>(rank1_hits) / static_cast<double>(usable);
        report.rank5 = static_cast<double>(rank5_hits) / static_cast<double>(usable);
        report.map = ap_sum / static_cast<double>(usable);
    }
    return report;
}

void save_eval_report(const EvalReport& report, const std::filesystem::path& path) {
    Json j{{"rank1", report.rank1},
           {"rank5", report.rank5},
           {"map", report.map},
           {"num_queries", report.num_queries},
           {"num_skipped", report.num_skipped}};
    save_json(j, path);
}

EvalReport load_eval_report(const std::filesystem::path& path) {
    Json j = load_json(path);
    return parse_guard(path, [&] {
        EvalReport report;
        report.rank1 = j.at("rank1").get<double>();
        report.rank5 = j.at("rank5").get<double>();
        report.map = j.at("map").get<double>();
        report.num_queries = j.at("num_queries").get<size_t>();
        report.num_skipped = j.at("num_skipped").get<size_t>();
        return report;
    });
}

void save_eval_report_csv(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "rank1,rank5,map,num_queries,num_skipped\n"
        << format_double(report.rank1) << ',' << format_double(report.rank5) << ','
        << format_double(report.map) << ',' << report.num_queries << ','
        << report.num_skipped << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace reid
