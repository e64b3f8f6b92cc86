#include "reid/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace reid {

size_t FeatureDataset::num_identities() const {
    std::set<int64_t> ids;
    for (const auto& r : records) ids.insert(r.id);
    return ids.size();
}

std::vector<int64_t> FeatureDataset::identity_list() const {
    std::set<int64_t> ids;
    for (const auto& r : records) ids.insert(r.id);
    return std::vector<int64_t>(ids.begin(), ids.end());
}

void FeatureDataset::validate() const {
    for (size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.id < 0) throw ParseError("negative id at record " + std::to_string(i));
        if (r.camera < 0) throw ParseError("negative camera at record " + std::to_string(i));
        if (r.values.size() != dim) {
            throw ShapeError("record " + std::to_string(i) + " has dimension " +
                             std::to_string(r.values.size()) + ", expected " +
                             std::to_string(dim));
        }
        for (double v : r.values) {
            if (!std::isfinite(v)) {
                throw ParseError("non-finite feature value at record " + std::to_string(i));
            }
        }
    }
}

void SyntheticSpec::validate() const {
    if (num_identities < 2) throw ConfigError("num_identities must be >= 2");
    if (records_per_identity < 2) throw ConfigError("records_per_identity must be >= 2");
    if (num_cameras < 2) throw ConfigError("num_cameras must be >= 2");
    if (dim < 2) throw ConfigError("dim must be >= 2");
    if (!(intra_class_stddev > 0.0)) throw ConfigError("intra_class_stddev must be > 0");
    if (camera_shift_stddev < 0.0) throw ConfigError("camera_shift_stddev must be >= 0");
    if (!(class_center_stddev > 0.0)) throw ConfigError("class_center_stddev must be > 0");
}

void SplitSpec::validate() const {
    if (!(train_fraction > 0.0) || !(train_fraction < 1.0)) {
        throw ConfigError("train_fraction must lie strictly between 0 and 1");
    }
    if (queries_per_test_identity < 1) {
        throw ConfigError("queries_per_test_identity must be >= 1");
    }
}

FeatureDataset generate_synthetic(const SyntheticSpec& spec, uint64_t seed) {
    spec.validate();
    Rng rng(seed);

    std::vector<std::vector<double>> centers(spec.num_identities,
                                             std::vector<double>(spec.dim));
    for (auto& c : centers) {
        for (double& v : c) v = rng.gaussian(0.0, spec.class_center_stddev);
    }
    std::vector<std::vector<double>> offsets(spec.num_cameras,
                                             std::vector<double>(spec.dim));
    for (auto& o : offsets) {
        for (double& v : o) v = rng.gaussian(0.0, spec.camera_shift_stddev);
    }

    FeatureDataset data;
    data.dim = spec.dim;
    data.records.reserve(spec.num_identities * spec.records_per_identity);
    for (size_t i = 0; i < spec.num_identities; ++i) {
        for (size_t k = 0; k < spec.records_per_identity; ++k) {
            LabeledFeature rec;
            rec.id = static_cast<int64_t>(i);
            rec.camera = static_cast<int64_t>(k % spec.num_cameras);
            rec.values.resize(spec.dim);
            const auto& off = offsets[static_cast<size_t>(rec.camera)];
            for (size_t d = 0; d < spec.dim; ++d) {
                rec.values[d] = centers[i][d] + off[d] +
                                rng.gaussian(0.0, spec.intra_class_stddev);
            }
            data.records.push_back(std::move(rec));
        }
    }
    return data;
}

SplitResult split_train_query_gallery(const FeatureDataset& data,
                                      const SplitSpec& spec, uint64_t seed) {
    spec.validate();
    data.validate();
    std::vector<int64_t> ids = data.identity_list();
    if (ids.size() < 2) {
        throw SplitError("split requires at least 2 identities, got " +
                         std::to_string(ids.size()));
    }

    Rng rng(seed);
    rng.shuffle(ids);
    size_t num_train = static_cast<size_t>(
        std::llround(spec.train_fraction * static_cast<double>(ids.size())));
    num_train = std::clamp<size_t>(num_train, 1, ids.size() - 1);

    std::set<int64_t> train_ids(ids.begin(), ids.begin() + num_train);

    std::map<int64_t, std::vector<size_t>> by_id;
    for (size_t i = 0; i < data.records.size(); ++i) {
        by_id[data.records[i].id].push_back(i);
    }

    std::vector<int64_t> deficient;
    for (const auto& [id, indices] : by_id) {
        if (train_ids.count(id)) continue;
        if (indices.size() < spec.queries_per_test_identity + 1) deficient.push_back(id);
    }
    if (!deficient.empty()) {
        std::ostringstream msg;
        msg << "test identities with fewer than "
            << (spec.queries_per_test_identity + 1) << " records:";
        for (int64_t id : deficient) msg << ' ' << id;
        throw SplitError(msg.str());
    }

    SplitResult out;
    out.train.dim = out.query.dim = out.gallery.dim = data.dim;
    for (auto& [id, indices] : by_id) {
        if (train_ids.count(id)) {
            for (size_t i : indices) out.train.records.push_back(data.records[i]);
            continue;
        }
        std::vector<size_t> order = indices;
        rng.shuffle(order);
        for (size_t k = 0; k < order.size(); ++k) {
            auto& dst = (k < spec.queries_per_test_identity) ? out.query : out.gallery;
            dst.records.push_back(data.records[order[k]]);
        }
    }
    return out;
}

void save_csv(const FeatureDataset& data, const std::filesystem::path& path) {
    data.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "id,camera";
    for (size_t d = 0; d < data.dim; ++d) out << ",f" << d;
    out << '\n';
    for (const auto& r : data.records) {
        out << r.id << ',' << r.camera;
        for (double v : r.values) out << ',' << format_double(v);
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

Matrix feature_matrix(const FeatureDataset& data) {
    data.validate();
    Matrix m(data.records.size(), data.dim);
    for (size_t i = 0; i < data.records.size(); ++i) {
        m.set_row(i, data.records[i].values);
    }
    return m;
}

std::vector<size_t> dense_labels(const std::vector<int64_t>& ids) {
    std::set<int64_t> distinct(ids.begin(), ids.end());
    std::map<int64_t, size_t> index;
    size_t next = 0;
    for (int64_t id : distinct) index[id] = next++;
    std::vector<size_t> labels;
    labels.reserve(ids.size());
    for (int64_t id : ids) labels.push_back(index[id]);
    return labels;
}

FeatureDataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty file: " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<std::string> header = split_string(line, ',');
    if (header.size() < 3 || header[0] != "id" || header[1] != "camera") {
        throw ParseError("bad header in " + path.string() +
                         ": expected id,camera,f0,...");
    }
    size_t dim = header.size() - 2;
    for (size_t d = 0; d < dim; ++d) {
        if (header[d + 2] != "f" + std::to_string(d)) {
            throw ParseError("bad header column '" + header[d + 2] + "' in " +
                             path.string());
        }
    }

    FeatureDataset data;
    data.dim = dim;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::string where = path.string() + ":" + std::to_string(line_no);
        std::vector<std::string> cells = split_string(line, ',');
        if (cells.size() != dim + 2) {
            throw ParseError(where + ": expected " + std::to_string(dim + 2) +
                             " columns, got " + std::to_string(cells.size()));
        }
        LabeledFeature rec;
        rec.id = parse_int_strict(cells[0], where);
        rec.camera = parse_int_strict(cells[1], where);
        if (rec.id < 0) throw ParseError(where + ": negative id");
        if (rec.camera < 0) throw ParseError(where + ": negative camera");
        rec.values.resize(dim);
        for (size_t d = 0; d < dim; ++d) {
            rec.values[d] = parse_double_strict(cells[d + 2], where);
        }
        data.records.push_back(std::move(rec));
    }
    if (data.records.empty()) {
        throw ParseError("no records in " + path.string());
    }
    return data;
}

}  // namespace reid
