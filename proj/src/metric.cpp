#include "reid/metric.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>

#include <Eigen/Dense>

#include "reid/common.hpp"
#include "reid/serial.hpp"

namespace reid {

namespace {

using EMatrix = Eigen::MatrixXd;
using EVector = Eigen::VectorXd;

EMatrix to_eigen(const Matrix& m) {
    EMatrix out(m.rows(), m.cols());
    for (size_t r = 0; r < m.rows(); ++r) {
        for (size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, c);
    }
    return out;
}

Matrix from_eigen(const EMatrix& m) {
    Matrix out(static_cast<size_t>(m.rows()), static_cast<size_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            out(static_cast<size_t>(r), static_cast<size_t>(c)) = m(r, c);
        }
    }
    return out;
}

void fix_column_sign(EMatrix& m, Eigen::Index col) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        double v = m(r, col);
        if (std::abs(v) > 1e-12) {
            if (v < 0.0) m.col(col) = -m.col(col);
            return;
        }
    }
}

double effective_ridge(const EMatrix& m, double ridge_scale) {
    if (ridge_scale < 0.0) throw ConfigError("ridge must be >= 0");
    double tr = m.trace();
    if (tr > 0.0) return ridge_scale * tr / static_cast<double>(m.rows());
    return ridge_scale;
}

EMatrix invert_spd(const EMatrix& m, double ridge, const char* what) {
    EMatrix a = m + ridge * EMatrix::Identity(m.rows(), m.cols());
    Eigen::SelfAdjointEigenSolver<EMatrix> es(a);
    if (es.info() != Eigen::Success) {
        throw NumericalError(std::string(what) + ": eigendecomposition failed");
    }
    double lam_max = es.eigenvalues().maxCoeff();
    double lam_min = es.eigenvalues().minCoeff();
    if (lam_min <= 0.0 || lam_min < 1e-14 * std::max(lam_max, 1e-300)) {
        throw NumericalError(std::string(what) +
                             ": matrix is singular or near-singular; increase the ridge");
    }
    return es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
           es.eigenvectors().transpose();
}

void check_square_symmetric(const Matrix& m, const char* name) {
    if (m.rows() == 0 || m.rows() != m.cols()) {
        throw ShapeError(std::string(name) + " must be square and non-empty");
    }
    for (size_t r = 0; r < m.rows(); ++r) {
        for (size_t c = r + 1; c < m.cols(); ++c) {
            double scale = std::max({std::abs(m(r, c)), std::abs(m(c, r)), 1.0});
            if (std::abs(m(r, c) - m(c, r)) > 1e-8 * scale) {
                throw ShapeError(std::string(name) + " is not symmetric");
            }
        }
    }
}

struct PairSets {
    std::vector<std::pair<uint32_t, uint32_t>> similar;
    std::vector<std::pair<uint32_t, uint32_t>> dissimilar_pool;
};

EMatrix covariance_of_differences(
    const std::vector<std::vector<double>>& features,
    const std::vector<std::pair<uint32_t, uint32_t>>& pairs, size_t dim) {
    EMatrix acc = EMatrix::Zero(static_cast<Eigen::Index>(dim),
                                static_cast<Eigen::Index>(dim));
    EVector d(static_cast<Eigen::Index>(dim));
    for (const auto& [a, b] : pairs) {
        const auto& xa = features[a];
        const auto& xb = features[b];
        for (size_t k = 0; k < dim; ++k) {
            d(static_cast<Eigen::Index>(k)) = xa[k] - xb[k];
        }
        acc.selfadjointView<Eigen::Lower>().rankUpdate(d, 1.0);
    }
    acc = acc.selfadjointView<Eigen::Lower>();
    acc /= static_cast<double>(pairs.size());
    return acc;
}

void validate_feature_table(const std::vector<std::vector<double>>& features,
                            const std::vector<int64_t>& ids) {
    if (features.empty()) throw FittingError("no feature records");
    if (features.size() != ids.size()) {
        throw ShapeError("features and ids differ in length");
    }
    size_t dim = features[0].size();
    if (dim == 0) throw ShapeError("zero-dimensional features");
    for (const auto& f : features) {
        if (f.size() != dim) throw ShapeError("inconsistent feature dimensions");
    }
}

}  // namespace

PcaModel fit_pca(const std::vector<std::vector<double>>& rows, size_t out_dim) {
    if (rows.size() < 2) throw FittingError("PCA requires at least 2 rows");
    size_t n = rows.size();
    size_t dim = rows[0].size();
    for (const auto& r : rows) {
        if (r.size() != dim) throw ShapeError("inconsistent feature dimensions");
    }
    if (out_dim < 1 || out_dim > std::min(dim, n - 1)) {
        throw ConfigError("PCA out_dim must lie in [1, min(dim, N-1)], got " +
                          std::to_string(out_dim));
    }

    EVector mean = EVector::Zero(static_cast<Eigen::Index>(dim));
    for (const auto& r : rows) {
        for (size_t k = 0; k < dim; ++k) mean(static_cast<Eigen::Index>(k)) += r[k];
    }
    mean /= static_cast<double>(n);

    EMatrix cov = EMatrix::Zero(static_cast<Eigen::Index>(dim),
                                static_cast<Eigen::Index>(dim));
    EVector d(static_cast<Eigen::Index>(dim));
    for (const auto& r : rows) {
        for (size_t k = 0; k < dim; ++k) {
            d(static_cast<Eigen::Index>(k)) = r[k] - mean(static_cast<Eigen::Index>(k));
        }
        cov.selfadjointView<Eigen::Lower>().rankUpdate(d, 1.0);
    }
    cov = cov.selfadjointView<Eigen::Lower>();
    cov /= static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<EMatrix> es(cov);
    if (es.info() != Eigen::Success) {
        throw NumericalError("PCA eigendecomposition failed");
    }

    double total = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        total += std::max(es.eigenvalues()(i), 0.0);
    }

    PcaModel model;
    model.mean.assign(mean.data(), mean.data() + dim);
    model.components = Matrix(out_dim, dim);
    EMatrix vectors = es.eigenvectors();
    for (size_t k = 0; k < out_dim; ++k) {
        Eigen::Index src = static_cast<Eigen::Index>(dim - 1 - k);  // descending
        fix_column_sign(vectors, src);
        for (size_t c = 0; c < dim; ++c) {
            model.components(k, c) = vectors(static_cast<Eigen::Index>(c), src);
        }
        double lam = std::max(es.eigenvalues()(src), 0.0);
        model.eigenvalues.push_back(lam);
        model.explained_variance_ratio.push_back(total > 0.0 ? lam / total : 0.0);
    }
    return model;
}

std::vector<double> apply_pca(const PcaModel& model, std::span<const double> x) {
    size_t dim = model.mean.size();
    if (x.size() != dim) {
        throw ShapeError("apply_pca: input dim " + std::to_string(x.size()) +
                         ", model dim " + std::to_string(dim));
    }
    std::vector<double> out(model.components.rows(), 0.0);
    for (size_t r = 0; r < model.components.rows(); ++r) {
        double acc = 0.0;
        const double* row = model.components.row(r);
        for (size_t c = 0; c < dim; ++c) acc += row[c] * (x[c] - model.mean[c]);
        out[r] = acc;
    }
    return out;
}

PairCovariances pair_covariances(const std::vector<std::vector<double>>& features,
                                 const std::vector<int64_t>& ids, uint64_t seed) {
    validate_feature_table(features, ids);
    size_t n = features.size();
    size_t dim = features[0].size();

    std::vector<std::pair<uint32_t, uint32_t>> similar;
    std::vector<std::pair<uint32_t, uint32_t>> pool;
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            auto p = std::make_pair(static_cast<uint32_t>(i), static_cast<uint32_t>(j));
            if (ids[i] == ids[j]) {
                similar.push_back(p);
            } else {
                pool.push_back(p);
            }
        }
    }
    if (similar.empty()) {
        throw FittingError("no similar pairs: every identity has a single record");
    }
    if (pool.size() < similar.size()) {
        throw FittingError("insufficient dissimilar pairs: need " +
                           std::to_string(similar.size()) + ", have " +
                           std::to_string(pool.size()));
    }

    Rng rng(seed);
    std::vector<size_t> chosen = rng.sample_indices(pool.size(), similar.size());
    std::vector<std::pair<uint32_t, uint32_t>> dissimilar;
    dissimilar.reserve(chosen.size());
    for (size_t idx : chosen) dissimilar.push_back(pool[idx]);

    PairCovariances out;
    out.similar = from_eigen(covariance_of_differences(features, similar, dim));
    out.dissimilar = from_eigen(covariance_of_differences(features, dissimilar, dim));
    out.num_pairs = similar.size();
    return out;
}

MahalanobisModel fit_kissme(const Matrix& similar, const Matrix& dissimilar,
                            double ridge_scale) {
    check_square_symmetric(similar, "similar covariance");
    check_square_symmetric(dissimilar, "dissimilar covariance");
    if (similar.rows() != dissimilar.rows()) {
        throw ShapeError("covariance dimensions differ");
    }

    EMatrix sim = to_eigen(similar);
    EMatrix dis = to_eigen(dissimilar);
    double ridge_sim = effective_ridge(sim, ridge_scale);
    double ridge_dis = effective_ridge(dis, ridge_scale);

    EMatrix m0 = invert_spd(sim, ridge_sim, "KISSME similar covariance") -
                 invert_spd(dis, ridge_dis, "KISSME dissimilar covariance");
    m0 = ((m0 + m0.transpose()) / 2.0).eval();

    Eigen::SelfAdjointEigenSolver<EMatrix> es(m0);
    if (es.info() != Eigen::Success) {
        throw NumericalError("KISSME PSD projection failed");
    }
    EVector clamped = es.eigenvalues().cwiseMax(0.0);
    EMatrix m = es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose();
    m = ((m + m.transpose()) / 2.0).eval();

    MahalanobisModel model;
    model.m = from_eigen(m);
    model.eigenvalues.assign(clamped.data(), clamped.data() + clamped.size());
    std::reverse(model.eigenvalues.begin(), model.eigenvalues.end());
    model.ridge_similar = ridge_sim;
    model.ridge_dissimilar = ridge_dis;
    return model;
}

MahalanobisModel fit_kissme_from_records(
    const std::vector<std::vector<double>>& features,
    const std::vector<int64_t>& ids, double ridge_scale, uint64_t seed) {
    PairCovariances cov = pair_covariances(features, ids, seed);
    MahalanobisModel model = fit_kissme(cov.similar, cov.dissimilar, ridge_scale);
    model.seed = seed;
    return model;
}

XqdaModel fit_xqda(const std::vector<std::vector<double>>& features,
                   const std::vector<int64_t>& ids,
                   const std::vector<int64_t>& cameras, size_t max_dim,
                   double ridge_scale, uint64_t seed) {
    validate_feature_table(features, ids);
    if (cameras.size() != features.size()) {
        throw ShapeError("features and cameras differ in length");
    }
    if (max_dim < 1) throw ConfigError("max_dim must be >= 1");
    size_t n = features.size();
    size_t dim = features[0].size();

    {
        std::map<int64_t, size_t> camera_counts;
        for (int64_t c : cameras) ++camera_counts[c];
        if (camera_counts.size() < 2) {
            throw ProtocolError("XQDA requires records from at least 2 cameras");
        }
    }

    std::vector<std::pair<uint32_t, uint32_t>> intra;
    std::vector<std::pair<uint32_t, uint32_t>> pool;
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            if (cameras[i] == cameras[j]) continue;
            auto p = std::make_pair(static_cast<uint32_t>(i), static_cast<uint32_t>(j));
            if (ids[i] == ids[j]) {
                intra.push_back(p);
            } else {
                pool.push_back(p);
            }
        }
    }
    if (intra.empty()) {
        throw FittingError("no cross-camera pairs share an identity");
    }
    if (pool.size() < intra.size()) {
        throw FittingError("insufficient cross-camera dissimilar pairs: need " +
                           std::to_string(intra.size()) + ", have " +
                           std::to_string(pool.size()));
    }

    Rng rng(seed);
    std::vector<size_t> chosen = rng.sample_indices(pool.size(), intra.size());
    std::vector<std::pair<uint32_t, uint32_t>> extra;
    extra.reserve(chosen.size());
    for (size_t idx : chosen) extra.push_back(pool[idx]);

    EMatrix sigma_i = covariance_of_differences(features, intra, dim);
    EMatrix sigma_e = covariance_of_differences(features, extra, dim);

    double ridge = effective_ridge(sigma_i, ridge_scale);
    EMatrix b = sigma_i + ridge * EMatrix::Identity(sigma_i.rows(), sigma_i.cols());
    {
        Eigen::SelfAdjointEigenSolver<EMatrix> check(b);
        if (check.info() != Eigen::Success || check.eigenvalues().minCoeff() <= 0.0) {
            throw NumericalError(
                "XQDA intra-class covariance is not positive definite; increase the ridge");
        }
    }

    Eigen::GeneralizedSelfAdjointEigenSolver<EMatrix> ges(sigma_e, b);
    if (ges.info() != Eigen::Success) {
        throw NumericalError("XQDA generalized eigendecomposition failed");
    }

    // Eigenvalues come back ascending; walk from the top.
    size_t admissible = 0;
    for (Eigen::Index i = ges.eigenvalues().size() - 1; i >= 0; --i) {
        if (ges.eigenvalues()(i) > 1.0) ++admissible;
        else break;
    }
    size_t out_dim = std::min({std::max<size_t>(admissible, 1), max_dim, dim});

    EMatrix vectors = ges.eigenvectors();
    XqdaModel model;
    model.w = Matrix(dim, out_dim);
    for (size_t k = 0; k < out_dim; ++k) {
        Eigen::Index src = static_cast<Eigen::Index>(dim - 1 - k);
        fix_column_sign(vectors, src);
        for (size_t r = 0; r < dim; ++r) {
            model.w(r, k) = vectors(static_cast<Eigen::Index>(r), src);
        }
        model.eigenvalues.push_back(ges.eigenvalues()(src));
    }
    model.ridge = ridge;
    model.seed = seed;

    EMatrix w = to_eigen(model.w);
    // W'SW is symmetric in exact arithmetic; fold out the floating-point skew
    // so the kernel fit's symmetry validation only rejects genuinely bad input.
    EMatrix sim_proj = w.transpose() * sigma_i * w;
    EMatrix dis_proj = w.transpose() * sigma_e * w;
    sim_proj = (0.5 * (sim_proj + sim_proj.transpose())).eval();
    dis_proj = (0.5 * (dis_proj + dis_proj.transpose())).eval();
    MahalanobisModel kernel = fit_kissme(from_eigen(sim_proj), from_eigen(dis_proj),
                                         ridge_scale);
    model.kernel = kernel.m;
    return model;
}

double squared_euclidean(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ShapeError("distance between different dimensions");
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        double d = x[i] - y[i];
        acc += d * d;
    }
    return acc;
}

double euclidean_distance(std::span<const double> x, std::span<const double> y) {
    return std::sqrt(squared_euclidean(x, y));
}

double mahalanobis_distance(const Matrix& m, std::span<const double> x,
                            std::span<const double> y) {
    if (m.rows() != m.cols()) throw ShapeError("metric matrix must be square");
    if (x.size() != y.size() || x.size() != m.rows()) {
        throw ShapeError("mahalanobis_distance dimension mismatch");
    }
    size_t dim = x.size();
    std::vector<double> d(dim);
    for (size_t i = 0; i < dim; ++i) d[i] = x[i] - y[i];
    double acc = 0.0;
    for (size_t r = 0; r < dim; ++r) {
        const double* row = m.row(r);
        double partial = 0.0;
        for (size_t c = 0; c < dim; ++c) partial += row[c] * d[c];
        acc += d[r] * partial;
    }
    return acc;
}

double mahalanobis_distance(const MahalanobisModel& model, std::span<const double> x,
                            std::span<const double> y) {
    return mahalanobis_distance(model.m, x, y);
}

std::vector<double> xqda_project(const XqdaModel& model, std::span<const double> x) {
    if (x.size() != model.w.rows()) {
        throw ShapeError("xqda_project: input dim " + std::to_string(x.size()) +
                         ", model dim " + std::to_string(model.w.rows()));
    }
    std::vector<double> out(model.w.cols(), 0.0);
    for (size_t r = 0; r < model.w.rows(); ++r) {
        double xv = x[r];
        const double* row = model.w.row(r);
        for (size_t c = 0; c < model.w.cols(); ++c) out[c] += row[c] * xv;
    }
    return out;
}

double xqda_distance(const XqdaModel& model, std::span<const double> x,
                     std::span<const double> y) {
    std::vector<double> px = xqda_project(model, x);
    std::vector<double> py = xqda_project(model, y);
    return mahalanobis_distance(model.kernel, px, py);
}

void save_pca(const PcaModel& model, const std::filesystem::path& path) {
    Json j{{"kind", "pca"},
           {"mean", model.mean},
           {"components", matrix_to_json(model.components)},
           {"eigenvalues", model.eigenvalues},
           {"explained_variance_ratio", model.explained_variance_ratio}};
    save_json(j, path);
}

PcaModel load_pca(const std::filesystem::path& path) {
    Json j = load_json(path);
    expect_kind(j, "pca", path);
    PcaModel model = parse_guard(path, [&] {
        PcaModel m;
        m.mean = j.at("mean").get<std::vector<double>>();
        m.components = matrix_from_json(j.at("components"), path.string());
        m.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
        m.explained_variance_ratio =
            j.at("explained_variance_ratio").get<std::vector<double>>();
        return m;
    });
    if (model.components.cols() != model.mean.size()) {
        throw ParseError(path.string() + ": component/mean dimension mismatch");
    }
    return model;
}

void save_kissme(const MahalanobisModel& model, const std::filesystem::path& path) {
    Json j{{"kind", "kissme"},
           {"m", matrix_to_json(model.m)},
           {"eigenvalues", model.eigenvalues},
           {"ridge_similar", model.ridge_similar},
           {"ridge_dissimilar", model.ridge_dissimilar},
           {"seed", model.seed}};
    save_json(j, path);
}

MahalanobisModel load_kissme(const std::filesystem::path& path) {
    Json j = load_json(path);
    expect_kind(j, "kissme", path);
    return parse_guard(path, [&] {
        MahalanobisModel model;
        model.m = matrix_from_json(j.at("m"), path.string());
        model.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
        model.ridge_similar = j.at("ridge_similar").get<double>();
        model.ridge_dissimilar = j.at("ridge_dissimilar").get<double>();
        model.seed = j.at("seed").get<uint64_t>();
        return model;
    });
}

void save_xqda(const XqdaModel& model, const std::filesystem::path& path) {
    Json j{{"kind", "xqda"},
           {"w", matrix_to_json(model.w)},
           {"kernel", matrix_to_json(model.kernel)},
           {"eigenvalues", model.eigenvalues},
           {"ridge", model.ridge},
           {"seed", model.seed}};
    save_json(j, path);
}

XqdaModel load_xqda(const std::filesystem::path& path) {
    Json j = load_json(path);
    expect_kind(j, "xqda", path);
    XqdaModel model = parse_guard(path, [&] {
        XqdaModel m;
        m.w = matrix_from_json(j.at("w"), path.string());
        m.kernel = matrix_from_json(j.at("kernel"), path.string());
        m.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
        m.ridge = j.at("ridge").get<double>();
        m.seed = j.at("seed").get<uint64_t>();
        return m;
    });
    if (model.kernel.rows() != model.w.cols()) {
        throw ParseError(path.string() + ": kernel/projection dimension mismatch");
    }
    return model;
}

}  // namespace reid
