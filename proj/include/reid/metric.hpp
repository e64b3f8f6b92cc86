#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "reid/matrix.hpp"

namespace reid {

struct PcaModel {
    std::vector<double> mean;
    Matrix components;  // out_dim x input_dim, rows are principal directions
    std::vector<double> eigenvalues;
    std::vector<double> explained_variance_ratio;
};

struct MahalanobisModel {
    Matrix m;  // symmetric PSD
    std::vector<double> eigenvalues;  // spectrum after the PSD projection
    double ridge_similar = 0.0;
    double ridge_dissimilar = 0.0;
    uint64_t seed = 0;
};

struct XqdaModel {
    Matrix w;       // input_dim x out_dim, columns are projection directions
    Matrix kernel;  // out_dim x out_dim, symmetric PSD
    std::vector<double> eigenvalues;  // generalized eigenvalues, descending
    double ridge = 0.0;               // value added to the intra covariance
    uint64_t seed = 0;
};

struct PairCovariances {
    Matrix similar;
    Matrix dissimilar;
    size_t num_pairs = 0;  // pairs per side
};

// Principal components of the sample covariance (N-1 normalization).
// Eigenvector signs are fixed so each component's first nonzero coordinate is
// positive. Requires 1 <= out_dim <= min(dim, N-1).
PcaModel fit_pca(const std::vector<std::vector<double>>& rows, size_t out_dim);
std::vector<double> apply_pca(const PcaModel& model, std::span<const double> x);

// Difference covariances over similar pairs (same id, all camera combinations)
// and over an equally sized seeded sample of dissimilar pairs.
PairCovariances pair_covariances(const std::vector<std::vector<double>>& features,
                                 const std::vector<int64_t>& ids, uint64_t seed);

// M = inv(sim + ridge*I) - inv(dis + ridge*I), projected onto the PSD cone by
// clamping negative eigenvalues. ridge_scale is relative: the value added is
// ridge_scale * trace / dim per matrix.
MahalanobisModel fit_kissme(const Matrix& similar, const Matrix& dissimilar,
                            double ridge_scale = 1e-6);
MahalanobisModel fit_kissme_from_records(
    const std::vector<std::vector<double>>& features,
    const std::vector<int64_t>& ids, double ridge_scale, uint64_t seed);

// Cross-view discriminant subspace: generalized eigenproblem between the
// extra-class and intra-class difference covariances of cross-camera pairs.
// Keeps eigenvectors with eigenvalue > 1 (capped at max_dim, at least one),
// then fits a KISSME kernel inside the subspace.
XqdaModel fit_xqda(const std::vector<std::vector<double>>& features,
                   const std::vector<int64_t>& ids,
                   const std::vector<int64_t>& cameras, size_t max_dim,
                   double ridge_scale = 1e-6, uint64_t seed = 0);

double euclidean_distance(std::span<const double> x, std::span<const double> y);
double squared_euclidean(std::span<const double> x, std::span<const double> y);
double mahalanobis_distance(const Matrix& m, std::span<const double> x,
                            std::span<const double> y);
double mahalanobis_distance(const MahalanobisModel& model, std::span<const double> x,
                            std::span<const double> y);
std::vector<double> xqda_project(const XqdaModel& model, std::span<const double> x);
double xqda_distance(const XqdaModel& model, std::span<const double> x,
                     std::span<const double> y);

void save_pca(const PcaModel& model, const std::filesystem::path& path);
PcaModel load_pca(const std::filesystem::path& path);
void save_kissme(const MahalanobisModel& model, const std::filesystem::path& path);
MahalanobisModel load_kissme(const std::filesystem::path& path);
void save_xqda(const XqdaModel& model, const std::filesystem::path& path);
XqdaModel load_xqda(const std::filesystem::path& path);

}  // namespace reid
