#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "reid/common.hpp"
#include "reid/matrix.hpp"

namespace reid {

struct LabeledFeature {
    int64_t id = 0;
    int64_t camera = 0;
    std::vector<double> values;
};

// A labeled feature collection. Identity multiplicity constraints (at least
// two records per identity) are preconditions of the fitting and splitting
// operations, not of the container itself: query splits legitimately hold a
// single record per identity.
struct FeatureDataset {
    std::vector<LabeledFeature> records;
    size_t dim = 0;

    size_t num_identities() const;
    std::vector<int64_t> identity_list() const;  // sorted distinct ids
    void validate() const;
};

struct SyntheticSpec {
    size_t num_identities = 20;
    size_t records_per_identity = 10;
    size_t num_cameras = 2;
    size_t dim = 16;
    double intra_class_stddev = 1.0;
    double camera_shift_stddev = 1.0;
    double class_center_stddev = 3.0;

    void validate() const;
};

struct SplitSpec {
    double train_fraction = 0.5;
    size_t queries_per_test_identity = 1;

    void validate() const;
};

struct SplitResult {
    FeatureDataset train;
    FeatureDataset query;
    FeatureDataset gallery;
};

// Gaussian identity centers, additive per-camera offsets, per-record noise.
// Cameras are assigned round-robin over each identity's records, so every
// identity appears in min(records_per_identity, num_cameras) cameras.
FeatureDataset generate_synthetic(const SyntheticSpec& spec, uint64_t seed);

// Identity-disjoint train/test split; per test identity a fixed number of
// query records, remaining records to the gallery.
SplitResult split_train_query_gallery(const FeatureDataset& data,
                                      const SplitSpec& spec, uint64_t seed);

void save_csv(const FeatureDataset& data, const std::filesystem::path& path);
FeatureDataset load_csv(const std::filesystem::path& path);

// Record features stacked as rows.
Matrix feature_matrix(const FeatureDataset& data);

// Maps ids onto dense class indices 0..C-1 following sorted id order.
std::vector<size_t> dense_labels(const std::vector<int64_t>& ids);

}  // namespace reid
