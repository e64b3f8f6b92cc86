#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "reid/dataset.hpp"
#include "reid/neural.hpp"

namespace reid {

struct DistillConfig {
    double temperature = 3.0;  // >= 1
    double lambda = 1e-4;      // weight of the hard-target term
    bool t_squared_rescale = false;
    TrainConfig train;

    void validate() const;
};

// Softmax over logits/T with max subtraction; T = 1 reproduces the plain
// softmax bit for bit aside from rounding.
std::vector<double> tempered_softmax(std::span<const double> logits, double temperature);

// Shannon entropy in nats; entries must be non-negative.
double entropy(std::span<const double> p);

struct DistillLossGrad {
    double loss = 0.0;
    double distill_term = 0.0;        // cross-entropy against tempered teacher
    double weighted_hard_term = 0.0;  // lambda * cross-entropy against the label
    std::vector<double> grad;         // d loss / d student logits
};

// loss = H(teacher_softmax(T), student_softmax(T))
//      + lambda * H(onehot(label), student_softmax(1)).
// The tempered term is left unscaled unless t_squared_rescale is set, in
// which case it (and its gradient) are multiplied by T^2.
DistillLossGrad distillation_loss(std::span<const double> teacher_logits,
                                  std::span<const double> student_logits,
                                  size_t label, const DistillConfig& cfg);

// Raw teacher logits for every record, computed once; tempering happens at
// loss evaluation time so one cache serves every temperature.
Matrix cache_teacher_outputs(const MlpNetwork& teacher, const Matrix& inputs);

// Same loop as train_classifier but against the distillation objective. The
// teacher output rows follow the original record order and are looked up
// through the shuffled index, so shuffling never misaligns them.
std::pair<MlpNetwork, TrainLog> train_student_with_distillation(
    const Matrix& teacher_outputs, const MlpSpec& student_spec, const Matrix& inputs,
    const std::vector<size_t>& labels, const DistillConfig& cfg);

struct SweepSpec {
    std::vector<double> temperatures = {1, 2, 3, 4, 5, 10, 15, 20, 25, 30};
    std::vector<double> lambdas = {1e-4, 1e-3, 1e-2};
    std::vector<uint64_t> seeds = {1};

    void validate() const;
};

struct SweepRow {
    double temperature = 0.0;  // 0 for baseline arms
    double lambda = 0.0;
    uint64_t seed = 0;
    double rank1 = 0.0;
    double rank5 = 0.0;
    double map = 0.0;
    std::string arm;  // distilled | student_independent | teacher
};

struct SweepReport {
    std::vector<SweepRow> rows;
};

// For every seed: a teacher baseline row, an independently trained student
// row, and one distilled row per (T, lambda) cell. Students share their init
// across cells of the same seed, so arms are paired comparisons.
SweepReport run_sweep(const MlpNetwork& teacher, const MlpSpec& student_spec,
                      const Matrix& train_inputs, const std::vector<size_t>& train_labels,
                      const FeatureDataset& query, const FeatureDataset& gallery,
                      const SweepSpec& sweep, const TrainConfig& base_train,
                      bool t_squared_rescale = false);

void save_sweep_csv(const SweepReport& report, const std::filesystem::path& path);
SweepReport load_sweep_csv(const std::filesystem::path& path);
void save_sweep_summary(const SweepReport& report, const std::filesystem::path& path);

// Deep features of a labeled dataset, labels carried over.
FeatureDataset deep_feature_dataset(const MlpNetwork& net, const FeatureDataset& data);

}  // namespace reid
