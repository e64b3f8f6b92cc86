#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "reid/matrix.hpp"

namespace reid {

// Feedforward classifier blueprint. alpha scales every hidden width (rounded
// up, floor of 1), mirroring width-multiplier families of compact networks.
struct MlpSpec {
    size_t input_dim = 0;
    std::vector<size_t> hidden_widths;
    size_t num_classes = 0;
    double alpha = 1.0;

    void validate() const;
    std::vector<size_t> effective_widths() const;
    size_t feature_dim() const;  // last effective hidden width
    size_t parameter_count() const;
};

struct MlpNetwork {
    MlpSpec spec;
    std::vector<Matrix> weights;              // layer l: out x in
    std::vector<std::vector<double>> biases;  // layer l: out
    uint64_t init_seed = 0;
    size_t trained_steps = 0;

    size_t num_layers() const { return weights.size(); }
};

struct ForwardCache {
    Matrix input;
    std::vector<Matrix> preactivations;  // per layer, batch x out
    std::vector<Matrix> activations;     // per hidden layer, batch x out
};

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
};

struct LossGrad {
    double loss = 0.0;
    std::vector<double> probabilities;
    std::vector<double> grad;  // d loss / d logits
};

struct TrainConfig {
    double learning_rate = 0.01;
    double decay_factor = 0.1;
    size_t decay_every_steps = 20000;
    double momentum = 0.9;
    size_t batch_size = 16;
    size_t epochs = 1;
    bool shuffle = true;
    uint64_t seed = 0;

    void validate() const;
};

struct TrainLog {
    std::vector<double> epoch_loss;
    std::vector<double> epoch_accuracy;
    std::vector<double> lr_trace;             // learning rate used at each step
    std::vector<double> epoch_distill_term;   // distillation runs only
    std::vector<double> epoch_weighted_hard_term;
    size_t steps = 0;
};

// He-initialized weights, zero biases, deterministic in the seed.
MlpNetwork init_network(const MlpSpec& spec, uint64_t seed);

// Affine + ReLU chain; the final layer stays linear and its outputs are the
// logits. Pass a cache to retain what backward needs.
Matrix forward(const MlpNetwork& net, const Matrix& inputs,
               ForwardCache* cache = nullptr);

// Mean cross-entropy after a max-subtracted softmax; grad is p - onehot.
LossGrad softmax_cross_entropy(std::span<const double> logits, size_t label);

// Exact gradients for dLogits already scaled by the caller (chain rule only).
Gradients backward(const MlpNetwork& net, const ForwardCache& cache,
                   const Matrix& dlogits);

double learning_rate_at(const TrainConfig& cfg, size_t step);

struct Velocity {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
};

Velocity make_velocity(const MlpNetwork& net);
void sgd_momentum_step(MlpNetwork& net, const Gradients& grads, Velocity& velocity,
                       const TrainConfig& cfg, size_t step);

// Mini-batch SGD over dense labels in [0, num_classes). The last incomplete
// batch is kept. Batch gradients are means over the batch.
std::pair<MlpNetwork, TrainLog> train_classifier(const MlpSpec& spec,
                                                 const Matrix& inputs,
                                                 const std::vector<size_t>& labels,
                                                 const TrainConfig& cfg);

// Post-activation output of the last hidden layer.
Matrix extract_deep_features(const MlpNetwork& net, const Matrix& inputs);

void save_network(const MlpNetwork& net, const std::filesystem::path& path);
MlpNetwork load_network(const std::filesystem::path& path);
void save_train_log(const TrainLog& log, const std::filesystem::path& path);
TrainLog load_train_log(const std::filesystem::path& path);

}  // namespace reid
