#include "reid/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "reid/common.hpp"
#include "reid/serial.hpp"

namespace reid {

void MlpSpec::validate() const {
    if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
    if (!(alpha > 0.0) || alpha > 1.0) {
        throw ConfigError("alpha must lie in (0, 1]");
    }
    for (size_t w : hidden_widths) {
        if (w < 1) throw ConfigError("hidden widths must be >= 1");
    }
}

std::vector<size_t> MlpSpec::effective_widths() const {
    std::vector<size_t> widths;
    widths.reserve(hidden_widths.size());
    for (size_t w : hidden_widths) {
        double scaled = std::ceil(alpha * static_cast<double>(w));
        widths.push_back(std::max<size_t>(static_cast<size_t>(scaled), 1));
    }
    return widths;
}

size_t MlpSpec::feature_dim() const {
    std::vector<size_t> widths = effective_widths();
    if (widths.empty()) {
        throw ShapeError("network has no hidden layer to take features from");
    }
    return widths.back();
}

size_t MlpSpec::parameter_count() const {
    validate();
    size_t count = 0;
    size_t in = input_dim;
    for (size_t w : effective_widths()) {
        count += in * w + w;
        in = w;
    }
    count += in * num_classes + num_classes;
    return count;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (!(decay_factor > 0.0) || decay_factor > 1.0) {
        throw ConfigError("decay_factor must lie in (0, 1]");
    }
    if (decay_every_steps < 1) throw ConfigError("decay_every_steps must be >= 1");
    if (momentum < 0.0 || momentum >= 1.0) {
        throw ConfigError("momentum must lie in [0, 1)");
    }
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

MlpNetwork init_network(const MlpSpec& spec, uint64_t seed) {
    spec.validate();
    MlpNetwork net;
    net.spec = spec;
    net.init_seed = seed;

    std::vector<size_t> dims;
    dims.push_back(spec.input_dim);
    for (size_t w : spec.effective_widths()) dims.push_back(w);
    dims.push_back(spec.num_classes);

    Rng rng(seed);
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        size_t in = dims[l];
        size_t out = dims[l + 1];
        Matrix w(out, in);
        double stddev = std::sqrt(2.0 / static_cast<double>(in));
        for (double& v : w.data()) v = rng.gaussian(0.0, stddev);
        net.weights.push_back(std::move(w));
        net.biases.emplace_back(out, 0.0);
    }
    return net;
}

namespace {

void check_input(const MlpNetwork& net, const Matrix& inputs) {
    if (net.weights.empty()) throw UsageError("network has no layers");
    if (inputs.cols() != net.spec.input_dim) {
        throw ShapeError("input dim " + std::to_string(inputs.cols()) +
                         ", network expects " + std::to_string(net.spec.input_dim));
    }
}

// z = a * w^T + bias (broadcast over rows)
Matrix affine(const Matrix& a, const Matrix& w, const std::vector<double>& bias) {
    Matrix z(a.rows(), w.rows());
    for (size_t b = 0; b < a.rows(); ++b) {
        const double* arow = a.row(b);
        double* zrow = z.row(b);
        for (size_t o = 0; o < w.rows(); ++o) {
            const double* wrow = w.row(o);
            double acc = bias[o];
            for (size_t i = 0; i < w.cols(); ++i) acc += arow[i] * wrow[i];
            zrow[o] = acc;
        }
    }
    return z;
}

Matrix relu(const Matrix& z) {
    Matrix a = z;
    for (double& v : a.data()) v = std::max(v, 0.0);
    return a;
}

}  // namespace

Matrix forward(const MlpNetwork& net, const Matrix& inputs, ForwardCache* cache) {
    check_input(net, inputs);
    if (cache) {
        *cache = ForwardCache{};
        cache->input = inputs;
    }
    Matrix act = inputs;
    for (size_t l = 0; l < net.weights.size(); ++l) {
        Matrix z = affine(act, net.weights[l], net.biases[l]);
        bool last = (l + 1 == net.weights.size());
        if (cache) cache->preactivations.push_back(z);
        if (last) {
            act = std::move(z);
        } else {
            act = relu(z);
            if (cache) cache->activations.push_back(act);
        }
    }
    return act;
}

LossGrad softmax_cross_entropy(std::span<const double> logits, size_t label) {
    if (logits.empty()) throw UsageError("empty logits");
    if (label >= logits.size()) {
        throw UsageError("label " + std::to_string(label) + " out of range for " +
                         std::to_string(logits.size()) + " classes");
    }
    double mx = *std::max_element(logits.begin(), logits.end());
    LossGrad out;
    out.probabilities.resize(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        double e = std::exp(logits[i] - mx);
        out.probabilities[i] = e;
        sum += e;
    }
    for (double& p : out.probabilities) p /= sum;
    out.loss = std::log(sum) - (logits[label] - mx);
    out.grad = out.probabilities;
    out.grad[label] -= 1.0;
    return out;
}

Gradients backward(const MlpNetwork& net, const ForwardCache& cache,
                   const Matrix& dlogits) {
    size_t layers = net.weights.size();
    if (cache.preactivations.size() != layers ||
        cache.activations.size() + 1 != layers ||
        cache.input.cols() != net.spec.input_dim) {
        throw UsageError("forward cache does not match this network");
    }
    size_t batch = cache.input.rows();
    if (dlogits.rows() != batch || dlogits.cols() != net.spec.num_classes) {
        throw UsageError("dlogits shape does not match the cached forward pass");
    }
    for (size_t l = 0; l < layers; ++l) {
        if (cache.preactivations[l].rows() != batch ||
            cache.preactivations[l].cols() != net.weights[l].rows()) {
            throw UsageError("forward cache does not match this network");
        }
    }

    Gradients grads;
    grads.weights.reserve(layers);
    grads.biases.reserve(layers);
    for (size_t l = 0; l < layers; ++l) {
        grads.weights.emplace_back(net.weights[l].rows(), net.weights[l].cols());
        grads.biases.emplace_back(net.biases[l].size(), 0.0);
    }

    Matrix dz = dlogits;
    for (size_t l = layers; l-- > 0;) {
        const Matrix& below =
            (l == 0) ? cache.input : cache.activations[l - 1];
        Matrix& dw = grads.weights[l];
        std::vector<double>& db = grads.biases[l];
        for (size_t b = 0; b < batch; ++b) {
            const double* dzrow = dz.row(b);
            const double* arow = below.row(b);
            for (size_t o = 0; o < dw.rows(); ++o) {
                double g = dzrow[o];
                if (g == 0.0) continue;
                double* dwrow = dw.row(o);
                for (size_t i = 0; i < dw.cols(); ++i) dwrow[i] += g * arow[i];
                db[o] += g;
            }
        }
        if (l == 0) break;
        const Matrix& w = net.weights[l];
        const Matrix& z_below = cache.preactivations[l - 1];
        Matrix da(batch, w.cols(), 0.0);
        for (size_t b = 0; b < batch; ++b) {
            const double* dzrow = dz.row(b);
            double* darow = da.row(b);
            for (size_t o = 0; o < w.rows(); ++o) {
                double g = dzrow[o];
                if (g == 0.0) continue;
                const double* wrow = w.row(o);
                for (size_t i = 0; i < w.cols(); ++i) darow[i] += g * wrow[i];
            }
            const double* zrow = z_below.row(b);
            for (size_t i = 0; i < w.cols(); ++i) {
                if (zrow[i] <= 0.0) darow[i] = 0.0;
            }
        }
        dz = std::move(da);
    }
    return grads;
}

double learning_rate_at(const TrainConfig& cfg, size_t step) {
    size_t decays = step / cfg.decay_every_steps;
    return cfg.learning_rate * std::pow(cfg.decay_factor, static_cast<double>(decays));
}

Velocity make_velocity(const MlpNetwork& net) {
    Velocity v;
    for (size_t l = 0; l < net.weights.size(); ++l) {
        v.weights.emplace_back(net.weights[l].rows(), net.weights[l].cols());
        v.biases.emplace_back(net.biases[l].size(), 0.0);
    }
    return v;
}

void sgd_momentum_step(MlpNetwork& net, const Gradients& grads, Velocity& velocity,
                       const TrainConfig& cfg, size_t step) {
    if (grads.weights.size() != net.weights.size() ||
        velocity.weights.size() != net.weights.size()) {
        throw UsageError("gradient/velocity layer count mismatch");
    }
    double lr = learning_rate_at(cfg, step);
    for (size_t l = 0; l < net.weights.size(); ++l) {
        auto& w = net.weights[l].data();
        auto& v = velocity.weights[l].data();
        const auto& g = grads.weights[l].data();
        if (w.size() != g.size()) throw UsageError("gradient shape mismatch");
        for (size_t i = 0; i < w.size(); ++i) {
            v[i] = cfg.momentum * v[i] - lr * g[i];
            w[i] += v[i];
        }
        auto& b = net.biases[l];
        auto& vb = velocity.biases[l];
        const auto& gb = grads.biases[l];
        for (size_t i = 0; i < b.size(); ++i) {
            vb[i] = cfg.momentum * vb[i] - lr * gb[i];
            b[i] += vb[i];
        }
    }
}

namespace {

Matrix gather_rows(const Matrix& inputs, const std::vector<size_t>& order,
                   size_t begin, size_t end) {
    Matrix batch(end - begin, inputs.cols());
    for (size_t k = begin; k < end; ++k) {
        const double* src = inputs.row(order[k]);
        double* dst = batch.row(k - begin);
        std::copy(src, src + inputs.cols(), dst);
    }
    return batch;
}

size_t argmax_row(const double* row, size_t n) {
    size_t best = 0;
    for (size_t i = 1; i < n; ++i) {
        if (row[i] > row[best]) best = i;
    }
    return best;
}

}  // namespace

std::pair<MlpNetwork, TrainLog> train_classifier(const MlpSpec& spec,
                                                 const Matrix& inputs,
                                                 const std::vector<size_t>& labels,
                                                 const TrainConfig& cfg) {
    spec.validate();
    cfg.validate();
    if (inputs.rows() == 0) throw TrainError("empty training set");
    if (labels.size() != inputs.rows()) {
        throw ShapeError("labels/features count mismatch");
    }
    if (inputs.cols() != spec.input_dim) {
        throw ShapeError("training features have dim " + std::to_string(inputs.cols()) +
                         ", spec expects " + std::to_string(spec.input_dim));
    }
    for (size_t y : labels) {
        if (y >= spec.num_classes) {
            throw TrainError("label " + std::to_string(y) +
                             " outside [0, " + std::to_string(spec.num_classes) + ")");
        }
    }

    MlpNetwork net = init_network(spec, cfg.seed);
    Velocity velocity = make_velocity(net);
    Rng shuffle_rng(stage_seed(cfg.seed, "shuffle"));
    TrainLog log;

    size_t n = inputs.rows();
    size_t step = 0;
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.shuffle) shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        size_t correct = 0;
        for (size_t begin = 0; begin < n; begin += cfg.batch_size) {
            size_t end = std::min(begin + cfg.batch_size, n);
            size_t bs = end - begin;
            Matrix batch = gather_rows(inputs, order, begin, end);
            ForwardCache cache;
            Matrix logits = forward(net, batch, &cache);
            Matrix dlogits(bs, spec.num_classes);
            for (size_t b = 0; b < bs; ++b) {
                size_t label = labels[order[begin + b]];
                LossGrad lg = softmax_cross_entropy(
                    std::span<const double>(logits.row(b), logits.cols()), label);
                loss_sum += lg.loss;
                if (argmax_row(logits.row(b), logits.cols()) == label) ++correct;
                for (size_t c = 0; c < spec.num_classes; ++c) {
                    dlogits(b, c) = lg.grad[c] / static_cast<double>(bs);
                }
            }
            Gradients grads = backward(net, cache, dlogits);
            log.lr_trace.push_back(learning_rate_at(cfg, step));
            sgd_momentum_step(net, grads, velocity, cfg, step);
            ++step;
        }
        log.epoch_loss.push_back(loss_sum / static_cast<double>(n));
        log.epoch_accuracy.push_back(static_cast<double>(correct) /
                                     static_cast<double>(n));
    }
    log.steps = step;
    net.trained_steps = step;
    return {std::move(net), std::move(log)};
}

Matrix extract_deep_features(const MlpNetwork& net, const Matrix& inputs) {
    check_input(net, inputs);
    if (net.weights.size() < 2) {
        throw ShapeError("network has no hidden layer to take features from");
    }
    Matrix act = inputs;
    for (size_t l = 0; l + 1 < net.weights.size(); ++l) {
        act = relu(affine(act, net.weights[l], net.biases[l]));
    }
    return act;
}

void save_network(const MlpNetwork& net, const std::filesystem::path& path) {
    Json layers = Json::array();
    for (size_t l = 0; l < net.weights.size(); ++l) {
        layers.push_back(Json{{"weights", matrix_to_json(net.weights[l])},
                              {"bias", net.biases[l]}});
    }
    Json j{{"kind", "mlp"},
           {"spec",
            Json{{"input_dim", net.spec.input_dim},
                 {"hidden_widths", net.spec.hidden_widths},
                 {"num_classes", net.spec.num_classes},
                 {"alpha", net.spec.alpha}}},
           {"layers", layers},
           {"init_seed", net.init_seed},
           {"trained_steps", net.trained_steps}};
    save_json(j, path);
}

MlpNetwork load_network(const std::filesystem::path& path) {
    Json j = load_json(path);
    expect_kind(j, "mlp", path);
    MlpNetwork net = parse_guard(path, [&] {
        MlpNetwork n;
        const Json& spec = j.at("spec");
        n.spec.input_dim = spec.at("input_dim").get<size_t>();
        n.spec.hidden_widths = spec.at("hidden_widths").get<std::vector<size_t>>();
        n.spec.num_classes = spec.at("num_classes").get<size_t>();
        n.spec.alpha = spec.at("alpha").get<double>();
        n.spec.validate();
        n.init_seed = j.at("init_seed").get<uint64_t>();
        n.trained_steps = j.at("trained_steps").get<size_t>();
        for (const Json& layer : j.at("layers")) {
            n.weights.push_back(matrix_from_json(layer.at("weights"), path.string()));
            n.biases.push_back(layer.at("bias").get<std::vector<double>>());
            if (n.biases.back().size() != n.weights.back().rows()) {
                throw ParseError(path.string() + ": bias/weight shape mismatch");
            }
        }
        return n;
    });
    std::vector<size_t> dims;
    dims.push_back(net.spec.input_dim);
    for (size_t w : net.spec.effective_widths()) dims.push_back(w);
    dims.push_back(net.spec.num_classes);
    if (net.weights.size() + 1 != dims.size()) {
        throw ParseError(path.string() + ": layer count does not match spec");
    }
    for (size_t l = 0; l < net.weights.size(); ++l) {
        if (net.weights[l].cols() != dims[l] || net.weights[l].rows() != dims[l + 1]) {
            throw ParseError(path.string() + ": layer " + std::to_string(l) +
                             " shape does not match spec");
        }
    }
    return net;
}

void save_train_log(const TrainLog& log, const std::filesystem::path& path) {
    Json j{{"kind", "trainlog"},
           {"epoch_loss", log.epoch_loss},
           {"epoch_accuracy", log.epoch_accuracy},
           {"lr_trace", log.lr_trace},
           {"epoch_distill_term", log.epoch_distill_term},
           {"epoch_weighted_hard_term", log.epoch_weighted_hard_term},
           {"steps", log.steps}};
    save_json(j, path);
}

TrainLog load_train_log(const std::filesystem::path& path) {
    Json j = load_json(path);
    expect_kind(j, "trainlog", path);
    return parse_guard(path, [&] {
        TrainLog log;
        log.epoch_loss = j.at("epoch_loss").get<std::vector<double>>();
        log.epoch_accuracy = j.at("epoch_accuracy").get<std::vector<double>>();
        log.lr_trace = j.at("lr_trace").get<std::vector<double>>();
        log.epoch_distill_term = j.at("epoch_distill_term").get<std::vector<double>>();
        log.epoch_weighted_hard_term =
            j.at("epoch_weighted_hard_term").get<std::vector<double>>();
        log.steps = j.at("steps").get<size_t>();
        return log;
    });
}

}  // namespace reid
