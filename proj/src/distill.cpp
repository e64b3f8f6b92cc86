#include "reid/distill.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "reid/eval.hpp"
#include "reid/serial.hpp"

namespace reid {

void DistillConfig::validate() const {
    if (!(temperature >= 1.0)) throw ConfigError("temperature must be >= 1");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw ConfigError("lambda must be finite and >= 0");
    }
    train.validate();
}

void SweepSpec::validate() const {
    if (temperatures.empty()) throw ConfigError("sweep needs at least one temperature");
    if (lambdas.empty()) throw ConfigError("sweep needs at least one lambda");
    if (seeds.empty()) throw ConfigError("sweep needs at least one seed");
    for (double t : temperatures) {
        if (!(t >= 1.0)) throw ConfigError("sweep temperatures must be >= 1");
    }
    for (double l : lambdas) {
        if (!(l >= 0.0)) throw ConfigError("sweep lambdas must be >= 0");
    }
}

namespace {

// log softmax(z/T), shared by the loss terms so probabilities and their logs
// stay consistent.
void tempered_log_softmax(std::span<const double> logits, double temperature,
                          std::vector<double>& log_p, std::vector<double>& p) {
    double mx = *std::max_element(logits.begin(), logits.end());
    log_p.resize(logits.size());
    p.resize(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        double t = (logits[i] - mx) / temperature;
        log_p[i] = t;
        double e = std::exp(t);
        p[i] = e;
        sum += e;
    }
    double log_sum = std::log(sum);
    for (size_t i = 0; i < logits.size(); ++i) {
        log_p[i] -= log_sum;
        p[i] /= sum;
    }
}

}  // namespace

std::vector<double> tempered_softmax(std::span<const double> logits,
                                     double temperature) {
    if (logits.empty()) throw UsageError("empty logits");
    if (!(temperature >= 1.0)) throw ConfigError("temperature must be >= 1");
    std::vector<double> log_p, p;
    tempered_log_softmax(logits, temperature, log_p, p);
    return p;
}

double entropy(std::span<const double> p) {
    double h = 0.0;
    for (double v : p) {
        if (v < 0.0) throw UsageError("entropy of a vector with negative entries");
        if (v > 0.0) h -= v * std::log(v);
    }
    return h;
}

DistillLossGrad distillation_loss(std::span<const double> teacher_logits,
                                  std::span<const double> student_logits,
                                  size_t label, const DistillConfig& cfg) {
    cfg.validate();
    if (teacher_logits.size() != student_logits.size()) {
        throw ShapeError("teacher/student logit widths differ");
    }
    if (teacher_logits.size() < 2) throw ShapeError("need at least 2 classes");
    if (label >= student_logits.size()) {
        throw UsageError("label out of range");
    }

    std::vector<double> t_log, t_p, s_log_t, s_p_t, s_log1, s_p1;
    tempered_log_softmax(teacher_logits, cfg.temperature, t_log, t_p);
    tempered_log_softmax(student_logits, cfg.temperature, s_log_t, s_p_t);
    tempered_log_softmax(student_logits, 1.0, s_log1, s_p1);

    double soft = 0.0;
    for (size_t i = 0; i < t_p.size(); ++i) {
        if (t_p[i] > 0.0) soft -= t_p[i] * s_log_t[i];
    }
    double soft_scale = cfg.t_squared_rescale ? cfg.temperature * cfg.temperature : 1.0;
    double hard = -s_log1[label];

    DistillLossGrad out;
    out.distill_term = soft_scale * soft;
    out.weighted_hard_term = cfg.lambda * hard;
    out.loss = out.distill_term + out.weighted_hard_term;
    out.grad.resize(student_logits.size());
    double soft_grad_scale = soft_scale / cfg.temperature;
    for (size_t i = 0; i < out.grad.size(); ++i) {
        double onehot = (i == label) ? 1.0 : 0.0;
        out.grad[i] = soft_grad_scale * (s_p_t[i] - t_p[i]) +
                      cfg.lambda * (s_p1[i] - onehot);
    }
    return out;
}

Matrix cache_teacher_outputs(const MlpNetwork& teacher, const Matrix& inputs) {
    return forward(teacher, inputs);
}

std::pair<MlpNetwork, TrainLog> train_student_with_distillation(
    const Matrix& teacher_outputs, const MlpSpec& student_spec, const Matrix& inputs,
    const std::vector<size_t>& labels, const DistillConfig& cfg) {
    cfg.validate();
    student_spec.validate();
    if (inputs.rows() == 0) throw TrainError("empty training set");
    if (labels.size() != inputs.rows()) {
        throw ShapeError("labels/features count mismatch");
    }
    if (teacher_outputs.rows() != inputs.rows()) {
        throw UsageError("teacher output cache has " +
                         std::to_string(teacher_outputs.rows()) + " rows for " +
                         std::to_string(inputs.rows()) + " records");
    }
    if (teacher_outputs.cols() != student_spec.num_classes) {
        throw UsageError("teacher output width " +
                         std::to_string(teacher_outputs.cols()) +
                         " does not match num_classes " +
                         std::to_string(student_spec.num_classes));
    }
    if (inputs.cols() != student_spec.input_dim) {
        throw ShapeError("training features have dim " + std::to_string(inputs.cols()) +
                         ", spec expects " + std::to_string(student_spec.input_dim));
    }
    for (size_t y : labels) {
        if (y >= student_spec.num_classes) {
            throw TrainError("label outside [0, num_classes)");
        }
    }

    const TrainConfig& tc = cfg.train;
    MlpNetwork net = init_network(student_spec, tc.seed);
    Velocity velocity = make_velocity(net);
    Rng shuffle_rng(stage_seed(tc.seed, "shuffle"));
    TrainLog log;

    size_t n = inputs.rows();
    size_t step = 0;
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (size_t epoch = 0; epoch < tc.epochs; ++epoch) {
        if (tc.shuffle) shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        double distill_sum = 0.0;
        double hard_sum = 0.0;
        size_t correct = 0;
        for (size_t begin = 0; begin < n; begin += tc.batch_size) {
            size_t end = std::min(begin + tc.batch_size, n);
            size_t bs = end - begin;
            Matrix batch(bs, inputs.cols());
            for (size_t b = 0; b < bs; ++b) {
                const double* src = inputs.row(order[begin + b]);
                std::copy(src, src + inputs.cols(), batch.row(b));
            }
            ForwardCache cache;
            Matrix logits = forward(net, batch, &cache);
            Matrix dlogits(bs, student_spec.num_classes);
            for (size_t b = 0; b < bs; ++b) {
                size_t rec = order[begin + b];
                DistillLossGrad lg = distillation_loss(
                    std::span<const double>(teacher_outputs.row(rec),
                                            teacher_outputs.cols()),
                    std::span<const double>(logits.row(b), logits.cols()),
                    labels[rec], cfg);
                loss_sum += lg.loss;
                distill_sum += lg.distill_term;
                hard_sum += lg.weighted_hard_term;
                size_t best = 0;
                for (size_t c = 1; c < student_spec.num_classes; ++c) {
                    if (logits(b, c) > logits(b, best)) best = c;
                }
                if (best == labels[rec]) ++correct;
                for (size_t c = 0; c < student_spec.num_classes; ++c) {
                    dlogits(b, c) = lg.grad[c] / static_cast<double>(bs);
                }
            }
            Gradients grads = backward(net, cache, dlogits);
            log.lr_trace.push_back(learning_rate_at(tc, step));
            sgd_momentum_step(net, grads, velocity, tc, step);
            ++step;
        }
        double dn = static_cast<double>(n);
        log.epoch_loss.push_back(loss_sum / dn);
        log.epoch_distill_term.push_back(distill_sum / dn);
        log.epoch_weighted_hard_term.push_back(hard_sum / dn);
        log.epoch_accuracy.push_back(static_cast<double>(correct) / dn);
    }
    log.steps = step;
    net.trained_steps = step;
    return {std::move(net), std::move(log)};
}

FeatureDataset deep_feature_dataset(const MlpNetwork& net, const FeatureDataset& data) {
    Matrix features = extract_deep_features(net, feature_matrix(data));
    FeatureDataset out;
    out.dim = features.cols();
    out.records.reserve(data.records.size());
    for (size_t i = 0; i < data.records.size(); ++i) {
        out.records.push_back({data.records[i].id, data.records[i].camera,
                               features.row_vector(i)});
    }
    return out;
}

SweepReport run_sweep(const MlpNetwork& teacher, const MlpSpec& student_spec,
                      const Matrix& train_inputs, const std::vector<size_t>& train_labels,
                      const FeatureDataset& query, const FeatureDataset& gallery,
                      const SweepSpec& sweep, const TrainConfig& base_train,
                      bool t_squared_rescale) {
    sweep.validate();
    Matrix teacher_outputs = cache_teacher_outputs(teacher, train_inputs);
    ProtocolConfig protocol;  // euclidean on deep features

    auto eval_net = [&](const MlpNetwork& net) {
        return evaluate(deep_feature_dataset(net, query),
                        deep_feature_dataset(net, gallery), protocol);
    };

    EvalReport teacher_eval = eval_net(teacher);

    SweepReport report;
    for (uint64_t seed : sweep.seeds) {
        SweepRow teacher_row;
        teacher_row.seed = seed;
        teacher_row.arm = "teacher";
        teacher_row.rank1 = teacher_eval.rank1;
        teacher_row.rank5 = teacher_eval.rank5;
        teacher_row.map = teacher_eval.map;
        report.rows.push_back(teacher_row);

        TrainConfig cell_train = base_train;
        cell_train.seed = stage_seed(seed, "sweep-student");

        auto [independent, ilog] =
            train_classifier(student_spec, train_inputs, train_labels, cell_train);
        EvalReport ieval = eval_net(independent);
        SweepRow irow;
        irow.seed = seed;
        irow.arm = "student_independent";
        irow.rank1 = ieval.rank1;
        irow.rank5 = ieval.rank5;
        irow.map = ieval.map;
        report.rows.push_back(irow);

        for (double t : sweep.temperatures) {
            for (double l : sweep.lambdas) {
                DistillConfig dc;
                dc.temperature = t;
                dc.lambda = l;
                dc.t_squared_rescale = t_squared_rescale;
                dc.train = cell_train;
                auto [student, slog] = train_student_with_distillation(
                    teacher_outputs, student_spec, train_inputs, train_labels, dc);
                EvalReport seval = eval_net(student);
                SweepRow row;
                row.temperature = t;
                row.lambda = l;
                row.seed = seed;
                row.arm = "distilled";
                row.rank1 = seval.rank1;
                row.rank5 = seval.rank5;
                row.map = seval.map;
                report.rows.push_back(row);
            }
        }
    }
    return report;
}

void save_sweep_csv(const SweepReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "T,lambda,seed,rank1,rank5,map,arm\n";
    for (const SweepRow& r : report.rows) {
        out << format_double(r.temperature) << ',' << format_double(r.lambda) << ','
            << r.seed << ',' << format_double(r.rank1) << ',' << format_double(r.rank5)
            << ',' << format_double(r.map) << ',' << r.arm << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

SweepReport load_sweep_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty file: " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "T,lambda,seed,rank1,rank5,map,arm") {
        throw ParseError("bad header in " + path.string());
    }
    SweepReport report;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::string where = path.string() + ":" + std::to_string(line_no);
        std::vector<std::string> cells = split_string(line, ',');
        if (cells.size() != 7) throw ParseError(where + ": expected 7 columns");
        SweepRow row;
        row.temperature = parse_double_strict(cells[0], where);
        row.lambda = parse_double_strict(cells[1], where);
        row.seed = static_cast<uint64_t>(parse_int_strict(cells[2], where));
        row.rank1 = parse_double_strict(cells[3], where);
        row.rank5 = parse_double_strict(cells[4], where);
        row.map = parse_double_strict(cells[5], where);
        row.arm = cells[6];
        if (row.arm != "distilled" && row.arm != "student_independent" &&
            row.arm != "teacher") {
            throw ParseError(where + ": unknown arm '" + row.arm + "'");
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

namespace {

struct Stats {
    double mean_rank1 = 0, std_rank1 = 0;
    double mean_rank5 = 0, std_rank5 = 0;
    double mean_map = 0, std_map = 0;
    size_t count = 0;
};

Stats stats_of(const std::vector<const SweepRow*>& rows) {
    Stats s;
    s.count = rows.size();
    if (rows.empty()) return s;
    double n = static_cast<double>(rows.size());
    for (const SweepRow* r : rows) {
        s.mean_rank1 += r->rank1;
        s.mean_rank5 += r->rank5;
        s.mean_map += r->map;
    }
    s.mean_rank1 /= n;
    s.mean_rank5 /= n;
    s.mean_map /= n;
    for (const SweepRow* r : rows) {
        s.std_rank1 += (r->rank1 - s.mean_rank1) * (r->rank1 - s.mean_rank1);
        s.std_rank5 += (r->rank5 - s.mean_rank5) * (r->rank5 - s.mean_rank5);
        s.std_map += (r->map - s.mean_map) * (r->map - s.mean_map);
    }
    s.std_rank1 = std::sqrt(s.std_rank1 / n);
    s.std_rank5 = std::sqrt(s.std_rank5 / n);
    s.std_map = std::sqrt(s.std_map / n);
    return s;
}

Json stats_to_json(const Stats& s) {
    return Json{{"mean_rank1", s.mean_rank1}, {"std_rank1", s.std_rank1},
                {"mean_rank5", s.mean_rank5}, {"std_rank5", s.std_rank5},
                {"mean_map", s.mean_map},     {"std_map", s.std_map},
                {"num_seeds", s.count}};
}

}  // namespace

void save_sweep_summary(const SweepReport& report, const std::filesystem::path& path) {
    std::map<std::pair<double, double>, std::vector<const SweepRow*>> cells;
    std::vector<const SweepRow*> teacher_rows, independent_rows;
    for (const SweepRow& r : report.rows) {
        if (r.arm == "distilled") {
            cells[{r.temperature, r.lambda}].push_back(&r);
        } else if (r.arm == "teacher") {
            teacher_rows.push_back(&r);
        } else {
            independent_rows.push_back(&r);
        }
    }
    Json cell_array = Json::array();
    for (const auto& [key, rows] : cells) {
        Json c = stats_to_json(stats_of(rows));
        c["temperature"] = key.first;
        c["lambda"] = key.second;
        cell_array.push_back(c);
    }
    Json j{{"kind", "sweep_summary"},
           {"cells", cell_array},
           {"baselines",
            Json{{"teacher", stats_to_json(stats_of(teacher_rows))},
                 {"student_independent", stats_to_json(stats_of(independent_rows))}}}};
    save_json(j, path);
}

}  // namespace reid
