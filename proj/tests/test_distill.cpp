#include <cmath>
#include <filesystem>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "reid/common.hpp"
#include "reid/distill.hpp"
#include "reid/serial.hpp"

using namespace reid;

namespace {

void blobs(size_t per_class, uint64_t seed, Matrix* inputs,
           std::vector<size_t>* labels) {
    Rng rng(seed);
    size_t n = per_class * 3;
    *inputs = Matrix(n, 2);
    labels->clear();
    double centers[3][2] = {{0.0, 0.0}, {6.0, 0.0}, {0.0, 6.0}};
    for (size_t c = 0; c < 3; ++c) {
        for (size_t k = 0; k < per_class; ++k) {
            size_t row = c * per_class + k;
            (*inputs)(row, 0) = centers[c][0] + rng.gaussian(0.0, 0.5);
            (*inputs)(row, 1) = centers[c][1] + rng.gaussian(0.0, 0.5);
            labels->push_back(c);
        }
    }
}

MlpNetwork trained_teacher(const Matrix& inputs, const std::vector<size_t>& labels) {
    MlpSpec spec;
    spec.input_dim = 2;
    spec.hidden_widths = {16};
    spec.num_classes = 3;
    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.epochs = 40;
    cfg.seed = 11;
    return train_classifier(spec, inputs, labels, cfg).first;
}

std::filesystem::path temp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "reid_distill_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("tempered softmax matches hand values at unit temperature") {
    std::vector<double> logits = {std::log(2.0), 0.0};
    std::vector<double> p = tempered_softmax(logits, 1.0);
    CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("raising the temperature flattens the distribution") {
    std::vector<double> logits = {3.0, 1.0, -2.0, 0.5};
    double prev = entropy(tempered_softmax(logits, 1.0));
    for (double t : {2.0, 4.0, 8.0, 16.0, 64.0}) {
        double h = entropy(tempered_softmax(logits, t));
        CHECK(h >= prev - 1e-12);
        prev = h;
    }
    std::vector<double> hot = tempered_softmax(logits, 1e6);
    for (double v : hot) CHECK(v == doctest::Approx(0.25).epsilon(1e-4));
    CHECK(entropy(hot) == doctest::Approx(std::log(4.0)).epsilon(1e-6));
}

TEST_CASE("tempered softmax is shift invariant and normalized") {
    std::vector<double> logits = {0.3, -1.2, 2.5};
    std::vector<double> shifted = {1000.3, 998.8, 1002.5};
    std::vector<double> a = tempered_softmax(logits, 3.0);
    std::vector<double> b = tempered_softmax(shifted, 3.0);
    double sum = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-9));
        sum += a[i];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(tempered_softmax(logits, 0.5), ConfigError);
    CHECK_THROWS_AS(tempered_softmax(std::vector<double>{}, 2.0), UsageError);
}

TEST_CASE("entropy matches closed forms") {
    std::vector<double> two = {0.7310585786300049, 0.2689414213699951};
    CHECK(entropy(two) == doctest::Approx(0.5822031088882179).epsilon(1e-12));
    std::vector<double> sure = {1.0, 0.0};
    CHECK(entropy(sure) == doctest::Approx(0.0));
    std::vector<double> uniform(5, 0.2);
    CHECK(entropy(uniform) == doctest::Approx(std::log(5.0)).epsilon(1e-12));
    CHECK_THROWS_AS(entropy(std::vector<double>{-0.1, 1.1}), UsageError);
}

TEST_CASE("distillation loss decomposes into its two terms") {
    DistillConfig cfg;
    cfg.temperature = 3.0;
    cfg.lambda = 0.01;
    std::vector<double> teacher = {2.0, -1.0, 0.5};
    std::vector<double> student = {0.2, 0.4, -0.8};
    DistillLossGrad lg = distillation_loss(teacher, student, 1, cfg);
    CHECK(lg.loss == doctest::Approx(lg.distill_term + lg.weighted_hard_term));
    CHECK(lg.distill_term > 0.0);
    CHECK(lg.weighted_hard_term > 0.0);

    // the hard term is linear in lambda
    cfg.lambda = 1.0;
    DistillLossGrad unit = distillation_loss(teacher, student, 1, cfg);
    CHECK(lg.weighted_hard_term ==
          doctest::Approx(0.01 * unit.weighted_hard_term).epsilon(1e-12));
    CHECK(lg.distill_term == doctest::Approx(unit.distill_term).epsilon(1e-12));
}

TEST_CASE("matching the teacher minimizes the soft term") {
    DistillConfig cfg;
    cfg.temperature = 2.0;
    cfg.lambda = 0.0;
    std::vector<double> logits = {1.0, 2.0, 3.0};
    DistillLossGrad self = distillation_loss(logits, logits, 0, cfg);
    double h = entropy(tempered_softmax(logits, 2.0));
    CHECK(self.distill_term == doctest::Approx(h).epsilon(1e-12));
    for (double g : self.grad) CHECK(g == doctest::Approx(0.0).epsilon(1e-12));

    // Gibbs: cross-entropy against anything else is never smaller
    std::vector<double> other = {3.0, 1.0, 2.0};
    DistillLossGrad cross = distillation_loss(logits, other, 0, cfg);
    CHECK(cross.distill_term >= self.distill_term);
}

TEST_CASE("distillation gradient matches finite differences") {
    Rng rng(19);
    std::vector<double> teacher(4), student(4);
    for (auto& z : teacher) z = rng.gaussian();
    for (auto& z : student) z = rng.gaussian();

    for (bool rescale : {false, true}) {
        DistillConfig cfg;
        cfg.temperature = 3.0;
        cfg.lambda = 0.05;
        cfg.t_squared_rescale = rescale;
        DistillLossGrad lg = distillation_loss(teacher, student, 2, cfg);
        const double h = 1e-6;
        for (size_t i = 0; i < student.size(); ++i) {
            std::vector<double> plus = student, minus = student;
            plus[i] += h;
            minus[i] -= h;
            double fd = (distillation_loss(teacher, plus, 2, cfg).loss -
                         distillation_loss(teacher, minus, 2, cfg).loss) /
                        (2.0 * h);
            CHECK(lg.grad[i] == doctest::Approx(fd).epsilon(1e-5));
        }
    }
}

TEST_CASE("t squared rescale scales the soft term and its gradient") {
    std::vector<double> teacher = {1.5, -0.5, 0.0};
    std::vector<double> student = {0.1, 0.2, 0.3};
    DistillConfig plain;
    plain.temperature = 4.0;
    plain.lambda = 0.0;
    DistillConfig scaled = plain;
    scaled.t_squared_rescale = true;
    DistillLossGrad a = distillation_loss(teacher, student, 0, plain);
    DistillLossGrad b = distillation_loss(teacher, student, 0, scaled);
    CHECK(b.distill_term == doctest::Approx(16.0 * a.distill_term).epsilon(1e-12));
    for (size_t i = 0; i < a.grad.size(); ++i) {
        CHECK(b.grad[i] == doctest::Approx(16.0 * a.grad[i]).epsilon(1e-12));
    }
}

TEST_CASE("distillation configuration is validated") {
    DistillConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.temperature = 0.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = DistillConfig{};
    cfg.lambda = -1e-9;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    std::vector<double> z = {0.0, 1.0};
    DistillConfig ok;
    CHECK_THROWS_AS(distillation_loss(z, std::vector<double>{0.0}, 0, ok), ShapeError);
    CHECK_THROWS_AS(distillation_loss(z, z, 2, ok), UsageError);
}

TEST_CASE("teacher output cache equals a direct forward pass") {
    Matrix inputs;
    std::vector<size_t> labels;
    blobs(8, 4, &inputs, &labels);
    MlpNetwork teacher = trained_teacher(inputs, labels);
    Matrix cached = cache_teacher_outputs(teacher, inputs);
    Matrix direct = forward(teacher, inputs);
    CHECK(cached == direct);
}

TEST_CASE("distilled student learns the task") {
    Matrix inputs;
    std::vector<size_t> labels;
    blobs(15, 23, &inputs, &labels);
    MlpNetwork teacher = trained_teacher(inputs, labels);
    Matrix teacher_outputs = cache_teacher_outputs(teacher, inputs);

    MlpSpec student_spec;
    student_spec.input_dim = 2;
    student_spec.hidden_widths = {16};
    student_spec.num_classes = 3;
    student_spec.alpha = 0.5;

    DistillConfig cfg;
    cfg.temperature = 3.0;
    cfg.lambda = 0.01;
    cfg.train.learning_rate = 0.05;
    cfg.train.epochs = 40;
    cfg.train.seed = 5;
    auto [student, log] = train_student_with_distillation(
        teacher_outputs, student_spec, inputs, labels, cfg);
    CHECK(log.epoch_accuracy.back() > 0.95);
    CHECK(log.epoch_loss.front() > log.epoch_loss.back());
    REQUIRE(log.epoch_distill_term.size() == 40);
    REQUIRE(log.epoch_weighted_hard_term.size() == 40);
    for (size_t e = 0; e < 40; ++e) {
        CHECK(log.epoch_loss[e] == doctest::Approx(log.epoch_distill_term[e] +
                                                   log.epoch_weighted_hard_term[e]));
    }

    auto [again, log2] = train_student_with_distillation(
        teacher_outputs, student_spec, inputs, labels, cfg);
    CHECK(student.weights[0] == again.weights[0]);
    CHECK(log.epoch_loss == log2.epoch_loss);
}

TEST_CASE("distillation guards the teacher cache alignment") {
    Matrix inputs;
    std::vector<size_t> labels;
    blobs(4, 2, &inputs, &labels);
    MlpSpec spec;
    spec.input_dim = 2;
    spec.hidden_widths = {4};
    spec.num_classes = 3;
    DistillConfig cfg;

    Matrix short_cache(inputs.rows() - 1, 3);
    CHECK_THROWS_AS(
        train_student_with_distillation(short_cache, spec, inputs, labels, cfg),
        UsageError);
    Matrix narrow_cache(inputs.rows(), 2);
    CHECK_THROWS_AS(
        train_student_with_distillation(narrow_cache, spec, inputs, labels, cfg),
        UsageError);
}

TEST_CASE("deep feature dataset carries the labels") {
    Matrix inputs;
    std::vector<size_t> labels;
    blobs(4, 31, &inputs, &labels);
    MlpNetwork teacher = trained_teacher(inputs, labels);

    FeatureDataset data;
    data.dim = 2;
    for (size_t i = 0; i < inputs.rows(); ++i) {
        data.records.push_back({static_cast<int64_t>(labels[i]),
                                static_cast<int64_t>(i % 2),
                                {inputs(i, 0), inputs(i, 1)}});
    }
    FeatureDataset deep = deep_feature_dataset(teacher, data);
    CHECK(deep.dim == 16);
    REQUIRE(deep.records.size() == data.records.size());
    for (size_t i = 0; i < deep.records.size(); ++i) {
        CHECK(deep.records[i].id == data.records[i].id);
        CHECK(deep.records[i].camera == data.records[i].camera);
        CHECK(deep.records[i].values.size() == 16);
    }
}

TEST_CASE("sweep produces paired arms over the grid") {
    Matrix inputs;
    std::vector<size_t> labels;
    blobs(6, 41, &inputs, &labels);
    MlpNetwork teacher = trained_teacher(inputs, labels);

    FeatureDataset query, gallery;
    query.dim = gallery.dim = 2;
    Rng rng(8);
    for (int64_t id = 0; id < 3; ++id) {
        double cx = (id == 0) ? 0.0 : (id == 1 ? 6.0 : 0.0);
        double cy = (id == 2) ? 6.0 : 0.0;
        query.records.push_back(
            {id, 0, {cx + rng.gaussian(0.0, 0.4), cy + rng.gaussian(0.0, 0.4)}});
        for (int k = 0; k < 2; ++k) {
            gallery.records.push_back(
                {id, 1, {cx + rng.gaussian(0.0, 0.4), cy + rng.gaussian(0.0, 0.4)}});
        }
    }

    MlpSpec student_spec;
    student_spec.input_dim = 2;
    student_spec.hidden_widths = {8};
    student_spec.num_classes = 3;

    SweepSpec sweep;
    sweep.temperatures = {1.0, 3.0};
    sweep.lambdas = {1e-4, 1e-2};
    sweep.seeds = {1, 2};
    TrainConfig base;
    base.learning_rate = 0.05;
    base.epochs = 8;

    SweepReport report =
        run_sweep(teacher, student_spec, inputs, labels, query, gallery, sweep, base);
    // per seed: teacher + independent + 4 distilled cells
    REQUIRE(report.rows.size() == 2 * (2 + 4));

    size_t teacher_rows = 0, independent_rows = 0, distilled_rows = 0;
    for (const SweepRow& r : report.rows) {
        if (r.arm == "teacher") {
            ++teacher_rows;
            CHECK(r.temperature == 0.0);
            CHECK(r.lambda == 0.0);
        } else if (r.arm == "student_independent") {
            ++independent_rows;
            CHECK(r.temperature == 0.0);
        } else {
            ++distilled_rows;
            CHECK(r.temperature >= 1.0);
        }
        CHECK(r.rank1 >= 0.0);
        CHECK(r.rank1 <= 1.0);
        CHECK(r.map >= 0.0);
        CHECK(r.map <= 1.0);
    }
    CHECK(teacher_rows == 2);
    CHECK(independent_rows == 2);
    CHECK(distilled_rows == 8);

    auto csv = temp_path("sweep.csv");
    save_sweep_csv(report, csv);
    SweepReport back = load_sweep_csv(csv);
    REQUIRE(back.rows.size() == report.rows.size());
    for (size_t i = 0; i < report.rows.size(); ++i) {
        CHECK(back.rows[i].temperature == report.rows[i].temperature);
        CHECK(back.rows[i].lambda == report.rows[i].lambda);
        CHECK(back.rows[i].seed == report.rows[i].seed);
        CHECK(back.rows[i].rank1 == report.rows[i].rank1);
        CHECK(back.rows[i].map == report.rows[i].map);
        CHECK(back.rows[i].arm == report.rows[i].arm);
    }

    auto summary_path = temp_path("summary.json");
    save_sweep_summary(report, summary_path);
    Json j = load_json(summary_path);
    CHECK(j.at("kind") == "sweep_summary");
    REQUIRE(j.at("cells").size() == 4);
    for (const auto& cell : j.at("cells")) {
        CHECK(cell.at("num_seeds") == 2);
        CHECK(cell.at("mean_map").get<double>() >= 0.0);
        CHECK(cell.at("std_map").get<double>() >= 0.0);
    }
    CHECK(j.at("baselines").contains("teacher"));
    CHECK(j.at("baselines").contains("student_independent"));
}

TEST_CASE("sweep rejects empty grids") {
    SweepSpec sweep;
    sweep.temperatures = {};
    CHECK_THROWS_AS(sweep.validate(), ConfigError);
    sweep = SweepSpec{};
    sweep.lambdas = {};
    CHECK_THROWS_AS(sweep.validate(), ConfigError);
    sweep = SweepSpec{};
    sweep.temperatures = {0.5};
    CHECK_THROWS_AS(sweep.validate(), ConfigError);
}
