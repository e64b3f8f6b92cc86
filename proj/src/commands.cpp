#include "reid/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "reid/bench.hpp"
#include "reid/descriptor.hpp"
#include "reid/distill.hpp"
#include "reid/eval.hpp"
#include "reid/image.hpp"
#include "reid/metric.hpp"
#include "reid/serial.hpp"

namespace reid {

namespace {

volatile double g_bench_sink = 0.0;

void log_line(const RunContext& ctx, const std::string& text) {
    if (!ctx.quiet) std::cout << text << '\n';
}

std::filesystem::path resolve(const RunContext& ctx, const std::string& value) {
    std::filesystem::path p(value);
    return p.is_absolute() ? p : ctx.out / p;
}

void write_snapshot(const RunContext& ctx, const std::string& name) {
    std::filesystem::path path = ctx.out / ("resolved_" + name + ".ini");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << ctx.cfg.dump();
    if (!out) throw IoError("write failed: " + path.string());
}

SyntheticSpec dataset_spec(const ConfigFile& cfg) {
    SyntheticSpec spec;
    spec.num_identities = cfg.get_size("dataset", "num_identities", spec.num_identities);
    spec.records_per_identity =
        cfg.get_size("dataset", "records_per_identity", spec.records_per_identity);
    spec.num_cameras = cfg.get_size("dataset", "num_cameras", spec.num_cameras);
    spec.dim = cfg.get_size("dataset", "dim", spec.dim);
    spec.intra_class_stddev =
        cfg.get_double("dataset", "intra_class_stddev", spec.intra_class_stddev);
    spec.camera_shift_stddev =
        cfg.get_double("dataset", "camera_shift_stddev", spec.camera_shift_stddev);
    spec.class_center_stddev =
        cfg.get_double("dataset", "class_center_stddev", spec.class_center_stddev);
    return spec;
}

SplitSpec split_spec(const ConfigFile& cfg) {
    SplitSpec spec;
    spec.train_fraction = cfg.get_double("split", "train_fraction", spec.train_fraction);
    spec.queries_per_test_identity = cfg.get_size("split", "queries_per_test_identity",
                                                  spec.queries_per_test_identity);
    return spec;
}

DescriptorConfig descriptor_config(const ConfigFile& cfg) {
    DescriptorConfig d;
    d.num_stripes = cfg.get_size("descriptor", "num_stripes", d.num_stripes);
    d.hue_bins = cfg.get_size("descriptor", "hue_bins", d.hue_bins);
    d.sat_bins = cfg.get_size("descriptor", "sat_bins", d.sat_bins);
    d.val_bins = cfg.get_size("descriptor", "val_bins", d.val_bins);
    d.texture_threshold =
        cfg.get_double("descriptor", "texture_threshold", d.texture_threshold);
    d.subwindow = cfg.get_size("descriptor", "subwindow", d.subwindow);
    d.subwindow_stride =
        cfg.get_size("descriptor", "subwindow_stride", d.subwindow_stride);
    d.validate();
    return d;
}

TrainConfig train_config(const ConfigFile& cfg, uint64_t seed) {
    TrainConfig tc;
    tc.learning_rate = cfg.get_double("train", "learning_rate", tc.learning_rate);
    tc.decay_factor = cfg.get_double("train", "decay_factor", tc.decay_factor);
    tc.decay_every_steps =
        cfg.get_size("train", "decay_every_steps", tc.decay_every_steps);
    tc.momentum = cfg.get_double("train", "momentum", tc.momentum);
    tc.batch_size = cfg.get_size("train", "batch_size", tc.batch_size);
    tc.epochs = cfg.get_size("train", "epochs", tc.epochs);
    tc.shuffle = cfg.get_bool("train", "shuffle", tc.shuffle);
    tc.seed = seed;
    tc.validate();
    return tc;
}

MlpSpec network_spec(const ConfigFile& cfg, const std::string& section,
                     size_t input_dim, size_t num_classes) {
    MlpSpec spec;
    spec.input_dim = input_dim;
    spec.num_classes = num_classes;
    spec.hidden_widths = cfg.get_size_list(section, "hidden_widths", {128, 64});
    spec.alpha = cfg.get_double(section, "alpha", section == "student" ? 0.25 : 1.0);
    spec.validate();
    return spec;
}

std::string train_features_file(const ConfigFile& cfg) {
    std::string input = cfg.get_string("train", "input", "features");
    if (input == "features") return "train.csv";
    if (input == "descriptors") return "d_train.csv";
    throw ConfigError("[train] input must be 'features' or 'descriptors', got '" +
                      input + "'");
}

FeatureDataset load_features(const RunContext& ctx, const std::string& name) {
    FeatureDataset data = load_csv(resolve(ctx, name));
    data.validate();
    return data;
}

struct FeatureTable {
    std::vector<std::vector<double>> rows;
    std::vector<int64_t> ids;
    std::vector<int64_t> cameras;
};

FeatureTable to_table(const FeatureDataset& data) {
    FeatureTable t;
    t.rows.reserve(data.records.size());
    for (const auto& r : data.records) {
        t.rows.push_back(r.values);
        t.ids.push_back(r.id);
        t.cameras.push_back(r.camera);
    }
    return t;
}

std::string manifest_of(const ConfigFile& cfg) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(cfg.dump())));
    return std::string(buf);
}

}  // namespace

RunContext make_context(const CommonOptions& opts) {
    RunContext ctx;
    ctx.cfg = ConfigFile::parse_file(opts.config_path);
    validate_schema(ctx.cfg);
    if (opts.seed_override) {
        ctx.cfg.set("run", "seed", std::to_string(*opts.seed_override));
    }
    if (opts.out_override) {
        ctx.cfg.set("run", "out", *opts.out_override);
    }
    if (opts.quiet_override) {
        ctx.cfg.set("run", "quiet", "true");
    }
    materialize_defaults(ctx.cfg);
    ctx.seed = ctx.cfg.get_u64("run", "seed", 1);
    ctx.out = ctx.cfg.require_string("run", "out");
    ctx.quiet = ctx.cfg.get_bool("run", "quiet", false);
    ctx.manifest = manifest_of(ctx.cfg);
    std::filesystem::create_directories(ctx.out);
    return ctx;
}

void cmd_gen_data(const CommonOptions& opts) {
    RunContext ctx = make_context(opts);
    SyntheticSpec spec = dataset_spec(ctx.cfg);
    SplitSpec split = split_spec(ctx.cfg);

    FeatureDataset data = generate_synthetic(spec, stage_seed(ctx.seed, "gen-data"));
    SplitResult parts = split_train_query_gallery(data, split,
                                                  stage_seed(ctx.seed, "split"));
    save_csv(parts.train, ctx.out / "train.csv");
    save_csv(parts.query, ctx.out / "query.csv");
    save_csv(parts.gallery, ctx.out / "gallery.csv");
    log_line(ctx, "gen-data: " + std::to_string(data.records.size()) + " records, " +
                      std::to_string(parts.train.records.size()) + " train / " +
                      std::to_string(parts.query.records.size()) + " query / " +
                      std::to_string(parts.gallery.records.size()) + " gallery");

    if (ctx.cfg.get_bool("dataset", "images", false)) {
        int h = static_cast<int>(ctx.cfg.get_size("dataset", "image_height", 48));
        int w = static_cast<int>(ctx.cfg.get_size("dataset", "image_width", 24));
        ImageCorpus corpus =
            generate_synthetic_images(spec, h, w, stage_seed(ctx.seed, "images"));
        save_corpus(corpus, ctx.out / "corpus");
        log_line(ctx, "gen-data: wrote " + std::to_string(corpus.size()) + " images");
    }
    write_snapshot(ctx, "gen-data");
}

void cmd_extract(const CommonOptions& opts) {
    RunContext ctx = make_context(opts);
    DescriptorConfig dcfg = descriptor_config(ctx.cfg);
    ImageCorpus corpus = load_corpus(ctx.out / "corpus");

    FeatureDataset data;
    data.dim = dcfg.descriptor_dim();
    data.records.reserve(corpus.size());
    for (size_t i = 0; i < corpus.size(); ++i) {
        data.records.push_back({corpus.ids[i], corpus.cameras[i],
                                extract_handcrafted(corpus.images[i], dcfg)});
    }
    save_csv(data, ctx.out / "d_full.csv");

    SplitResult parts = split_train_query_gallery(data, split_spec(ctx.cfg),
                                                  stage_seed(ctx.seed, "split"));
    save_csv(parts.train, ctx.out / "d_train.csv");
    save_csv(parts.query, ctx.out / "d_query.csv");
    save_csv(parts.gallery, ctx.out / "d_gallery.csv");
    log_line(ctx, "extract: " + std::to_string(data.records.size()) +
                      " descriptors of dim " + std::to_string(data.dim));
    write_snapshot(ctx, "extract");
}

void cmd_fit_metric(const CommonOptions& opts) {
    RunContext ctx = make_context(opts);
    std::string input = ctx.cfg.get_string("metric", "input", "descriptors");
    std::string file;
    if (input == "descriptors") {
        file = "d_train.csv";
    } else if (input == "features") {
        file = "train.csv";
    } else {
        throw ConfigError("[metric] input must be 'features' or 'descriptors', got '" +
                          input + "'");
    }
    FeatureDataset train = load_features(ctx, file);
    FeatureTable table = to_table(train);
    double ridge = ctx.cfg.get_double("metric", "ridge", 1e-6);
    uint64_t metric_seed = stage_seed(ctx.seed, "fit-metric");
    using Seconds = std::chrono::duration<double>;
    Json timings{{"kind", "metric_log"}};

    std::vector<std::vector<double>> kissme_rows = table.rows;
    if (ctx.cfg.get_bool("metric", "fit_pca", true)) {
        size_t pca_dim = ctx.cfg.get_size("metric", "pca_dim", 0);
        if (pca_dim == 0) {
            pca_dim = std::min(train.dim, train.records.size() - 1);
        }
        auto start = std::chrono::steady_clock::now();
        PcaModel pca = fit_pca(table.rows, pca_dim);
        timings["pca_seconds"] = Seconds(std::chrono::steady_clock::now() - start).count();
        save_pca(pca, ctx.out / "pca.json");
        for (auto& row : kissme_rows) row = apply_pca(pca, row);
        log_line(ctx, "fit-metric: PCA " + std::to_string(train.dim) + " -> " +
                          std::to_string(pca_dim));
    }
    if (ctx.cfg.get_bool("metric", "fit_kissme", true)) {
        auto start = std::chrono::steady_clock::now();
        MahalanobisModel kissme =
            fit_kissme_from_records(kissme_rows, table.ids, ridge, metric_seed);
        timings["kissme_seconds"] =
            Seconds(std::chrono::steady_clock::now() - start).count();
        save_kissme(kissme, ctx.out / "kissme.json");
        log_line(ctx, "fit-metric: KISSME on dim " +
                          std::to_string(kissme_rows.front().size()));
    }
    if (ctx.cfg.get_bool("metric", "fit_xqda", true)) {
        size_t max_dim = ctx.cfg.get_size("metric", "xqda_max_dim", 76);
        auto start = std::chrono::steady_clock::now();
        XqdaModel xqda =
            fit_xqda(table.rows, table.ids, table.cameras, max_dim, ridge, metric_seed);
        timings["xqda_seconds"] =
            Seconds(std::chrono::steady_clock::now() - start).count();
        save_xqda(xqda, ctx.out / "xqda.json");
        log_line(ctx, "fit-metric: XQDA subspace dim " +
                          std::to_string(xqda.w.cols()));
    }
    save_json(timings, ctx.out / "metric_log.json");
    write_snapshot(ctx, "fit-metric");
}

void cmd_train(const CommonOptions& opts, const std::string& role) {
    if (role != "teacher" && role != "student") {
        throw ConfigError("--role must be 'teacher' or 'student', got '" + role + "'");
    }
    RunContext ctx = make_context(opts);
    FeatureDataset train = load_features(ctx, train_features_file(ctx.cfg));
    FeatureTable table = to_table(train);
    std::vector<size_t> labels = dense_labels(table.ids);
    size_t num_classes = train.num_identities();

    MlpSpec spec = network_spec(ctx.cfg, role, train.dim, num_classes);
    TrainConfig tc = train_config(ctx.cfg, stage_seed(ctx.seed, "train-" + role));
    auto [net, log] = train_classifier(spec, feature_matrix(train), labels, tc);

    std::string stem = (role == "teacher") ? "teacher" : "student_independent";
    save_network(net, ctx.out / (stem + ".json"));
    save_train_log(log, ctx.out / ("trainlog_" + stem + ".json"));
    log_line(ctx, "train " + role + ": final accuracy " +
                      format_double(log.epoch_accuracy.back()) + " after " +
                      std::to_string(log.steps) + " steps");
    write_snapshot(ctx, "train-" + stem);
}

void cmd_distill(const CommonOptions& opts) {
    RunContext ctx = make_context(opts);
    FeatureDataset train = load_features(ctx, train_features_file(ctx.cfg));
    FeatureTable table = to_table(train);
    std::vector<size_t> labels = dense_labels(table.ids);
    size_t num_classes = train.num_identities();

    MlpNetwork teacher = load_network(ctx.out / "teacher.json");
    if (teacher.spec.input_dim != train.dim) {
        throw ShapeError("teacher expects input dim " +
                         std::to_string(teacher.spec.input_dim) + ", data has " +
                         std::to_string(train.dim));
    }
    if (teacher.spec.num_classes != num_classes) {
        throw ShapeError("teacher has " + std::to_string(teacher.spec.num_classes) +
                         " classes, data has " + std::to_string(num_classes));
    }

    DistillConfig dc;
    dc.temperature = ctx.cfg.get_double("distill", "temperature", 3.0);
    dc.lambda = ctx.cfg.get_double("distill", "lambda", 1e-4);
    dc.t_squared_rescale = ctx.cfg.get_bool("distill", "t_squared_rescale", false);
    dc.train = train_config(ctx.cfg, stage_seed(ctx.seed, "train-student"));

    Matrix inputs = feature_matrix(train);
    Matrix teacher_outputs = cache_teacher_outputs(teacher, inputs);
    auto [student, log] = train_student_with_distillation(
        teacher_outputs, network_spec(ctx.cfg, "student", train.dim, num_classes),
        inputs, labels, dc);

    save_network(student, ctx.out / "student_distilled.json");
    save_train_log(log, ctx.out / "trainlog_student_distilled.json");
    log_line(ctx, "distill: T " + format_double(dc.temperature) + ", lambda " +
                      format_double(dc.lambda) + ", final accuracy " +
                      format_double(log.epoch_accuracy.back()));
    write_snapshot(ctx, "distill");
}

void cmd_sweep(const CommonOptions& opts) {
    RunContext ctx = make_context(opts);
    FeatureDataset train = load_features(ctx, train_features_file(ctx.cfg));
    FeatureDataset query = load_features(ctx, "query.csv");
    FeatureDataset gallery = load_features(ctx, "gallery.csv");
    FeatureTable table = to_table(train);
    std::vector<size_t> labels = dense_labels(table.ids);

    MlpNetwork teacher = load_network(ctx.out / "teacher.json");
    SweepSpec sweep;
    sweep.temperatures = ctx.cfg.get_double_list("sweep", "temperatures",
                                                 sweep.temperatures);
    sweep.lambdas = ctx.cfg.get_double_list("sweep", "lambdas", sweep.lambdas);
    sweep.seeds = ctx.cfg.get_u64_list("sweep", "seeds", sweep.seeds);
    sweep.validate();

    TrainConfig base = train_config(ctx.cfg, 0);
    bool rescale = ctx.cfg.get_bool("distill", "t_squared_rescale", false);
    SweepReport report =
        run_sweep(teacher, network_spec(ctx.cfg, "student", train.dim,
                                        train.num_identities()),
                  feature_matrix(train), labels, query, gallery, sweep, base, rescale);
    save_sweep_csv(report, ctx.out / "sweep_report.csv");
    save_sweep_summary(report, ctx.out / "sweep_summary.json");
    log_line(ctx, "sweep: " + std::to_string(report.rows.size()) + " rows (" +
                      std::to_string(sweep.temperatures.size()) + " temperatures x " +
                      std::to_string(sweep.lambdas.size()) + " lambdas x " +
                      std::to_string(sweep.seeds.size()) + " seeds)");
    write_snapshot(ctx, "sweep");
}

void cmd_eval(const CommonOptions& opts, const std::string& name) {
    RunContext ctx = make_context(opts);
    std::string section = name.empty() ? "eval" : "eval." + name;
    if (!name.empty() && !ctx.cfg.has_section(section)) {
        throw ConfigError("missing config section [" + section + "]");
    }
    std::string out_name = name.empty() ? "default" : name;

    FeatureDataset query =
        load_features(ctx, ctx.cfg.get_string(section, "query", "query.csv"));
    FeatureDataset gallery =
        load_features(ctx, ctx.cfg.get_string(section, "gallery", "gallery.csv"));

    bool has_network = ctx.cfg.has(section, "network");
    bool has_pca = ctx.cfg.has(section, "pca");
    if (has_network && has_pca) {
        throw ConfigError("[" + section + "] cannot combine 'network' and 'pca'");
    }
    if (has_network) {
        MlpNetwork net =
            load_network(resolve(ctx, ctx.cfg.require_string(section, "network")));
        query = deep_feature_dataset(net, query);
        gallery = deep_feature_dataset(net, gallery);
    } else if (has_pca) {
        PcaModel pca = load_pca(resolve(ctx, ctx.cfg.require_string(section, "pca")));
        for (auto* part : {&query, &gallery}) {
            for (auto& r : part->records) r.values = apply_pca(pca, r.values);
            part->dim = pca.components.rows();
        }
    }

    ProtocolConfig protocol;
    protocol.exclude_same_camera_positives =
        ctx.cfg.get_bool(section, "exclude_same_camera", true);
    std::string distance = ctx.cfg.get_string(section, "distance", "euclidean");
    if (distance == "euclidean") {
        protocol.distance = EuclideanDistance{};
    } else if (distance == "kissme") {
        protocol.distance = load_kissme(
            resolve(ctx, ctx.cfg.get_string(section, "model", "kissme.json")));
    } else if (distance == "xqda") {
        protocol.distance = load_xqda(
            resolve(ctx, ctx.cfg.get_string(section, "model", "xqda.json")));
    } else {
        throw ConfigError("[" + section + "] distance must be euclidean, kissme or xqda");
    }

    EvalReport report = evaluate(query, gallery, protocol);
    save_eval_report(report, ctx.out / ("eval_" + out_name + ".json"));
    save_eval_report_csv(report, ctx.out / ("eval_" + out_name + ".csv"));
    log_line(ctx, "eval " + out_name + ": rank1 " + format_double(report.rank1) +
                      ", rank5 " + format_double(report.rank5) + ", mAP " +
                      format_double(report.map) + " (" +
                      std::to_string(report.num_queries) + " queries, " +
                      std::to_string(report.num_skipped) + " skipped)");
    write_snapshot(ctx, "eval-" + out_name);
}

namespace {

struct MethodPlan {
    std::string name;
    std::string kind;
    std::string input;
    std::string network;
    std::string eval_file;
    size_t feature_dim = 0;
    std::optional<size_t> param_count;
};

MethodPlan method_plan(const RunContext& ctx, const std::string& name) {
    std::string section = "method." + name;
    if (!ctx.cfg.has_section(section)) {
        throw ConfigError("missing config section [" + section + "]");
    }
    MethodPlan plan;
    plan.name = name;
    plan.kind = ctx.cfg.get_string(section, "kind", "network");
    plan.eval_file = ctx.cfg.get_string(section, "eval", "eval_" + name + ".json");
    if (plan.kind == "descriptor") {
        plan.input = ctx.cfg.get_string(section, "input", "corpus");
        plan.feature_dim = descriptor_config(ctx.cfg).descriptor_dim();
    } else if (plan.kind == "network") {
        plan.input = ctx.cfg.get_string(section, "input", "gallery.csv");
        plan.network = ctx.cfg.get_string(section, "network", name + ".json");
        MlpNetwork net = load_network(resolve(ctx, plan.network));
        plan.feature_dim = net.spec.feature_dim();
        plan.param_count = net.spec.parameter_count();
    } else {
        throw ConfigError("[" + section + "] kind must be 'descriptor' or 'network'");
    }
    return plan;
}

std::vector<std::string> bench_method_names(const RunContext& ctx,
                                            const std::vector<std::string>& override_list) {
    std::vector<std::string> names =
        override_list.empty() ? ctx.cfg.get_string_list("bench", "methods")
                              : override_list;
    if (names.empty()) {
        throw ConfigError("no bench methods configured ([bench] methods is empty)");
    }
    return names;
}

}  // namespace

void cmd_bench(const CommonOptions& opts, const std::vector<std::string>& methods) {
    RunContext ctx = make_context(opts);
    size_t warmup = ctx.cfg.get_size("bench", "warmup", 10);
    size_t repetitions = ctx.cfg.get_size("bench", "repetitions", 3);
    size_t threads = ctx.cfg.get_size("bench", "threads", 1);

    std::vector<TradeoffRowInput> rows;
    for (const std::string& name : bench_method_names(ctx, methods)) {
        MethodPlan plan = method_plan(ctx, name);
        ThroughputResult result;
        if (plan.kind == "descriptor") {
            ImageCorpus corpus = load_corpus(resolve(ctx, plan.input));
            DescriptorConfig dcfg = descriptor_config(ctx.cfg);
            double sink = 0.0;
            result = measure_throughput(
                name,
                [&](size_t i) { sink += extract_handcrafted(corpus.images[i], dcfg)[0]; },
                corpus.size(), warmup, repetitions, threads);
            g_bench_sink = sink;
        } else {
            MlpNetwork net = load_network(resolve(ctx, plan.network));
            FeatureDataset data = load_features(ctx, plan.input);
            Matrix inputs = feature_matrix(data);
            if (inputs.cols() != net.spec.input_dim) {
                throw ShapeError("bench input dim " + std::to_string(inputs.cols()) +
                                 " does not match network " +
                                 std::to_string(net.spec.input_dim));
            }
            double sink = 0.0;
            Matrix one_row(1, inputs.cols());
            result = measure_throughput(
                name,
                [&](size_t i) {
                    const double* src = inputs.row(i);
                    std::copy(src, src + inputs.cols(), one_row.row(0));
                    sink += extract_deep_features(net, one_row)(0, 0);
                },
                inputs.rows(), warmup, repetitions, threads);
            g_bench_sink = sink;
        }
        save_throughput(result, ctx.manifest,
                        ctx.out / ("throughput_" + name + ".json"));
        rows.push_back({name, load_eval_report(resolve(ctx, plan.eval_file)), result,
                        plan.feature_dim, plan.param_count, ctx.manifest});
        log_line(ctx, "bench " + name + ": " + format_double(result.images_per_second) +
                          " images/s");
    }

    TradeoffReport report = build_tradeoff_report(rows);
    save_tradeoff_csv(report, ctx.out / "tradeoff.csv");
    save_tradeoff_json(report, ctx.out / "tradeoff.json");
    save_scatter_csv(report, ctx.out / "scatter.csv");
    log_line(ctx, "bench: wrote tradeoff report with " +
                      std::to_string(report.rows.size()) + " rows");
    write_snapshot(ctx, "bench");
}

void cmd_report(const CommonOptions& opts, const std::vector<std::string>& methods) {
    RunContext ctx = make_context(opts);
    std::vector<TradeoffRowInput> rows;
    for (const std::string& name : bench_method_names(ctx, methods)) {
        MethodPlan plan = method_plan(ctx, name);
        std::string manifest;
        ThroughputResult result =
            load_throughput(ctx.out / ("throughput_" + name + ".json"), &manifest);
        rows.push_back({name, load_eval_report(resolve(ctx, plan.eval_file)), result,
                        plan.feature_dim, plan.param_count, manifest});
    }
    TradeoffReport report = build_tradeoff_report(rows);
    save_tradeoff_csv(report, ctx.out / "tradeoff.csv");
    save_tradeoff_json(report, ctx.out / "tradeoff.json");
    save_scatter_csv(report, ctx.out / "scatter.csv");
    log_line(ctx, "report: wrote tradeoff report with " +
                      std::to_string(report.rows.size()) + " rows");
    write_snapshot(ctx, "report");
}

}  // namespace reid
