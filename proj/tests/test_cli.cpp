// ============================================================================
// test_cli.cpp
// End-to-end harness for the command line pipeline
// ============================================================================
//
// Drives the real binary through a full run (data generation, metric fitting,
// teacher/student training, distillation, sweep, evaluation, benchmark) and
// checks artifacts, determinism across output directories, exit codes and the
// machine-readable error channel.
//
// RUN: test_cli --cli <path-to-binary> --workdir <scratch-dir>
// ============================================================================

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

int g_pass = 0;
int g_fail = 0;

void report(bool ok, const std::string& what) {
    if (ok) {
        ++g_pass;
        std::cout << "[PASS] " << what << "\n";
    } else {
        ++g_fail;
        std::cout << "[FAIL] " << what << "\n";
    }
}

#define CHECK_TRUE(cond, what) report(static_cast<bool>(cond), what)

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path g_workdir;
std::string g_cli;

RunResult run_cli(const std::string& args) {
    fs::path out_file = g_workdir / "stdout.txt";
    fs::path err_file = g_workdir / "stderr.txt";
    std::string cmd = g_cli + " " + args + " > " + out_file.string() + " 2> " +
                      err_file.string();
    int status = std::system(cmd.c_str());
    RunResult r;
#ifdef _WIN32
    r.exit_code = status;
#else
    r.exit_code = WEXITSTATUS(status);
#endif
    r.out = read_file(out_file);
    r.err = read_file(err_file);
    return r;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

std::string pipeline_config(const std::string& out_dir) {
    return
        "[run]\n"
        "seed = 5\n"
        "out = " + out_dir + "\n"
        "[dataset]\n"
        "num_identities = 12\n"
        "records_per_identity = 6\n"
        "num_cameras = 2\n"
        "dim = 8\n"
        "intra_class_stddev = 0.6\n"
        "camera_shift_stddev = 0.4\n"
        "class_center_stddev = 3\n"
        "[split]\n"
        "train_fraction = 0.5\n"
        "queries_per_test_identity = 1\n"
        "[metric]\n"
        "input = features\n"
        "pca_dim = 4\n"
        "[teacher]\n"
        "hidden_widths = 32\n"
        "[student]\n"
        "hidden_widths = 32\n"
        "alpha = 0.25\n"
        "[train]\n"
        "input = features\n"
        "learning_rate = 0.05\n"
        "epochs = 15\n"
        "batch_size = 8\n"
        "[distill]\n"
        "temperature = 3\n"
        "lambda = 0.01\n"
        "[sweep]\n"
        "temperatures = 1,3\n"
        "lambdas = 0.0001,0.01\n"
        "seeds = 1\n"
        "[bench]\n"
        "warmup = 2\n"
        "repetitions = 3\n"
        "methods = teacher,student_distilled\n"
        "[eval.teacher]\n"
        "network = teacher.json\n"
        "[eval.student_distilled]\n"
        "network = student_distilled.json\n"
        "[eval.kissme]\n"
        "distance = kissme\n"
        "pca = pca.json\n"
        "[eval.xqda]\n"
        "distance = xqda\n"
        "[method.teacher]\n"
        "kind = network\n"
        "[method.student_distilled]\n"
        "kind = network\n";
}

nlohmann::json error_json(const RunResult& r) {
    try {
        return nlohmann::json::parse(r.err);
    } catch (...) {
        return nlohmann::json();
    }
}

void run_full_pipeline(const fs::path& cfg_path) {
    struct Step {
        const char* what;
        std::string args;
    };
    std::string c = " -c " + cfg_path.string();
    std::vector<Step> steps = {
        {"gen-data", "gen-data" + c},
        {"fit-metric", "fit-metric" + c},
        {"train teacher", "train --role teacher" + c},
        {"train student", "train --role student" + c},
        {"distill", "distill" + c},
        {"eval teacher", "eval --name teacher" + c},
        {"eval student", "eval --name student_distilled" + c},
        {"eval kissme", "eval --name kissme" + c},
        {"eval xqda", "eval --name xqda" + c},
        {"eval default euclidean", "eval" + c},
        {"sweep", "sweep" + c},
        {"bench", "bench" + c},
        {"report", "report" + c},
    };
    for (const Step& s : steps) {
        RunResult r = run_cli(s.args);
        CHECK_TRUE(r.exit_code == 0, std::string(s.what) + " exits 0" +
                                         (r.exit_code ? " (stderr: " + r.err + ")" : ""));
    }
}

void check_artifacts(const fs::path& out) {
    const char* files[] = {
        "train.csv",         "query.csv",
        "gallery.csv",       "pca.json",
        "kissme.json",       "xqda.json",
        "metric_log.json",   "teacher.json",
        "student_independent.json", "student_distilled.json",
        "trainlog_teacher.json",    "trainlog_student_distilled.json",
        "eval_teacher.json", "eval_student_distilled.json",
        "eval_kissme.json",  "eval_xqda.json",
        "eval_default.json", "sweep_report.csv",
        "sweep_summary.json", "throughput_teacher.json",
        "throughput_student_distilled.json", "tradeoff.csv",
        "tradeoff.json",     "scatter.csv",
        "resolved_gen-data.ini", "resolved_sweep.ini",
    };
    for (const char* f : files) {
        CHECK_TRUE(fs::exists(out / f), std::string("artifact exists: ") + f);
    }
}

void check_pipeline_outputs(const fs::path& out) {
    auto eval_teacher = nlohmann::json::parse(read_file(out / "eval_teacher.json"));
    double map = eval_teacher.at("map").get<double>();
    CHECK_TRUE(map >= 0.0 && map <= 1.0, "teacher mAP lies in [0, 1]");

    auto tradeoff = nlohmann::json::parse(read_file(out / "tradeoff.json"));
    CHECK_TRUE(tradeoff.at("rows").size() == 2, "tradeoff has one row per method");
    double prev = 1e9;
    bool sorted = true;
    for (const auto& row : tradeoff.at("rows")) {
        double m = row.at("map_pct").get<double>();
        if (m > prev) sorted = false;
        prev = m;
    }
    CHECK_TRUE(sorted, "tradeoff rows are sorted by mAP descending");

    std::string sweep_csv = read_file(out / "sweep_report.csv");
    CHECK_TRUE(sweep_csv.rfind("T,lambda,seed,rank1,rank5,map,arm\n", 0) == 0,
               "sweep csv carries the expected header");
    size_t lines = 0;
    for (char ch : sweep_csv) {
        if (ch == '\n') ++lines;
    }
    // header + teacher + independent + 2x2 grid
    CHECK_TRUE(lines == 1 + 1 + 1 + 4, "sweep csv has one row per arm and cell");
}

void check_determinism() {
    fs::path cfg_a = g_workdir / "run_a.ini";
    fs::path cfg_b = g_workdir / "run_b.ini";
    write_text(cfg_a, pipeline_config((g_workdir / "out_a").string()));
    write_text(cfg_b, pipeline_config((g_workdir / "out_b").string()));
    run_full_pipeline(cfg_a);
    run_full_pipeline(cfg_b);
    check_artifacts(g_workdir / "out_a");
    check_pipeline_outputs(g_workdir / "out_a");

    const char* stable[] = {
        "train.csv",       "query.csv",          "gallery.csv",
        "pca.json",        "kissme.json",        "xqda.json",
        "teacher.json",    "student_independent.json",
        "student_distilled.json",                "eval_teacher.json",
        "eval_student_distilled.json",           "eval_kissme.json",
        "eval_xqda.json",  "eval_default.json",  "sweep_report.csv",
        "sweep_summary.json",
    };
    for (const char* f : stable) {
        std::string a = read_file(g_workdir / "out_a" / f);
        std::string b = read_file(g_workdir / "out_b" / f);
        CHECK_TRUE(!a.empty() && a == b,
                   std::string("byte-identical across runs: ") + f);
    }
}

void check_error_channel() {
    RunResult missing = run_cli("gen-data -c " + (g_workdir / "absent.ini").string());
    CHECK_TRUE(missing.exit_code == 3, "missing config exits 3 (io)");
    CHECK_TRUE(error_json(missing).value("error", "") == "io",
               "missing config reports an io error on stderr");

    fs::path bad_key = g_workdir / "bad_key.ini";
    write_text(bad_key, "[run]\nseed = 1\nsede = 2\n");
    RunResult unknown = run_cli("gen-data -c " + bad_key.string());
    CHECK_TRUE(unknown.exit_code == 2, "unknown config key exits 2");
    CHECK_TRUE(error_json(unknown).value("error", "") == "config",
               "unknown key reports a config error");

    fs::path mini = g_workdir / "mini.ini";
    write_text(mini, pipeline_config((g_workdir / "out_err").string()));
    RunResult role = run_cli("train --role banana -c " + mini.string());
    CHECK_TRUE(role.exit_code == 2, "bad --role exits 2");

    RunResult section = run_cli("eval --name nosuch -c " + mini.string());
    CHECK_TRUE(section.exit_code == 2, "missing eval section exits 2");

    RunResult no_data = run_cli("fit-metric -c " + mini.string());
    CHECK_TRUE(no_data.exit_code == 3, "fit-metric before gen-data exits 3");

    RunResult nosub = run_cli("");
    CHECK_TRUE(nosub.exit_code == 2, "missing subcommand exits 2");
    CHECK_TRUE(error_json(nosub).value("error", "") == "usage",
               "missing subcommand reports a usage error");

    RunResult help = run_cli("--help");
    CHECK_TRUE(help.exit_code == 0, "--help exits 0");

    // corrupt model file: parse error, exit 3
    fs::path out_a = g_workdir / "out_a";
    fs::path cfg_a = g_workdir / "run_a.ini";
    std::string teacher_backup = read_file(out_a / "teacher.json");
    write_text(out_a / "teacher.json", "this is not json");
    RunResult corrupt = run_cli("eval --name teacher -c " + cfg_a.string());
    CHECK_TRUE(corrupt.exit_code == 3, "corrupt model file exits 3");
    CHECK_TRUE(error_json(corrupt).value("error", "") == "parse",
               "corrupt model reports a parse error");
    write_text(out_a / "teacher.json", teacher_backup);

    // mismatched feature dimensions: shape error, exit 4
    write_text(out_a / "tiny.csv", "id,camera,f0\n1,0,0.5\n1,1,0.25\n");
    fs::path shape_cfg = g_workdir / "shape.ini";
    write_text(shape_cfg, pipeline_config((g_workdir / "out_a").string()) +
                              "[eval.bad]\nquery = tiny.csv\n");
    RunResult shape = run_cli("eval --name bad -c " + shape_cfg.string());
    CHECK_TRUE(shape.exit_code == 4, "dimension mismatch exits 4");
    CHECK_TRUE(error_json(shape).value("error", "") == "shape",
               "dimension mismatch reports a shape error");

    RunResult quiet = run_cli("eval --name teacher --quiet -c " + cfg_a.string());
    CHECK_TRUE(quiet.exit_code == 0 && quiet.out.empty(),
               "--quiet silences progress output");
}

void check_overrides() {
    fs::path cfg = g_workdir / "override.ini";
    write_text(cfg, pipeline_config((g_workdir / "out_override").string()));
    fs::path moved = g_workdir / "out_moved";
    RunResult r = run_cli("gen-data --seed 9 --out " + moved.string() + " -c " +
                          cfg.string());
    CHECK_TRUE(r.exit_code == 0, "gen-data with overrides exits 0");
    CHECK_TRUE(fs::exists(moved / "train.csv"), "--out redirects artifacts");
    CHECK_TRUE(!fs::exists(g_workdir / "out_override" / "train.csv"),
               "--out leaves the configured directory untouched");
    std::string snapshot = read_file(moved / "resolved_gen-data.ini");
    CHECK_TRUE(snapshot.find("seed = 9") != std::string::npos,
               "--seed lands in the resolved snapshot");
    std::string original = read_file(g_workdir / "out_a" / "train.csv");
    std::string reseeded = read_file(moved / "train.csv");
    CHECK_TRUE(!reseeded.empty() && reseeded != original,
               "--seed changes the generated data");
}

}  // namespace

int main(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; i += 2) {
        std::string flag = argv[i];
        if (flag == "--cli") g_cli = argv[i + 1];
        if (flag == "--workdir") g_workdir = argv[i + 1];
    }
    if (g_cli.empty() || g_workdir.empty()) {
        std::cerr << "usage: test_cli --cli <binary> --workdir <dir>\n";
        return 2;
    }
    fs::remove_all(g_workdir);
    fs::create_directories(g_workdir);

    check_determinism();
    check_error_channel();
    check_overrides();

    std::cout << "\n" << g_pass << " passed, " << g_fail << " failed\n";
    return g_fail == 0 ? 0 : 1;
}
