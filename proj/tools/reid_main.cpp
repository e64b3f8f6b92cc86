#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "reid/commands.hpp"
#include "reid/errors.hpp"

namespace {

int exit_code_for(reid::Error::Kind kind) {
    switch (kind) {
        case reid::Error::Kind::Config:
            return 2;
        case reid::Error::Kind::Io:
        case reid::Error::Kind::Parse:
            return 3;
        case reid::Error::Kind::Shape:
            return 4;
        default:
            return 5;
    }
}

void print_error(const std::string& kind, const std::string& message) {
    nlohmann::json j{{"error", kind}, {"message", message}};
    std::cerr << j.dump() << '\n';
}

void add_common(CLI::App* cmd, reid::CommonOptions& opts, std::string& config,
                std::optional<uint64_t>& seed, std::optional<std::string>& out,
                bool& quiet) {
    cmd->add_option("-c,--config", config, "configuration file")->required();
    cmd->add_option("--seed", seed, "override [run] seed");
    cmd->add_option("--out", out, "override [run] out directory");
    cmd->add_flag("--quiet", quiet, "suppress progress output");
    cmd->parse_complete_callback([&]() {
        opts.config_path = config;
        opts.seed_override = seed;
        opts.out_override = out;
        opts.quiet_override = quiet;
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"person re-identification pipeline"};
    app.require_subcommand(1);

    reid::CommonOptions opts;
    std::string config;
    std::optional<uint64_t> seed;
    std::optional<std::string> out;
    bool quiet = false;
    std::string role = "teacher";
    std::string eval_name;
    std::vector<std::string> methods;

    struct Entry {
        CLI::App* cmd;
        std::function<void()> run;
    };
    std::vector<Entry> entries;
    auto sub = [&](const std::string& name, const std::string& desc,
                   std::function<void()> run) {
        CLI::App* cmd = app.add_subcommand(name, desc);
        add_common(cmd, opts, config, seed, out, quiet);
        entries.push_back({cmd, std::move(run)});
        return cmd;
    };

    sub("gen-data", "generate a synthetic labeled dataset and its splits",
        [&] { reid::cmd_gen_data(opts); });
    sub("extract", "compute hand-crafted descriptors for the image corpus",
        [&] { reid::cmd_extract(opts); });
    sub("fit-metric", "fit PCA, KISSME and XQDA models on the training split",
        [&] { reid::cmd_fit_metric(opts); });
    CLI::App* train = sub("train", "train a classifier network",
                          [&] { reid::cmd_train(opts, role); });
    train->add_option("--role", role, "teacher or student")->required();
    sub("distill", "train a student against a trained teacher",
        [&] { reid::cmd_distill(opts); });
    sub("sweep", "grid over distillation temperature and lambda",
        [&] { reid::cmd_sweep(opts); });
    CLI::App* eval_cmd = sub("eval", "rank gallery records and score CMC/mAP",
                             [&] { reid::cmd_eval(opts, eval_name); });
    eval_cmd->add_option("--name", eval_name, "eval.<name> config section");
    CLI::App* bench = sub("bench", "measure extraction throughput per method",
                          [&] { reid::cmd_bench(opts, methods); });
    bench->add_option("--methods", methods, "method names to benchmark");
    CLI::App* report = sub("report", "rebuild the trade-off report from saved results",
                           [&] { reid::cmd_report(opts, methods); });
    report->add_option("--methods", methods, "method names to include");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("usage", e.what());
        return 2;
    }

    try {
        for (const Entry& entry : entries) {
            if (entry.cmd->parsed()) entry.run();
        }
    } catch (const reid::Error& e) {
        print_error(e.kind_name(), e.what());
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        print_error("internal", e.what());
        return 5;
    }
    return 0;
}
