#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "reid/config.hpp"

namespace reid {

struct CommonOptions {
    std::filesystem::path config_path;
    std::optional<uint64_t> seed_override;
    std::optional<std::string> out_override;
    bool quiet_override = false;
};

// Parsed config with overrides applied, defaults materialized, the output
// directory created, and the run manifest (config+seed hash) computed.
struct RunContext {
    ConfigFile cfg;
    std::filesystem::path out;
    uint64_t seed = 0;
    bool quiet = false;
    std::string manifest;
};

RunContext make_context(const CommonOptions& opts);

void cmd_gen_data(const CommonOptions& opts);
void cmd_extract(const CommonOptions& opts);
void cmd_fit_metric(const CommonOptions& opts);
void cmd_train(const CommonOptions& opts, const std::string& role);
void cmd_distill(const CommonOptions& opts);
void cmd_sweep(const CommonOptions& opts);
void cmd_eval(const CommonOptions& opts, const std::string& name);
void cmd_bench(const CommonOptions& opts, const std::vector<std::string>& methods);
void cmd_report(const CommonOptions& opts, const std::vector<std::string>& methods);

}  // namespace reid
