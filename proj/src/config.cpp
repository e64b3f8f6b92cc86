#include "reid/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "reid/common.hpp"

namespace reid {

ConfigFile ConfigFile::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config: " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_string(text.str(), path.string());
}

ConfigFile ConfigFile::parse_string(const std::string& text, const std::string& origin) {
    ConfigFile cfg;
    std::string section;
    size_t line_no = 0;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        std::string where = origin + ":" + std::to_string(line_no);
        if (t.front() == '[') {
            if (t.back() != ']' || t.size() < 3) {
                throw ConfigError(where + ": malformed section header '" + t + "'");
            }
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty()) throw ConfigError(where + ": empty section name");
            cfg.sections_[section];  // sections may legitimately stay empty
            continue;
        }
        size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(where + ": expected 'key = value', got '" + t + "'");
        }
        if (section.empty()) {
            throw ConfigError(where + ": key outside any [section]");
        }
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": empty key");
        auto& sec = cfg.sections_[section];
        if (sec.count(key)) {
            throw ConfigError(where + ": duplicate key '" + key + "' in [" + section + "]");
        }
        sec[key] = value;
    }
    return cfg;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    return it != sections_.end() && it->second.count(key) > 0;
}

bool ConfigFile::has_section(const std::string& section) const {
    return sections_.count(section) > 0;
}

std::string ConfigFile::require_string(const std::string& section,
                                       const std::string& key) const {
    auto it = sections_.find(section);
    if (it == sections_.end() || !it->second.count(key)) {
        throw ConfigError("missing required key [" + section + "] " + key);
    }
    return it->second.at(key);
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key,
                                   const std::string& fallback) const {
    return has(section, key) ? sections_.at(section).at(key) : fallback;
}

double ConfigFile::get_double(const std::string& section, const std::string& key,
                              double fallback) const {
    if (!has(section, key)) return fallback;
    try {
        return parse_double_strict(sections_.at(section).at(key),
                                   "[" + section + "] " + key);
    } catch (const ParseError& e) {
        throw ConfigError(e.what());
    }
}

uint64_t ConfigFile::get_u64(const std::string& section, const std::string& key,
                             uint64_t fallback) const {
    if (!has(section, key)) return fallback;
    const std::string& raw = sections_.at(section).at(key);
    uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
    if (ec != std::errc() || ptr != raw.data() + raw.size()) {
        throw ConfigError("invalid unsigned integer '" + raw + "' for [" + section +
                          "] " + key);
    }
    return value;
}

size_t ConfigFile::get_size(const std::string& section, const std::string& key,
                            size_t fallback) const {
    return static_cast<size_t>(get_u64(section, key, fallback));
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key,
                          bool fallback) const {
    if (!has(section, key)) return fallback;
    const std::string& raw = sections_.at(section).at(key);
    if (raw == "true") return true;
    if (raw == "false") return false;
    throw ConfigError("invalid boolean '" + raw + "' for [" + section + "] " + key +
                      " (use true or false)");
}

std::vector<double> ConfigFile::get_double_list(
    const std::string& section, const std::string& key,
    const std::vector<double>& fallback) const {
    if (!has(section, key)) return fallback;
    std::vector<double> out;
    for (const std::string& item : split_string(sections_.at(section).at(key), ',')) {
        std::string t = trim(item);
        if (t.empty()) {
            throw ConfigError("empty list item in [" + section + "] " + key);
        }
        try {
            out.push_back(parse_double_strict(t, "[" + section + "] " + key));
        } catch (const ParseError& e) {
            throw ConfigError(e.what());
        }
    }
    return out;
}

std::vector<uint64_t> ConfigFile::get_u64_list(
    const std::string& section, const std::string& key,
    const std::vector<uint64_t>& fallback) const {
    if (!has(section, key)) return fallback;
    std::vector<uint64_t> out;
    for (const std::string& item : split_string(sections_.at(section).at(key), ',')) {
        std::string t = trim(item);
        uint64_t value = 0;
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
        if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
            throw ConfigError("invalid unsigned integer '" + t + "' in [" + section +
                              "] " + key);
        }
        out.push_back(value);
    }
    return out;
}

std::vector<size_t> ConfigFile::get_size_list(
    const std::string& section, const std::string& key,
    const std::vector<size_t>& fallback) const {
    std::vector<uint64_t> fb(fallback.begin(), fallback.end());
    std::vector<uint64_t> raw = get_u64_list(section, key, fb);
    return std::vector<size_t>(raw.begin(), raw.end());
}

std::vector<std::string> ConfigFile::get_string_list(const std::string& section,
                                                     const std::string& key) const {
    std::vector<std::string> out;
    if (!has(section, key)) return out;
    for (const std::string& item : split_string(sections_.at(section).at(key), ',')) {
        std::string t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

void ConfigFile::set(const std::string& section, const std::string& key,
                     const std::string& value) {
    sections_[section][key] = value;
}

std::string ConfigFile::dump() const {
    std::ostringstream out;
    bool first = true;
    for (const auto& [section, keys] : sections_) {
        if (!first) out << '\n';
        first = false;
        out << '[' << section << "]\n";
        for (const auto& [key, value] : keys) {
            out << key << " = " << value << '\n';
        }
    }
    return out.str();
}

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> kSchema{
        {"run", {"seed", "out", "quiet"}},
        {"dataset",
         {"num_identities", "records_per_identity", "num_cameras", "dim",
          "intra_class_stddev", "camera_shift_stddev", "class_center_stddev",
          "images", "image_height", "image_width"}},
        {"split", {"train_fraction", "queries_per_test_identity"}},
        {"descriptor",
         {"num_stripes", "hue_bins", "sat_bins", "val_bins", "texture_threshold",
          "subwindow", "subwindow_stride"}},
        {"metric",
         {"input", "pca_dim", "ridge", "xqda_max_dim", "fit_pca", "fit_kissme",
          "fit_xqda"}},
        {"teacher", {"hidden_widths", "alpha"}},
        {"student", {"hidden_widths", "alpha"}},
        {"train",
         {"learning_rate", "decay_factor", "decay_every_steps", "momentum",
          "batch_size", "epochs", "shuffle", "input"}},
        {"distill", {"temperature", "lambda", "t_squared_rescale"}},
        {"sweep", {"temperatures", "lambdas", "seeds"}},
        {"bench", {"warmup", "repetitions", "threads", "methods"}},
    };
    return kSchema;
}

const std::set<std::string>& eval_keys() {
    static const std::set<std::string> kKeys{
        "query", "gallery", "distance", "model", "pca", "network",
        "exclude_same_camera"};
    return kKeys;
}

const std::set<std::string>& method_keys() {
    static const std::set<std::string> kKeys{"kind", "input", "network", "eval"};
    return kKeys;
}

}  // namespace

void validate_schema(const ConfigFile& cfg) {
    for (const auto& [section, keys] : cfg.sections()) {
        const std::set<std::string>* allowed = nullptr;
        if (auto it = schema().find(section); it != schema().end()) {
            allowed = &it->second;
        } else if (section == "eval" || section.starts_with("eval.")) {
            allowed = &eval_keys();
        } else if (section.starts_with("method.")) {
            allowed = &method_keys();
        } else {
            throw ConfigError("unknown config section [" + section + "]");
        }
        for (const auto& [key, value] : keys) {
            if (!allowed->count(key)) {
                throw ConfigError("unknown key '" + key + "' in [" + section + "]");
            }
        }
    }
}

void materialize_defaults(ConfigFile& cfg) {
    auto put = [&](const std::string& s, const std::string& k, const std::string& v) {
        if (!cfg.has(s, k)) cfg.set(s, k, v);
    };
    put("run", "seed", "1");
    put("run", "out", "out");
    put("run", "quiet", "false");

    put("dataset", "num_identities", "20");
    put("dataset", "records_per_identity", "10");
    put("dataset", "num_cameras", "2");
    put("dataset", "dim", "16");
    put("dataset", "intra_class_stddev", "1");
    put("dataset", "camera_shift_stddev", "1");
    put("dataset", "class_center_stddev", "3");
    put("dataset", "images", "false");
    put("dataset", "image_height", "48");
    put("dataset", "image_width", "24");

    put("split", "train_fraction", "0.5");
    put("split", "queries_per_test_identity", "1");

    put("descriptor", "num_stripes", "8");
    put("descriptor", "hue_bins", "8");
    put("descriptor", "sat_bins", "8");
    put("descriptor", "val_bins", "8");
    put("descriptor", "texture_threshold", "0.03");
    put("descriptor", "subwindow", "10");
    put("descriptor", "subwindow_stride", "5");

    put("metric", "input", "descriptors");
    put("metric", "pca_dim", "0");
    put("metric", "ridge", "1e-06");
    put("metric", "xqda_max_dim", "76");
    put("metric", "fit_pca", "true");
    put("metric", "fit_kissme", "true");
    put("metric", "fit_xqda", "true");

    put("teacher", "hidden_widths", "128,64");
    put("teacher", "alpha", "1");
    put("student", "hidden_widths", "128,64");
    put("student", "alpha", "0.25");

    put("train", "learning_rate", "0.01");
    put("train", "decay_factor", "0.1");
    put("train", "decay_every_steps", "20000");
    put("train", "momentum", "0.9");
    put("train", "batch_size", "16");
    put("train", "epochs", "30");
    put("train", "shuffle", "true");
    put("train", "input", "features");

    put("distill", "temperature", "3");
    put("distill", "lambda", "0.0001");
    put("distill", "t_squared_rescale", "false");

    put("sweep", "temperatures", "1,2,3,4,5,10,15,20,25,30");
    put("sweep", "lambdas", "0.0001,0.001,0.01");
    put("sweep", "seeds", "1");

    put("bench", "warmup", "10");
    put("bench", "repetitions", "3");
    put("bench", "threads", "1");
    put("bench", "methods", "");
}

}  // namespace reid
