#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reid/errors.hpp"

namespace reid {

// Flat INI-style configuration: [section] headers over key = value lines.
// '#' and ';' start comments. Keys are validated against a fixed schema so
// typos fail loudly instead of silently using a default.
class ConfigFile {
public:
    static ConfigFile parse_file(const std::filesystem::path& path);
    static ConfigFile parse_string(const std::string& text, const std::string& origin);

    bool has(const std::string& section, const std::string& key) const;
    bool has_section(const std::string& section) const;

    std::string require_string(const std::string& section, const std::string& key) const;
    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key,
                      double fallback) const;
    uint64_t get_u64(const std::string& section, const std::string& key,
                     uint64_t fallback) const;
    size_t get_size(const std::string& section, const std::string& key,
                    size_t fallback) const;
    bool get_bool(const std::string& section, const std::string& key,
                  bool fallback) const;
    std::vector<double> get_double_list(const std::string& section,
                                        const std::string& key,
                                        const std::vector<double>& fallback) const;
    std::vector<uint64_t> get_u64_list(const std::string& section,
                                       const std::string& key,
                                       const std::vector<uint64_t>& fallback) const;
    std::vector<size_t> get_size_list(const std::string& section,
                                      const std::string& key,
                                      const std::vector<size_t>& fallback) const;
    std::vector<std::string> get_string_list(const std::string& section,
                                             const std::string& key) const;

    void set(const std::string& section, const std::string& key,
             const std::string& value);

    // Canonical text form: sorted sections and keys, one blank line between
    // sections. Identical configurations dump to identical bytes.
    std::string dump() const;

    const std::map<std::string, std::map<std::string, std::string>>& sections() const {
        return sections_;
    }

private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

// Throws ConfigError on any section or key outside the schema. eval.* and
// method.* section families are allowed with their own key sets.
void validate_schema(const ConfigFile& cfg);

// Fills every absent known key of the fixed sections with its default, so a
// dumped snapshot states the complete effective configuration.
void materialize_defaults(ConfigFile& cfg);

}  // namespace reid
