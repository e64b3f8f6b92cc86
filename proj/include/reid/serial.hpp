#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "reid/errors.hpp"
#include "reid/matrix.hpp"

namespace reid {

using Json = nlohmann::json;

inline Json matrix_to_json(const Matrix& m) {
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"values", m.data()}};
}

inline Matrix matrix_from_json(const Json& j, const std::string& what) {
    size_t rows = j.at("rows").get<size_t>();
    size_t cols = j.at("cols").get<size_t>();
    std::vector<double> values = j.at("values").get<std::vector<double>>();
    if (values.size() != rows * cols) {
        throw ParseError(what + ": matrix has " + std::to_string(values.size()) +
                         " values, expected " + std::to_string(rows * cols));
    }
    Matrix m(rows, cols);
    m.data() = std::move(values);
    return m;
}

inline void save_json(const Json& j, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

inline Json load_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    Json j;
    try {
        in >> j;
    } catch (const Json::parse_error& e) {
        throw ParseError("invalid JSON in " + path.string() + ": " + e.what());
    }
    return j;
}

inline void expect_kind(const Json& j, const std::string& kind,
                        const std::filesystem::path& path) {
    if (!j.contains("kind") || j.at("kind").get<std::string>() != kind) {
        throw ParseError(path.string() + ": expected a '" + kind + "' model file");
    }
}

// Field extraction from untrusted files: turns missing keys and type
// mismatches into ParseError with the file path attached.
template <typename F>
auto parse_guard(const std::filesystem::path& path, F&& extract) {
    try {
        return extract();
    } catch (const Json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

}  // namespace reid
