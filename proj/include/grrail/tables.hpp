// CSV plumbing: subject manifests, feature tables and key=value run configs.
#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "grrail/common.hpp"
#include "grrail/volume.hpp"

namespace grrail {

/// Shortest round-trip text for a double (17 significant digits).
inline std::string format_number(double v) {
    if (v == 0.0) return "0";  // folds -0
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_number(const std::string& s, const std::string& what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw Error("malformed number", what + ": '" + s + "'");
    }
    if (used != s.size()) throw Error("malformed number", what + ": '" + s + "'");
    return v;
}

namespace detail {

/// Unquoted comma-separated fields; quotes are rejected.
inline std::vector<std::string> split_csv_line(const std::string& line) {
    if (line.find('"') != std::string::npos) throw Error("malformed csv", "quoted fields are not supported");
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

inline void check_field(const std::string& s, const char* what) {
    if (s.find_first_of(",\"\n\r") != std::string::npos) throw Error("invalid csv field", std::string(what) + " '" + s + "'");
}

}  // namespace detail

struct ManifestEntry {
    std::string id;
    std::filesystem::path volume;  // absolute or relative to the manifest's directory
    std::filesystem::path mask;
    int label = 0;
    bool test = false;
};

inline constexpr const char* kManifestHeader = "subject_id,volume,mask,label,split";

/// Reads a manifest; returned paths are resolved against its directory.
inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    const auto rows = detail::read_csv(path);
    if (rows.empty()) throw Error("malformed manifest", "missing header");
    const std::vector<std::string> expected{"subject_id", "volume", "mask", "label", "split"};
    if (rows[0] != expected) throw Error("malformed manifest", std::string("header must be ") + kManifestHeader);
    const auto base = path.parent_path();
    std::vector<ManifestEntry> out;
    std::map<std::string, int> seen;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& f = rows[r];
        const std::string where = "line " + std::to_string(r + 1);
        if (f.size() != 5) throw Error("malformed manifest", where + ": expected 5 fields");
        ManifestEntry e;
        e.id = f[0];
        if (e.id.empty()) throw Error("malformed manifest", where + ": empty subject id");
        if (seen[e.id]++) throw Error("malformed manifest", where + ": duplicate subject id " + e.id);
        e.volume = base / f[1];
        e.mask = base / f[2];
        if (f[3] == "0") e.label = 0;
        else if (f[3] == "1") e.label = 1;
        else throw Error("malformed manifest", where + ": label must be 0 or 1");
        if (f[4] == "train") e.test = false;
        else if (f[4] == "test") e.test = true;
        else throw Error("malformed manifest", where + ": split must be train or test");
        out.push_back(std::move(e));
    }
    if (out.empty()) throw Error("malformed manifest", "no subjects");
    return out;
}

/// Writes entries with paths made relative to the manifest's directory.
inline void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
    const auto base = std::filesystem::absolute(path).parent_path();
    auto rel = [&](const std::filesystem::path& p) {
        return std::filesystem::absolute(p).lexically_normal().lexically_relative(base.lexically_normal()).generic_string();
    };
    std::ostringstream out;
    out << kManifestHeader << "\n";
    for (const auto& e : entries) {
        detail::check_field(e.id, "subject id");
        const auto v = rel(e.volume), m = rel(e.mask);
        detail::check_field(v, "path");
        detail::check_field(m, "path");
        out << e.id << ',' << v << ',' << m << ',' << e.label << ',' << (e.test ? "test" : "train") << "\n";
    }
    detail::write_file(path, out.str());
}

/// Feature table: first column `key` (subject_id), then one column per feature.
struct FeatureTable {
    std::string key = "subject_id";
    std::vector<std::string> features;
    std::vector<std::string> ids;
    std::vector<std::vector<double>> values;
};

inline void write_feature_table(const std::filesystem::path& path, const FeatureTable& t) {
    std::ostringstream out;
    out << t.key;
    for (const auto& f : t.features) {
        detail::check_field(f, "feature name");
        out << ',' << f;
    }
    out << "\n";
    for (std::size_t r = 0; r < t.ids.size(); ++r) {
        if (t.values[r].size() != t.features.size()) throw Error("ragged table", "row " + t.ids[r]);
        detail::check_field(t.ids[r], "subject id");
        out << t.ids[r];
        for (double v : t.values[r]) out << ',' << format_number(v);
        out << "\n";
    }
    detail::write_file(path, out.str());
}

inline FeatureTable read_feature_table(const std::filesystem::path& path) {
    const auto rows = detail::read_csv(path);
    if (rows.empty() || rows[0].empty() || rows[0][0] != "subject_id")
        throw Error("malformed feature table", "first column must be subject_id");
    FeatureTable t;
    t.features.assign(rows[0].begin() + 1, rows[0].end());
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size())
            throw Error("malformed feature table", "line " + std::to_string(r + 1) + " has the wrong field count");
        t.ids.push_back(rows[r][0]);
        std::vector<double> x;
        for (std::size_t c = 1; c < rows[r].size(); ++c) x.push_back(parse_number(rows[r][c], t.features[c - 1]));
        t.values.push_back(std::move(x));
    }
    return t;
}

/// key=value run configuration; '#' starts a comment line.
inline std::vector<std::pair<std::string, std::string>> read_config(const std::filesystem::path& path) {
    return parse_key_values(detail::read_file(path));
}

}  // namespace grrail
