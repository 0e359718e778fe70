#pragma once

// Deterministic file emission: CSV with shortest round-trip number formatting,
// JSON reports, and a manifest recording the configuration hash and seeds.
// Nothing here writes timestamps, hostnames, or any other run-local noise:
// two runs with the same configuration must produce byte-identical bodies.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace ylab {

inline const char* library_version() { return "0.1.0"; }

// Shortest decimal string that parses back to exactly the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc())
        throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, ptr);
}

inline double parse_double(const std::string& s) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e) {
        // from_chars rejects "inf"/"nan" spellings in some standard libraries
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        throw std::invalid_argument("parse_double: bad numeric cell '" + s + "'");
    }
    return v;
}

// --- CSV ---------------------------------------------------------------------

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void push_row(const std::vector<std::string>& r) {
        if (r.size() != columns.size())
            throw std::invalid_argument("CsvTable: row width does not match header");
        rows.push_back(r);
    }
};

inline std::string csv_to_string(const CsvTable& t) {
    std::ostringstream os;
    for (size_t c = 0; c < t.columns.size(); ++c) {
        if (t.columns[c].find_first_of(",\n\"") != std::string::npos)
            throw std::invalid_argument("csv_to_string: cells must not need quoting");
        os << t.columns[c] << (c + 1 < t.columns.size() ? "," : "\n");
    }
    for (const auto& row : t.rows)
        for (size_t c = 0; c < row.size(); ++c) {
            if (row[c].find_first_of(",\n\"") != std::string::npos)
                throw std::invalid_argument("csv_to_string: cells must not need quoting");
            os << row[c] << (c + 1 < row.size() ? "," : "\n");
        }
    return os.str();
}

inline void write_text_file(const std::string& path, const std::string& body) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_text_file: cannot open " + path);
    f << body;
    if (!f) throw std::runtime_error("write_text_file: write failed for " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_text_file: cannot open " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

inline CsvTable parse_csv(const std::string& body) {
    CsvTable t;
    std::istringstream is(body);
    std::string line;
    bool header = true;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        size_t start = 0;
        for (;;) {
            const size_t comma = line.find(',', start);
            if (comma == std::string::npos) {
                cells.push_back(line.substr(start));
                break;
            }
            cells.push_back(line.substr(start, comma - start));
            start = comma + 1;
        }
        if (header) {
            t.columns = std::move(cells);
            header = false;
        } else {
            t.push_row(cells);
        }
    }
    return t;
}

inline CsvTable read_csv(const std::string& path) { return parse_csv(read_text_file(path)); }

// --- config hash and manifest --------------------------------------------------

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex16(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[size_t(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

// Canonical hash of a configuration: nlohmann's dump() emits object keys in
// sorted order, so semantically equal configs hash equally.
inline std::string config_hash(const nlohmann::json& config) {
    return hex16(fnv1a64(config.dump()));
}

struct Manifest {
    std::string command;
    nlohmann::json config;
    std::string hash;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> outputs;
};

inline nlohmann::json manifest_to_json(const Manifest& m) {
    nlohmann::json j;
    j["command"] = m.command;
    j["config"] = m.config;
    j["config_hash"] = m.hash;
    j["seeds"] = m.seeds;
    j["library_version"] = library_version();
    j["outputs"] = m.outputs;
    return j;
}

} // namespace ylab
