#pragma once

// Shared test utilities: scratch files and tiny dataset builders.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dal/dataset.hpp"

namespace testutil {

inline std::filesystem::path scratch_dir() {
    auto dir = std::filesystem::temp_directory_path() / "dal-tests";
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string scratch_path(const std::string& name) {
    return (scratch_dir() / name).string();
}

inline std::string write_file(const std::string& name, const std::string& content) {
    std::string path = scratch_path(name);
    std::ofstream out(path);
    out << content;
    return path;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// In-memory dataset over already-encoded numeric options.
inline dal::Dataset make_dataset(const std::vector<std::vector<double>>& configs,
                                 const std::vector<double>& perf,
                                 const std::string& perf_name = "perf") {
    dal::Dataset d;
    d.configs = configs;
    d.performance = perf;
    d.performance_name = perf_name;
    const std::size_t w = configs.empty() ? 0 : configs[0].size();
    d.schema.resize(w);
    for (std::size_t c = 0; c < w; ++c) {
        auto& s = d.schema[c];
        s.name = "o" + std::to_string(c);
        std::set<double> vals;
        bool binary = true;
        for (const auto& row : configs) {
            vals.insert(row[c]);
            binary = binary && (row[c] == 0.0 || row[c] == 1.0);
        }
        s.kind = binary ? dal::OptionKind::binary : dal::OptionKind::numeric;
        s.observed_values.assign(vals.begin(), vals.end());
    }
    return d;
}

} // namespace testutil
