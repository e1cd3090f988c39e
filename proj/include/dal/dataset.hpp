#pragma once

// Configuration-performance datasets: CSV loading with option-kind inference,
// validation, serialization and the bootstrap train/test split.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dal/common.hpp"

namespace dal {

enum class OptionKind { binary, numeric, categorical };

inline const char* option_kind_name(OptionKind k) {
    switch (k) {
        case OptionKind::binary: return "binary";
        case OptionKind::numeric: return "numeric";
        case OptionKind::categorical: return "categorical";
    }
    return "?";
}

inline std::optional<OptionKind> option_kind_from_name(const std::string& s) {
    if (s == "binary") return OptionKind::binary;
    if (s == "numeric") return OptionKind::numeric;
    if (s == "categorical") return OptionKind::categorical;
    return std::nullopt;
}

struct OptionSpec {
    std::string name;
    OptionKind kind = OptionKind::numeric;
    // Sorted distinct values seen in the data. Categorical options store
    // integer codes here; the code order follows `categories`.
    std::vector<double> observed_values;
    // Level strings for categorical options, sorted lexicographically;
    // code i corresponds to categories[i].
    std::vector<std::string> categories;
};

struct Dataset {
    std::vector<OptionSpec> schema;
    // Row-major configurations; categorical cells hold integer codes.
    std::vector<std::vector<double>> configs;
    std::vector<double> performance;
    std::string performance_name;

    std::size_t n_rows() const { return configs.size(); }
    std::size_t n_options() const { return schema.size(); }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline std::optional<double> parse_double(const std::string& s) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    return v;
}

// Shortest representation that round-trips through parse_double.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

// Sidecar "<path>.schema.json" may pin option kinds:
//   {"kinds": {"option_name": "categorical", ...}}
inline std::map<std::string, OptionKind> load_kind_sidecar(const std::string& csv_path) {
    std::map<std::string, OptionKind> forced;
    std::string side = csv_path + ".schema.json";
    std::ifstream in(side);
    if (!in) return forced;
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw DataError(side + ": invalid JSON (" + e.what() + ")");
    }
    if (!j.is_object() || !j.contains("kinds") || !j["kinds"].is_object())
        throw DataError(side + ": expected {\"kinds\": {name: kind}}");
    for (auto& [name, val] : j["kinds"].items()) {
        if (!val.is_string()) throw DataError(side + ": kind for '" + name + "' must be a string");
        auto k = option_kind_from_name(val.get<std::string>());
        if (!k) throw DataError(side + ": unknown kind '" + val.get<std::string>() + "' for '" + name + "'");
        forced[name] = *k;
    }
    return forced;
}

} // namespace detail

// Loads a UTF-8 comma-separated file: header row, option columns, final
// column = performance. Option kinds are inferred binary -> numeric ->
// categorical unless a "<path>.schema.json" sidecar pins them.
inline Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(path + ": cannot open file");

    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        lines.push_back(line);
    }
    if (lines.empty()) throw DataError(path + ": empty file");

    auto header = detail::split_csv_line(lines[0]);
    if (header.size() < 2)
        throw DataError(path + ": need at least one option column and a performance column");
    const std::size_t n_opts = header.size() - 1;
    if (lines.size() < 2) throw DataError(path + ": no data rows");

    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i].empty())
            throw DataError(path + ": empty column name at column " + std::to_string(i + 1));
        for (std::size_t j = 0; j < i; ++j)
            if (header[j] == header[i])
                throw DataError(path + ": duplicate column name '" + header[i] + "'");
    }

    // Raw option cells as strings; performance parsed immediately.
    std::vector<std::vector<std::string>> cells(n_opts);
    std::vector<double> perf;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        auto row = detail::split_csv_line(lines[r]);
        if (row.size() != header.size())
            throw DataError(path + ": row " + std::to_string(r + 1) + " has " +
                            std::to_string(row.size()) + " cells, expected " +
                            std::to_string(header.size()));
        for (std::size_t c = 0; c < row.size(); ++c)
            if (row[c].empty())
                throw DataError(path + ": empty cell at row " + std::to_string(r + 1) +
                                ", column " + std::to_string(c + 1) + " ('" + header[c] + "')");
        auto p = detail::parse_double(row[n_opts]);
        if (!p)
            throw DataError(path + ": non-numeric performance '" + row[n_opts] +
                            "' at row " + std::to_string(r + 1));
        perf.push_back(*p);
        for (std::size_t c = 0; c < n_opts; ++c) cells[c].push_back(row[c]);
    }

    auto forced = detail::load_kind_sidecar(path);
    for (const auto& [name, kind] : forced) {
        (void)kind;
        bool known = false;
        for (std::size_t c = 0; c < n_opts; ++c) known = known || header[c] == name;
        if (!known) throw DataError(path + ".schema.json: unknown option '" + name + "'");
    }

    Dataset d;
    d.performance_name = header[n_opts];
    d.performance = std::move(perf);
    const std::size_t n_rows = d.performance.size();
    d.configs.assign(n_rows, std::vector<double>(n_opts, 0.0));
    d.schema.resize(n_opts);

    for (std::size_t c = 0; c < n_opts; ++c) {
        OptionSpec& spec = d.schema[c];
        spec.name = header[c];

        std::vector<std::optional<double>> parsed(n_rows);
        bool all_numeric = true;
        bool all_01 = true;
        for (std::size_t r = 0; r < n_rows; ++r) {
            parsed[r] = detail::parse_double(cells[c][r]);
            if (!parsed[r]) {
                all_numeric = false;
                break;
            }
            if (*parsed[r] != 0.0 && *parsed[r] != 1.0) all_01 = false;
        }

        OptionKind kind;
        auto it = forced.find(spec.name);
        if (it != forced.end()) {
            kind = it->second;
            if (kind == OptionKind::binary && !(all_numeric && all_01))
                throw DataError(path + ": option '" + spec.name +
                                "' forced binary but has values outside {0,1}");
            if (kind == OptionKind::numeric && !all_numeric)
                throw DataError(path + ": option '" + spec.name +
                                "' forced numeric but has non-numeric cells");
        } else {
            kind = all_numeric ? (all_01 ? OptionKind::binary : OptionKind::numeric)
                               : OptionKind::categorical;
        }
        spec.kind = kind;

        if (kind == OptionKind::categorical) {
            std::set<std::string> levels(cells[c].begin(), cells[c].end());
            spec.categories.assign(levels.begin(), levels.end());
            for (std::size_t r = 0; r < n_rows; ++r) {
                auto lv = std::lower_bound(spec.categories.begin(), spec.categories.end(),
                                           cells[c][r]);
                d.configs[r][c] = static_cast<double>(lv - spec.categories.begin());
            }
        } else {
            for (std::size_t r = 0; r < n_rows; ++r) d.configs[r][c] = *parsed[r];
        }

        std::set<double> seen;
        for (std::size_t r = 0; r < n_rows; ++r) seen.insert(d.configs[r][c]);
        spec.observed_values.assign(seen.begin(), seen.end());
    }
    return d;
}

// Writes the dataset back to CSV (categorical codes decoded to their level
// strings) plus a kind sidecar whenever inference alone would not recover the
// schema, so load(save(d)) reproduces d exactly.
inline void save_csv(const Dataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError(path + ": cannot open for writing");
    for (const auto& s : d.schema) out << s.name << ',';
    out << d.performance_name << '\n';
    for (std::size_t r = 0; r < d.n_rows(); ++r) {
        for (std::size_t c = 0; c < d.n_options(); ++c) {
            const OptionSpec& s = d.schema[c];
            if (s.kind == OptionKind::categorical) {
                auto code = static_cast<std::size_t>(d.configs[r][c]);
                if (code >= s.categories.size())
                    throw DataError(path + ": categorical code out of range while saving '" +
                                    s.name + "'");
                out << s.categories[code];
            } else {
                out << detail::format_double(d.configs[r][c]);
            }
            out << ',';
        }
        out << detail::format_double(d.performance[r]) << '\n';
    }

    // Pin any kind inference would not recover from the written cells:
    // categorical options whose levels all look numeric, and numeric options
    // whose values happen to lie in {0,1}.
    nlohmann::json kinds = nlohmann::json::object();
    for (const auto& s : d.schema) {
        if (s.kind == OptionKind::categorical) {
            bool numeric_levels = true;
            for (const auto& lv : s.categories)
                numeric_levels = numeric_levels && detail::parse_double(lv).has_value();
            if (numeric_levels) kinds[s.name] = "categorical";
        } else if (s.kind == OptionKind::numeric) {
            bool all_01 = true;
            for (double v : s.observed_values) all_01 = all_01 && (v == 0.0 || v == 1.0);
            if (all_01) kinds[s.name] = "numeric";
        }
    }
    std::string side = path + ".schema.json";
    if (!kinds.empty()) {
        std::ofstream sout(side);
        if (!sout) throw DataError(side + ": cannot open for writing");
        sout << nlohmann::json{{"kinds", kinds}}.dump(2) << '\n';
    } else {
        std::error_code ec;
        std::filesystem::remove(side, ec);
    }
}

// Out-of-sample bootstrap: train_size distinct rows without replacement, the
// remainder becomes the test set. Row order within each part is preserved.
inline std::pair<Dataset, Dataset> bootstrap_split(const Dataset& d, std::size_t train_size,
                                                   std::uint64_t seed) {
    if (train_size < 1 || train_size >= d.n_rows())
        throw std::invalid_argument("bootstrap_split: train_size must be in [1, rows)");
    std::vector<std::size_t> idx(d.n_rows());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(seed);
    for (std::size_t i = 0; i < train_size; ++i) {
        std::size_t j = i + rng.next_index(idx.size() - i);
        std::swap(idx[i], idx[j]);
    }
    std::vector<std::size_t> tr(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(train_size));
    std::vector<std::size_t> te(idx.begin() + static_cast<std::ptrdiff_t>(train_size), idx.end());
    std::sort(tr.begin(), tr.end());
    std::sort(te.begin(), te.end());

    auto take = [&](const std::vector<std::size_t>& rows) {
        Dataset out;
        out.schema = d.schema;
        out.performance_name = d.performance_name;
        out.configs.reserve(rows.size());
        out.performance.reserve(rows.size());
        for (std::size_t r : rows) {
            out.configs.push_back(d.configs[r]);
            out.performance.push_back(d.performance[r]);
        }
        return out;
    };
    return {take(tr), take(te)};
}

} // namespace dal
