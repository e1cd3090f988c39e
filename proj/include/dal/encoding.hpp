#pragma once

// Label, scaled-label and one-hot encoders fitted on training data only.

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "dal/common.hpp"
#include "dal/dataset.hpp"

namespace dal {

enum class Scheme { label, scaled_label, one_hot };

inline const char* scheme_name(Scheme s) {
    switch (s) {
        case Scheme::label: return "label";
        case Scheme::scaled_label: return "scaled";
        case Scheme::one_hot: return "onehot";
    }
    return "?";
}

inline std::optional<Scheme> scheme_from_name(const std::string& s) {
    if (s == "label") return Scheme::label;
    if (s == "scaled" || s == "scaled_label") return Scheme::scaled_label;
    if (s == "onehot" || s == "one_hot") return Scheme::one_hot;
    return std::nullopt;
}

// Immutable after fit; encode() is safe to call concurrently.
struct Encoder {
    Scheme scheme = Scheme::label;
    std::size_t n_options = 0;
    std::size_t output_width = 0;
    // scaled_label state, per option.
    std::vector<double> v_min, v_max;
    // one_hot state: sorted distinct training values per option, and the
    // offset of each option's indicator block in the output vector.
    std::vector<std::vector<double>> categories;
    std::vector<std::size_t> offsets;
};

inline Encoder fit_encoder(const Dataset& train, Scheme scheme) {
    if (train.n_rows() == 0) throw std::invalid_argument("fit_encoder: empty dataset");
    Encoder e;
    e.scheme = scheme;
    e.n_options = train.n_options();
    switch (scheme) {
        case Scheme::label:
            e.output_width = e.n_options;
            break;
        case Scheme::scaled_label: {
            e.v_min.resize(e.n_options);
            e.v_max.resize(e.n_options);
            for (std::size_t c = 0; c < e.n_options; ++c) {
                double lo = train.configs[0][c], hi = lo;
                for (std::size_t r = 1; r < train.n_rows(); ++r) {
                    lo = std::min(lo, train.configs[r][c]);
                    hi = std::max(hi, train.configs[r][c]);
                }
                e.v_min[c] = lo;
                e.v_max[c] = hi;
            }
            e.output_width = e.n_options;
            break;
        }
        case Scheme::one_hot: {
            e.categories.resize(e.n_options);
            e.offsets.resize(e.n_options);
            std::size_t w = 0;
            for (std::size_t c = 0; c < e.n_options; ++c) {
                std::set<double> vals;
                for (std::size_t r = 0; r < train.n_rows(); ++r) vals.insert(train.configs[r][c]);
                e.categories[c].assign(vals.begin(), vals.end());
                e.offsets[c] = w;
                w += e.categories[c].size();
            }
            e.output_width = w;
            break;
        }
    }
    return e;
}

// Encodes one configuration. A one_hot value unseen in training produces an
// all-zero block; when `unseen` is given, each such value bumps the counter.
inline std::vector<double> encode(const Encoder& e, const std::vector<double>& config,
                                  std::size_t* unseen = nullptr) {
    if (config.size() != e.n_options)
        throw std::invalid_argument("encode: configuration width mismatch");
    std::vector<double> out;
    switch (e.scheme) {
        case Scheme::label:
            out = config;
            break;
        case Scheme::scaled_label: {
            out.resize(e.n_options);
            for (std::size_t c = 0; c < e.n_options; ++c) {
                double range = e.v_max[c] - e.v_min[c];
                // Constant training option encodes to 0; out-of-range test
                // values are not clamped.
                out[c] = range == 0.0 ? 0.0 : (config[c] - e.v_min[c]) / range;
            }
            break;
        }
        case Scheme::one_hot: {
            out.assign(e.output_width, 0.0);
            for (std::size_t c = 0; c < e.n_options; ++c) {
                const auto& cats = e.categories[c];
                auto it = std::lower_bound(cats.begin(), cats.end(), config[c]);
                if (it != cats.end() && *it == config[c])
                    out[e.offsets[c] + static_cast<std::size_t>(it - cats.begin())] = 1.0;
                else if (unseen)
                    ++*unseen;
            }
            break;
        }
    }
    return out;
}

inline std::vector<std::vector<double>> encode_all(const Encoder& e, const Dataset& d,
                                                   std::size_t* unseen = nullptr) {
    std::vector<std::vector<double>> X;
    X.reserve(d.n_rows());
    for (const auto& cfg : d.configs) X.push_back(encode(e, cfg, unseen));
    return X;
}

// Column names of the encoded matrix, used by the encode subcommand.
inline std::vector<std::string> encoded_feature_names(const Encoder& e,
                                                      const std::vector<OptionSpec>& schema) {
    std::vector<std::string> names;
    if (e.scheme != Scheme::one_hot) {
        for (const auto& s : schema) names.push_back(s.name);
        return names;
    }
    for (std::size_t c = 0; c < e.n_options; ++c) {
        for (double v : e.categories[c]) {
            const OptionSpec& s = schema[c];
            std::string label;
            if (s.kind == OptionKind::categorical &&
                static_cast<std::size_t>(v) < s.categories.size())
                label = s.categories[static_cast<std::size_t>(v)];
            else
                label = detail::format_double(v);
            names.push_back(s.name + "=" + label);
        }
    }
    return names;
}

} // namespace dal
