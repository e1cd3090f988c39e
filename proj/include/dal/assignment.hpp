#pragma once

// Division assignment: SMOTE balancing of the pseudo-labeled training rows
// and the Random Forest classifier that routes new configurations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "dal/common.hpp"

namespace dal {

// Encoded feature vectors paired with the division id of each training row.
struct PseudoLabeledSet {
    std::vector<std::vector<double>> features;
    std::vector<std::size_t> labels;

    std::map<std::size_t, std::size_t> class_counts() const {
        std::map<std::size_t, std::size_t> counts;
        for (std::size_t l : labels) ++counts[l];
        return counts;
    }
};

// Upsamples every minority class to the majority count. Synthetic rows lie
// on segments between a minority row and one of its k nearest same-class
// neighbors (Euclidean); a single-row class falls back to duplication.
// Original rows keep their order; synthetics append per class, ascending.
inline PseudoLabeledSet smote_oversample(const PseudoLabeledSet& u, std::size_t k,
                                         std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("smote_oversample: k must be >= 1");
    if (u.features.size() != u.labels.size())
        throw std::invalid_argument("smote_oversample: feature/label size mismatch");
    PseudoLabeledSet out = u;
    auto counts = u.class_counts();
    std::size_t majority = 0;
    for (const auto& [cls, n] : counts) majority = std::max(majority, n);

    Rng rng(seed);
    for (const auto& [cls, n_c] : counts) {
        if (n_c == majority) continue;
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < u.labels.size(); ++i)
            if (u.labels[i] == cls) members.push_back(i);

        std::size_t need = majority - n_c;
        if (n_c == 1) {
            for (std::size_t t = 0; t < need; ++t) {
                out.features.push_back(u.features[members[0]]);
                out.labels.push_back(cls);
            }
            continue;
        }

        std::size_t k_eff = std::min(k, n_c - 1);
        // k nearest same-class neighbors per member; ties by lower index.
        std::vector<std::vector<std::size_t>> nearest(n_c);
        for (std::size_t a = 0; a < n_c; ++a) {
            std::vector<std::pair<double, std::size_t>> dist;
            for (std::size_t b = 0; b < n_c; ++b) {
                if (b == a) continue;
                double d2 = 0.0;
                const auto& fa = u.features[members[a]];
                const auto& fb = u.features[members[b]];
                for (std::size_t j = 0; j < fa.size(); ++j) {
                    double diff = fa[j] - fb[j];
                    d2 += diff * diff;
                }
                dist.emplace_back(d2, b);
            }
            std::sort(dist.begin(), dist.end());
            nearest[a].reserve(k_eff);
            for (std::size_t j = 0; j < k_eff; ++j) nearest[a].push_back(dist[j].second);
        }

        for (std::size_t t = 0; t < need; ++t) {
            std::size_t base = t % n_c;
            std::size_t nb = nearest[base][rng.next_index(k_eff)];
            double theta = rng.next_double();
            const auto& fb = u.features[members[base]];
            const auto& fn = u.features[members[nb]];
            std::vector<double> synth(fb.size());
            for (std::size_t j = 0; j < fb.size(); ++j)
                synth[j] = fb[j] + theta * (fn[j] - fb[j]);
            out.features.push_back(std::move(synth));
            out.labels.push_back(cls);
        }
    }
    return out;
}

struct RfParams {
    std::size_t n_trees = 100;
    std::size_t features_per_split = 0;  // 0 = ceil(sqrt(width))
    std::size_t min_leaf = 1;
};

struct RfNode {
    int left = -1;
    int right = -1;
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;
    std::size_t label = 0;

    bool is_leaf() const { return feature < 0; }
};

struct RfTree {
    std::vector<RfNode> nodes;

    std::size_t classify(const std::vector<double>& x) const {
        int i = 0;
        while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
            const RfNode& n = nodes[static_cast<std::size_t>(i)];
            i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(i)].label;
    }
};

struct RfClassifier {
    std::vector<RfTree> trees;
    std::size_t n_features = 0;
    RfParams params;
    std::uint64_t seed = 0;
};

namespace detail {

inline std::size_t majority_label(const std::vector<std::size_t>& labels,
                                  const std::vector<std::size_t>& rows) {
    std::map<std::size_t, std::size_t> counts;
    for (std::size_t r : rows) ++counts[labels[r]];
    std::size_t best = 0, best_n = 0;
    for (const auto& [cls, n] : counts) {
        if (n > best_n) {  // map iterates ascending, so ties keep the lower id
            best = cls;
            best_n = n;
        }
    }
    return best;
}

inline double gini(const std::map<std::size_t, std::size_t>& counts, std::size_t total) {
    double g = 1.0;
    for (const auto& [cls, n] : counts) {
        double p = static_cast<double>(n) / static_cast<double>(total);
        g -= p * p;
    }
    return g;
}

inline void grow_rf_node(RfTree& tree, const std::vector<std::vector<double>>& X,
                         const std::vector<std::size_t>& y, std::vector<std::size_t> rows,
                         const RfParams& p, std::size_t fps, Rng& rng) {
    std::size_t id = tree.nodes.size();
    tree.nodes.emplace_back();

    bool pure = true;
    for (std::size_t r : rows) pure = pure && y[r] == y[rows[0]];
    if (pure || rows.size() < 2 * p.min_leaf) {
        tree.nodes[id].label = detail::majority_label(y, rows);
        return;
    }

    // Sample fps distinct features, then visit them in ascending order so the
    // split tie-break does not depend on draw order.
    const std::size_t w = X[0].size();
    std::vector<std::size_t> feats(w);
    for (std::size_t i = 0; i < w; ++i) feats[i] = i;
    for (std::size_t i = 0; i < fps; ++i) {
        std::size_t j = i + rng.next_index(w - i);
        std::swap(feats[i], feats[j]);
    }
    feats.resize(fps);
    std::sort(feats.begin(), feats.end());

    bool found = false;
    std::size_t best_f = 0;
    double best_thr = 0.0, best_score = 0.0;
    std::vector<double> vals;
    for (std::size_t f : feats) {
        vals.clear();
        for (std::size_t r : rows) vals.push_back(X[r][f]);
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        for (std::size_t t = 0; t + 1 < vals.size(); ++t) {
            double thr = (vals[t] + vals[t + 1]) / 2.0;
            std::map<std::size_t, std::size_t> lc, rc;
            std::size_t ln = 0, rn = 0;
            for (std::size_t r : rows) {
                if (X[r][f] <= thr) {
                    ++lc[y[r]];
                    ++ln;
                } else {
                    ++rc[y[r]];
                    ++rn;
                }
            }
            if (ln < p.min_leaf || rn < p.min_leaf) continue;
            double score = (static_cast<double>(ln) * gini(lc, ln) +
                            static_cast<double>(rn) * gini(rc, rn)) /
                           static_cast<double>(rows.size());
            if (!found || score < best_score) {
                found = true;
                best_f = f;
                best_thr = thr;
                best_score = score;
            }
        }
    }
    if (!found) {
        tree.nodes[id].label = detail::majority_label(y, rows);
        return;
    }

    std::vector<std::size_t> ls, rs;
    for (std::size_t r : rows) (X[r][best_f] <= best_thr ? ls : rs).push_back(r);
    tree.nodes[id].feature = static_cast<int>(best_f);
    tree.nodes[id].threshold = best_thr;
    tree.nodes[id].left = static_cast<int>(tree.nodes.size());
    grow_rf_node(tree, X, y, std::move(ls), p, fps, rng);
    tree.nodes[id].right = static_cast<int>(tree.nodes.size());
    grow_rf_node(tree, X, y, std::move(rs), p, fps, rng);
}

} // namespace detail

// Bags n_trees Gini trees over bootstrap resamples. Per-tree RNG streams are
// derived from the seed, so any training schedule gives the same forest.
inline RfClassifier fit_rf(const PseudoLabeledSet& u, const RfParams& params, std::uint64_t seed,
                           unsigned jobs = 1) {
    if (u.features.size() < 2) throw std::invalid_argument("fit_rf: need at least 2 rows");
    if (u.features.size() != u.labels.size())
        throw std::invalid_argument("fit_rf: feature/label size mismatch");
    if (params.n_trees < 1) throw std::invalid_argument("fit_rf: n_trees must be >= 1");

    RfClassifier f;
    f.n_features = u.features[0].size();
    f.params = params;
    f.seed = seed;
    std::size_t fps = params.features_per_split;
    if (fps == 0)
        fps = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(f.n_features))));
    fps = std::min(fps, f.n_features);

    const std::size_t n = u.features.size();
    f.trees.resize(params.n_trees);
    parallel_for(jobs, params.n_trees, [&](std::size_t t) {
        Rng rng(derive_seed(seed, t));
        std::vector<std::size_t> rows(n);
        for (std::size_t i = 0; i < n; ++i) rows[i] = rng.next_index(n);
        detail::grow_rf_node(f.trees[t], u.features, u.labels, std::move(rows), params, fps, rng);
    });
    return f;
}

// Majority vote across trees; ties go to the lower division id.
inline std::size_t classify(const RfClassifier& f, const std::vector<double>& x) {
    if (x.size() != f.n_features)
        throw std::invalid_argument("classify: feature width mismatch");
    std::map<std::size_t, std::size_t> votes;
    for (const auto& t : f.trees) ++votes[t.classify(x)];
    std::size_t best = 0, best_n = 0;
    for (const auto& [cls, n] : votes) {
        if (n > best_n) {
            best = cls;
            best_n = n;
        }
    }
    return best;
}

} // namespace dal
