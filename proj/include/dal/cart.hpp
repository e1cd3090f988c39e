#pragma once

// The dividing CART: greedy exhaustive splitting on encoded features,
// division extraction at a chosen depth and small-division merging.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "dal/common.hpp"
#include "dal/dataset.hpp"
#include "dal/encoding.hpp"

namespace dal {

// Sum of squared deviations from each side's own mean. Both sides of a
// candidate split must be non-empty.
inline double split_loss(const std::vector<double>& left, const std::vector<double>& right) {
    if (left.empty() || right.empty())
        throw std::invalid_argument("split_loss: empty side");
    auto sse = [](const std::vector<double>& v) {
        double mean = 0.0;
        for (double y : v) mean += y;
        mean /= static_cast<double>(v.size());
        double s = 0.0;
        for (double y : v) s += (y - mean) * (y - mean);
        return s;
    };
    return sse(left) + sse(right);
}

struct CartParams {
    std::size_t min_leaf = 1;
    std::size_t max_depth = 10;
};

struct CartNode {
    int left = -1;
    int right = -1;
    int parent = -1;
    int split_feature = -1;  // -1 for leaves
    double threshold = 0.0;
    std::size_t depth = 0;
    std::vector<std::size_t> samples;  // ascending row indices
    double mean = 0.0;
    double sse = 0.0;

    bool is_leaf() const { return split_feature < 0; }
};

// Nodes are stored in pre-order: a node precedes its children, left subtree
// precedes right. Index order therefore equals pre-order position.
struct CartTree {
    std::vector<CartNode> nodes;
    std::size_t n_features = 0;

    std::size_t depth() const {
        std::size_t d = 0;
        for (const auto& n : nodes) d = std::max(d, n.depth);
        return d;
    }

    double predict(const std::vector<double>& x) const {
        if (x.size() != n_features)
            throw std::invalid_argument("CartTree::predict: feature width mismatch");
        int i = 0;
        while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
            const CartNode& n = nodes[static_cast<std::size_t>(i)];
            i = x[static_cast<std::size_t>(n.split_feature)] <= n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(i)].mean;
    }
};

namespace detail {

inline void node_stats(const std::vector<std::size_t>& samples, const std::vector<double>& y,
                       double& mean, double& sse) {
    mean = 0.0;
    for (std::size_t i : samples) mean += y[i];
    mean /= static_cast<double>(samples.size());
    sse = 0.0;
    for (std::size_t i : samples) sse += (y[i] - mean) * (y[i] - mean);
}

struct SplitChoice {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double loss = std::numeric_limits<double>::infinity();
};

// Exhaustive search over every feature and every midpoint of consecutive
// distinct sorted values. Strict < keeps the first optimum, so ties resolve
// to the lower feature index, then the lower threshold.
inline SplitChoice best_split(const std::vector<std::vector<double>>& X,
                              const std::vector<double>& y,
                              const std::vector<std::size_t>& samples, std::size_t min_leaf) {
    SplitChoice best;
    const std::size_t w = X.empty() ? 0 : X[0].size();
    std::vector<double> vals, lperf, rperf;
    for (std::size_t f = 0; f < w; ++f) {
        vals.clear();
        for (std::size_t i : samples) vals.push_back(X[i][f]);
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        for (std::size_t t = 0; t + 1 < vals.size(); ++t) {
            double thr = (vals[t] + vals[t + 1]) / 2.0;
            lperf.clear();
            rperf.clear();
            for (std::size_t i : samples)
                (X[i][f] <= thr ? lperf : rperf).push_back(y[i]);
            if (lperf.size() < min_leaf || rperf.size() < min_leaf) continue;
            double loss = split_loss(lperf, rperf);
            if (loss < best.loss) {
                best = {true, f, thr, loss};
            }
        }
    }
    return best;
}

inline void grow(CartTree& tree, const std::vector<std::vector<double>>& X,
                 const std::vector<double>& y, std::vector<std::size_t> samples,
                 std::size_t depth, int parent, const CartParams& p) {
    int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    {
        CartNode& n = tree.nodes.back();
        n.parent = parent;
        n.depth = depth;
        node_stats(samples, y, n.mean, n.sse);
        n.samples = std::move(samples);
    }

    const auto& ns = tree.nodes[static_cast<std::size_t>(id)].samples;
    bool constant = true;
    for (std::size_t i : ns) constant = constant && y[i] == y[ns[0]];
    if (constant || ns.size() < 2 * p.min_leaf || depth == p.max_depth) return;

    SplitChoice c = best_split(X, y, ns, p.min_leaf);
    if (!c.found) return;

    std::vector<std::size_t> ls, rs;
    for (std::size_t i : ns)
        (X[i][c.feature] <= c.threshold ? ls : rs).push_back(i);

    tree.nodes[static_cast<std::size_t>(id)].split_feature = static_cast<int>(c.feature);
    tree.nodes[static_cast<std::size_t>(id)].threshold = c.threshold;
    tree.nodes[static_cast<std::size_t>(id)].left = static_cast<int>(tree.nodes.size());
    grow(tree, X, y, std::move(ls), depth + 1, id, p);
    tree.nodes[static_cast<std::size_t>(id)].right = static_cast<int>(tree.nodes.size());
    grow(tree, X, y, std::move(rs), depth + 1, id, p);
}

} // namespace detail

// Fits the divider on an encoded feature matrix. Overfitting is acceptable
// here; the tree is a clustering device, not the final predictor.
inline CartTree fit_cart(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                         const CartParams& params = {}) {
    if (X.empty() || X.size() != y.size())
        throw std::invalid_argument("fit_cart: need a non-empty matching X/y");
    if (params.min_leaf < 1) throw std::invalid_argument("fit_cart: min_leaf must be >= 1");
    CartTree tree;
    tree.n_features = X[0].size();
    std::vector<std::size_t> all(X.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    detail::grow(tree, X, y, std::move(all), 0, -1, params);
    return tree;
}

inline CartTree fit_cart(const Dataset& train, const Encoder& encoder,
                         const CartParams& params = {}) {
    return fit_cart(encode_all(encoder, train), train.performance, params);
}

struct Division {
    std::size_t id = 0;    // pre-order position among extracted divisions
    std::size_t node = 0;  // index into CartTree::nodes
    std::vector<std::size_t> sample_indices;
    std::size_t n = 0;
    double mean = 0.0;
    double h = 0.0;  // population mean squared error
    double z = 0.0;  // -n
};

namespace detail {

inline Division make_division(const CartTree& tree, std::size_t node, std::size_t id) {
    const CartNode& n = tree.nodes[node];
    Division d;
    d.id = id;
    d.node = node;
    d.sample_indices = n.samples;
    d.n = n.samples.size();
    d.mean = n.mean;
    d.h = n.sse / static_cast<double>(d.n);
    d.z = -static_cast<double>(d.n);
    return d;
}

} // namespace detail

// Divisions at depth d: every leaf above d plus every node (leaf or branch)
// sitting exactly at d. Ids follow pre-order.
inline std::vector<Division> extract_divisions(const CartTree& tree, std::size_t d) {
    if (d < 1) throw std::invalid_argument("extract_divisions: d must be >= 1");
    if (d > tree.depth()) throw std::invalid_argument("extract_divisions: d exceeds tree depth");
    std::vector<Division> divs;
    // Pre-order node storage makes an index scan equivalent to a pre-order
    // walk; nodes below depth d are skipped by the cut test.
    std::vector<bool> cut(tree.nodes.size(), false);
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        const CartNode& n = tree.nodes[i];
        if (n.parent >= 0 && cut[static_cast<std::size_t>(n.parent)]) {
            cut[i] = true;  // beneath an extracted node
            continue;
        }
        if (n.depth == d || (n.is_leaf() && n.depth < d)) {
            cut[i] = true;
            divs.push_back(detail::make_division(tree, i, divs.size()));
        }
    }
    return divs;
}

// Merges any division smaller than min_size with its sibling division, the
// pair replaced by their parent. The rule is iterated to fixpoint, so a still
// undersized merged parent can merge again. An undersized division whose
// sibling is not itself a present division stays as-is.
inline std::vector<Division> merge_small_divisions(std::vector<Division> divs,
                                                   const CartTree& tree, std::size_t min_size) {
    if (min_size < 1) throw std::invalid_argument("merge_small_divisions: min_size must be >= 1");
    auto find_division = [&](std::size_t node) {
        for (std::size_t i = 0; i < divs.size(); ++i)
            if (divs[i].node == node) return i;
        return divs.size();
    };
    bool merged = true;
    while (merged) {
        merged = false;
        // Undersized candidates in (n, node) order: the smallest merges first.
        std::vector<std::size_t> order(divs.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return divs[a].n != divs[b].n ? divs[a].n < divs[b].n : divs[a].node < divs[b].node;
        });
        for (std::size_t i : order) {
            if (divs[i].n >= min_size) break;
            const CartNode& node = tree.nodes[divs[i].node];
            if (node.parent < 0) continue;  // undersized root stays
            const CartNode& par = tree.nodes[static_cast<std::size_t>(node.parent)];
            std::size_t sib = static_cast<std::size_t>(
                static_cast<int>(divs[i].node) == par.left ? par.right : par.left);
            std::size_t j = find_division(sib);
            if (j == divs.size()) continue;  // sibling split further; keep
            std::size_t parent = static_cast<std::size_t>(node.parent);
            std::size_t a = std::min(i, j), b = std::max(i, j);
            divs.erase(divs.begin() + static_cast<std::ptrdiff_t>(b));
            divs.erase(divs.begin() + static_cast<std::ptrdiff_t>(a));
            divs.push_back(detail::make_division(tree, parent, 0));
            merged = true;
            break;
        }
    }
    std::sort(divs.begin(), divs.end(),
              [](const Division& a, const Division& b) { return a.node < b.node; });
    for (std::size_t i = 0; i < divs.size(); ++i) divs[i].id = i;
    return divs;
}

} // namespace dal
