#pragma once

// Depth adaptation: per-division objectives (h, z), the shared nadir
// reference point, hypervolume, averaging hypervolume and the depth search.

#include <algorithm>
#include <optional>
#include <vector>

#include "dal/cart.hpp"

namespace dal {

// Both objectives are minimized: h is the division's population MSE, z its
// negated sample count.
struct Objectives {
    double h = 0.0;
    double z = 0.0;
};

struct ReferencePoint {
    double h_r = 0.0;
    double z_r = 0.0;
};

struct DepthCandidate {
    std::size_t d = 0;
    std::vector<Division> divisions;
    double mu_hv = 0.0;
};

struct DepthChoice {
    std::optional<std::size_t> d;  // empty when the tree is a single leaf
    std::vector<DepthCandidate> candidates;
    ReferencePoint ref;
};

inline Objectives division_objectives(const Division& div) {
    return {div.h, div.z};
}

inline std::vector<Objectives> objectives_of(const std::vector<Division>& divs) {
    std::vector<Objectives> out;
    out.reserve(divs.size());
    for (const auto& d : divs) out.push_back(division_objectives(d));
    return out;
}

// Nadir point over every division of every candidate depth: h_r = 1.1 x max h,
// z_r = 0.9 x max z. z is negative, so scaling by 0.9 moves it toward 0, the
// worse direction. All-zero h leaves h_r at 0 (degenerate, see mu_hv).
inline ReferencePoint reference_point(const std::vector<Objectives>& all) {
    if (all.empty()) throw std::invalid_argument("reference_point: no divisions");
    double max_h = all[0].h, max_z = all[0].z;
    for (const auto& o : all) {
        max_h = std::max(max_h, o.h);
        max_z = std::max(max_z, o.z);
    }
    return {1.1 * max_h, 0.9 * max_z};
}

inline ReferencePoint reference_point(const std::vector<Division>& all) {
    return reference_point(objectives_of(all));
}

// Lebesgue measure of the union of rectangles spanned by the nondominated
// points and the reference point. Every point must be strictly inside the
// reference box.
inline double standard_hv(std::vector<Objectives> pts, ReferencePoint ref) {
    if (pts.empty()) throw std::invalid_argument("standard_hv: no divisions");
    for (const auto& p : pts)
        if (!(p.h < ref.h_r && p.z < ref.z_r))
            throw std::invalid_argument("standard_hv: division outside the reference box");
    std::sort(pts.begin(), pts.end(), [](const Objectives& a, const Objectives& b) {
        return a.h != b.h ? a.h < b.h : a.z < b.z;
    });
    // After the sort, a point is nondominated iff its z is strictly below
    // every z seen so far; the survivors have strictly decreasing z.
    std::vector<Objectives> front;
    for (const auto& p : pts) {
        if (!front.empty() && p.z >= front.back().z) continue;
        front.push_back(p);
    }
    double area = 0.0;
    double prev_z = ref.z_r;
    for (const auto& p : front) {
        area += (ref.h_r - p.h) * (prev_z - p.z);
        prev_z = p.z;
    }
    return area;
}

inline double standard_hv(const std::vector<Division>& divs, ReferencePoint ref) {
    return standard_hv(objectives_of(divs), ref);
}

// Mean rectangle area to the reference point over all divisions, dominated
// or not. With a degenerate h_r of 0 the h factor drops out and only the
// |z_r - z| terms are compared.
inline double mu_hv(const std::vector<Objectives>& pts, ReferencePoint ref) {
    if (pts.empty()) throw std::invalid_argument("mu_hv: no divisions");
    double sum = 0.0;
    for (const auto& p : pts) {
        double hf = ref.h_r == 0.0 ? 1.0 : std::abs(ref.h_r - p.h);
        sum += hf * std::abs(ref.z_r - p.z);
    }
    return sum / static_cast<double>(pts.size());
}

inline double mu_hv(const std::vector<Division>& divs, ReferencePoint ref) {
    return mu_hv(objectives_of(divs), ref);
}

// Largest mu_hv wins; ties go to the smaller d (more data per local model).
// Candidates must be listed with ascending d.
inline std::optional<std::size_t> pick_depth(const std::vector<DepthCandidate>& candidates) {
    std::optional<std::size_t> best;
    double best_v = 0.0;
    for (const auto& c : candidates) {
        if (!best || c.mu_hv > best_v) {
            best = c.d;
            best_v = c.mu_hv;
        }
    }
    return best;
}

// Enumerates d = 1..tree depth, scores each candidate's divisions against a
// single reference point computed across all candidates, and picks the best.
// A single-leaf tree yields no candidates and an empty choice.
inline DepthChoice adapt_depth(const CartTree& tree) {
    DepthChoice choice;
    std::size_t d_max = tree.depth();
    if (d_max == 0) return choice;
    std::vector<Objectives> pool;
    for (std::size_t d = 1; d <= d_max; ++d) {
        DepthCandidate c;
        c.d = d;
        c.divisions = extract_divisions(tree, d);
        for (const auto& div : c.divisions) pool.push_back(division_objectives(div));
        choice.candidates.push_back(std::move(c));
    }
    choice.ref = reference_point(pool);
    for (auto& c : choice.candidates) c.mu_hv = mu_hv(c.divisions, choice.ref);
    choice.d = pick_depth(choice.candidates);
    return choice;
}

} // namespace dal
