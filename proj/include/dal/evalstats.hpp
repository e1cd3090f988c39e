#pragma once

// Accuracy metrics, the bootstrap evaluation harness, and Scott-Knott
// ranking with the A12 effect size.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dal/common.hpp"
#include "dal/dataset.hpp"
#include "dal/model.hpp"

namespace dal {

struct MreResult {
    // Percent; empty when every actual value is zero.
    std::optional<double> percent;
    std::size_t skipped = 0;  // zero-actual points left out of the mean
};

inline MreResult mre(const std::vector<double>& actual, const std::vector<double>& predicted) {
    if (actual.empty() || actual.size() != predicted.size())
        throw std::invalid_argument("mre: need equal non-empty lists");
    MreResult r;
    double sum = 0.0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        if (actual[i] == 0.0) {
            ++r.skipped;
            continue;
        }
        sum += std::abs(actual[i] - predicted[i]) / std::abs(actual[i]);
        ++k;
    }
    if (k > 0) r.percent = sum / static_cast<double>(k) * 100.0;
    return r;
}

inline double rmse(const std::vector<double>& actual, const std::vector<double>& predicted) {
    if (actual.empty() || actual.size() != predicted.size())
        throw std::invalid_argument("rmse: need equal non-empty lists");
    double s = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        double e = actual[i] - predicted[i];
        s += e * e;
    }
    return std::sqrt(s / static_cast<double>(actual.size()));
}

// P(a < b) + 0.5 P(a = b): the probability that a draw from `a` beats a draw
// from `b` when lower values are better.
inline double a12(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("a12: empty sample");
    double wins = 0.0;
    for (double x : a)
        for (double y : b) {
            if (x < y)
                wins += 1.0;
            else if (x == y)
                wins += 0.5;
        }
    return wins / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

struct SkGroup {
    std::size_t rank = 0;  // 1 = best (lowest mean)
    std::vector<std::string> treatments;
};

struct TreatmentSummary {
    std::string name;
    std::size_t rank = 0;
    double mean = 0.0;
    double median = 0.0;
    double iqr = 0.0;
    std::size_t n = 0;
};

struct SkRanking {
    std::vector<SkGroup> groups;               // ascending rank
    std::vector<TreatmentSummary> treatments;  // ascending mean
    double confidence = 0.99;
    double a12_min = 0.6;
    std::size_t boot_iters = 1000;
};

namespace detail {

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Linearly interpolated quantile on a sorted copy.
inline double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    double pos = q * static_cast<double>(v.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

// Split quality over the treatment means in [lo, hi); l1 = [lo, s).
inline double sk_delta(const std::vector<double>& means, std::size_t lo, std::size_t s,
                       std::size_t hi) {
    double all = 0.0;
    for (std::size_t i = lo; i < hi; ++i) all += means[i];
    all /= static_cast<double>(hi - lo);
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t i = lo; i < s; ++i) m1 += means[i];
    for (std::size_t i = s; i < hi; ++i) m2 += means[i];
    m1 /= static_cast<double>(s - lo);
    m2 /= static_cast<double>(hi - s);
    double n = static_cast<double>(hi - lo);
    return (static_cast<double>(s - lo) / n) * (m1 - all) * (m1 - all) +
           (static_cast<double>(hi - s) / n) * (m2 - all) * (m2 - all);
}

inline std::size_t sk_best_split(const std::vector<double>& means, std::size_t lo,
                                 std::size_t hi) {
    std::size_t best = lo + 1;
    double best_delta = sk_delta(means, lo, lo + 1, hi);
    for (std::size_t s = lo + 2; s < hi; ++s) {
        double d = sk_delta(means, lo, s, hi);
        if (d > best_delta) {
            best_delta = d;
            best = s;
        }
    }
    return best;
}

// Two-sided percentile test: resample both pools independently and check
// whether the (alpha/2, 1-alpha/2) interval of mean(A*) - mean(B*) excludes 0.
inline bool bootstrap_significant(const std::vector<double>& a, const std::vector<double>& b,
                                  std::size_t iters, double confidence, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> diffs(iters);
    for (std::size_t it = 0; it < iters; ++it) {
        double ma = 0.0, mb = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) ma += a[rng.next_index(a.size())];
        for (std::size_t i = 0; i < b.size(); ++i) mb += b[rng.next_index(b.size())];
        diffs[it] = ma / static_cast<double>(a.size()) - mb / static_cast<double>(b.size());
    }
    std::sort(diffs.begin(), diffs.end());
    double alpha = 1.0 - confidence;
    std::size_t lo = static_cast<std::size_t>(std::floor(alpha / 2.0 *
                                                         static_cast<double>(iters - 1)));
    std::size_t hi = static_cast<std::size_t>(std::ceil((1.0 - alpha / 2.0) *
                                                        static_cast<double>(iters - 1)));
    return diffs[lo] > 0.0 || diffs[hi] < 0.0;
}

} // namespace detail

// Recursive mean-ordered splitting. A split must maximize the between-group
// delta, pass the bootstrap significance test at the given confidence, and
// show an A12 effect of at least a12_min between the two halves.
inline SkRanking scott_knott(const std::map<std::string, std::vector<double>>& treatments,
                             double confidence = 0.99, double a12_min = 0.6,
                             std::size_t boot_iters = 1000, std::uint64_t seed = 1) {
    if (treatments.empty()) throw std::invalid_argument("scott_knott: no treatments");
    for (const auto& [name, obs] : treatments)
        if (obs.size() < 2)
            throw std::invalid_argument("scott_knott: treatment '" + name +
                                        "' needs at least 2 observations");

    SkRanking ranking;
    ranking.confidence = confidence;
    ranking.a12_min = a12_min;
    ranking.boot_iters = boot_iters;
    for (const auto& [name, obs] : treatments) {
        TreatmentSummary t;
        t.name = name;
        t.n = obs.size();
        t.mean = detail::mean_of(obs);
        t.median = detail::quantile(obs, 0.5);
        t.iqr = detail::quantile(obs, 0.75) - detail::quantile(obs, 0.25);
        ranking.treatments.push_back(std::move(t));
    }
    std::sort(ranking.treatments.begin(), ranking.treatments.end(),
              [](const TreatmentSummary& a, const TreatmentSummary& b) {
                  return a.mean != b.mean ? a.mean < b.mean : a.name < b.name;
              });
    std::vector<double> means;
    for (const auto& t : ranking.treatments) means.push_back(t.mean);

    // Recursion boundaries, not recursion order, drive the per-split seeds,
    // so the grouping is independent of evaluation order.
    std::function<void(std::size_t, std::size_t)> split = [&](std::size_t lo, std::size_t hi) {
        if (hi - lo >= 2) {
            std::size_t s = detail::sk_best_split(means, lo, hi);
            std::vector<double> pool1, pool2;
            for (std::size_t i = lo; i < s; ++i) {
                const auto& obs = treatments.at(ranking.treatments[i].name);
                pool1.insert(pool1.end(), obs.begin(), obs.end());
            }
            for (std::size_t i = s; i < hi; ++i) {
                const auto& obs = treatments.at(ranking.treatments[i].name);
                pool2.insert(pool2.end(), obs.begin(), obs.end());
            }
            bool significant =
                detail::bootstrap_significant(pool1, pool2, boot_iters, confidence,
                                              derive_seed(seed, lo * 4096 + hi)) &&
                a12(pool1, pool2) >= a12_min;
            if (significant) {
                split(lo, s);
                split(s, hi);
                return;
            }
        }
        SkGroup g;
        g.rank = ranking.groups.size() + 1;
        for (std::size_t i = lo; i < hi; ++i) g.treatments.push_back(ranking.treatments[i].name);
        ranking.groups.push_back(std::move(g));
    };
    split(0, ranking.treatments.size());

    for (const auto& g : ranking.groups)
        for (const auto& name : g.treatments)
            for (auto& t : ranking.treatments)
                if (t.name == name) t.rank = g.rank;
    return ranking;
}

// ---- bootstrap evaluation harness ------------------------------------------

struct Recipe {
    std::string name;
    TrainConfig cfg;
};

struct RunResult {
    std::size_t run = 0;
    std::uint64_t seed = 0;
    std::optional<double> mre_pct;
    double rmse_val = 0.0;
    std::size_t skipped = 0;
    double wall_ms = 0.0;  // in-memory only; never serialized
};

struct EvalReport {
    std::string recipe_name;
    std::size_t runs = 0;
    std::size_t train_size = 0;
    std::uint64_t seed = 0;
    std::vector<RunResult> results;
};

// One bootstrap split + train + holdout scoring per run. Splits depend only
// on (seed, run), so two recipes evaluated under the same seed are paired.
// Results are identical for any jobs value.
inline EvalReport evaluate(const Recipe& recipe, const Dataset& data, std::size_t train_size,
                           std::size_t runs, std::uint64_t seed, unsigned jobs = 1) {
    if (runs < 1) throw std::invalid_argument("evaluate: runs must be >= 1");
    if (train_size < 1 || train_size >= data.n_rows())
        throw std::invalid_argument("evaluate: train_size must be in [1, rows)");
    EvalReport report;
    report.recipe_name = recipe.name;
    report.runs = runs;
    report.train_size = train_size;
    report.seed = seed;
    report.results.resize(runs);

    std::vector<std::exception_ptr> errors(runs);
    parallel_for(jobs, runs, [&](std::size_t i) {
        try {
            auto t0 = std::chrono::steady_clock::now();
            std::uint64_t run_seed = derive_seed(seed, seed_stream::run + i);
            auto [train, test] = bootstrap_split(data, train_size, run_seed);
            TrainConfig cfg = recipe.cfg;
            cfg.seed = derive_seed(run_seed, 1);
            cfg.jobs = 1;  // runs are already parallel
            DalModel model = train_dal(train, cfg);
            std::vector<double> predicted;
            predicted.reserve(test.n_rows());
            for (const auto& cf : test.configs) predicted.push_back(predict_dal(model, cf));
            RunResult r;
            r.run = i;
            r.seed = run_seed;
            MreResult m = mre(test.performance, predicted);
            r.mre_pct = m.percent;
            r.skipped = m.skipped;
            r.rmse_val = rmse(test.performance, predicted);
            r.wall_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
            report.results[i] = std::move(r);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    });
    for (std::size_t i = 0; i < runs; ++i) {
        if (!errors[i]) continue;
        try {
            std::rethrow_exception(errors[i]);
        } catch (const DataError& e) {
            throw DataError("run " + std::to_string(i) + ": " + e.what());
        } catch (const std::exception& e) {
            throw std::runtime_error("run " + std::to_string(i) + ": " + e.what());
        }
    }
    return report;
}

// ---- report emission --------------------------------------------------------

// Per-run timings are intentionally left out of both emitters: report
// artifacts must be byte-identical across job counts and machines.
inline nlohmann::json eval_report_to_json(const EvalReport& r) {
    using nlohmann::json;
    json per_run = json::array();
    std::vector<double> mres, rmses;
    std::size_t skipped_total = 0, undefined_runs = 0;
    for (const auto& res : r.results) {
        json o{{"run", res.run},
               {"seed", res.seed},
               {"rmse", res.rmse_val},
               {"skipped_zero_actual", res.skipped}};
        if (res.mre_pct) {
            o["mre_percent"] = *res.mre_pct;
            mres.push_back(*res.mre_pct);
        } else {
            o["mre_percent"] = nullptr;
            ++undefined_runs;
        }
        rmses.push_back(res.rmse_val);
        skipped_total += res.skipped;
        per_run.push_back(std::move(o));
    }
    json summary{{"skipped_zero_actual", skipped_total}, {"undefined_mre_runs", undefined_runs}};
    if (!mres.empty()) {
        summary["mean_mre_percent"] = detail::mean_of(mres);
        summary["median_mre_percent"] = detail::quantile(mres, 0.5);
        summary["iqr_mre_percent"] =
            detail::quantile(mres, 0.75) - detail::quantile(mres, 0.25);
    }
    if (!rmses.empty()) summary["mean_rmse"] = detail::mean_of(rmses);
    return json{{"format", "dal-eval/1"},
                {"recipe", r.recipe_name},
                {"runs", r.runs},
                {"train_size", r.train_size},
                {"seed", r.seed},
                {"per_run", per_run},
                {"summary", summary}};
}

namespace detail {

inline std::string fixed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

inline std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
}

inline std::string render_table(const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> widths;
    for (const auto& row : rows) {
        if (widths.size() < row.size()) widths.resize(row.size(), 0);
        for (std::size_t c = 0; c < row.size(); ++c)
            widths[c] = std::max(widths[c], row[c].size());
    }
    std::string out;
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out += pad(row[c], widths[c]);
            if (c + 1 < row.size()) out += "  ";
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        out += '\n';
    }
    return out;
}

} // namespace detail

inline std::string eval_report_table(const EvalReport& r) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"run", "mre%", "rmse", "skipped"});
    for (const auto& res : r.results)
        rows.push_back({std::to_string(res.run),
                        res.mre_pct ? detail::fixed2(*res.mre_pct) : std::string("n/a"),
                        detail::fixed2(res.rmse_val), std::to_string(res.skipped)});
    return detail::render_table(rows);
}

inline nlohmann::json sk_to_json(const SkRanking& r) {
    using nlohmann::json;
    json groups = json::array();
    for (const auto& g : r.groups) groups.push_back(json{{"rank", g.rank},
                                                         {"treatments", g.treatments}});
    json treatments = json::array();
    for (const auto& t : r.treatments)
        treatments.push_back(json{{"name", t.name},
                                  {"rank", t.rank},
                                  {"mean_mre_percent", t.mean},
                                  {"median_mre_percent", t.median},
                                  {"iqr_mre_percent", t.iqr},
                                  {"runs", t.n}});
    return json{{"format", "dal-compare/1"},
                {"confidence", r.confidence},
                {"a12_min", r.a12_min},
                {"bootstrap_iterations", r.boot_iters},
                {"groups", groups},
                {"treatments", treatments}};
}

inline std::string sk_table(const SkRanking& r) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"rank", "treatment", "mean-mre%", "median-mre%", "iqr"});
    for (const auto& t : r.treatments)
        rows.push_back({std::to_string(t.rank), t.name, detail::fixed2(t.mean),
                        detail::fixed2(t.median), detail::fixed2(t.iqr)});
    return detail::render_table(rows);
}

} // namespace dal
