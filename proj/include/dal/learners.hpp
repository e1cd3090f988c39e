#pragma once

// Local regressors trained per division: linear least squares with a ridge
// fallback, a CART regressor, and a small L1-regularized feed-forward net.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "dal/cart.hpp"
#include "dal/common.hpp"

namespace dal {

enum class LearnerKind { linear, cart, rnet };

inline const char* learner_name(LearnerKind k) {
    switch (k) {
        case LearnerKind::linear: return "linear";
        case LearnerKind::cart: return "cart";
        case LearnerKind::rnet: return "rnet";
    }
    return "?";
}

inline std::optional<LearnerKind> learner_from_name(const std::string& s) {
    if (s == "linear") return LearnerKind::linear;
    if (s == "cart") return LearnerKind::cart;
    if (s == "rnet") return LearnerKind::rnet;
    return std::nullopt;
}

struct LocalLearnerSpec {
    LearnerKind kind = LearnerKind::rnet;
    // linear: ridge strength applied only as a fallback on singularity.
    double ridge = 1e-6;
    // cart regressor parameters.
    CartParams cart{1, 10};
    // rnet: when unset, a fixed grid hidden in {8,16} x lambda in {0, 0.01,
    // 0.1} is searched by lowest training MSE; setting a field pins it.
    std::optional<std::size_t> hidden_units;
    std::optional<double> l1_lambda;
    double learning_rate = 0.01;
    std::size_t epochs = 300;
    std::uint64_t seed = 1;
};

// Fallback for degenerate fits (a single training sample with linear/rnet).
struct ConstantModel {
    double value = 0.0;
};

struct LinearModel {
    std::vector<double> weights;
    double intercept = 0.0;
    bool ridge_used = false;
};

struct CartModel {
    CartTree tree;
};

// One ReLU hidden layer, identity output. Targets are min-max scaled during
// training and predictions inverse-scaled.
struct NetModel {
    std::size_t input_width = 0;
    std::size_t hidden_units = 0;
    std::vector<double> w1;  // hidden x input, row-major
    std::vector<double> b1;  // hidden
    std::vector<double> w2;  // output row, hidden wide
    double b2 = 0.0;
    double l1_lambda = 0.0;
    double y_min = 0.0;
    double y_range = 1.0;
    // Total loss (MSE + L1 penalty) on scaled targets at the start of each
    // epoch.
    std::vector<double> loss_history;

    // Raw network output, before inverse target scaling.
    double forward(const std::vector<double>& x) const {
        double out = b2;
        for (std::size_t j = 0; j < hidden_units; ++j) {
            double z = b1[j];
            for (std::size_t i = 0; i < input_width; ++i) z += w1[j * input_width + i] * x[i];
            if (z > 0.0) out += w2[j] * z;
        }
        return out;
    }
};

using LocalModel = std::variant<ConstantModel, LinearModel, CartModel, NetModel>;

namespace detail {

// Solves G x = rhs for symmetric positive definite G (m x m, row-major).
// Returns false when a pivot drops below tolerance, leaving x untouched.
inline bool cholesky_solve(std::vector<double> G, std::vector<double> rhs, std::size_t m,
                           std::vector<double>& x) {
    double scale = 0.0;
    for (std::size_t i = 0; i < m; ++i) scale = std::max(scale, std::abs(G[i * m + i]));
    if (scale == 0.0) return false;
    // In-place lower Cholesky.
    for (std::size_t j = 0; j < m; ++j) {
        double d = G[j * m + j];
        for (std::size_t k = 0; k < j; ++k) d -= G[j * m + k] * G[j * m + k];
        if (d <= scale * 1e-12) return false;
        d = std::sqrt(d);
        G[j * m + j] = d;
        for (std::size_t i = j + 1; i < m; ++i) {
            double v = G[i * m + j];
            for (std::size_t k = 0; k < j; ++k) v -= G[i * m + k] * G[j * m + k];
            G[i * m + j] = v / d;
        }
    }
    // Forward then backward substitution.
    for (std::size_t i = 0; i < m; ++i) {
        double v = rhs[i];
        for (std::size_t k = 0; k < i; ++k) v -= G[i * m + k] * rhs[k];
        rhs[i] = v / G[i * m + i];
    }
    for (std::size_t ii = m; ii-- > 0;) {
        double v = rhs[ii];
        for (std::size_t k = ii + 1; k < m; ++k) v -= G[k * m + ii] * rhs[k];
        rhs[ii] = v / G[ii * m + ii];
    }
    x = std::move(rhs);
    return true;
}

inline LinearModel fit_linear(const std::vector<std::vector<double>>& X,
                              const std::vector<double>& y, double ridge) {
    const std::size_t n = X.size();
    const std::size_t w = X[0].size();
    const std::size_t m = w + 1;  // trailing intercept column
    std::vector<double> G(m * m, 0.0), rhs(m, 0.0);
    auto at = [&](const std::vector<double>& row, std::size_t j) {
        return j < w ? row[j] : 1.0;
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < m; ++a) {
            rhs[a] += at(X[i], a) * y[i];
            for (std::size_t b = 0; b <= a; ++b) G[a * m + b] += at(X[i], a) * at(X[i], b);
        }
    }
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b) G[a * m + b] = G[b * m + a];

    LinearModel model;
    std::vector<double> sol;
    if (!cholesky_solve(G, rhs, m, sol)) {
        // Ridge on the weight block only; the intercept stays unpenalized.
        // G + lambda*diag(1..1,0) is positive definite for any data.
        for (std::size_t a = 0; a < w; ++a) G[a * m + a] += ridge;
        if (!cholesky_solve(G, rhs, m, sol))
            throw std::runtime_error("fit_linear: ridge system did not factor");
        model.ridge_used = true;
    }
    model.weights.assign(sol.begin(), sol.begin() + static_cast<std::ptrdiff_t>(w));
    model.intercept = sol[w];
    return model;
}

inline double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

// Full-batch gradient descent on MSE with a proximal (soft-threshold) step
// for the L1 weight penalty. A plain subgradient step would oscillate at
// amplitude lr*lambda instead of settling on 0 for large lambda.
inline NetModel train_net(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                          std::size_t hidden, double lambda, double lr, std::size_t epochs,
                          std::uint64_t seed) {
    const std::size_t n = X.size();
    const std::size_t w = X[0].size();
    NetModel net;
    net.input_width = w;
    net.hidden_units = hidden;
    net.l1_lambda = lambda;
    net.w1.resize(hidden * w);
    net.b1.assign(hidden, 0.0);
    net.w2.resize(hidden);

    Rng rng(seed);
    double lim1 = std::sqrt(6.0 / static_cast<double>(w + hidden));
    for (auto& v : net.w1) v = (2.0 * rng.next_double() - 1.0) * lim1;
    double lim2 = std::sqrt(6.0 / static_cast<double>(hidden + 1));
    for (auto& v : net.w2) v = (2.0 * rng.next_double() - 1.0) * lim2;

    std::vector<double> z1(hidden), dW1(hidden * w), dB1(hidden), dW2(hidden);
    net.loss_history.reserve(epochs);
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        std::fill(dW1.begin(), dW1.end(), 0.0);
        std::fill(dB1.begin(), dB1.end(), 0.0);
        std::fill(dW2.begin(), dW2.end(), 0.0);
        double dB2 = 0.0, mse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double out = net.b2;
            for (std::size_t j = 0; j < hidden; ++j) {
                double z = net.b1[j];
                for (std::size_t k = 0; k < w; ++k) z += net.w1[j * w + k] * X[i][k];
                z1[j] = z;
                if (z > 0.0) out += net.w2[j] * z;
            }
            double err = out - y[i];
            mse += err * err;
            double dout = 2.0 * err / static_cast<double>(n);
            dB2 += dout;
            for (std::size_t j = 0; j < hidden; ++j) {
                if (z1[j] > 0.0) {
                    dW2[j] += dout * z1[j];
                    double dz = dout * net.w2[j];
                    dB1[j] += dz;
                    for (std::size_t k = 0; k < w; ++k) dW1[j * w + k] += dz * X[i][k];
                }
            }
        }
        mse /= static_cast<double>(n);
        double penalty = 0.0;
        for (double v : net.w1) penalty += std::abs(v);
        for (double v : net.w2) penalty += std::abs(v);
        net.loss_history.push_back(mse + lambda * penalty);

        double t = lr * lambda;
        for (std::size_t j = 0; j < hidden * w; ++j)
            net.w1[j] = soft_threshold(net.w1[j] - lr * dW1[j], t);
        for (std::size_t j = 0; j < hidden; ++j) {
            net.w2[j] = soft_threshold(net.w2[j] - lr * dW2[j], t);
            net.b1[j] -= lr * dB1[j];
        }
        net.b2 -= lr * dB2;
    }
    return net;
}

inline double net_mse(const NetModel& net, const std::vector<std::vector<double>>& X,
                      const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        double e = net.forward(X[i]) - y[i];
        s += e * e;
    }
    return s / static_cast<double>(X.size());
}

inline NetModel fit_rnet(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                         const LocalLearnerSpec& spec) {
    double y_min = *std::min_element(y.begin(), y.end());
    double y_max = *std::max_element(y.begin(), y.end());
    double range = y_max - y_min;
    if (range == 0.0) range = 1.0;
    std::vector<double> ys(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) ys[i] = (y[i] - y_min) / range;

    std::vector<std::size_t> hiddens =
        spec.hidden_units ? std::vector<std::size_t>{*spec.hidden_units}
                          : std::vector<std::size_t>{8, 16};
    std::vector<double> lambdas = spec.l1_lambda ? std::vector<double>{*spec.l1_lambda}
                                                 : std::vector<double>{0.0, 0.01, 0.1};

    NetModel best;
    double best_mse = 0.0;
    bool first = true;
    std::size_t combo = 0;
    for (std::size_t h : hiddens) {
        for (double lam : lambdas) {
            NetModel net = train_net(X, ys, h, lam, spec.learning_rate, spec.epochs,
                                     derive_seed(spec.seed, combo));
            ++combo;
            double mse = net_mse(net, X, ys);
            // Strict < keeps the first of equal fits: smaller net, then
            // smaller lambda.
            if (first || mse < best_mse) {
                best = std::move(net);
                best_mse = mse;
                first = false;
            }
        }
    }
    best.y_min = y_min;
    best.y_range = range;
    return best;
}

} // namespace detail

inline LocalModel fit_local(const LocalLearnerSpec& spec,
                            const std::vector<std::vector<double>>& X,
                            const std::vector<double>& y) {
    if (X.empty() || X.size() != y.size())
        throw std::invalid_argument("fit_local: need a non-empty matching X/y");
    if (X[0].empty()) throw std::invalid_argument("fit_local: feature width must be >= 1");
    switch (spec.kind) {
        case LearnerKind::linear:
            if (X.size() == 1) return ConstantModel{y[0]};
            return detail::fit_linear(X, y, spec.ridge);
        case LearnerKind::cart:
            return CartModel{fit_cart(X, y, spec.cart)};
        case LearnerKind::rnet:
            if (X.size() == 1) return ConstantModel{y[0]};
            return detail::fit_rnet(X, y, spec);
    }
    throw std::invalid_argument("fit_local: unknown learner kind");
}

inline double predict_local(const LocalModel& model, const std::vector<double>& x) {
    if (const auto* c = std::get_if<ConstantModel>(&model)) return c->value;
    if (const auto* l = std::get_if<LinearModel>(&model)) {
        if (x.size() != l->weights.size())
            throw std::invalid_argument("predict_local: feature width mismatch");
        double v = l->intercept;
        for (std::size_t i = 0; i < x.size(); ++i) v += l->weights[i] * x[i];
        return v;
    }
    if (const auto* t = std::get_if<CartModel>(&model)) return t->tree.predict(x);
    const auto& net = std::get<NetModel>(model);
    if (x.size() != net.input_width)
        throw std::invalid_argument("predict_local: feature width mismatch");
    return net.y_min + net.forward(x) * net.y_range;
}

// Maximum relative disagreement between the analytic gradient of the loss
// (MSE + L1, subgradient 0 at w=0) and central finite differences. The raw
// network output is compared against y; target scaling is a fit-time detail.
inline double grad_check(const NetModel& net, const std::vector<std::vector<double>>& X,
                         const std::vector<double>& y, double eps) {
    if (eps <= 0.0 || eps > 1e-2) throw std::invalid_argument("grad_check: eps out of (0, 1e-2]");
    const std::size_t n = X.size();
    const std::size_t w = net.input_width;
    const std::size_t hidden = net.hidden_units;

    auto loss_at = [&](const NetModel& m) {
        double mse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double e = m.forward(X[i]) - y[i];
            mse += e * e;
        }
        mse /= static_cast<double>(n);
        double penalty = 0.0;
        for (double v : m.w1) penalty += std::abs(v);
        for (double v : m.w2) penalty += std::abs(v);
        return mse + m.l1_lambda * penalty;
    };

    // Analytic gradient by backpropagation plus the L1 term.
    std::vector<double> gW1(hidden * w, 0.0), gB1(hidden, 0.0), gW2(hidden, 0.0);
    double gB2 = 0.0;
    std::vector<double> z1(hidden);
    for (std::size_t i = 0; i < n; ++i) {
        double out = net.b2;
        for (std::size_t j = 0; j < hidden; ++j) {
            double z = net.b1[j];
            for (std::size_t k = 0; k < w; ++k) z += net.w1[j * w + k] * X[i][k];
            z1[j] = z;
            if (z > 0.0) out += net.w2[j] * z;
        }
        double dout = 2.0 * (out - y[i]) / static_cast<double>(n);
        gB2 += dout;
        for (std::size_t j = 0; j < hidden; ++j) {
            if (z1[j] > 0.0) {
                gW2[j] += dout * z1[j];
                double dz = dout * net.w2[j];
                gB1[j] += dz;
                for (std::size_t k = 0; k < w; ++k) gW1[j * w + k] += dz * X[i][k];
            }
        }
    }
    auto sign0 = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
    for (std::size_t j = 0; j < hidden * w; ++j) gW1[j] += net.l1_lambda * sign0(net.w1[j]);
    for (std::size_t j = 0; j < hidden; ++j) gW2[j] += net.l1_lambda * sign0(net.w2[j]);

    // Flat parameter order: w1, b1, w2, b2.
    std::vector<double> analytic;
    analytic.insert(analytic.end(), gW1.begin(), gW1.end());
    analytic.insert(analytic.end(), gB1.begin(), gB1.end());
    analytic.insert(analytic.end(), gW2.begin(), gW2.end());
    analytic.push_back(gB2);
    auto slot = [&](NetModel& m, std::size_t p) -> double& {
        if (p < hidden * w) return m.w1[p];
        p -= hidden * w;
        if (p < hidden) return m.b1[p];
        p -= hidden;
        if (p < hidden) return m.w2[p];
        return m.b2;
    };
    double worst = 0.0;
    NetModel probe = net;
    for (std::size_t p = 0; p < analytic.size(); ++p) {
        double saved = slot(probe, p);
        slot(probe, p) = saved + eps;
        double up = loss_at(probe);
        slot(probe, p) = saved - eps;
        double down = loss_at(probe);
        slot(probe, p) = saved;
        double numeric = (up - down) / (2.0 * eps);
        double rel = std::abs(analytic[p] - numeric) /
                     std::max({1.0, std::abs(analytic[p]), std::abs(numeric)});
        worst = std::max(worst, rel);
    }
    return worst;
}

} // namespace dal
