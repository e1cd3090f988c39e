#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "dal/learners.hpp"
#include "helpers.hpp"

using namespace dal;

namespace {

double ols_gradient_norm(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                         const LinearModel& m) {
    // Stationarity of the squared error in every weight and the intercept.
    std::size_t w = m.weights.size();
    double worst = 0.0;
    for (std::size_t a = 0; a <= w; ++a) {
        double g = 0.0;
        for (std::size_t i = 0; i < X.size(); ++i) {
            double r = m.intercept - y[i];
            for (std::size_t k = 0; k < w; ++k) r += m.weights[k] * X[i][k];
            g += (a < w ? X[i][a] : 1.0) * r;
        }
        worst = std::max(worst, std::abs(g));
    }
    return worst;
}

} // namespace

TEST_CASE("learner names round-trip", "[learners]") {
    for (auto k : {LearnerKind::linear, LearnerKind::cart, LearnerKind::rnet})
        CHECK(learner_from_name(learner_name(k)) == k);
    CHECK_FALSE(learner_from_name("svm").has_value());
}

TEST_CASE("fit_linear recovers an exact linear relation", "[learners]") {
    Rng rng(501);
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (int i = 0; i < 12; ++i) {
        double a = rng.next_double() * 5.0, b = rng.next_double() * 5.0;
        X.push_back({a, b});
        y.push_back(3.0 * a - 2.0 * b + 5.0);
    }
    LocalLearnerSpec spec;
    spec.kind = LearnerKind::linear;
    LocalModel m = fit_local(spec, X, y);
    const auto& lin = std::get<LinearModel>(m);
    CHECK_FALSE(lin.ridge_used);
    CHECK(lin.weights[0] == Catch::Approx(3.0).margin(1e-9));
    CHECK(lin.weights[1] == Catch::Approx(-2.0).margin(1e-9));
    CHECK(lin.intercept == Catch::Approx(5.0).margin(1e-9));
    CHECK(predict_local(m, {1.0, 1.0}) == Catch::Approx(6.0).margin(1e-9));
}

TEST_CASE("fit_linear satisfies the normal equations on noisy data", "[learners]") {
    Rng rng(502);
    for (int round = 0; round < 8; ++round) {
        std::vector<std::vector<double>> X;
        std::vector<double> y;
        std::size_t w = 1 + rng.next_index(4);
        for (int i = 0; i < 20; ++i) {
            std::vector<double> row;
            double t = 0.0;
            for (std::size_t f = 0; f < w; ++f) {
                row.push_back(rng.next_double() * 10.0);
                t += (static_cast<double>(f) + 1.0) * row.back();
            }
            X.push_back(row);
            y.push_back(t + rng.next_double());
        }
        LinearModel m = detail::fit_linear(X, y, 1e-6);
        CHECK_FALSE(m.ridge_used);
        double scale = 0.0;
        for (double v : y) scale += std::abs(v);
        CHECK(ols_gradient_norm(X, y, m) <= 1e-7 * (1.0 + scale));
    }
}

TEST_CASE("collinear columns trigger the ridge fallback", "[learners]") {
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (int i = 1; i <= 10; ++i) {
        double v = static_cast<double>(i);
        X.push_back({v, v});
        y.push_back(2.0 * v);
    }
    LinearModel m = detail::fit_linear(X, y, 1e-6);
    CHECK(m.ridge_used);
    // Symmetry up to the conditioning of the barely-ridged system.
    CHECK(std::abs(m.weights[0] - m.weights[1]) < 1e-6);
    for (int i = 1; i <= 10; ++i) {
        double v = static_cast<double>(i);
        CHECK(predict_local(LocalModel{m}, {v, v}) == Catch::Approx(2.0 * v).margin(1e-6));
    }
}

TEST_CASE("a constant feature column falls back to the mean", "[learners]") {
    LinearModel m = detail::fit_linear({{3}, {3}, {3}}, {1, 2, 6}, 1e-6);
    CHECK(m.ridge_used);
    CHECK(predict_local(LocalModel{m}, {3.0}) == Catch::Approx(3.0).margin(1e-6));
}

TEST_CASE("a single sample degenerates to a constant", "[learners]") {
    for (auto kind : {LearnerKind::linear, LearnerKind::rnet}) {
        LocalLearnerSpec spec;
        spec.kind = kind;
        LocalModel m = fit_local(spec, {{1.0, 2.0}}, {7.0});
        REQUIRE(std::holds_alternative<ConstantModel>(m));
        CHECK(predict_local(m, {9.0, 9.0}) == 7.0);
    }
    LocalLearnerSpec spec;
    spec.kind = LearnerKind::cart;
    LocalModel m = fit_local(spec, {{1.0, 2.0}}, {7.0});
    REQUIRE(std::holds_alternative<CartModel>(m));
    CHECK(predict_local(m, {1.0, 2.0}) == 7.0);
}

TEST_CASE("fit_local validates its inputs", "[learners]") {
    LocalLearnerSpec spec;
    CHECK_THROWS_AS(fit_local(spec, {}, {}), std::invalid_argument);
    CHECK_THROWS_AS(fit_local(spec, {{1.0}}, {1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(fit_local(spec, {{}}, {1.0}), std::invalid_argument);
}

TEST_CASE("the cart learner memorizes distinct rows", "[learners]") {
    Rng rng(503);
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (int i = 0; i < 10; ++i) {
        X.push_back({static_cast<double>(i)});
        y.push_back(rng.next_double() * 9.0);
    }
    LocalLearnerSpec spec;
    spec.kind = LearnerKind::cart;
    LocalModel m = fit_local(spec, X, y);
    for (std::size_t i = 0; i < X.size(); ++i) CHECK(predict_local(m, X[i]) == y[i]);
}

TEST_CASE("rnet training is deterministic in the seed", "[learners]") {
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (int i = 0; i < 8; ++i) {
        X.push_back({static_cast<double>(i) / 8.0});
        y.push_back(std::sin(static_cast<double>(i)));
    }
    LocalLearnerSpec spec;
    spec.kind = LearnerKind::rnet;
    spec.epochs = 40;
    spec.seed = 99;

    auto a = fit_local(spec, X, y);
    auto b = fit_local(spec, X, y);
    const auto& na = std::get<NetModel>(a);
    const auto& nb = std::get<NetModel>(b);
    CHECK(na.w1 == nb.w1);
    CHECK(na.w2 == nb.w2);
    CHECK(na.b1 == nb.b1);
    CHECK(na.b2 == nb.b2);
    CHECK(na.loss_history == nb.loss_history);

    spec.seed = 100;
    auto c = fit_local(spec, X, y);
    CHECK(na.w1 != std::get<NetModel>(c).w1);
}

TEST_CASE("the rnet grid search keeps the lowest training error", "[learners]") {
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (int i = 0; i < 10; ++i) {
        double v = static_cast<double>(i) / 10.0;
        X.push_back({v});
        y.push_back(4.0 + 3.0 * v * v);
    }
    LocalLearnerSpec spec;
    spec.kind = LearnerKind::rnet;
    spec.epochs = 50;
    spec.seed = 11;

    LocalModel fitted = fit_local(spec, X, y);
    const auto& chosen = std::get<NetModel>(fitted);

    const double y_min = *std::min_element(y.begin(), y.end());
    const double y_max = *std::max_element(y.begin(), y.end());
    std::vector<double> ys;
    for (double v : y) ys.push_back((v - y_min) / (y_max - y_min));
    NetModel best;
    double best_mse = 0.0;
    bool first = true;
    std::size_t combo = 0;
    for (std::size_t h : {8, 16}) {
        for (double lam : {0.0, 0.01, 0.1}) {
            NetModel net = detail::train_net(X, ys, h, lam, spec.learning_rate, spec.epochs,
                                             derive_seed(spec.seed, combo));
            ++combo;
            double mse = detail::net_mse(net, X, ys);
            if (first || mse < best_mse) {
                best = net;
                best_mse = mse;
                first = false;
            }
        }
    }
    CHECK(chosen.hidden_units == best.hidden_units);
    CHECK(chosen.l1_lambda == best.l1_lambda);
    CHECK(chosen.w1 == best.w1);
    CHECK(chosen.y_min == y_min);
    CHECK(chosen.y_range == y_max - y_min);

    LocalLearnerSpec pinned = spec;
    pinned.hidden_units = 4;
    pinned.l1_lambda = 0.01;
    LocalModel pm = fit_local(pinned, X, y);
    CHECK(std::get<NetModel>(pm).hidden_units == 4);
    CHECK(std::get<NetModel>(pm).l1_lambda == 0.01);
}

TEST_CASE("rnet fits a linear response closely", "[learners]") {
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (int i = 0; i < 16; ++i) {
        double v = static_cast<double>(i) / 15.0;
        X.push_back({v});
        y.push_back(10.0 + 40.0 * v);
    }
    LocalLearnerSpec spec;
    spec.kind = LearnerKind::rnet;
    spec.hidden_units = 8;
    spec.l1_lambda = 0.0;
    spec.learning_rate = 0.05;
    spec.epochs = 800;
    spec.seed = 7;
    LocalModel m = fit_local(spec, X, y);
    const auto& net = std::get<NetModel>(m);
    CHECK(net.loss_history.size() == 800);
    CHECK(net.loss_history.back() < net.loss_history.front());

    double mae = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i)
        mae += std::abs(predict_local(m, X[i]) - y[i]);
    mae /= static_cast<double>(X.size());
    CHECK(mae < 2.0);  // 5% of the response range
}

TEST_CASE("an overwhelming L1 penalty zeroes every weight", "[learners]") {
    Rng rng(504);
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (int i = 0; i < 12; ++i) {
        X.push_back({rng.next_double(), rng.next_double()});
        y.push_back(5.0 + 20.0 * rng.next_double());
    }
    LocalLearnerSpec spec;
    spec.kind = LearnerKind::rnet;
    spec.hidden_units = 4;
    spec.l1_lambda = 1e6;
    spec.epochs = 400;
    LocalModel m = fit_local(spec, X, y);
    const auto& net = std::get<NetModel>(m);
    for (double v : net.w1) CHECK(v == 0.0);
    for (double v : net.w2) CHECK(v == 0.0);

    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    CHECK(predict_local(m, {0.5, 0.5}) == Catch::Approx(mean).margin(0.05));
}

TEST_CASE("analytic gradients match central differences away from kinks", "[learners]") {
    Rng rng(505);
    const std::size_t hidden = 3, width = 2, n = 6;
    for (int round = 0; round < 5; ++round) {
        NetModel net;
        std::vector<std::vector<double>> X;
        std::vector<double> y;
        // Resample until every pre-activation and weight clears the margin
        // that keeps 1e-5 probes away from the ReLU and L1 kinks.
        for (int attempt = 0; attempt < 200; ++attempt) {
            net = NetModel{};
            net.input_width = width;
            net.hidden_units = hidden;
            net.l1_lambda = 0.05;
            for (std::size_t i = 0; i < hidden * width; ++i)
                net.w1.push_back(2.0 * rng.next_double() - 1.0);
            for (std::size_t i = 0; i < hidden; ++i) {
                net.b1.push_back(2.0 * rng.next_double() - 1.0);
                net.w2.push_back(2.0 * rng.next_double() - 1.0);
            }
            net.b2 = rng.next_double();
            X.clear();
            y.clear();
            for (std::size_t i = 0; i < n; ++i) {
                X.push_back({0.2 + rng.next_double(), 0.2 + rng.next_double()});
                y.push_back(2.0 * rng.next_double());
            }
            bool clear = true;
            for (const auto& row : X) {
                for (std::size_t j = 0; j < hidden; ++j) {
                    double z = net.b1[j];
                    for (std::size_t k = 0; k < width; ++k) z += net.w1[j * width + k] * row[k];
                    clear = clear && std::abs(z) > 1e-3;
                }
            }
            for (double v : net.w1) clear = clear && std::abs(v) > 1e-3;
            for (double v : net.w2) clear = clear && std::abs(v) > 1e-3;
            if (clear) break;
        }
        CHECK(grad_check(net, X, y, 1e-5) < 1e-6);
    }
}

TEST_CASE("a weight at exactly zero uses the flat subgradient", "[learners]") {
    NetModel net;
    net.input_width = 1;
    net.hidden_units = 2;
    net.l1_lambda = 0.1;
    net.w1 = {0.0, 0.8};
    net.b1 = {0.5, 0.3};
    net.w2 = {0.7, -0.6};
    net.b2 = 0.2;
    std::vector<std::vector<double>> X{{0.4}, {0.9}};
    std::vector<double> y{1.0, 0.5};
    CHECK(grad_check(net, X, y, 1e-5) < 1e-6);
}

TEST_CASE("grad_check validates eps", "[learners]") {
    NetModel net;
    net.input_width = 1;
    net.hidden_units = 1;
    net.w1 = {0.5};
    net.b1 = {0.1};
    net.w2 = {0.5};
    CHECK_THROWS_AS(grad_check(net, {{1.0}}, {1.0}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(grad_check(net, {{1.0}}, {1.0}, 0.02), std::invalid_argument);
}

TEST_CASE("predict_local checks feature widths", "[learners]") {
    LinearModel lin;
    lin.weights = {1.0, 2.0};
    CHECK_THROWS_AS(predict_local(LocalModel{lin}, {1.0}), std::invalid_argument);
    NetModel net;
    net.input_width = 2;
    net.hidden_units = 1;
    net.w1 = {0.1, 0.1};
    net.b1 = {0.0};
    net.w2 = {1.0};
    CHECK_THROWS_AS(predict_local(LocalModel{net}, {1.0, 2.0, 3.0}), std::invalid_argument);
}
