#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dal/depth.hpp"
#include "helpers.hpp"

using namespace dal;

namespace {

// Monte-Carlo estimate of the dominated area: uniform samples over the
// bounding box, hit when some point dominates the sample toward the
// reference corner.
double mc_hv(const std::vector<Objectives>& pts, ReferencePoint ref, Rng& rng,
             std::size_t iters) {
    double min_h = pts[0].h, min_z = pts[0].z;
    for (const auto& p : pts) {
        min_h = std::min(min_h, p.h);
        min_z = std::min(min_z, p.z);
    }
    double box = (ref.h_r - min_h) * (ref.z_r - min_z);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < iters; ++i) {
        double x = min_h + rng.next_double() * (ref.h_r - min_h);
        double y = min_z + rng.next_double() * (ref.z_r - min_z);
        for (const auto& p : pts) {
            if (x >= p.h && y >= p.z) {
                ++hits;
                break;
            }
        }
    }
    double frac = static_cast<double>(hits) / static_cast<double>(iters);
    return box * frac;
}

} // namespace

TEST_CASE("the reference point scales the worst h up and the worst z toward zero", "[depth]") {
    ReferencePoint ref = reference_point(std::vector<Objectives>{{121.0, -10.0}, {0.0, -8.0}});
    CHECK(ref.h_r == 1.1 * 121.0);
    CHECK(ref.z_r == 0.9 * -8.0);
    CHECK(ref.h_r > 121.0);
    CHECK(ref.z_r > -8.0);
    CHECK_THROWS_AS(reference_point(std::vector<Objectives>{}), std::invalid_argument);
}

TEST_CASE("standard_hv measures the union of dominated rectangles", "[depth]") {
    std::vector<Objectives> pts{{1.0, -1.0}, {2.0, -2.0}};
    ReferencePoint ref{2.2, -0.9};
    double hv = standard_hv(pts, ref);

    // Sweep by descending z: 1.2 x 0.1 strip, then 0.2 x 1.0 strip. The
    // union equals 0.12 + 0.22 - 0.02 = 0.32, the overlap counted once.
    double expected = (2.2 - 1.0) * (-0.9 - -1.0) + (2.2 - 2.0) * (-1.0 - -2.0);
    CHECK(hv == expected);
    CHECK(hv == Catch::Approx(0.32).margin(1e-12));

    CHECK(standard_hv(std::vector<Objectives>{{1.0, -2.0}}, {2.0, -1.0}) == 1.0);
}

TEST_CASE("dominated and duplicate points do not change standard_hv", "[depth]") {
    std::vector<Objectives> base{{1.0, -1.0}, {2.0, -2.0}};
    ReferencePoint ref{2.2, -0.9};
    double hv = standard_hv(base, ref);

    auto padded = base;
    padded.push_back({2.0, -1.0});  // dominated by both
    padded.push_back({1.0, -1.0});  // duplicate
    padded.push_back({2.1, -1.5});
    CHECK(standard_hv(padded, ref) == hv);
}

TEST_CASE("standard_hv requires points strictly inside the reference box", "[depth]") {
    ReferencePoint ref{2.2, -0.9};
    CHECK_THROWS_AS(standard_hv(std::vector<Objectives>{{2.3, -1.0}}, ref),
                    std::invalid_argument);
    CHECK_THROWS_AS(standard_hv(std::vector<Objectives>{{1.0, -0.9}}, ref),
                    std::invalid_argument);
    CHECK_THROWS_AS(standard_hv(std::vector<Objectives>{}, ref), std::invalid_argument);
}

TEST_CASE("standard_hv agrees with a Monte-Carlo estimate", "[depth]") {
    Rng gen(401);
    for (int round = 0; round < 6; ++round) {
        std::size_t count = 3 + gen.next_index(10);
        std::vector<Objectives> pts;
        for (std::size_t i = 0; i < count; ++i)
            pts.push_back({0.1 + 9.9 * gen.next_double(), -20.0 + 19.0 * gen.next_double()});
        ReferencePoint ref = reference_point(pts);

        double hv = standard_hv(pts, ref);
        Rng mc(derive_seed(402, static_cast<std::uint64_t>(round)));
        const std::size_t iters = 300000;
        double est = mc_hv(pts, ref, mc, iters);

        double min_h = pts[0].h, min_z = pts[0].z;
        for (const auto& p : pts) {
            min_h = std::min(min_h, p.h);
            min_z = std::min(min_z, p.z);
        }
        double box = (ref.h_r - min_h) * (ref.z_r - min_z);
        double frac = est / box;
        double margin = 5.0 * box * std::sqrt(frac * (1.0 - frac) / iters) + 1e-9;
        CHECK(hv == Catch::Approx(est).margin(margin));
    }
}

TEST_CASE("mu_hv averages every division's rectangle, dominated or not", "[depth]") {
    ReferencePoint ref{2.0, -0.5};
    std::vector<Objectives> pts{{1.0, -1.0}};
    CHECK(mu_hv(pts, ref) == 0.5);

    pts.push_back({1.5, -0.75});  // dominated, yet it still counts
    CHECK(mu_hv(pts, ref) == 0.3125);
    CHECK_THROWS_AS(mu_hv(std::vector<Objectives>{}, ref), std::invalid_argument);
}

TEST_CASE("mu_hv reproduces the two documented depth comparisons", "[depth]") {
    // Rectangle areas are carried by |z_r - z| with a unit h factor, so each
    // term equals its intended area exactly.
    ReferencePoint ref{2.0, 0.0};
    std::vector<Objectives> depth1{{1.0, -83951.55}, {1.0, -18216.65}};
    std::vector<Objectives> depth2{
        {1.0, -131212.91}, {1.0, -30873.60}, {1.0, -5862.67}, {1.0, -1014.70}};

    double mu1 = mu_hv(depth1, ref);
    double mu2 = mu_hv(depth2, ref);
    CHECK(mu1 == (83951.55 + 18216.65) / 2.0);
    CHECK(mu2 == (((131212.91 + 30873.60) + 5862.67) + 1014.70) / 4.0);
    CHECK(mu1 == Catch::Approx(51084.10).margin(0.005));
    CHECK(mu2 == Catch::Approx(42240.97).margin(0.005));

    std::vector<DepthCandidate> cands(2);
    cands[0].d = 1;
    cands[0].mu_hv = mu1;
    cands[1].d = 2;
    cands[1].mu_hv = mu2;
    CHECK(pick_depth(cands) == 1);
}

TEST_CASE("pick_depth keeps the largest mu_hv and breaks ties downward", "[depth]") {
    auto cand = [](std::size_t d, double v) {
        DepthCandidate c;
        c.d = d;
        c.mu_hv = v;
        return c;
    };
    std::vector<DepthCandidate> four{cand(1, 56411.36), cand(2, 118013.45),
                                     cand(3, 54755.69), cand(4, 33827.60)};
    CHECK(pick_depth(four) == 2);

    CHECK(pick_depth({cand(1, 10.0), cand(2, 10.0)}) == 1);
    CHECK(pick_depth({cand(1, 0.0), cand(2, 0.0)}) == 1);
    CHECK_FALSE(pick_depth({}).has_value());
}

TEST_CASE("a degenerate all-zero h reference compares on z alone", "[depth]") {
    std::vector<Objectives> pts{{0.0, -10.0}, {0.0, -8.0}};
    ReferencePoint ref = reference_point(pts);
    CHECK(ref.h_r == 0.0);
    double expected = (std::abs(ref.z_r + 10.0) + std::abs(ref.z_r + 8.0)) / 2.0;
    CHECK(mu_hv(pts, ref) == expected);
}

TEST_CASE("adapt_depth pools every candidate behind one reference point", "[depth]") {
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (int i = 0; i < 5; ++i) {
        X.push_back({0, 0});
        y.push_back(122.0);
    }
    for (int i = 0; i < 5; ++i) {
        X.push_back({0, 1});
        y.push_back(100.0);
    }
    for (int i = 0; i < 8; ++i) {
        X.push_back({1, static_cast<double>(i % 2)});
        y.push_back(50.0);
    }
    CartTree tree = fit_cart(X, y);
    REQUIRE(tree.depth() == 2);

    DepthChoice choice = adapt_depth(tree);
    REQUIRE(choice.candidates.size() == 2);
    CHECK(choice.candidates[0].d == 1);
    CHECK(choice.candidates[1].d == 2);
    CHECK(choice.candidates[0].divisions.size() == 2);
    CHECK(choice.candidates[1].divisions.size() == 3);

    // Pool: (121, -10), (0, -8), (0, -5), (0, -5), (0, -8).
    CHECK(choice.ref.h_r == Catch::Approx(133.1).margin(1e-9));
    CHECK(choice.ref.z_r == Catch::Approx(-4.5).margin(1e-9));
    CHECK(choice.candidates[0].mu_hv == Catch::Approx(266.2).margin(1e-9));
    CHECK(choice.candidates[1].mu_hv == Catch::Approx(199.65).margin(1e-9));
    REQUIRE(choice.d.has_value());
    CHECK(*choice.d == 1);
}

TEST_CASE("a single-leaf tree yields an empty depth choice", "[depth]") {
    CartTree tree = fit_cart({{0}, {1}, {2}}, {5, 5, 5});
    DepthChoice choice = adapt_depth(tree);
    CHECK_FALSE(choice.d.has_value());
    CHECK(choice.candidates.empty());
}
