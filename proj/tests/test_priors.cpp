#include <doctest.h>

#include <cmath>
#include <random>

#include "ddsr/errors.hpp"
#include "ddsr/smoothness.hpp"
#include "ddsr/tv.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ddsr;

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

GuidanceImage vertical_edge(int w, int h, int edge_x, double left, double right) {
    std::vector<double> v(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) v[static_cast<std::size_t>(y * w + x)] = x < edge_x ? left : right;
    return GuidanceImage(w, h, std::move(v));
}

}  // namespace

TEST_CASE("local_variance") {
    const std::vector<double> flat(25, 3.0);
    CHECK(local_variance(flat, 5, 5, 2, 2, 3) == 0.0);

    const std::vector<double> half = {0, 1, 0, 1};
    CHECK(local_variance(half, 2, 2, 0, 0, 3) == 0.25);

    std::vector<double> grid(25);
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = static_cast<double>(i);
    // Corner window clipped to {0, 1, 5, 6}.
    CHECK(local_variance(grid, 5, 5, 0, 0, 3) == doctest::Approx(6.5));
}

TEST_CASE("alpha weights") {
    SmoothnessConfig cfg;
    SUBCASE("uniform input gives uniform weights") {
        const auto aw = alpha_weights(DepthMap(9, 9, 1.0), testutil::flat_guide(9, 9, 0.3), 4, 4, cfg);
        CHECK(aw.neighbors.size() == 48);
        for (const auto& [v, w] : aw.neighbors) {
            CHECK(v != aw.center);
            CHECK(w == doctest::Approx(1.0 / 48).epsilon(1e-14));
        }
    }
    SUBCASE("a guidance edge suppresses cross-edge weights") {
        // Flat depth, guidance step 0 | 1 between columns 4 and 5 of a 9x9
        // image; pixel (4, 4) sees 4 of its 7 window columns on its own side.
        const auto guide = vertical_edge(9, 9, 5, 0.0, 1.0);
        const auto aw = alpha_weights(DepthMap(9, 9, 1.0), guide, 4, 4, cfg);
        double near = 0, far = 0;
        for (const auto& [v, w] : aw.neighbors) {
            if (static_cast<int>(v % 9) < 5) near = std::max(near, w);
            else far = std::max(far, w);
        }
        // The bandwidth is the local guidance variance p(1-p) with p = 3/7, so
        // the ratio is exp(-1 / (2 p (1-p))) whatever the step height.
        const double p = 3.0 / 7.0;
        CHECK(far / near == doctest::Approx(std::exp(-1.0 / (2 * p * (1 - p)))).epsilon(1e-12));
        CHECK(far / near < 0.14);

        // An aligned depth edge multiplies in the same factor again.
        std::vector<double> d(81);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = i % 9 < 5 ? 2.0 : 5.0;
        const auto both = alpha_weights(DepthMap(9, 9, d), guide, 4, 4, cfg);
        double near2 = 0, far2 = 0;
        for (const auto& [v, w] : both.neighbors) {
            if (static_cast<int>(v % 9) < 5) near2 = std::max(near2, w);
            else far2 = std::max(far2, w);
        }
        CHECK(far2 / near2 == doctest::Approx(std::pow(std::exp(-1.0 / (2 * p * (1 - p))), 2)).epsilon(1e-12));
    }
    SUBCASE("an isolated outlier in the window gets a negligible weight") {
        std::vector<double> g(81, 0.0);
        g[3 * 9 + 3] = 1.0;  // one pixel inside the window of (4, 4)
        const auto aw = alpha_weights(DepthMap(9, 9, 1.0), GuidanceImage(9, 9, g), 4, 4, cfg);
        double outlier = 0, other = 0;
        for (const auto& [v, w] : aw.neighbors) (v == 3 * 9 + 3 ? outlier : other) = w;
        CHECK(outlier <= 1e-6 * other);
    }
    SUBCASE("self guidance concentrates on the pixel's own plane") {
        std::vector<double> d(81);
        for (int y = 0; y < 9; ++y)
            for (int x = 0; x < 9; ++x) d[static_cast<std::size_t>(y * 9 + x)] = x < 4 ? 1.0 + 0.01 * y : 3.0;
        const DepthMap unary(9, 9, d);
        const auto aw = alpha_weights(unary, guidance_from_depth(unary), 2, 4, cfg);
        double own = 0, own_min = 1, other_max = 0;
        for (const auto& [v, w] : aw.neighbors) {
            if (static_cast<int>(v % 9) < 4) {
                own += w;
                own_min = std::min(own_min, w);
            } else {
                other_max = std::max(other_max, w);
            }
        }
        CHECK(own > 0.99);
        CHECK(other_max < 0.05 * own_min);
    }
    SUBCASE("cross-edge weight never grows with guidance contrast") {
        double previous = 1.0;
        for (double contrast : {0.0, 0.05, 0.1, 0.2, 0.4, 0.8, 1.0}) {
            const auto aw = alpha_weights(DepthMap(7, 7, 2.0), vertical_edge(7, 7, 4, 0.0, contrast), 3, 3, cfg);
            double cross = 0;
            for (const auto& [v, w] : aw.neighbors)
                if (static_cast<int>(v % 7) >= 4) cross += w;
            CHECK(cross <= previous + 1e-15);
            previous = cross;
        }
    }
    SUBCASE("matches the direct kernel evaluation and sums to one") {
        std::mt19937_64 rng(12);
        for (int t = 0; t < 10; ++t) {
            const auto unary = testutil::random_map(rng, 8, 8, 0.0, 10.0);
            const auto guide = testutil::random_guide(rng, 8, 8);
            for (auto [x, y] : {std::pair{0, 0}, std::pair{3, 4}, std::pair{7, 2}}) {
                const auto aw = alpha_weights(unary, guide, x, y, cfg);
                const auto ref = oracle::alpha(unary, guide, x, y, cfg.window, cfg.sigma_floor);
                REQUIRE(aw.neighbors.size() == ref.size());
                double total = 0;
                for (std::size_t k = 0; k < ref.size(); ++k) {
                    CHECK(aw.neighbors[k].first == ref[k].first);
                    CHECK(std::abs(aw.neighbors[k].second - ref[k].second) <= 1e-12);
                    CHECK(aw.neighbors[k].second >= 0.0);
                    total += aw.neighbors[k].second;
                }
                CHECK(std::abs(total - 1.0) <= 1e-12);
            }
        }
    }
    CHECK_THROWS_AS(alpha_weights(DepthMap(4, 4, 1.0), testutil::flat_guide(3, 4, 0.0), 0, 0, cfg), DimensionError);
    SmoothnessConfig bad;
    bad.window = 4;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.window = 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("assembled smoothness system") {
    std::mt19937_64 rng(31);
    SmoothnessConfig cfg;
    SUBCASE("quadratic form equals the per-pixel sum and constants are annihilated") {
        for (int t = 0; t < 20; ++t) {
            const int w = 2 + static_cast<int>(rng() % 7), h = 2 + static_cast<int>(rng() % 7);
            const auto unary = testutil::random_map(rng, w, h, 0.0, 5.0);
            const auto guide = testutil::random_guide(rng, w, h);
            const auto d = testutil::random_map(rng, w, h, -2.0, 2.0);
            const auto sys = assemble_system(unary, guide, cfg);
            const auto r = sys.a.multiply(d.values());
            double q = 0;
            for (std::size_t i = 0; i < r.size(); ++i) q += (r[i] - sys.b[i]) * (r[i] - sys.b[i]);
            const double ref = oracle::smoothness_energy(d, unary, guide, cfg.window, cfg.sigma_floor);
            CHECK(std::abs(q - ref) <= 1e-10 * std::max(1.0, ref));

            for (double v : sys.b) CHECK(v == 0.0);
            for (double v : sys.a.multiply(std::vector<double>(d.size(), 1.0))) CHECK(std::abs(v) <= 1e-12);

            std::vector<double> shifted(d.values().begin(), d.values().end());
            for (double& v : shifted) v += 7.5;
            const auto rs = sys.a.multiply(shifted);
            CHECK(std::abs(dot(rs, rs) - q) <= 1e-9 * std::max(1.0, q));

            for (std::size_t row = 0; row < sys.a.rows(); ++row) {
                CHECK(sys.a.coeff(row, row) == 1.0);
                CHECK(sys.a.row_nonzeros(row) <= 49);
            }
        }
    }
    SUBCASE("3x3 window nonzero counts") {
        SmoothnessConfig small;
        small.window = 3;
        const auto sys = assemble_system(testutil::random_map(rng, 3, 3, 0, 1), testutil::random_guide(rng, 3, 3), small);
        CHECK(sys.a.row_nonzeros(4) == 9);
        CHECK(sys.a.row_nonzeros(0) == 4);
        CHECK(sys.a.row_nonzeros(1) == 6);
    }
    SUBCASE("assembly does not depend on the thread count") {
        const auto unary = testutil::random_map(rng, 20, 17, 0, 1);
        const auto guide = testutil::random_guide(rng, 20, 17);
        const auto a = assemble_system(unary, guide, cfg, 1);
        const auto b = assemble_system(unary, guide, cfg, 3);
        CHECK(std::equal(a.a.values().begin(), a.a.values().end(), b.a.values().begin(), b.a.values().end()));
        CHECK(std::equal(a.a.col_idx().begin(), a.a.col_idx().end(), b.a.col_idx().begin(), b.a.col_idx().end()));
    }
    CHECK_THROWS_AS(assemble_system(DepthMap(4, 4, 1.0), testutil::flat_guide(4, 3, 0.0), cfg), DimensionError);
}

TEST_CASE("sparse matrix transpose product is the adjoint") {
    std::mt19937_64 rng(8);
    const auto sys = assemble_system(testutil::random_map(rng, 7, 5, 0, 1), testutil::random_guide(rng, 7, 5), {});
    const auto x = testutil::random_map(rng, 7, 5, -1, 1);
    const auto y = testutil::random_map(rng, 7, 5, -1, 1);
    const std::vector<double> xv(x.values().begin(), x.values().end()), yv(y.values().begin(), y.values().end());
    CHECK(std::abs(dot(sys.a.multiply(xv), yv) - dot(xv, sys.a.multiply_transpose(yv))) <= 1e-12);
}

TEST_CASE("gradient operator") {
    SUBCASE("ramp and constant") {
        const auto g = apply_gradient(DepthMap(3, 2, std::vector<double>{0, 2, 4, 0, 2, 4}));
        REQUIRE(g.size() == 2 * 2 + 3 * 1);
        const std::vector<double> expect = {2, 2, 2, 2, 0, 0, 0};
        CHECK(g == expect);
        for (double v : apply_gradient(DepthMap(5, 4, 9.0))) CHECK(v == 0.0);
    }
    SUBCASE("row layout and structure") {
        const GradientOperator op(4, 3);
        CHECK(op.rows() == 3 * 3 + 4 * 2);
        CHECK(op.row_pixels(0) == std::pair<std::size_t, std::size_t>{0, 1});
        CHECK(op.row_pixels(3) == std::pair<std::size_t, std::size_t>{4, 5});
        CHECK(op.row_pixels(op.horizontal_rows()) == std::pair<std::size_t, std::size_t>{0, 4});
        const Eigen::MatrixXd P = oracle::dense_gradient(4, 3);
        for (std::size_t i = 0; i < op.rows(); ++i) {
            std::vector<double> e(op.rows(), 0.0);
            e[i] = 1.0;
            const auto col = op.apply_transpose(e);
            int nonzero = 0;
            for (std::size_t j = 0; j < col.size(); ++j) {
                CHECK(col[j] == P(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
                if (col[j] != 0.0) ++nonzero;
            }
            CHECK(nonzero == 2);
        }
        for (double v : apply_gradient_transpose(std::vector<double>(op.rows(), 0.0), 4, 3)) CHECK(v == 0.0);
    }
    SUBCASE("adjoint identity and TV oracle") {
        std::mt19937_64 rng(6);
        for (int t = 0; t < 50; ++t) {
            const auto x = testutil::random_map(rng, 7, 5, -3, 3);
            const GradientOperator op(7, 5);
            std::vector<double> y(op.rows());
            std::uniform_real_distribution<double> u(-3, 3);
            for (double& v : y) v = u(rng);
            const std::vector<double> xv(x.values().begin(), x.values().end());
            CHECK(std::abs(dot(op.apply(xv), y) - dot(xv, op.apply_transpose(y))) <= 1e-12);

            const auto m = testutil::random_map(rng, 8, 8, -1, 1);
            CHECK(std::abs(total_variation(m) - oracle::total_variation(m)) <= 1e-12);
        }
    }
    SUBCASE("one-dimensional maps and errors") {
        CHECK(apply_gradient(DepthMap(3, 1, std::vector<double>{1, 4, 2})) == std::vector<double>{3, -2});
        CHECK_THROWS_AS(apply_gradient(DepthMap(1, 1, 0.0)), DimensionError);
        CHECK_THROWS_AS(apply_gradient_transpose(std::vector<double>(3), 3, 3), DimensionError);
    }
}

TEST_CASE("reweighting") {
    const auto w = reweight(DepthMap(4, 4, 2.0), 1e-4);
    for (double v : w.weights) CHECK(v == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(reweight(std::vector<double>{1.0}, 1e-12).weights[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_THROWS_AS(reweight(std::vector<double>{1.0}, 0.0), ConfigError);

    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> u(-10, 10);
    std::vector<double> g(200);
    for (double& v : g) v = u(rng);
    const double eps = 1e-3;
    const auto rw = reweight(g, eps);
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(rw.weights[i] > 0.0);
        CHECK(rw.weights[i] <= 1.0 / std::sqrt(eps));
        for (std::size_t j = 0; j < g.size(); ++j)
            if (std::abs(g[i]) <= std::abs(g[j])) CHECK(rw.weights[i] >= rw.weights[j]);
    }

    // Reweighted quadratic at the current iterate never exceeds the L1 norm.
    for (int t = 0; t < 20; ++t) {
        const auto m = testutil::random_map(rng, 6, 6, -2, 2);
        const auto gm = apply_gradient(m);
        const auto wm = reweight(m, 1e-4);
        double quad = 0, l1 = 0;
        for (std::size_t i = 0; i < gm.size(); ++i) {
            quad += wm.weights[i] * wm.weights[i] * gm[i] * gm[i];
            l1 += std::abs(gm[i]);
        }
        CHECK(quad <= l1);
    }
}
