#include <doctest.h>

#include <cmath>
#include <random>

#include "ddsr/errors.hpp"
#include "ddsr/irls.hpp"
#include "ddsr/pipeline.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ddsr;

namespace {

struct Instance {
    DepthMap unary;
    GuidanceImage guide;
    SparseSystem sys;
};

Instance random_instance(std::mt19937_64& rng, int w, int h, double scale = 1.0) {
    auto unary = testutil::random_map(rng, w, h, 0.0, scale);
    auto guide = testutil::random_guide(rng, w, h);
    auto sys = assemble_system(unary, guide, {});
    return {std::move(unary), std::move(guide), std::move(sys)};
}

Eigen::VectorXd to_eigen(std::span<const double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
    return out;
}

}  // namespace

TEST_CASE("energy terms") {
    std::mt19937_64 rng(3);
    RefineConfig cfg;
    SUBCASE("constant input has zero energy") {
        const DepthMap c(5, 5, 4.0);
        const auto sys = assemble_system(c, testutil::flat_guide(5, 5, 0.5), {});
        const auto e = energy(c, c, sys, cfg);
        CHECK(e.fidelity == 0.0);
        CHECK(std::abs(e.smoothness) <= 1e-20);
        CHECK(e.tv == 0.0);
    }
    SUBCASE("term-by-term evaluation") {
        for (int t = 0; t < 10; ++t) {
            const auto inst = random_instance(rng, 6, 6);
            const auto d = testutil::random_map(rng, 6, 6, 0.0, 1.0);
            const auto e = energy(d, inst.unary, inst.sys, cfg);
            double fid = 0;
            for (std::size_t i = 0; i < d.size(); ++i) fid += (d[i] - inst.unary[i]) * (d[i] - inst.unary[i]);
            const double sm = oracle::smoothness_energy(d, inst.unary, inst.guide, 7, 1e-4);
            const double tv = oracle::total_variation(d);
            CHECK(std::abs(e.total - (0.5 * fid + 0.7 * sm + 0.7 * tv)) <= 1e-10);

            RefineConfig zero = cfg;
            zero.lambda1 = zero.lambda2 = 0.0;
            CHECK(std::abs(energy(d, inst.unary, inst.sys, zero).total - 0.5 * fid) <= 1e-12);
        }
    }
    CHECK_THROWS_AS(energy(DepthMap(4, 4, 0.0), DepthMap(5, 5, 0.0), SparseSystem{}, cfg), DimensionError);
}

TEST_CASE("normal operator is symmetric positive definite") {
    std::mt19937_64 rng(19);
    RefineConfig cfg;
    for (int t = 0; t < 10; ++t) {
        const auto inst = random_instance(rng, 7, 6);
        const auto w = reweight(testutil::random_map(rng, 7, 6, 0, 1), 1e-3);
        const NormalOperator op(inst.sys, w, cfg);
        const auto x = testutil::random_map(rng, 7, 6, -1, 1);
        const auto y = testutil::random_map(rng, 7, 6, -1, 1);
        const auto mx = op.apply(x.values());
        const auto my = op.apply(y.values());
        double mxy = 0, xmy = 0, xmx = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            mxy += mx[i] * y[i];
            xmy += x[i] * my[i];
            xmx += mx[i] * x[i];
        }
        CHECK(std::abs(mxy - xmy) <= 1e-10 * std::max(1.0, std::abs(mxy)));
        CHECK(xmx > 0.0);

        // The diagonal agrees with a dense assembly.
        const Eigen::MatrixXd A = oracle::dense_smoothness(inst.unary, inst.guide, 7, 1e-4);
        const Eigen::MatrixXd P = oracle::dense_gradient(7, 6);
        const Eigen::VectorXd wv = to_eigen(w.weights);
        const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(42, 42) + 2 * cfg.lambda1 * A.transpose() * A +
                                  2 * cfg.lambda2 * P.transpose() * wv.array().square().matrix().asDiagonal() * P;
        const auto diag = op.diagonal();
        for (Eigen::Index i = 0; i < 42; ++i) CHECK(std::abs(diag[static_cast<std::size_t>(i)] - M(i, i)) <= 1e-9);
    }
}

TEST_CASE("conjugate gradient matches a dense solve") {
    std::mt19937_64 rng(101);
    for (int t = 0; t < 20; ++t) {
        const int w = 2 + static_cast<int>(rng() % 5), h = 2 + static_cast<int>(rng() % 5);
        const auto inst = random_instance(rng, w, h);
        const auto weights = reweight(testutil::random_map(rng, w, h, 0, 1), 1e-2);
        RefineConfig cfg;
        cfg.jacobi = t % 2 == 1;
        const auto solved = solve_normal_equations(inst.unary, inst.sys, weights, cfg);
        CHECK(solved.relative_residual <= cfg.cg_tol);

        const auto n = static_cast<Eigen::Index>(inst.unary.size());
        const Eigen::MatrixXd A = oracle::dense_smoothness(inst.unary, inst.guide, 7, 1e-4);
        const Eigen::MatrixXd P = oracle::dense_gradient(w, h);
        const Eigen::VectorXd wv = to_eigen(weights.weights);
        const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) + 1.4 * A.transpose() * A +
                                  1.4 * P.transpose() * wv.array().square().matrix().asDiagonal() * P;
        const Eigen::VectorXd x = M.ldlt().solve(to_eigen(inst.unary.values()));
        for (Eigen::Index i = 0; i < n; ++i) CHECK(std::abs(solved.solution[static_cast<std::size_t>(i)] - x(i)) <= 1e-8);
    }
}

TEST_CASE("solver limits are reported") {
    std::mt19937_64 rng(7);
    const auto inst = random_instance(rng, 12, 12);
    RefineConfig cfg;
    cfg.cg_max_iters = 1;
    cfg.cg_tol = 1e-14;
    const auto w = reweight(inst.unary, 1e-6);
    CHECK_THROWS_AS(solve_normal_equations(inst.unary, inst.sys, w, cfg), SolverError);
    CHECK_THROWS_AS(irls_refine(inst.unary, inst.sys, cfg), SolverError);

    RefineConfig bad;
    bad.lambda1 = -1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = {};
    bad.tv_epsilon = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("irls refinement") {
    std::mt19937_64 rng(55);
    SUBCASE("zero lambdas return the unary") {
        RefineConfig cfg;
        cfg.lambda1 = cfg.lambda2 = 0;
        const auto inst = random_instance(rng, 9, 7, 50.0);
        const auto [out, trace] = irls_refine(inst.unary, inst.sys, cfg);
        for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::abs(out[i] - inst.unary[i]) <= 1e-8);
    }
    SUBCASE("a constant unary is a fixed point") {
        const DepthMap c(6, 6, 3.0);
        const auto sys = assemble_system(c, testutil::flat_guide(6, 6, 0.5), {});
        const auto [out, trace] = irls_refine(c, sys, {});
        for (double v : out.values()) CHECK(std::abs(v - 3.0) <= 1e-8);
    }
    SUBCASE("smoothed energy never increases") {
        RefineConfig cfg;
        cfg.stop_on_convergence = false;
        for (int t = 0; t < 30; ++t) {
            const int w = 2 + static_cast<int>(rng() % 15), h = 2 + static_cast<int>(rng() % 15);
            const auto inst = random_instance(rng, w, h, 255.0);
            const auto [out, trace] = irls_refine(inst.unary, inst.sys, cfg);
            CHECK(trace.records.size() == static_cast<std::size_t>(cfg.irls_iters) + 1);
            for (std::size_t k = 1; k < trace.records.size(); ++k) {
                const double prev = trace.records[k - 1].smoothed_energy, cur = trace.records[k].smoothed_energy;
                CHECK(cur <= prev + 1e-9 * std::abs(prev));
                CHECK(std::isfinite(trace.records[k].energy));
            }
        }
    }
    SUBCASE("translation covariance") {
        const auto inst = random_instance(rng, 8, 8, 10.0);
        std::vector<double> shifted(inst.unary.values().begin(), inst.unary.values().end());
        for (double& v : shifted) v += 5.0;
        const auto [a, ta] = irls_refine(inst.unary, inst.sys, {});
        const auto [b, tb] = irls_refine(inst.unary.with_values(shifted), inst.sys, {});
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(b[i] - a[i] - 5.0) <= 1e-6);
    }
    SUBCASE("denoises a noisy step edge") {
        const int w = 24, h = 24;
        std::vector<double> clean(static_cast<std::size_t>(w * h)), noisy(clean.size());
        std::normal_distribution<double> noise(0.0, 0.02);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const auto i = static_cast<std::size_t>(y * w + x);
                clean[i] = x < w / 2 ? 0.3 : 0.7;
                noisy[i] = clean[i] + noise(rng);
            }
        const DepthMap c(w, h, clean), n(w, h, noisy);
        const auto out = refine_depth(n, guidance_from_depth(n), 1.0, {}, {});
        CHECK(oracle::rmse(out, c) < oracle::rmse(n, c));
    }
    SUBCASE("trace serialization") {
        const auto inst = random_instance(rng, 5, 5);
        const auto [out, trace] = irls_refine(inst.unary, inst.sys, {});
        const auto text = trace.to_json_lines();
        CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == trace.records.size());
        CHECK(text.rfind("{\"iter\":0,", 0) == 0);
    }
}
