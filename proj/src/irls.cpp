#include "ddsr/irls.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "ddsr/errors.hpp"

namespace ddsr {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void require_consistent(const DepthMap& d, const DepthMap& unary, const SparseSystem& sys) {
    if (d.width() != unary.width() || d.height() != unary.height()) {
        throw DimensionError("refinement iterate and unary differ in size");
    }
    if (sys.a.rows() != unary.size() || sys.a.cols() != unary.size() || sys.b.size() != unary.size()) {
        throw DimensionError(fmt::format("smoothness system ({}x{}) does not match a {}x{} map", sys.a.rows(),
                                         sys.a.cols(), unary.width(), unary.height()));
    }
}

double smoothness_term(const DepthMap& d, const SparseSystem& sys) {
    auto r = sys.a.multiply(d.values());
    double s = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double e = r[i] - sys.b[i];
        s += e * e;
    }
    return s;
}

double fidelity_term(const DepthMap& d, const DepthMap& unary) {
    double s = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double e = d[i] - unary[i];
        s += e * e;
    }
    return s;
}

double smoothed_tv(std::span<const double> g, double eps) {
    double s = 0.0;
    for (double v : g) {
        const double a = std::abs(v);
        s += 2.0 * (a - eps * std::log1p(a / eps));
    }
    return s;
}

}  // namespace

void RefineConfig::validate() const {
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ConfigError("lambda1 and lambda2 must be non-negative");
    if (irls_iters < 1) throw ConfigError("irls_iters must be >= 1");
    if (!(irls_tol > 0.0) || !(cg_tol > 0.0) || !(tv_epsilon > 0.0)) {
        throw ConfigError("irls_tol, cg_tol and tv_epsilon must be positive");
    }
    if (cg_max_iters < 1) throw ConfigError("cg_max_iters must be >= 1");
    if (!(value_scale > 0.0)) throw ConfigError("value_scale must be positive");
}

EnergyTerms energy(const DepthMap& d, const DepthMap& unary, const SparseSystem& sys, const RefineConfig& cfg) {
    require_consistent(d, unary, sys);
    EnergyTerms t;
    t.fidelity = fidelity_term(d, unary);
    t.smoothness = smoothness_term(d, sys);
    t.tv = 0.0;
    if (d.size() > 1) {
        for (double g : apply_gradient(d)) t.tv += std::abs(g);
    }
    t.total = 0.5 * t.fidelity + cfg.lambda1 * t.smoothness + cfg.lambda2 * t.tv;
    return t;
}

double smoothed_energy(const DepthMap& d, const DepthMap& unary, const SparseSystem& sys, const RefineConfig& cfg,
                       double epsilon) {
    require_consistent(d, unary, sys);
    const double tv = d.size() > 1 ? smoothed_tv(apply_gradient(d), epsilon) : 0.0;
    return 0.5 * fidelity_term(d, unary) + cfg.lambda1 * smoothness_term(d, sys) + cfg.lambda2 * tv;
}

double tv_epsilon_for(const DepthMap& unary, const RefineConfig& cfg) {
    const double range = unary.max_value() - unary.min_value();
    return cfg.tv_epsilon * (range > 0.0 ? range : 1.0);
}

NormalOperator::NormalOperator(const SparseSystem& sys, const RowWeights& weights, const RefineConfig& cfg)
    : sys_(sys), weights_(weights), grad_(sys.width, sys.height), lambda1_(cfg.lambda1), lambda2_(cfg.lambda2),
      n_(sys.a.cols()) {
    if (weights.weights.size() != grad_.rows()) {
        throw DimensionError(fmt::format("{} row weights for a gradient operator with {} rows", weights.weights.size(),
                                         grad_.rows()));
    }
    if (grad_.cols() != n_) throw DimensionError("system size does not match its recorded dimensions");
}

std::vector<double> NormalOperator::apply(std::span<const double> x) const {
    if (x.size() != n_) throw DimensionError("normal operator: vector length mismatch");
    std::vector<double> y(x.begin(), x.end());
    if (lambda1_ != 0.0) {
        const auto ax = sys_.a.multiply(x);
        const auto atax = sys_.a.multiply_transpose(ax);
        for (std::size_t i = 0; i < n_; ++i) y[i] += 2.0 * lambda1_ * atax[i];
    }
    if (lambda2_ != 0.0) {
        auto g = grad_.apply(x);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= weights_.weights[i] * weights_.weights[i];
        const auto ptg = grad_.apply_transpose(g);
        for (std::size_t i = 0; i < n_; ++i) y[i] += 2.0 * lambda2_ * ptg[i];
    }
    return y;
}

std::vector<double> NormalOperator::diagonal() const {
    std::vector<double> d(n_, 1.0);
    const auto rp = sys_.a.row_ptr();
    const auto ci = sys_.a.col_idx();
    const auto v = sys_.a.values();
    for (std::size_t r = 0; r < sys_.a.rows(); ++r)
        for (std::size_t k = rp[r]; k < rp[r + 1]; ++k) d[ci[k]] += 2.0 * lambda1_ * v[k] * v[k];
    for (std::size_t i = 0; i < grad_.rows(); ++i) {
        const auto [a, b] = grad_.row_pixels(i);
        const double w2 = weights_.weights[i] * weights_.weights[i];
        d[a] += 2.0 * lambda2_ * w2;
        d[b] += 2.0 * lambda2_ * w2;
    }
    return d;
}

std::vector<double> NormalOperator::rhs(std::span<const double> unary) const {
    std::vector<double> r(unary.begin(), unary.end());
    if (lambda1_ != 0.0) {
        const auto atb = sys_.a.multiply_transpose(sys_.b);
        for (std::size_t i = 0; i < n_; ++i) r[i] += 2.0 * lambda1_ * atb[i];
    }
    return r;
}

SolveResult solve_normal_equations(const DepthMap& unary, const SparseSystem& sys, const RowWeights& weights,
                                   const RefineConfig& cfg, const DepthMap* warm_start) {
    cfg.validate();
    require_consistent(warm_start ? *warm_start : unary, unary, sys);
    const NormalOperator op(sys, weights, cfg);
    const std::size_t n = op.size();
    const auto b = op.rhs(unary.values());
    const double bnorm = std::sqrt(dot(b, b));

    std::vector<double> x;
    if (warm_start != nullptr) {
        x.assign(warm_start->values().begin(), warm_start->values().end());
    } else {
        x.assign(unary.values().begin(), unary.values().end());
    }
    if (bnorm == 0.0) return {unary.with_values(std::vector<double>(n, 0.0)), 0, 0.0};

    auto mx = op.apply(x);
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - mx[i];
    double rel = std::sqrt(dot(r, r)) / bnorm;
    if (rel <= cfg.cg_tol) return {unary.with_values(std::move(x)), 0, rel};

    std::vector<double> inv_diag;
    if (cfg.jacobi) {
        inv_diag = op.diagonal();
        for (double& d : inv_diag) d = 1.0 / d;
    }
    auto precondition = [&](const std::vector<double>& v) {
        if (!cfg.jacobi) return v;
        std::vector<double> z(n);
        for (std::size_t i = 0; i < n; ++i) z[i] = v[i] * inv_diag[i];
        return z;
    };

    std::vector<double> z = precondition(r);
    std::vector<double> p = z;
    double rz = dot(r, z);
    int it = 0;
    while (it < cfg.cg_max_iters) {
        ++it;
        const auto q = op.apply(p);
        const double alpha = rz / dot(p, q);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        rel = std::sqrt(dot(r, r)) / bnorm;
        if (rel <= cfg.cg_tol) break;
        z = precondition(r);
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    if (!(rel <= cfg.cg_tol)) {
        throw SolverError(fmt::format("conjugate gradient stopped at relative residual {:.3e} after {} iterations "
                                      "(tolerance {:.1e})",
                                      rel, it, cfg.cg_tol));
    }
    return {unary.with_values(std::move(x)), it, rel};
}

std::string RefineTrace::to_json_lines() const {
    std::string out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        out += fmt::format(
            R"({{"iter":{},"energy":{},"smoothed_energy":{},"tv":{},"smoothness":{},"fidelity":{},"cg_iters":{}}})"
            "\n",
            i, r.energy, r.smoothed_energy, r.tv_value, r.smoothness_value, r.fidelity_value, r.cg_iters);
    }
    return out;
}

std::pair<DepthMap, RefineTrace> irls_refine(const DepthMap& unary, const SparseSystem& sys, const RefineConfig& cfg) {
    cfg.validate();
    require_consistent(unary, unary, sys);
    if (unary.size() < 2) throw DimensionError("refinement needs at least two pixels");

    RefineTrace trace;
    trace.epsilon = tv_epsilon_for(unary, cfg);
    auto record = [&](const DepthMap& d, int cg_iters) {
        const auto t = energy(d, unary, sys, cfg);
        IterationRecord rec;
        rec.energy = t.total;
        rec.smoothed_energy = smoothed_energy(d, unary, sys, cfg, trace.epsilon);
        rec.tv_value = t.tv;
        rec.smoothness_value = t.smoothness;
        rec.fidelity_value = t.fidelity;
        rec.cg_iters = cg_iters;
        trace.records.push_back(rec);
        return rec.smoothed_energy;
    };

    DepthMap current = unary;
    double previous = record(current, 0);
    for (int it = 0; it < cfg.irls_iters; ++it) {
        const RowWeights w = reweight(current, trace.epsilon);
        SolveResult solved = solve_normal_equations(unary, sys, w, cfg, &current);
        current = std::move(solved.solution);
        const double e = record(current, solved.iterations);
        const double change = std::abs(previous - e) / std::max(std::abs(previous), 1e-300);
        previous = e;
        if (change < cfg.irls_tol) {
            trace.converged = true;
            if (cfg.stop_on_convergence) break;
        }
    }
    return {std::move(current), std::move(trace)};
}

}  // namespace ddsr
