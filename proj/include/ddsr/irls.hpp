#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ddsr/image.hpp"
#include "ddsr/smoothness.hpp"
#include "ddsr/tv.hpp"

namespace ddsr {

struct RefineConfig {
    double lambda1 = 0.7;
    double lambda2 = 0.7;
    int irls_iters = 10;
    /// Relative change of the smoothed energy that ends the outer loop.
    double irls_tol = 1e-6;
    /// false runs exactly irls_iters iterations.
    bool stop_on_convergence = true;
    double cg_tol = 1e-8;
    int cg_max_iters = 2000;
    bool jacobi = false;
    /// TV smoothing floor as a fraction of the unary's dynamic range.
    double tv_epsilon = 1e-4;
    /// Depth is mapped to [0, value_scale] before refinement (see refine_depth);
    /// the lambda defaults assume 8-bit depth codes.
    double value_scale = 255.0;

    void validate() const;
};

/// Unweighted terms of the refinement energy and their weighted total
///   fidelity/2 + lambda1 * smoothness + lambda2 * tv.
struct EnergyTerms {
    double fidelity = 0.0;    ///< ||D - unary||^2
    double smoothness = 0.0;  ///< ||A vec(D) - b||^2
    double tv = 0.0;          ///< ||P vec(D)||_1
    double total = 0.0;
};

EnergyTerms energy(const DepthMap& d, const DepthMap& unary, const SparseSystem& sys, const RefineConfig& cfg);

/// Energy with the TV term replaced by sum_i 2(|g_i| - eps log(1 + |g_i|/eps)),
/// the function each reweighted solve provably decreases. Tends to
/// fidelity/2 + lambda1 * smoothness + 2 lambda2 * tv as eps -> 0.
double smoothed_energy(const DepthMap& d, const DepthMap& unary, const SparseSystem& sys, const RefineConfig& cfg,
                       double epsilon);

/// Absolute TV floor used for `unary`: cfg.tv_epsilon times its dynamic range.
double tv_epsilon_for(const DepthMap& unary, const RefineConfig& cfg);

/// M = I + 2 lambda1 A^T A + 2 lambda2 P^T W^2 P, applied matrix-free.
class NormalOperator {
public:
    NormalOperator(const SparseSystem& sys, const RowWeights& weights, const RefineConfig& cfg);

    std::size_t size() const noexcept { return n_; }
    std::vector<double> apply(std::span<const double> x) const;
    std::vector<double> diagonal() const;
    /// unary + 2 lambda1 A^T b
    std::vector<double> rhs(std::span<const double> unary) const;

private:
    const SparseSystem& sys_;
    const RowWeights& weights_;
    GradientOperator grad_;
    double lambda1_;
    double lambda2_;
    std::size_t n_;
};

struct SolveResult {
    DepthMap solution;
    int iterations = 0;
    double relative_residual = 0.0;
};

/// Conjugate gradient on the normal equations, warm-started from
/// `warm_start` (or the unary). Throws SolverError if cg_tol is not reached.
SolveResult solve_normal_equations(const DepthMap& unary, const SparseSystem& sys, const RowWeights& weights,
                                   const RefineConfig& cfg, const DepthMap* warm_start = nullptr);

struct IterationRecord {
    double energy = 0.0;
    double smoothed_energy = 0.0;
    double tv_value = 0.0;
    double smoothness_value = 0.0;
    double fidelity_value = 0.0;
    int cg_iters = 0;
};

struct RefineTrace {
    /// Entry 0 is the starting point (the unary); one entry per outer iteration after that.
    std::vector<IterationRecord> records;
    double epsilon = 0.0;
    bool converged = false;

    /// One JSON object per line.
    std::string to_json_lines() const;
};

std::pair<DepthMap, RefineTrace> irls_refine(const DepthMap& unary, const SparseSystem& sys, const RefineConfig& cfg);

}  // namespace ddsr
