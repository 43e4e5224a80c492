#pragma once

// Exact convex clustering: warm-started ADMM over a lambda grid and the
// three-step AMA iteration.

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "prox.hpp"
#include "weight_graph.hpp"

namespace cvxclust {

struct SolverState {
    Matrix U;
    Matrix V;
    Matrix Z;
    long k = 0;
};

struct SolveOptions {
    double tol = 1e-7;
    long max_iter = 100000;
};

struct SolveResult {
    SolverState state;
    long iterations = 0;
    bool converged = false;
    double change = 0.0;
    double primal_residual = 0.0;
};

/// U = X, V = Z = DX.
inline SolverState initial_state(const Matrix& x, const WeightGraph& g) {
    SolverState s;
    s.U = x;
    s.V = g.D() * x;
    s.Z = s.V;
    return s;
}

inline void check_shapes(const SolverState& s, const Matrix& x, const WeightGraph& g) {
    if (x.rows() != g.n()) throw ShapeError("data has " + std::to_string(x.rows()) + " rows, graph has " +
                                            std::to_string(g.n()) + " nodes");
    if (s.U.rows() != x.rows() || s.U.cols() != x.cols() || s.V.rows() != g.num_edges() ||
        s.V.cols() != x.cols() || s.Z.rows() != g.num_edges() || s.Z.cols() != x.cols()) {
        throw ShapeError("solver state shapes do not match data and graph");
    }
}

inline void check_finite(const SolverState& s) {
    if (!s.U.allFinite() || !s.V.allFinite() || !s.Z.allFinite()) {
        throw NumericalError("non-finite value in solver state at iteration " + std::to_string(s.k));
    }
}

/// One ADMM triplet update at penalty level lambda. When prox_input is given it
/// receives DU + Z, the argument of the prox.
inline void admm_update(SolverState& s, const Matrix& x, const WeightGraph& g, const PenaltySpec& spec,
                        double lambda, Matrix* prox_input = nullptr) {
    const double rho = g.rho();
    const auto& d = g.D();
    s.U = g.solve(x + rho * (d.transpose() * (s.V - s.Z)));
    Matrix arg = d * s.U + s.Z;
    s.V = prox_penalty(arg, lambda / rho, spec);
    s.Z = arg - s.V;
    ++s.k;
    check_finite(s);
    if (prox_input) *prox_input = std::move(arg);
}

inline double relative_change(const Matrix& now, const Matrix& before) {
    return (now - before).norm() / std::max(1.0, before.norm());
}

inline double objective(const Matrix& x, const Matrix& u, const WeightGraph& g, const PenaltySpec& spec,
                        double lambda) {
    const Matrix du = g.D() * u;
    double pen = 0.0;
    for (Eigen::Index l = 0; l < du.rows(); ++l) pen += spec.weights(l) * row_norm(du.row(l), spec.q);
    return 0.5 * (x - u).squaredNorm() + lambda * pen;
}

/// ADMM at a single lambda. Stops when the relative change in U is below tol and
/// the split residual ||DU - V|| is below tol (1 + ||V||).
inline SolveResult admm_solve(const Matrix& x, const WeightGraph& g, const PenaltySpec& spec, double lambda,
                              std::optional<SolverState> init = std::nullopt, SolveOptions opts = {}) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw PreconditionError("lambda must be positive");
    if (!(opts.tol > 0.0) || opts.max_iter < 1) throw PreconditionError("tol must be positive and max_iter >= 1");
    spec.validate(g.num_edges());
    SolveResult r;
    r.state = init ? std::move(*init) : initial_state(x, g);
    check_shapes(r.state, x, g);
    check_finite(r.state);
    const long start = r.state.k;
    Matrix prev;
    for (long it = 0; it < opts.max_iter; ++it) {
        prev = r.state.U;
        admm_update(r.state, x, g, spec, lambda);
        r.change = relative_change(r.state.U, prev);
        r.primal_residual = (g.D() * r.state.U - r.state.V).norm();
        if (r.change < opts.tol && r.primal_residual <= opts.tol * (1.0 + r.state.V.norm())) {
            r.converged = true;
            break;
        }
    }
    r.iterations = r.state.k - start;
    return r;
}

/// Default AMA step: 0.1 / max weight, capped by 1 / (2 max degree) which keeps
/// the dual gradient step below 1 / ||D||^2.
inline double default_ama_rho(const WeightGraph& g) {
    const Vector w = g.weights();
    double rho = w.size() ? 0.1 / w.maxCoeff() : 0.1;
    const int deg = g.max_degree();
    if (deg > 0) rho = std::min(rho, 1.0 / (2.0 * deg));
    return rho;
}

/// Non-elided AMA: U = X - D^T Z, V = prox(DU + Z / rho), Z += rho (DU - V).
/// Starts from U = X, V = DX, Z = 0 unless init is given.
inline SolveResult ama_solve(const Matrix& x, const WeightGraph& g, const PenaltySpec& spec, double lambda,
                             std::optional<SolverState> init = std::nullopt, SolveOptions opts = {},
                             std::optional<double> step = std::nullopt) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw PreconditionError("lambda must be positive");
    if (!(opts.tol > 0.0) || opts.max_iter < 1) throw PreconditionError("tol must be positive and max_iter >= 1");
    spec.validate(g.num_edges());
    const double rho = step ? *step : default_ama_rho(g);
    if (!(rho > 0.0)) throw PreconditionError("AMA step must be positive");
    const auto& d = g.D();
    SolveResult r;
    if (init) {
        r.state = std::move(*init);
    } else {
        r.state.U = x;
        r.state.V = d * x;
        r.state.Z = Matrix::Zero(d.rows(), x.cols());
    }
    check_shapes(r.state, x, g);
    check_finite(r.state);
    const double scale0 = std::max({1.0, x.norm(), r.state.U.norm()});
    const long start = r.state.k;
    std::map<long, double> checkpoints;
    Matrix prev;
    for (long it = 1; it <= opts.max_iter; ++it) {
        prev = r.state.U;
        r.state.U = x - d.transpose() * r.state.Z;
        const Matrix du = d * r.state.U;
        r.state.V = prox_penalty(du + r.state.Z / rho, lambda / rho, spec);
        r.state.Z += rho * (du - r.state.V);
        ++r.state.k;
        check_finite(r.state);
        if (r.state.U.norm() > 1e8 * scale0 || r.state.Z.norm() > 1e8 * scale0 * std::max(1.0, lambda)) {
            throw DivergenceError("AMA iterates exceeded 1e8 times their initial scale (step " +
                                  std::to_string(rho) + ")");
        }
        r.change = relative_change(r.state.U, prev);
        r.primal_residual = (du - r.state.V).norm();
        if (r.change < opts.tol && r.primal_residual <= opts.tol * (1.0 + r.state.V.norm())) {
            r.converged = true;
            break;
        }
        // The dual iterate is confined to a ball, so an unstable step oscillates
        // rather than blowing up. Flag it when the change stops contracting.
        if ((it & (it - 1)) == 0) {
            checkpoints[it] = r.change;
            if (it >= 1024 && r.change > 100.0 * opts.tol && r.change >= checkpoints[it / 2]) {
                throw DivergenceError("AMA iterates are not contracting (step " + std::to_string(rho) + ")");
            }
        }
    }
    r.iterations = r.state.k - start;
    return r;
}

enum class ExactSolver { Admm, Ama };

struct GridPathResult {
    std::vector<double> lambdas;
    std::vector<Matrix> solutions;
    std::vector<long> iterations;
    std::vector<double> residuals;
    std::vector<bool> converged;
    /// Connected components of the fused (zero V row) edges at each lambda.
    std::vector<std::vector<int>> clusters;
    std::vector<int> cluster_counts;
    /// Column cluster counts (bi-clustering grids only).
    std::vector<int> col_cluster_counts;
};

inline std::vector<int> fused_components(const WeightGraph& g, const Matrix& v, int* count = nullptr) {
    UnionFind uf(g.n());
    for (Eigen::Index l = 0; l < v.rows(); ++l) {
        if (row_is_zero(v, l)) uf.unite(g.edges()[static_cast<std::size_t>(l)].from,
                                        g.edges()[static_cast<std::size_t>(l)].to);
    }
    if (count) *count = uf.components();
    return uf.labels();
}

inline bool all_rows_zero(const Matrix& v) {
    for (Eigen::Index l = 0; l < v.rows(); ++l) {
        if (!row_is_zero(v, l)) return false;
    }
    return true;
}

/// m log-spaced values from lo to hi inclusive.
inline std::vector<double> geometric_grid(double lo, double hi, int m) {
    if (!(lo > 0.0) || !(hi > lo) || m < 2) throw PreconditionError("grid needs 0 < lo < hi and m >= 2");
    std::vector<double> out(static_cast<std::size_t>(m));
    const double step = std::log(hi / lo) / (m - 1);
    for (int i = 0; i < m; ++i) out[static_cast<std::size_t>(i)] = lo * std::exp(step * i);
    out.back() = hi;
    return out;
}

namespace detail {

inline void record_grid_point(GridPathResult& out, const WeightGraph& g, double lambda, const SolveResult& r) {
    out.lambdas.push_back(lambda);
    out.solutions.push_back(r.state.U);
    out.iterations.push_back(r.iterations);
    out.residuals.push_back(r.change);
    out.converged.push_back(r.converged);
    int count = 0;
    out.clusters.push_back(fused_components(g, r.state.V, &count));
    out.cluster_counts.push_back(count);
}

}  // namespace detail

/// Warm-started solves over an explicit increasing lambda list.
inline GridPathResult exact_grid(const Matrix& x, const WeightGraph& g, const PenaltySpec& spec,
                                 const std::vector<double>& lambdas, SolveOptions opts = {},
                                 ExactSolver solver = ExactSolver::Admm) {
    for (std::size_t i = 1; i < lambdas.size(); ++i) {
        if (!(lambdas[i] > lambdas[i - 1])) throw PreconditionError("lambdas must be strictly increasing");
    }
    GridPathResult out;
    std::optional<SolverState> warm;
    for (double lambda : lambdas) {
        SolveResult r = solver == ExactSolver::Admm ? admm_solve(x, g, spec, lambda, warm, opts)
                                                    : ama_solve(x, g, spec, lambda, warm, opts);
        detail::record_grid_point(out, g, lambda, r);
        warm = std::move(r.state);
    }
    return out;
}

inline GridPathResult admm_grid(const Matrix& x, const WeightGraph& g, const PenaltySpec& spec,
                                const std::vector<double>& lambdas, SolveOptions opts = {}) {
    return exact_grid(x, g, spec, lambdas, opts, ExactSolver::Admm);
}

/// Doubles lambda from start until the ADMM solution has every V row zero.
inline double exact_fusion_level(const Matrix& x, const WeightGraph& g, const PenaltySpec& spec, double start,
                                 SolveOptions opts = {}, int max_doublings = 200) {
    if (!(start > 0.0)) throw PreconditionError("start must be positive");
    double lambda = start;
    std::optional<SolverState> warm;
    for (int i = 0; i <= max_doublings; ++i, lambda *= 2.0) {
        SolveResult r = admm_solve(x, g, spec, lambda, warm, opts);
        if (r.converged && all_rows_zero(r.state.V)) return lambda;
        warm = std::move(r.state);
    }
    throw IterationCapError("no fusion level found within " + std::to_string(max_doublings) + " doublings");
}

/// lambda_0 = epsilon, lambda_l = lambda_{l-1} * t, warm started, until every V
/// row is zero at a converged solution.
inline GridPathResult admm_grid_path(const Matrix& x, const WeightGraph& g, const PenaltySpec& spec,
                                     double epsilon, double t, SolveOptions opts = {}, long max_points = 1000000) {
    if (!(epsilon > 0.0)) throw PreconditionError("epsilon must be positive");
    if (!(t > 1.0)) throw PreconditionError("t must exceed 1");
    GridPathResult out;
    std::optional<SolverState> warm;
    double lambda = epsilon;
    for (long i = 0; i < max_points; ++i, lambda *= t) {
        SolveResult r = admm_solve(x, g, spec, lambda, warm, opts);
        detail::record_grid_point(out, g, lambda, r);
        const bool done = r.converged && all_rows_zero(r.state.V);
        warm = std::move(r.state);
        if (done) return out;
    }
    throw IterationCapError("grid path did not reach full fusion within " + std::to_string(max_points) +
                            " points");
}

}  // namespace cvxclust
