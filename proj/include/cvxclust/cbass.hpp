#pragma once

// Convex bi-clustering: the exact DLPA solver and the one-step CBASS path.
// The row graph lives on the rows of X, the column graph on the rows of X^T.

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "carp.hpp"
#include "errors.hpp"
#include "exact_solvers.hpp"
#include "prox.hpp"
#include "weight_graph.hpp"

namespace cvxclust {

struct BiClusterState {
    Matrix U;
    Matrix P;
    Matrix Q;
    Matrix V_row, Z_row;
    Matrix V_col, Z_col;
    long k = 0;
};

inline BiClusterState initial_bicluster_state(const Matrix& x, const WeightGraph& rows, const WeightGraph& cols) {
    if (x.rows() != rows.n() || x.cols() != cols.n()) {
        throw ShapeError("row graph must have one node per row and column graph one node per column");
    }
    BiClusterState s;
    s.U = x;
    s.P = Matrix::Zero(x.rows(), x.cols());
    s.Q = s.P;
    s.V_row = rows.D() * x;
    s.Z_row = s.V_row;
    s.V_col = cols.D() * x.transpose();
    s.Z_col = s.V_col;
    return s;
}

inline void check_finite(const BiClusterState& s) {
    for (const Matrix* m : {&s.U, &s.P, &s.Q, &s.V_row, &s.Z_row, &s.V_col, &s.Z_col}) {
        if (!m->allFinite()) throw NumericalError("non-finite value in bi-clustering state at iteration " +
                                                  std::to_string(s.k));
    }
}

inline void check_shapes(const BiClusterState& s, const WeightGraph& rows, const WeightGraph& cols) {
    const Eigen::Index n = rows.n(), p = cols.n();
    auto ok = [](const Matrix& m, Eigen::Index r, Eigen::Index c) { return m.rows() == r && m.cols() == c; };
    if (!ok(s.U, n, p) || !ok(s.P, n, p) || !ok(s.Q, n, p) || !ok(s.V_row, rows.num_edges(), p) ||
        !ok(s.Z_row, rows.num_edges(), p) || !ok(s.V_col, cols.num_edges(), n) || !ok(s.Z_col, cols.num_edges(), n)) {
        throw ShapeError("bi-clustering state shapes do not match the graphs");
    }
}

/// One CBASS iteration: a one-step row ADMM on U + P giving T, then a one-step
/// column ADMM on (T + Q)^T giving S, with the correction terms carried forward.
inline void cbass_update(BiClusterState& s, double gamma, const WeightGraph& rows, const WeightGraph& cols,
                         const PenaltySpec& row_spec, const PenaltySpec& col_spec, Matrix* row_arg = nullptr,
                         Matrix* col_arg = nullptr) {
    const Matrix u_prev = s.U;
    const double rr = rows.rho();
    const Matrix t = rows.solve(s.U + s.P + rr * (rows.D().transpose() * (s.V_row - s.Z_row)));
    Matrix ar = rows.D() * t + s.Z_row;
    s.V_row = prox_penalty(ar, gamma / rr, row_spec);
    s.Z_row = ar - s.V_row;
    s.P = s.P + u_prev - t;

    const double rc = cols.rho();
    const Matrix st = cols.solve((t + s.Q).transpose() + rc * (cols.D().transpose() * (s.V_col - s.Z_col)));
    Matrix ac = cols.D() * st + s.Z_col;
    s.V_col = prox_penalty(ac, gamma / rc, col_spec);
    s.Z_col = ac - s.V_col;
    s.U = st.transpose();
    s.Q = s.Q + t - s.U;
    ++s.k;
    check_finite(s);
    if (row_arg) *row_arg = std::move(ar);
    if (col_arg) *col_arg = std::move(ac);
}

inline BiClusterState cbass_step(BiClusterState s, double gamma, const WeightGraph& rows, const WeightGraph& cols,
                                 const PenaltySpec& row_spec, const PenaltySpec& col_spec) {
    if (!(gamma >= 0.0)) throw PreconditionError("gamma must be nonnegative");
    check_shapes(s, rows, cols);
    check_finite(s);
    cbass_update(s, gamma, rows, cols, row_spec, col_spec);
    return s;
}

struct BiClusterPath {
    CarpPath rows;
    /// Column path; its stored iterates are U^T.
    CarpPath cols;
    Matrix final_U;
    long backtracks = 0;
};

namespace detail {

class CbassRunner {
public:
    CbassRunner(const Matrix& x, const WeightGraph& rg, const WeightGraph& cg, const PenaltySpec& rs,
                const PenaltySpec& cs, const PathConfig& cfg, BiClusterPath& out)
        : rg_(rg), cg_(cg), rs_(rs), cs_(cs), row_tracker_(rg, rs), col_tracker_(cg, cs),
          row_rec_(out.rows, cfg), col_rec_(out.cols, cfg), out_(out) {
        state_ = initial_bicluster_state(x, rg, cg);
        settle_level_ = cfg.settle_tol * std::max(norm_2inf(state_.V_row), norm_2inf(state_.V_col));
    }

    void record_initial(double gamma) {
        auto ru = row_tracker_.propose(state_.V_row, state_.V_row, gamma, 0);
        auto cu = col_tracker_.propose(state_.V_col, state_.V_col, gamma, 0);
        auto re = std::move(ru.events);
        auto ce = std::move(cu.events);
        row_tracker_.commit(std::move(ru));
        col_tracker_.commit(std::move(cu));
        row_rec_.record(0, gamma, state_.U, row_tracker_, std::move(re), true);
        col_rec_.record(0, gamma, state_.U.transpose(), col_tracker_, std::move(ce), true);
    }

    int try_step(double gamma, long k) {
        trial_ = state_;
        cbass_update(trial_, gamma, rg_, cg_, rs_, cs_, &row_arg_, &col_arg_);
        row_update_ = row_tracker_.propose(trial_.V_row, row_arg_, gamma, k);
        col_update_ = col_tracker_.propose(trial_.V_col, col_arg_, gamma, k);
        return row_update_.fuses + col_update_.fuses;
    }

    void accept(double gamma, long k, bool exhausted) {
        state_ = std::move(trial_);
        auto re = std::move(row_update_.events);
        auto ce = std::move(col_update_.events);
        for (auto* list : {&re, &ce}) {
            for (auto& e : *list) e.backtrack_exhausted = exhausted;
        }
        row_tracker_.commit(std::move(row_update_));
        col_tracker_.commit(std::move(col_update_));
        row_rec_.record(k, gamma, state_.U, row_tracker_, std::move(re), false);
        col_rec_.record(k, gamma, state_.U.transpose(), col_tracker_, std::move(ce), false);
    }

    bool finished() const {
        if (!row_tracker_.all_zero() || !col_tracker_.all_zero()) return false;
        if (settle_level_ == 0.0) return true;
        return std::max(norm_2inf(rg_.D() * state_.U), norm_2inf(cg_.D() * state_.U.transpose())) <= settle_level_;
    }

    void finish(long k) {
        row_rec_.finish(k, state_.U, row_tracker_);
        col_rec_.finish(k, state_.U.transpose(), col_tracker_);
        out_.final_U = state_.U;
    }

private:
    const WeightGraph& rg_;
    const WeightGraph& cg_;
    const PenaltySpec& rs_;
    const PenaltySpec& cs_;
    BiClusterState state_, trial_;
    Matrix row_arg_, col_arg_;
    FusionTracker row_tracker_, col_tracker_;
    FusionTracker::Update row_update_, col_update_;
    PathRecorder row_rec_, col_rec_;
    BiClusterPath& out_;
    double settle_level_ = 0.0;
};

inline BiClusterPath run_cbass(const Matrix& x, const WeightGraph& row_graph, const WeightGraph& col_graph,
                               const PenaltySpec& rs, const PenaltySpec& cs, const PathConfig& cfg, bool viz) {
    cfg.validate();
    std::optional<WeightGraph> rg_own, cg_own;
    if (const double r = cfg.path_rho(row_graph, viz); r != row_graph.rho()) rg_own = row_graph.with_rho(r);
    if (const double r = cfg.path_rho(col_graph, viz); r != col_graph.rho()) cg_own = col_graph.with_rho(r);
    const WeightGraph& rg = rg_own ? *rg_own : row_graph;
    const WeightGraph& cg = cg_own ? *cg_own : col_graph;
    rs.validate(rg.num_edges());
    cs.validate(cg.num_edges());
    if (x.rows() != rg.n() || x.cols() != cg.n()) throw ShapeError("graphs do not match the data dimensions");
    if (rg.components() != 1) throw ConnectivityError("row graph must be connected");
    if (cg.num_edges() > 0 && cg.components() != 1) throw ConnectivityError("column graph must be connected");
    if (!x.allFinite()) throw NumericalError("data contains non-finite values");
    BiClusterPath out;
    out.rows.n = rg.n();
    out.cols.n = cg.n();
    double eps = default_epsilon(x, rg);
    if (cg.num_edges() > 0) eps = std::min(eps, default_epsilon(x.transpose(), cg));
    if (cfg.epsilon) eps = *cfg.epsilon;
    out.rows.epsilon = out.cols.epsilon = eps;
    CbassRunner runner(x, rg, cg, rs, cs, cfg, out);
    drive_path(runner, cfg, eps, viz, &out.backtracks);
    out.rows.backtracks = out.cols.backtracks = out.backtracks;
    return out;
}

}  // namespace detail

/// CBASS path. An empty column graph is allowed and reduces the path to CARP on the rows.
inline BiClusterPath cbass_path(const Matrix& x, const WeightGraph& rows, const WeightGraph& cols,
                                const PenaltySpec& row_spec, const PenaltySpec& col_spec, const PathConfig& cfg) {
    return detail::run_cbass(x, rows, cols, row_spec, col_spec, cfg, false);
}

/// Back-tracking CBASS: a step is retried when rows and columns together gain more than one fusion.
inline BiClusterPath cbass_viz_path(const Matrix& x, const WeightGraph& rows, const WeightGraph& cols,
                                    const PenaltySpec& row_spec, const PenaltySpec& col_spec, const PathConfig& cfg) {
    return detail::run_cbass(x, rows, cols, row_spec, col_spec, cfg, true);
}

struct DlpaOptions {
    double tol = 1e-7;
    long max_iter = 10000;
    double inner_tol = 1e-9;
    long inner_max_iter = 100000;
};

struct DlpaResult {
    BiClusterState state;
    long iterations = 0;
    bool converged = false;
    double change = 0.0;
};

/// Exact bi-clustering at one lambda by the Dykstra-like alternation of row and
/// column convex clustering, each solved by ADMM to inner_tol.
inline DlpaResult dlpa_solve(const Matrix& x, const WeightGraph& rows, const WeightGraph& cols,
                             const PenaltySpec& row_spec, const PenaltySpec& col_spec, double lambda,
                             std::optional<BiClusterState> init = std::nullopt, DlpaOptions opts = {}) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw PreconditionError("lambda must be positive");
    DlpaResult r;
    r.state = init ? std::move(*init) : initial_bicluster_state(x, rows, cols);
    check_shapes(r.state, rows, cols);
    check_finite(r.state);
    auto& s = r.state;
    const SolveOptions inner{opts.inner_tol, opts.inner_max_iter};
    for (long it = 1; it <= opts.max_iter; ++it) {
        const Matrix u_prev = s.U;
        const Matrix row_data = s.U + s.P;
        auto row = admm_solve(row_data, rows, row_spec, lambda, SolverState{row_data, s.V_row, s.Z_row, 0}, inner);
        const Matrix& t = row.state.U;
        s.V_row = std::move(row.state.V);
        s.Z_row = std::move(row.state.Z);
        s.P = row_data - t;
        const Matrix col_data = (t + s.Q).transpose();
        auto col = admm_solve(col_data, cols, col_spec, lambda, SolverState{col_data, s.V_col, s.Z_col, 0}, inner);
        s.V_col = std::move(col.state.V);
        s.Z_col = std::move(col.state.Z);
        s.U = col.state.U.transpose();
        s.Q = t + s.Q - s.U;
        ++s.k;
        check_finite(s);
        r.iterations = it;
        r.change = relative_change(s.U, u_prev);
        if (r.change < opts.tol) {
            r.converged = true;
            break;
        }
    }
    return r;
}

namespace detail {

inline void record_bi_grid_point(GridPathResult& out, const WeightGraph& rows, const WeightGraph& cols,
                                 double lambda, const DlpaResult& r) {
    out.lambdas.push_back(lambda);
    out.solutions.push_back(r.state.U);
    out.iterations.push_back(r.iterations);
    out.residuals.push_back(r.change);
    out.converged.push_back(r.converged);
    int count = 0;
    out.clusters.push_back(fused_components(rows, r.state.V_row, &count));
    out.cluster_counts.push_back(count);
    fused_components(cols, r.state.V_col, &count);
    out.col_cluster_counts.push_back(count);
}

inline BiClusterState reset_for_next_lambda(BiClusterState s, const Matrix& x) {
    s.U = x;
    s.P.setZero();
    s.Q.setZero();
    s.k = 0;
    return s;
}

}  // namespace detail

/// Warm-started DLPA over lambda_l = epsilon * t^l until both penalties fully
/// fuse. U, P and Q restart from (X, 0, 0) at every lambda; V and Z carry over.
inline GridPathResult dlpa_grid_path(const Matrix& x, const WeightGraph& rows, const WeightGraph& cols,
                                     const PenaltySpec& row_spec, const PenaltySpec& col_spec, double epsilon,
                                     double t, DlpaOptions opts = {}, long max_points = 100000) {
    if (!(epsilon > 0.0)) throw PreconditionError("epsilon must be positive");
    if (!(t > 1.0)) throw PreconditionError("t must exceed 1");
    GridPathResult out;
    std::optional<BiClusterState> warm;
    double lambda = epsilon;
    for (long i = 0; i < max_points; ++i, lambda *= t) {
        auto r = dlpa_solve(x, rows, cols, row_spec, col_spec, lambda,
                            warm ? std::optional(detail::reset_for_next_lambda(*warm, x)) : std::nullopt, opts);
        detail::record_bi_grid_point(out, rows, cols, lambda, r);
        const bool done = r.converged && all_rows_zero(r.state.V_row) && all_rows_zero(r.state.V_col);
        warm = std::move(r.state);
        if (done) return out;
    }
    throw IterationCapError("DLPA grid did not reach full fusion within " + std::to_string(max_points) + " points");
}

/// DLPA over an explicit increasing lambda list.
inline GridPathResult dlpa_grid(const Matrix& x, const WeightGraph& rows, const WeightGraph& cols,
                                const PenaltySpec& row_spec, const PenaltySpec& col_spec,
                                const std::vector<double>& lambdas, DlpaOptions opts = {}) {
    GridPathResult out;
    std::optional<BiClusterState> warm;
    for (double lambda : lambdas) {
        auto r = dlpa_solve(x, rows, cols, row_spec, col_spec, lambda,
                            warm ? std::optional(detail::reset_for_next_lambda(*warm, x)) : std::nullopt, opts);
        detail::record_bi_grid_point(out, rows, cols, lambda, r);
        warm = std::move(r.state);
    }
    return out;
}

}  // namespace cvxclust
