#pragma once

// One-step algorithmic regularization path (CARP), its back-tracking variant
// and the fusion bookkeeping shared with the bi-clustering path.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "errors.hpp"
#include "exact_solvers.hpp"
#include "prox.hpp"
#include "weight_graph.hpp"

namespace cvxclust {

struct PathConfig {
    /// Initial regularization level; chosen from the data when empty.
    std::optional<double> epsilon;
    double t = 1.05;
    double burn_in_t = 1.1;
    int max_backtrack = 10;
    long max_iter = 10'000'000;
    /// Store U every keep_every-th iterate (plus every iterate with an event and the last one).
    long keep_every = 1;
    bool keep_iterates = true;
    /// After full fusion keep stepping until max_l ||(DU)_l|| <= settle_tol * ||DX||_{2,inf}.
    /// 0 stops at the first step where every V row is zero.
    double settle_tol = 1e-10;
    /// ADMM relaxation for the path. Empty means the graph's own rho for plain
    /// paths and viz_rho for back-tracking paths.
    std::optional<double> rho;
    /// With rho = 1 a single iterate can move several pairs past their fusion
    /// point at once, and no smaller gamma increment separates them. A small
    /// rho slows the iterates enough for back-tracking to isolate fusions.
    static constexpr double viz_rho = 0.01;

    /// Defaults for back-tracking and bi-clustering paths: fine step 1.01.
    static PathConfig fine() {
        PathConfig c;
        c.t = 1.01;
        return c;
    }

    double path_rho(const WeightGraph& g, bool viz) const { return rho ? *rho : viz ? viz_rho : g.rho(); }

    void validate() const {
        if (!(t > 1.0) || !std::isfinite(t)) throw PreconditionError("t must exceed 1");
        if (!(burn_in_t > 1.0) || !std::isfinite(burn_in_t)) throw PreconditionError("burn-in t must exceed 1");
        if (epsilon && (!(*epsilon > 0.0) || !std::isfinite(*epsilon))) {
            throw PreconditionError("epsilon must be positive");
        }
        if (max_backtrack < 1) throw PreconditionError("max_backtrack must be at least 1");
        if (max_iter < 1) throw PreconditionError("max_iter must be at least 1");
        if (keep_every < 1) throw PreconditionError("keep_every must be at least 1");
        if (!(settle_tol >= 0.0)) throw PreconditionError("settle_tol must be nonnegative");
        if (rho && (!(*rho > 0.0) || !std::isfinite(*rho))) throw PreconditionError("rho must be positive");
    }
};

enum class EventKind { Fuse, Unfuse };

inline std::string to_string(EventKind k) { return k == EventKind::Fuse ? "fuse" : "unfuse"; }

/// A change in the cluster partition. For a fuse, edge is the fused edge that
/// joined two clusters. For an unfuse, edge is the link that the earlier fuse
/// created and trigger_edge is the edge whose row left zero.
struct FusionEvent {
    int edge = 0;
    int from = 0;
    int to = 0;
    double gamma = 0.0;
    long k = 0;
    EventKind kind = EventKind::Fuse;
    /// rho * ||prox input row||_dual / w: the level at which the row would just reach zero.
    double score = 0.0;
    int trigger_edge = 0;
    bool backtrack_exhausted = false;
};

struct CarpPath {
    int n = 0;
    double epsilon = 0.0;
    std::vector<double> gammas;
    std::vector<int> clusters_per_k;
    std::vector<long> stored_k;
    std::vector<Matrix> iterates;
    std::vector<std::vector<bool>> zero_masks;
    std::vector<FusionEvent> events;
    Matrix final_U;
    long backtracks = 0;

    long steps() const { return static_cast<long>(gammas.size()) - 1; }

    /// gamma of the step after which a single cluster remains; later steps only settle U.
    double fusion_gamma() const {
        std::size_t k = clusters_per_k.size();
        while (k > 0 && clusters_per_k[k - 1] == 1) --k;
        return gammas.at(std::min(k, gammas.size() - 1));
    }

    int fuse_count() const {
        return static_cast<int>(std::count_if(events.begin(), events.end(),
                                              [](const auto& e) { return e.kind == EventKind::Fuse; }));
    }
    int unfuse_count() const { return static_cast<int>(events.size()) - fuse_count(); }
};

/// Rounds a score to about 12 significant digits so that fusions which are
/// equal up to rounding are ordered by edge index.
inline double score_key(double s) {
    if (s == 0.0 || !std::isfinite(s)) return s;
    int e = 0;
    std::frexp(s, &e);
    const double scale = std::ldexp(1.0, 40 - e);
    return std::round(s * scale) / scale;
}

/// Largest row 2-norm of a matrix.
inline double norm_2inf(const Matrix& m) {
    return m.rows() ? m.rowwise().norm().maxCoeff() : 0.0;
}

/// Default starting level: 1e-6 * max_l ||(DX)_l|| / min_l w_l, capped at
/// 1e-3 * min_l rho ||(DX)_l|| / w_l so that no edge is near its threshold.
inline double default_epsilon(const Matrix& x, const WeightGraph& g) {
    if (g.num_edges() == 0) return 1e-6;
    const Vector w = g.weights();
    const Vector dn = (g.D() * x).rowwise().norm();
    double eps = 1e-6 * dn.maxCoeff() / w.minCoeff();
    eps = std::min(eps, 1e-3 * g.rho() * (dn.array() / w.array()).minCoeff());
    return eps > 0.0 ? eps : 1e-6;
}

/// Tracks a spanning forest of the zero-V edges and turns changes in the zero
/// set into cluster-level fuse / unfuse events.
class FusionTracker {
public:
    struct Update {
        std::vector<bool> zero;
        std::map<int, int> forest;
        std::vector<FusionEvent> events;
        int fuses = 0;
        /// Edges whose V row became zero in this step.
        int new_zero_rows = 0;
        int components = 0;
    };

    FusionTracker() = default;
    FusionTracker(const WeightGraph& g, const PenaltySpec& spec) : g_(&g), spec_(&spec) {
        zero_.assign(static_cast<std::size_t>(g.num_edges()), false);
        components_ = g.n();
    }

    int components() const { return components_; }
    const std::vector<bool>& zero() const { return zero_; }
    bool all_zero() const { return std::all_of(zero_.begin(), zero_.end(), [](bool z) { return z; }); }

    Update propose(const Matrix& v, const Matrix& prox_input, double gamma, long k) const {
        const auto& edges = g_->edges();
        const std::size_t m = edges.size();
        Update u;
        u.zero.resize(m);
        for (std::size_t l = 0; l < m; ++l) {
            u.zero[l] = row_is_zero(v, static_cast<Eigen::Index>(l));
            if (u.zero[l] && !zero_[l]) ++u.new_zero_rows;
        }
        u.forest = forest_;

        auto score = [&](int l) {
            return g_->rho() * dual_norm(prox_input.row(l), spec_->q) / spec_->weights(l);
        };
        auto make = [&](int rep, int trigger, EventKind kind) {
            FusionEvent e;
            e.edge = rep;
            e.from = edges[static_cast<std::size_t>(rep)].from;
            e.to = edges[static_cast<std::size_t>(rep)].to;
            e.gamma = gamma;
            e.k = k;
            e.kind = kind;
            e.score = score(trigger);
            e.trigger_edge = trigger;
            return e;
        };
        auto join_components = [&]() {
            UnionFind uf(g_->n());
            for (const auto& [l, rep] : u.forest) {
                uf.unite(edges[static_cast<std::size_t>(l)].from, edges[static_cast<std::size_t>(l)].to);
            }
            std::vector<std::pair<double, int>> cand;
            for (std::size_t l = 0; l < m; ++l) {
                if (!u.zero[l] || u.forest.count(static_cast<int>(l))) continue;
                if (uf.find(edges[l].from) == uf.find(edges[l].to)) continue;
                cand.emplace_back(score_key(score(static_cast<int>(l))), static_cast<int>(l));
            }
            std::sort(cand.begin(), cand.end());
            for (const auto& [s, l] : cand) {
                if (uf.unite(edges[static_cast<std::size_t>(l)].from, edges[static_cast<std::size_t>(l)].to)) {
                    u.forest[l] = l;
                    u.events.push_back(make(l, l, EventKind::Fuse));
                    ++u.fuses;
                }
            }
            return uf.components();
        };

        u.components = join_components();

        std::vector<int> removed;
        for (const auto& [l, rep] : u.forest) {
            if (!u.zero[static_cast<std::size_t>(l)]) removed.push_back(l);
        }
        if (!removed.empty()) {
            for (int e : removed) {
                const int rep = u.forest.at(e);
                u.forest.erase(e);
                const auto side_a = reachable(u.forest, edges[static_cast<std::size_t>(e)].from);
                const auto side_b = reachable(u.forest, edges[static_cast<std::size_t>(e)].to);
                int replacement = -1;
                for (std::size_t l = 0; l < m && replacement < 0; ++l) {
                    if (!u.zero[l] || u.forest.count(static_cast<int>(l))) continue;
                    const auto a = static_cast<std::size_t>(edges[l].from);
                    const auto b = static_cast<std::size_t>(edges[l].to);
                    if ((side_a[a] && side_b[b]) || (side_a[b] && side_b[a])) replacement = static_cast<int>(l);
                }
                if (replacement >= 0) {
                    u.forest[replacement] = rep;
                } else {
                    u.events.push_back(make(rep, e, EventKind::Unfuse));
                }
            }
            u.components = join_components();
        }
        return u;
    }

    void commit(Update&& u) {
        zero_ = std::move(u.zero);
        forest_ = std::move(u.forest);
        components_ = u.components;
    }

private:
    std::vector<bool> reachable(const std::map<int, int>& forest, int start) const {
        std::vector<std::vector<int>> adj(static_cast<std::size_t>(g_->n()));
        for (const auto& [l, rep] : forest) {
            const auto& e = g_->edges()[static_cast<std::size_t>(l)];
            adj[static_cast<std::size_t>(e.from)].push_back(e.to);
            adj[static_cast<std::size_t>(e.to)].push_back(e.from);
        }
        std::vector<bool> seen(static_cast<std::size_t>(g_->n()), false);
        std::vector<int> stack{start};
        seen[static_cast<std::size_t>(start)] = true;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (int w : adj[static_cast<std::size_t>(v)]) {
                if (!seen[static_cast<std::size_t>(w)]) {
                    seen[static_cast<std::size_t>(w)] = true;
                    stack.push_back(w);
                }
            }
        }
        return seen;
    }

    const WeightGraph* g_ = nullptr;
    const PenaltySpec* spec_ = nullptr;
    std::vector<bool> zero_;
    std::map<int, int> forest_;  // forest edge -> representative edge reported in events
    int components_ = 0;
};

/// Appends the per-iterate record of one graph's path.
class PathRecorder {
public:
    PathRecorder(CarpPath& path, const PathConfig& cfg) : path_(&path), cfg_(&cfg) {}

    void record(long k, double gamma, const Matrix& u, const FusionTracker& tracker,
                std::vector<FusionEvent> events, bool force_store) {
        path_->gammas.push_back(gamma);
        path_->clusters_per_k.push_back(tracker.components());
        const bool store = cfg_->keep_iterates && (force_store || !events.empty() || k % cfg_->keep_every == 0);
        if (store) store_iterate(k, u, tracker);
        for (auto& e : events) path_->events.push_back(std::move(e));
    }

    /// Makes sure the last iterate is stored.
    void finish(long k, const Matrix& u, const FusionTracker& tracker) {
        if (cfg_->keep_iterates && (path_->stored_k.empty() || path_->stored_k.back() != k)) {
            store_iterate(k, u, tracker);
        }
        path_->final_U = u;
    }

private:
    void store_iterate(long k, const Matrix& u, const FusionTracker& tracker) {
        path_->stored_k.push_back(k);
        path_->iterates.push_back(u);
        path_->zero_masks.push_back(tracker.zero());
    }

    CarpPath* path_;
    const PathConfig* cfg_;
};

/// Drives a one-step path: gamma grows by a factor each accepted step. In viz
/// mode a step that creates more than one fusion is discarded and retried from
/// the saved state with the increment t - 1 halved, up to max_backtrack times.
///
/// Runner must provide: record_initial(gamma), int try_step(gamma, k),
/// accept(gamma, k, exhausted), bool finished(), finish(k).
template <class Runner>
void drive_path(Runner& runner, const PathConfig& cfg, double epsilon, bool viz, long* backtracks = nullptr) {
    double gamma = epsilon;
    runner.record_initial(gamma);
    // In viz mode the step is 1 + (base - 1) / 2^depth. A step accepted without
    // fusions keeps its depth; a fusion resets it.
    double base = viz ? cfg.burn_in_t : cfg.t;
    int depth = 0;
    auto step_at = [&](int d) { return 1.0 + (base - 1.0) / std::ldexp(1.0, d); };
    long k = 0;
    while (!runner.finished()) {
        if (k >= cfg.max_iter) {
            throw IterationCapError("path did not reach full fusion within " + std::to_string(cfg.max_iter) +
                                    " iterations");
        }
        ++k;
        double next = gamma * step_at(depth);
        int fuses = runner.try_step(next, k);
        bool exhausted = false;
        if (viz) {
            while (fuses > 1) {
                if (depth == cfg.max_backtrack) {
                    exhausted = true;
                    break;
                }
                ++depth;
                if (backtracks) ++*backtracks;
                next = gamma * step_at(depth);
                fuses = runner.try_step(next, k);
            }
        }
        runner.accept(next, k, exhausted);
        gamma = next;
        if (viz && (fuses > 0 || exhausted)) {
            base = cfg.t;
            depth = 0;
        }
    }
    runner.finish(k);
}

namespace detail {

class CarpRunner {
public:
    CarpRunner(const Matrix& x, const WeightGraph& g, const PenaltySpec& spec, const PathConfig& cfg, CarpPath& path)
        : x_(x), g_(g), spec_(spec), cfg_(cfg), tracker_(g, spec), recorder_(path, cfg) {
        state_ = initial_state(x, g);
        settle_level_ = cfg.settle_tol * norm_2inf(state_.V);
    }

    void record_initial(double gamma) {
        auto u = tracker_.propose(state_.V, state_.V, gamma, 0);
        auto events = std::move(u.events);
        tracker_.commit(std::move(u));
        recorder_.record(0, gamma, state_.U, tracker_, std::move(events), true);
    }

    int try_step(double gamma, long k) {
        trial_ = state_;
        admm_update(trial_, x_, g_, spec_, gamma, &arg_);
        update_ = tracker_.propose(trial_.V, arg_, gamma, k);
        return update_.fuses;
    }

    void accept(double gamma, long k, bool exhausted) {
        state_ = std::move(trial_);
        auto events = std::move(update_.events);
        if (exhausted) {
            for (auto& e : events) e.backtrack_exhausted = true;
        }
        tracker_.commit(std::move(update_));
        recorder_.record(k, gamma, state_.U, tracker_, std::move(events), false);
    }

    bool finished() const {
        if (!tracker_.all_zero()) return false;
        return settle_level_ == 0.0 || norm_2inf(g_.D() * state_.U) <= settle_level_;
    }

    void finish(long k) { recorder_.finish(k, state_.U, tracker_); }

    const SolverState& state() const { return state_; }

private:
    const Matrix& x_;
    const WeightGraph& g_;
    const PenaltySpec& spec_;
    const PathConfig& cfg_;
    SolverState state_, trial_;
    Matrix arg_;
    FusionTracker tracker_;
    FusionTracker::Update update_;
    PathRecorder recorder_;
    double settle_level_ = 0.0;
};

inline CarpPath run_carp(const Matrix& x, const WeightGraph& graph, const PenaltySpec& spec, const PathConfig& cfg,
                         bool viz) {
    cfg.validate();
    const double rho = cfg.path_rho(graph, viz);
    std::optional<WeightGraph> refactored;
    if (rho != graph.rho()) refactored = graph.with_rho(rho);
    const WeightGraph& g = refactored ? *refactored : graph;
    spec.validate(g.num_edges());
    if (x.rows() != g.n()) throw ShapeError("data rows do not match graph nodes");
    if (g.components() != 1) throw ConnectivityError("fusion graph must be connected");
    if (!x.allFinite()) throw NumericalError("data contains non-finite values");
    CarpPath path;
    path.n = g.n();
    path.epsilon = cfg.epsilon ? *cfg.epsilon : default_epsilon(x, g);
    CarpRunner runner(x, g, spec, cfg, path);
    drive_path(runner, cfg, path.epsilon, viz, &path.backtracks);
    return path;
}

}  // namespace detail

/// One ADMM triplet update at threshold gamma / rho.
inline SolverState carp_step(SolverState state, double gamma, const Matrix& x, const WeightGraph& g,
                             const PenaltySpec& spec) {
    if (!(gamma >= 0.0)) throw PreconditionError("gamma must be nonnegative");
    check_shapes(state, x, g);
    check_finite(state);
    admm_update(state, x, g, spec, gamma);
    return state;
}

inline CarpPath carp_path(const Matrix& x, const WeightGraph& g, const PenaltySpec& spec, const PathConfig& cfg = {}) {
    return detail::run_carp(x, g, spec, cfg, false);
}

/// Back-tracking variant: coarse burn_in_t until the first fusion, then cfg.t.
/// Runs at PathConfig::viz_rho unless cfg.rho is set.
inline CarpPath carp_viz_path(const Matrix& x, const WeightGraph& g, const PenaltySpec& spec,
                              const PathConfig& cfg) {
    return detail::run_carp(x, g, spec, cfg, true);
}

/// Spreads simultaneous fusions of one step across (gamma_{k-1}, gamma_k]:
/// the i-th of m fuses (ordered by score, then edge) gets
/// gamma_{k-1} * (gamma_k / gamma_{k-1})^(i/m). Unfuse events keep gamma_k.
inline CarpPath postprocess_events(CarpPath path) {
    std::map<long, std::vector<std::size_t>> by_step;
    for (std::size_t i = 0; i < path.events.size(); ++i) {
        if (path.events[i].kind == EventKind::Fuse) by_step[path.events[i].k].push_back(i);
    }
    for (auto& [k, idx] : by_step) {
        if (k < 1 || static_cast<std::size_t>(k) >= path.gammas.size()) continue;
        const double lo = path.gammas[static_cast<std::size_t>(k - 1)];
        const double hi = path.gammas[static_cast<std::size_t>(k)];
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            const auto& ea = path.events[a];
            const auto& eb = path.events[b];
            const double sa = score_key(ea.score), sb = score_key(eb.score);
            return sa < sb || (sa == sb && ea.edge < eb.edge);
        });
        const double m = static_cast<double>(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            path.events[idx[i]].gamma =
                i + 1 == idx.size() ? hi : lo * std::pow(hi / lo, static_cast<double>(i + 1) / m);
        }
    }
    std::stable_sort(path.events.begin(), path.events.end(), [](const FusionEvent& a, const FusionEvent& b) {
        if (a.k != b.k) return a.k < b.k;
        if (a.gamma != b.gamma) return a.gamma < b.gamma;
        if (a.kind != b.kind) return a.kind == EventKind::Fuse;
        return a.edge < b.edge;
    });
    return path;
}

}  // namespace cvxclust
