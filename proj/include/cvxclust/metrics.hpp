#pragma once

// Path distance, dendrogram recovery and pair-counting partition indices.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "carp.hpp"
#include "dataio.hpp"
#include "errors.hpp"
#include "exact_solvers.hpp"
#include "weight_graph.hpp"

namespace cvxclust {

struct PathDistanceReport {
    double d_sup_lambda = 0.0;  // sup over reference of inf over candidate
    double d_sup_k = 0.0;       // sup over candidate of inf over reference
    double d_hausdorff = 0.0;
    double normalizer = 1.0;
};

namespace detail {

/// sup_{a in from} inf_{b in to} ||a - b||_F. Candidates are visited outward from
/// the position of ||a|| in the norm-sorted list; |‖a‖ - ‖b‖| bounds ‖a - b‖ from
/// below, so the scan stops once that bound passes the best distance so far.
inline double directed_hausdorff(const std::vector<Matrix>& from, const std::vector<Matrix>& to) {
    std::vector<std::pair<double, std::size_t>> sorted;
    sorted.reserve(to.size());
    for (std::size_t i = 0; i < to.size(); ++i) sorted.emplace_back(to[i].norm(), i);
    std::sort(sorted.begin(), sorted.end());
    double worst = 0.0;
    for (const auto& a : from) {
        const double na = a.norm();
        const auto mid = std::lower_bound(sorted.begin(), sorted.end(), std::make_pair(na, std::size_t{0}));
        auto hi = static_cast<std::ptrdiff_t>(mid - sorted.begin());
        auto lo = hi - 1;
        const auto size = static_cast<std::ptrdiff_t>(sorted.size());
        double best = std::numeric_limits<double>::infinity();
        while (lo >= 0 || hi < size) {
            const double gap_lo = lo >= 0 ? na - sorted[static_cast<std::size_t>(lo)].first
                                          : std::numeric_limits<double>::infinity();
            const double gap_hi = hi < size ? sorted[static_cast<std::size_t>(hi)].first - na
                                            : std::numeric_limits<double>::infinity();
            const bool take_lo = gap_lo <= gap_hi;
            const double gap = take_lo ? gap_lo : gap_hi;
            if (gap >= best || best <= worst) break;
            const std::size_t idx = sorted[static_cast<std::size_t>(take_lo ? lo : hi)].second;
            best = std::min(best, (a - to[idx]).norm());
            if (take_lo) {
                --lo;
            } else {
                ++hi;
            }
        }
        worst = std::max(worst, best);
    }
    return worst;
}

}  // namespace detail

/// Hausdorff distance between two sets of iterates (Frobenius norm), divided by
/// n * p * ||DX||_{2,inf}.
inline PathDistanceReport normalized_hausdorff(const std::vector<Matrix>& candidate,
                                               const std::vector<Matrix>& reference, const Matrix& x,
                                               const WeightGraph& g) {
    if (candidate.empty() || reference.empty()) throw ShapeError("path distance needs non-empty iterate lists");
    for (const auto* list : {&candidate, &reference}) {
        for (const auto& m : *list) {
            if (m.rows() != x.rows() || m.cols() != x.cols()) throw ShapeError("iterate shape does not match data");
        }
    }
    PathDistanceReport r;
    r.normalizer = static_cast<double>(x.rows()) * static_cast<double>(x.cols()) * norm_2inf(g.D() * x);
    if (!(r.normalizer > 0.0)) r.normalizer = 1.0;
    r.d_sup_lambda = detail::directed_hausdorff(reference, candidate) / r.normalizer;
    r.d_sup_k = detail::directed_hausdorff(candidate, reference) / r.normalizer;
    r.d_hausdorff = std::max(r.d_sup_lambda, r.d_sup_k);
    return r;
}

/// (number of distinct cluster counts realized - 1) / (n - 1).
inline double dendrogram_recovery(const std::vector<int>& cluster_counts, int n) {
    if (n < 2) throw DimensionError("recovery needs n >= 2");
    if (cluster_counts.empty() || std::find(cluster_counts.begin(), cluster_counts.end(), 1) == cluster_counts.end()) {
        throw IncompleteEventsError("path does not reach a single cluster");
    }
    const std::set<int> distinct(cluster_counts.begin(), cluster_counts.end());
    return static_cast<double>(distinct.size() - 1) / static_cast<double>(n - 1);
}

inline double dendrogram_recovery(const CarpPath& path) { return dendrogram_recovery(path.clusters_per_k, path.n); }

inline double dendrogram_recovery(const GridPathResult& grid, int n) {
    std::vector<int> counts = grid.cluster_counts;
    counts.push_back(n);  // the grid starts from the unpenalized data
    return dendrogram_recovery(counts, n);
}

namespace detail {

struct PairCounts {
    double same_both = 0.0;
    double same_a = 0.0;
    double same_b = 0.0;
    double total = 0.0;
};

inline double choose2(double m) { return m * (m - 1.0) / 2.0; }

inline PairCounts pair_counts(const Partition& a, const Partition& b) {
    if (a.size() != b.size()) {
        throw LengthError("partitions have different lengths (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
    }
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> ca, cb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a.assignment[i], b.assignment[i]}] += 1.0;
        ca[a.assignment[i]] += 1.0;
        cb[b.assignment[i]] += 1.0;
    }
    PairCounts p;
    for (const auto& [key, c] : joint) p.same_both += choose2(c);
    for (const auto& [key, c] : ca) p.same_a += choose2(c);
    for (const auto& [key, c] : cb) p.same_b += choose2(c);
    p.total = choose2(static_cast<double>(a.size()));
    return p;
}

}  // namespace detail

inline double rand_index(const Partition& a, const Partition& b) {
    const auto p = detail::pair_counts(a, b);
    if (p.total == 0.0) return 1.0;
    const double agree = p.total - p.same_a - p.same_b + 2.0 * p.same_both;
    return agree / p.total;
}

/// Hubert-Arabie adjusted Rand index.
inline double adjusted_rand(const Partition& a, const Partition& b) {
    const auto p = detail::pair_counts(a, b);
    if (p.total == 0.0) return 1.0;
    const double expected = p.same_a * p.same_b / p.total;
    const double max_index = 0.5 * (p.same_a + p.same_b);
    if (max_index == expected) return 1.0;
    return (p.same_both - expected) / (max_index - expected);
}

inline double jaccard(const Partition& a, const Partition& b) {
    const auto p = detail::pair_counts(a, b);
    const double denom = p.same_a + p.same_b - p.same_both;
    return denom == 0.0 ? 1.0 : p.same_both / denom;
}

}  // namespace cvxclust
