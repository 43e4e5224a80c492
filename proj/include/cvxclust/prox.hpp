#pragma once

// Row-wise proximal operator of the weighted fusion penalty sum_l w_l ||V_l||_q.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "weight_graph.hpp"

namespace cvxclust {

enum class Norm { L1, L2, Linf };

inline Norm parse_norm(const std::string& s) {
    if (s == "l1" || s == "L1" || s == "1") return Norm::L1;
    if (s == "l2" || s == "L2" || s == "2") return Norm::L2;
    if (s == "linf" || s == "Linf" || s == "inf" || s == "Inf") return Norm::Linf;
    throw UnsupportedNorm("unsupported norm '" + s + "' (expected l1, l2 or linf)");
}

inline Norm norm_from_q(double q) {
    if (q == 1.0) return Norm::L1;
    if (q == 2.0) return Norm::L2;
    if (std::isinf(q) && q > 0) return Norm::Linf;
    throw UnsupportedNorm("unsupported q = " + std::to_string(q));
}

inline std::string to_string(Norm q) {
    switch (q) {
        case Norm::L1: return "l1";
        case Norm::L2: return "l2";
        case Norm::Linf: return "linf";
    }
    return "?";
}

struct PenaltySpec {
    Norm q = Norm::L2;
    Vector weights;

    static PenaltySpec from_graph(const WeightGraph& g, Norm q = Norm::L2) { return {q, g.weights()}; }

    void validate(Eigen::Index edges) const {
        if (weights.size() != edges) {
            throw LengthError("penalty has " + std::to_string(weights.size()) + " weights for " +
                              std::to_string(edges) + " edges");
        }
        if (weights.size() > 0 && !(weights.minCoeff() > 0.0)) {
            throw PreconditionError("penalty weights must be positive");
        }
    }
};

template <class Row>
double row_norm(const Row& r, Norm q) {
    switch (q) {
        case Norm::L1: return r.template lpNorm<1>();
        case Norm::L2: return r.norm();
        case Norm::Linf: return r.size() ? r.template lpNorm<Eigen::Infinity>() : 0.0;
    }
    return 0.0;
}

/// Norm dual to q (used to measure how far a prox input is past its threshold).
template <class Row>
double dual_norm(const Row& r, Norm q) {
    switch (q) {
        case Norm::L1: return r.size() ? r.template lpNorm<Eigen::Infinity>() : 0.0;
        case Norm::L2: return r.norm();
        case Norm::Linf: return r.template lpNorm<1>();
    }
    return 0.0;
}

/// Euclidean projection onto {z : ||z||_1 <= radius} by the sort-based rule.
inline Vector project_l1_ball(const Vector& v, double radius) {
    if (!(radius >= 0.0)) throw PreconditionError("radius must be nonnegative");
    if (v.lpNorm<1>() <= radius) return v;
    if (radius == 0.0) return Vector::Zero(v.size());
    std::vector<double> u(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) u[static_cast<std::size_t>(i)] = std::abs(v(i));
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumsum = 0.0, theta = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cumsum += u[j];
        const double candidate = (cumsum - radius) / static_cast<double>(j + 1);
        if (u[j] - candidate > 0.0) theta = candidate;
    }
    Vector out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double mag = std::max(std::abs(v(i)) - theta, 0.0);
        out(i) = v(i) < 0.0 ? -mag : mag;
    }
    return out;
}

/// Prox of tau * ||.||_q applied to one row, written in place.
template <class Row>
void prox_row(Row&& r, double tau, Norm q) {
    switch (q) {
        case Norm::L1:
            for (Eigen::Index j = 0; j < r.size(); ++j) {
                const double mag = std::max(std::abs(r(j)) - tau, 0.0);
                r(j) = mag == 0.0 ? 0.0 : std::copysign(mag, r(j));
            }
            return;
        case Norm::L2: {
            const double nrm = r.norm();
            if (nrm <= tau) {
                r.setZero();
            } else if (tau > 0.0) {
                r *= 1.0 - tau / nrm;
            }
            return;
        }
        case Norm::Linf: {
            Vector v = r.transpose();
            if (v.lpNorm<1>() <= tau) {
                r.setZero();
            } else {
                r = (v - project_l1_ball(v, tau)).transpose();
            }
            return;
        }
    }
    throw UnsupportedNorm("unsupported norm");
}

/// Row l of the result is prox of M_l at level weights(l) * threshold_base.
inline Matrix prox_penalty(const Matrix& m, double threshold_base, const PenaltySpec& spec) {
    if (!(threshold_base >= 0.0)) throw PreconditionError("threshold must be nonnegative");
    spec.validate(m.rows());
    Matrix out = m;
    for (Eigen::Index l = 0; l < m.rows(); ++l) prox_row(out.row(l), spec.weights(l) * threshold_base, spec.q);
    return out;
}

inline bool row_is_zero(const Matrix& m, Eigen::Index l) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (m(l, j) != 0.0) return false;
    }
    return true;
}

}  // namespace cvxclust
