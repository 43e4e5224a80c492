#pragma once

// Sparse fusion-weight graph over the rows of a data matrix, its difference
// matrix D and a cached Cholesky factor of I + rho * D^T D.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dataio.hpp"
#include "errors.hpp"

namespace cvxclust {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Cholesky = Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::NaturalOrdering<int>>;

struct WeightedEdge {
    int from = 0;
    int to = 0;
    double weight = 1.0;

    bool operator==(const WeightedEdge&) const = default;
};

/// Disjoint-set forest with path halving and union by size.
class UnionFind {
public:
    explicit UnionFind(int n) : parent_(static_cast<std::size_t>(n)), size_(static_cast<std::size_t>(n), 1) {
        std::iota(parent_.begin(), parent_.end(), 0);
        components_ = n;
    }

    int find(int x) {
        while (parent_[static_cast<std::size_t>(x)] != x) {
            auto& p = parent_[static_cast<std::size_t>(x)];
            p = parent_[static_cast<std::size_t>(p)];
            x = p;
        }
        return x;
    }

    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (size_[static_cast<std::size_t>(a)] < size_[static_cast<std::size_t>(b)]) std::swap(a, b);
        parent_[static_cast<std::size_t>(b)] = a;
        size_[static_cast<std::size_t>(a)] += size_[static_cast<std::size_t>(b)];
        --components_;
        return true;
    }

    int components() const { return components_; }

    /// Component labels numbered 0.. in order of first appearance.
    std::vector<int> labels() {
        std::vector<int> root_id(parent_.size(), -1), out(parent_.size());
        int next = 0;
        for (std::size_t i = 0; i < parent_.size(); ++i) {
            int r = find(static_cast<int>(i));
            auto& id = root_id[static_cast<std::size_t>(r)];
            if (id < 0) id = next++;
            out[i] = id;
        }
        return out;
    }

private:
    std::vector<int> parent_;
    std::vector<int> size_;
    int components_ = 0;
};

/// Row l of D has +1 at edges[l].from and -1 at edges[l].to.
inline SparseMatrix build_difference_matrix(const std::vector<WeightedEdge>& edges, int n) {
    if (n < 0) throw IndexError("negative node count");
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(2 * edges.size());
    for (std::size_t l = 0; l < edges.size(); ++l) {
        const auto& e = edges[l];
        if (e.from < 0 || e.to < 0 || e.from >= n || e.to >= n) {
            throw IndexError("edge " + std::to_string(l) + " (" + std::to_string(e.from) + "," +
                             std::to_string(e.to) + ") out of range for n=" + std::to_string(n));
        }
        trips.emplace_back(static_cast<int>(l), e.from, 1.0);
        trips.emplace_back(static_cast<int>(l), e.to, -1.0);
    }
    SparseMatrix d(static_cast<Eigen::Index>(edges.size()), n);
    d.setFromTriplets(trips.begin(), trips.end());
    return d;
}

/// Sparse Cholesky factor of I + rho * D^T D (natural ordering, so L L^T is the
/// matrix itself rather than a permutation of it).
inline std::shared_ptr<const Cholesky> factorize(const SparseMatrix& d, double rho) {
    if (!(rho > 0.0) || !std::isfinite(rho)) throw PreconditionError("rho must be positive and finite");
    for (Eigen::Index k = 0; k < d.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(d, k); it; ++it) {
            if (!std::isfinite(it.value())) throw NumericalError("difference matrix contains non-finite entries");
        }
    }
    SparseMatrix a(d.cols(), d.cols());
    a.setIdentity();
    a += rho * SparseMatrix(d.transpose() * d);
    a.makeCompressed();
    auto chol = std::make_shared<Cholesky>();
    chol->compute(a);
    if (chol->info() != Eigen::Success) throw NumericalError("Cholesky factorization failed");
    return chol;
}

class WeightGraph {
public:
    WeightGraph() = default;

    /// Builds the graph from an explicit edge list. Edges are put in canonical
    /// from < to orientation; self loops, duplicates and non-positive weights
    /// are rejected. An empty or disconnected edge set is accepted only when
    /// require_connected is false.
    static WeightGraph from_edges(int n, std::vector<WeightedEdge> edges, double rho = 1.0,
                                  bool require_connected = true) {
        if (n < 1) throw DimensionError("graph needs at least one node");
        std::set<std::pair<int, int>> seen;
        for (auto& e : edges) {
            if (e.from > e.to) std::swap(e.from, e.to);
            if (e.from == e.to) throw PreconditionError("self loop on node " + std::to_string(e.from));
            if (!(e.weight > 0.0) || !std::isfinite(e.weight)) {
                throw PreconditionError("edge weights must be positive and finite");
            }
            if (!seen.emplace(e.from, e.to).second) {
                throw PreconditionError("duplicate edge (" + std::to_string(e.from) + "," +
                                        std::to_string(e.to) + ")");
            }
        }
        WeightGraph g;
        g.n_ = n;
        g.d_ = build_difference_matrix(edges, n);
        g.edges_ = std::move(edges);
        if (require_connected && g.components() != 1) {
            throw ConnectivityError("fusion graph has " + std::to_string(g.components()) +
                                    " connected components; it must be connected");
        }
        g.rho_ = rho;
        g.chol_ = factorize(g.d_, rho);
        return g;
    }

    int n() const { return n_; }
    Eigen::Index num_edges() const { return static_cast<Eigen::Index>(edges_.size()); }
    const std::vector<WeightedEdge>& edges() const { return edges_; }
    const SparseMatrix& D() const { return d_; }
    double rho() const { return rho_; }
    const Cholesky& cholesky() const { return *chol_; }

    Vector weights() const {
        Vector w(num_edges());
        for (Eigen::Index l = 0; l < w.size(); ++l) w(l) = edges_[static_cast<std::size_t>(l)].weight;
        return w;
    }

    /// Same edges with a different rho (refactorizes).
    WeightGraph with_rho(double rho) const { return from_edges(n_, edges_, rho, false); }

    /// Returns M with (I + rho D^T D) M = B using the cached factor.
    Matrix solve(const Matrix& b) const {
        if (b.rows() != n_) {
            throw ShapeError("right-hand side has " + std::to_string(b.rows()) + " rows, expected " +
                             std::to_string(n_));
        }
        if (edges_.empty()) return b;
        return chol_->solve(b);
    }

    /// Lower-triangular factor L with L L^T = I + rho D^T D.
    SparseMatrix chol_factor() const {
        if (edges_.empty()) {
            SparseMatrix eye(n_, n_);
            eye.setIdentity();
            return eye;
        }
        return chol_->matrixL();
    }

    int components() const {
        UnionFind uf(n_);
        for (const auto& e : edges_) uf.unite(e.from, e.to);
        return uf.components();
    }

    int max_degree() const {
        std::vector<int> deg(static_cast<std::size_t>(n_), 0);
        for (const auto& e : edges_) {
            ++deg[static_cast<std::size_t>(e.from)];
            ++deg[static_cast<std::size_t>(e.to)];
        }
        return deg.empty() ? 0 : *std::max_element(deg.begin(), deg.end());
    }

private:
    int n_ = 0;
    std::vector<WeightedEdge> edges_;
    SparseMatrix d_;
    double rho_ = 1.0;
    std::shared_ptr<const Cholesky> chol_;
};

inline int default_k_neighbors(Eigen::Index n) {
    const int lg = static_cast<int>(std::ceil(std::log2(static_cast<double>(std::max<Eigen::Index>(n, 1)))));
    return std::max(3, lg);
}

/// Squared Euclidean distances between all pairs of rows.
inline Matrix pairwise_sq_distances(const Matrix& x) {
    const Eigen::Index n = x.rows();
    Matrix d(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        d(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            // Direct differences keep exact zeros exact, which the duplicate check relies on.
            const double v = (x.row(i) - x.row(j)).squaredNorm();
            d(i, j) = d(j, i) = v;
        }
    }
    return d;
}

/// Sparse Gaussian-kernel weights: symmetric k-NN union, w = exp(-phi d^2),
/// minimum spanning tree edges added until connected, max weight rescaled to 1.
/// phi defaults to 1 / median squared pairwise distance.
inline WeightGraph build_weights(const Matrix& x, int k_neighbors, std::optional<double> phi = std::nullopt,
                                 double rho = 1.0) {
    const int n = static_cast<int>(x.rows());
    if (n < 2) throw DimensionError("weights need at least 2 observations");
    if (k_neighbors < 1) throw PreconditionError("k_neighbors must be at least 1");
    if (phi && (!(*phi >= 0.0) || !std::isfinite(*phi))) throw PreconditionError("phi must be >= 0");
    const Matrix d2 = pairwise_sq_distances(x);

    std::vector<double> all;
    all.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (d2(i, j) == 0.0) {
                double sd = 0.0;
                for (Eigen::Index c = 0; c < x.cols(); ++c) {
                    const auto col = x.col(c).array();
                    sd = std::max(sd, std::sqrt((col - col.mean()).square().sum() / (n - 1)));
                }
                std::ostringstream msg;
                msg << "rows " << i << " and " << j << " are identical; add jitter of about "
                    << std::setprecision(3) << 1e-8 * (sd > 0.0 ? sd : 1.0) << " to break the tie";
                throw DegenerateError(msg.str());
            }
            all.push_back(d2(i, j));
        }
    }
    double phi_value = 0.0;
    if (phi) {
        phi_value = *phi;
    } else {
        const std::size_t m = all.size();
        auto mid = all.begin() + static_cast<std::ptrdiff_t>(m / 2);
        std::nth_element(all.begin(), mid, all.end());
        double median = *mid;
        if (m % 2 == 0) median = 0.5 * (median + *std::max_element(all.begin(), mid));
        phi_value = 1.0 / median;
    }

    const int k = std::min(k_neighbors, n - 1);
    std::set<std::pair<int, int>> pairs;
    std::vector<int> order;
    for (int i = 0; i < n; ++i) {
        order.resize(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        order.erase(order.begin() + i);
        std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
            return d2(i, a) < d2(i, b) || (d2(i, a) == d2(i, b) && a < b);
        });
        for (int r = 0; r < k; ++r) pairs.emplace(std::min(i, order[static_cast<std::size_t>(r)]),
                                                  std::max(i, order[static_cast<std::size_t>(r)]));
    }

    UnionFind uf(n);
    for (const auto& [a, b] : pairs) uf.unite(a, b);
    if (uf.components() > 1) {
        std::vector<std::pair<int, int>> candidates;
        candidates.reserve(all.size());
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) candidates.emplace_back(i, j);
        }
        std::sort(candidates.begin(), candidates.end(), [&](const auto& a, const auto& b) {
            const double da = d2(a.first, a.second), db = d2(b.first, b.second);
            return da < db || (da == db && a < b);
        });
        for (const auto& [a, b] : candidates) {
            if (uf.unite(a, b)) pairs.emplace(a, b);
            if (uf.components() == 1) break;
        }
    }

    // Weights relative to the closest retained pair; computed in the exponent so
    // that far pairs do not underflow before rescaling.
    double min_d2 = std::numeric_limits<double>::infinity();
    for (const auto& [a, b] : pairs) min_d2 = std::min(min_d2, d2(a, b));
    std::vector<WeightedEdge> edges;
    edges.reserve(pairs.size());
    for (const auto& [a, b] : pairs) {
        double w = std::exp(-phi_value * (d2(a, b) - min_d2));
        edges.push_back({a, b, std::max(w, DBL_MIN)});
    }
    return WeightGraph::from_edges(n, std::move(edges), rho, true);
}

inline WeightGraph build_weights(const DataMatrix& data, int k_neighbors, std::optional<double> phi = std::nullopt,
                                 double rho = 1.0) {
    return build_weights(data.values, k_neighbors, phi, rho);
}

/// Default neighbour count max(3, ceil(log2 n)).
inline WeightGraph build_weights(const Matrix& x) {
    return build_weights(x, default_k_neighbors(static_cast<int>(x.rows())));
}

inline WeightGraph build_weights(const DataMatrix& data) { return build_weights(data.values); }

/// Fully connected graph with unit weights (every pair of rows).
inline WeightGraph full_graph(int n, double rho = 1.0) {
    std::vector<WeightedEdge> edges;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) edges.push_back({i, j, 1.0});
    }
    return WeightGraph::from_edges(n, std::move(edges), rho, n > 1);
}

inline void save_edges_csv(const std::string& path, const WeightGraph& g) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write '" + path + "'");
    out << "from,to,weight\n" << std::setprecision(17);
    for (const auto& e : g.edges()) out << e.from << ',' << e.to << ',' << e.weight << '\n';
}

/// Reads a from,to,weight edge list (0-based node ids, header optional).
inline std::vector<WeightedEdge> load_edges_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    auto lines = detail::read_lines(in);
    std::vector<WeightedEdge> edges;
    for (std::size_t li = 0; li < lines.size(); ++li) {
        auto cells = detail::split_commas(lines[li]);
        if (li == 0 && detail::trim(cells[0]) == "from") continue;
        if (cells.size() != 3) throw ParseError("line " + std::to_string(li + 1) + ": expected from,to,weight");
        WeightedEdge e;
        e.from = static_cast<int>(detail::parse_double(cells[0], li + 1));
        e.to = static_cast<int>(detail::parse_double(cells[1], li + 1));
        e.weight = detail::parse_double(cells[2], li + 1);
        edges.push_back(e);
    }
    return edges;
}

}  // namespace cvxclust
