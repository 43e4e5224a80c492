#pragma once

// Data loading, standardization and the synthetic benchmark generators.

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "errors.hpp"

namespace cvxclust {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Observations-by-features matrix with row and column labels.
struct DataMatrix {
    Matrix values;
    std::vector<std::string> row_labels;
    std::vector<std::string> col_labels;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }

    /// Throws DimensionError / ParseError when the invariants do not hold.
    void validate() const {
        if (values.rows() < 2) {
            throw DimensionError("data matrix needs at least 2 rows, got " +
                                 std::to_string(values.rows()));
        }
        if (values.cols() < 1) throw DimensionError("data matrix needs at least 1 column");
        if (static_cast<Eigen::Index>(row_labels.size()) != values.rows() ||
            static_cast<Eigen::Index>(col_labels.size()) != values.cols()) {
            throw DimensionError("label counts do not match matrix dimensions");
        }
        if (!values.allFinite()) throw ParseError("data matrix contains non-finite values");
    }
};

inline std::vector<std::string> default_labels(const std::string& prefix, Eigen::Index count) {
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(count));
    for (Eigen::Index i = 0; i < count; ++i) out.push_back(prefix + std::to_string(i + 1));
    return out;
}

inline DataMatrix make_data(Matrix values) {
    DataMatrix d;
    d.row_labels = default_labels("row_", values.rows());
    d.col_labels = default_labels("col_", values.cols());
    d.values = std::move(values);
    d.validate();
    return d;
}

/// Hard cluster assignment with ids 0..k-1, each id used at least once.
struct Partition {
    std::vector<int> assignment;
    int k = 0;

    std::size_t size() const { return assignment.size(); }

    /// Relabels arbitrary integer labels to contiguous ids in order of first appearance.
    static Partition from_labels(const std::vector<int>& labels) {
        Partition p;
        p.assignment.reserve(labels.size());
        std::unordered_map<int, int> remap;
        for (int label : labels) {
            auto [it, inserted] = remap.try_emplace(label, static_cast<int>(remap.size()));
            p.assignment.push_back(it->second);
        }
        p.k = static_cast<int>(remap.size());
        return p;
    }

    bool operator==(const Partition&) const = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline std::string unquote(std::string_view s) {
    s = trim(s);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return std::string(s);
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == ',' && !quoted) {
            out.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    out.push_back(line.substr(start));
    return out;
}

inline double parse_double(std::string_view cell, std::size_t line_no) {
    std::string_view s = trim(cell);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        throw ParseError("line " + std::to_string(line_no) + ": cannot parse '" +
                         std::string(trim(cell)) + "' as a number");
    }
    if (!std::isfinite(value)) {
        throw ParseError("line " + std::to_string(line_no) + ": non-finite value");
    }
    return value;
}

inline std::vector<std::string> read_lines(std::istream& in) {
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        lines.push_back(std::move(line));
    }
    return lines;
}

}  // namespace detail

/// Parses comma separated numeric data. Labels come from the header row / first
/// column when present, otherwise they are generated as row_i / col_j.
inline DataMatrix parse_csv(std::istream& in, bool has_header, bool has_rownames) {
    auto lines = detail::read_lines(in);
    DataMatrix out;
    std::size_t first = 0;
    std::vector<std::string> header;
    if (has_header) {
        if (lines.empty()) throw ParseError("empty CSV input");
        for (auto cell : detail::split_commas(lines[0])) header.push_back(detail::unquote(cell));
        if (has_rownames && !header.empty()) header.erase(header.begin());
        first = 1;
    }
    std::vector<std::vector<double>> rows;
    std::vector<std::string> names;
    std::size_t width = 0;
    for (std::size_t li = first; li < lines.size(); ++li) {
        auto cells = detail::split_commas(lines[li]);
        std::size_t offset = 0;
        if (has_rownames) {
            names.push_back(detail::unquote(cells[0]));
            offset = 1;
        }
        if (cells.size() <= offset) throw ParseError("line " + std::to_string(li + 1) + ": no data");
        std::vector<double> row;
        row.reserve(cells.size() - offset);
        for (std::size_t c = offset; c < cells.size(); ++c) {
            row.push_back(detail::parse_double(cells[c], li + 1));
        }
        if (rows.empty()) {
            width = row.size();
        } else if (row.size() != width) {
            throw ParseError("line " + std::to_string(li + 1) + ": expected " +
                             std::to_string(width) + " values, found " + std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.size() < 2) {
        throw DimensionError("need at least 2 observations, found " + std::to_string(rows.size()));
    }
    if (has_header && header.size() != width) {
        throw ParseError("header has " + std::to_string(header.size()) + " labels for " +
                         std::to_string(width) + " columns");
    }
    out.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < width; ++j) {
            out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    out.row_labels = has_rownames ? std::move(names) : default_labels("row_", out.values.rows());
    out.col_labels = has_header ? std::move(header) : default_labels("col_", out.values.cols());
    out.validate();
    return out;
}

inline DataMatrix load_csv(const std::string& path, bool has_header, bool has_rownames) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return parse_csv(in, has_header, has_rownames);
}

inline void write_csv(std::ostream& out, const DataMatrix& data, bool with_labels = true) {
    out << std::setprecision(17);
    if (with_labels) {
        out << "\"\"";
        for (const auto& c : data.col_labels) out << ',' << c;
        out << '\n';
    }
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        if (with_labels) out << data.row_labels[static_cast<std::size_t>(i)] << ',';
        for (Eigen::Index j = 0; j < data.cols(); ++j) {
            if (j > 0) out << ',';
            out << data.values(i, j);
        }
        out << '\n';
    }
}

inline void save_csv(const std::string& path, const DataMatrix& data, bool with_labels = true) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write '" + path + "'");
    write_csv(out, data, with_labels);
}

/// Reads one integer label per line (optionally "name,label" pairs, header skipped
/// when the first line is not numeric).
inline Partition load_partition(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    auto lines = detail::read_lines(in);
    std::vector<int> labels;
    for (std::size_t li = 0; li < lines.size(); ++li) {
        auto cells = detail::split_commas(lines[li]);
        std::string_view cell = detail::trim(cells.back());
        int v = 0;
        auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec != std::errc() || ptr != cell.data() + cell.size()) {
            if (li == 0) continue;
            throw ParseError("line " + std::to_string(li + 1) + ": bad cluster label");
        }
        labels.push_back(v);
    }
    return Partition::from_labels(labels);
}

inline void save_partition(const std::string& path, const Partition& p,
                           const std::vector<std::string>& names = {}) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write '" + path + "'");
    out << "label,cluster\n";
    for (std::size_t i = 0; i < p.size(); ++i) {
        out << (names.empty() ? "row_" + std::to_string(i + 1) : names[i]) << ','
            << p.assignment[i] << '\n';
    }
}

/// Centers every column and scales it to unit sample standard deviation.
/// Constant columns are only centered; a warning naming the column is appended.
inline DataMatrix standardize(const DataMatrix& data, std::vector<std::string>* warnings = nullptr) {
    DataMatrix out = data;
    const double n = static_cast<double>(data.rows());
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
        auto col = out.values.col(j);
        const double mean = col.mean();
        col.array() -= mean;
        const double sd = std::sqrt(col.squaredNorm() / (n - 1.0));
        if (sd > 0.0 && std::isfinite(sd)) {
            col /= sd;
        } else {
            col.setZero();
            if (warnings) {
                warnings->push_back("column '" + data.col_labels[static_cast<std::size_t>(j)] +
                                    "' has zero variance; centered only");
            }
        }
    }
    return out;
}

/// Draws a p x 2 matrix with orthonormal columns, uniformly distributed over
/// 2-dimensional subspaces (QR of a Gaussian matrix).
inline Matrix random_subspace(Eigen::Index p, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix g(p, 2);
    for (Eigen::Index j = 0; j < 2; ++j) {
        for (Eigen::Index i = 0; i < p; ++i) g(i, j) = normal(rng);
    }
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(p, 2);
    // Fix the sign ambiguity of Householder QR so the basis is a pure function of g.
    Matrix r = qr.matrixQR().topRows(2).triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < 2; ++j) {
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    }
    return q;
}

/// Synthetic data set with ground truth, plus the noise-free generating structure.
struct SyntheticData {
    DataMatrix data;
    Partition truth;
    /// Cluster centres in the ambient space (one row per cluster).
    Matrix centroids;
    /// Orthonormal p x 2 basis of the signal subspace.
    Matrix basis;
    /// Centre coordinates inside the 2-d subspace (one row per cluster).
    Matrix planar_centroids;
};

/// Planar layout of k centres spaced sep apart: an equilateral simplex for k <= 3,
/// an equally spaced line otherwise, centred at the origin.
inline Matrix planar_layout(int k, double sep) {
    Matrix c = Matrix::Zero(k, 2);
    if (k == 3) {
        const double radius = sep / std::sqrt(3.0);
        for (int i = 0; i < 3; ++i) {
            const double angle = std::numbers::pi / 2.0 + 2.0 * std::numbers::pi * i / 3.0;
            c(i, 0) = radius * std::cos(angle);
            c(i, 1) = radius * std::sin(angle);
        }
    } else {
        for (int i = 0; i < k; ++i) c(i, 0) = sep * (i - (k - 1) / 2.0);
    }
    return c;
}

/// k isotropic unit-variance Gaussian clusters of n_per points each, centred on
/// points spaced sep apart inside a random 2-dimensional subspace of R^p.
inline SyntheticData gen_gaussian_mixture(int k, int n_per, int p, double sep, std::uint64_t seed) {
    if (p < 2) throw DimensionError("gaussian mixture needs p >= 2");
    if (k < 2) throw PreconditionError("gaussian mixture needs k >= 2");
    if (n_per < 1) throw PreconditionError("gaussian mixture needs n_per >= 1");
    if (!(sep > 0.0) || !std::isfinite(sep)) {
        throw PreconditionError("gaussian mixture needs sep > 0");
    }
    std::mt19937_64 rng(seed);
    SyntheticData out;
    out.basis = random_subspace(p, rng);
    out.planar_centroids = planar_layout(k, sep);
    out.centroids = out.planar_centroids * out.basis.transpose();

    std::normal_distribution<double> normal(0.0, 1.0);
    const int n = k * n_per;
    Matrix x(n, p);
    std::vector<int> labels;
    labels.reserve(static_cast<std::size_t>(n));
    for (int c = 0; c < k; ++c) {
        for (int i = 0; i < n_per; ++i) {
            const int row = c * n_per + i;
            for (int j = 0; j < p; ++j) x(row, j) = out.centroids(c, j) + normal(rng);
            labels.push_back(c);
        }
    }
    out.data = make_data(std::move(x));
    out.truth = Partition::from_labels(labels);
    return out;
}

/// Two interlocking half circles of unit radius, n_per points each at equally
/// spaced angles, placed in a random 2-d subspace of R^p. Gaussian noise with
/// standard deviation noise_sd is added in the orthogonal complement only.
inline SyntheticData gen_half_moons(int n_per, int p, double noise_sd, std::uint64_t seed) {
    if (p < 2) throw DimensionError("half moons need p >= 2");
    if (n_per < 2) throw PreconditionError("half moons need n_per >= 2");
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) {
        throw PreconditionError("half moons need noise_sd >= 0");
    }
    std::mt19937_64 rng(seed);
    SyntheticData out;
    out.basis = random_subspace(p, rng);
    out.planar_centroids.resize(2, 2);
    out.planar_centroids << 0.0, 0.0, 1.0, 0.5;
    out.centroids = out.planar_centroids * out.basis.transpose();

    const int n = 2 * n_per;
    Matrix planar(n, 2);
    std::vector<int> labels;
    for (int i = 0; i < n_per; ++i) {
        const double angle = std::numbers::pi * i / (n_per - 1);
        planar(i, 0) = std::cos(angle);
        planar(i, 1) = std::sin(angle);
        planar(n_per + i, 0) = 1.0 - std::cos(angle);
        planar(n_per + i, 1) = 0.5 - std::sin(angle);
    }
    for (int i = 0; i < n; ++i) labels.push_back(i < n_per ? 0 : 1);

    Matrix x = planar * out.basis.transpose();
    if (noise_sd > 0.0) {
        std::normal_distribution<double> normal(0.0, noise_sd);
        const Matrix complement =
            Matrix::Identity(p, p) - out.basis * out.basis.transpose();
        Matrix g(n, p);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < p; ++j) g(i, j) = normal(rng);
        }
        x += g * complement;
    }
    out.data = make_data(std::move(x));
    out.truth = Partition::from_labels(labels);
    return out;
}

/// Block-constant matrix for bi-clustering: row_groups x col_groups blocks of
/// size rows_per x cols_per whose means are sep * (r + row_groups * c), centred,
/// plus N(0, noise_sd^2) noise.
struct CheckerboardData {
    DataMatrix data;
    Partition row_truth;
    Partition col_truth;
};

inline CheckerboardData gen_checkerboard(int row_groups, int col_groups, int rows_per, int cols_per,
                                         double sep, double noise_sd, std::uint64_t seed) {
    if (row_groups < 1 || col_groups < 1 || rows_per < 1 || cols_per < 1) {
        throw PreconditionError("checkerboard needs positive group counts and sizes");
    }
    if (!(sep > 0.0) || !(noise_sd >= 0.0)) {
        throw PreconditionError("checkerboard needs sep > 0 and noise_sd >= 0");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int n = row_groups * rows_per;
    const int p = col_groups * cols_per;
    const double centre = (row_groups * col_groups - 1) / 2.0;
    Matrix x(n, p);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) {
            const int r = i / rows_per;
            const int c = j / cols_per;
            x(i, j) = sep * (r + row_groups * c - centre) + noise_sd * normal(rng);
        }
    }
    std::vector<int> rl, cl;
    for (int i = 0; i < n; ++i) rl.push_back(i / rows_per);
    for (int j = 0; j < p; ++j) cl.push_back(j / cols_per);
    CheckerboardData out;
    out.data = make_data(std::move(x));
    out.row_truth = Partition::from_labels(rl);
    out.col_truth = Partition::from_labels(cl);
    return out;
}

}  // namespace cvxclust
