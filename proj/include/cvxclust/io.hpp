#pragma once

// JSON and CSV serialization of paths, grids and reports.

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "carp.hpp"
#include "cbass.hpp"
#include "dataio.hpp"
#include "dendrogram.hpp"
#include "errors.hpp"
#include "exact_solvers.hpp"
#include "metrics.hpp"

namespace cvxclust {

using json = nlohmann::json;

// Doubles are written by nlohmann's shortest round-trip formatter, so parsing a
// written file gives back the same bits.

inline json matrix_to_json(const Matrix& m) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

inline Matrix matrix_from_json(const json& j) {
    try {
        const auto rows = j.at("rows").get<Eigen::Index>();
        const auto cols = j.at("cols").get<Eigen::Index>();
        const auto flat = j.at("data").get<std::vector<double>>();
        if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(flat.size()) != rows * cols) {
            throw ParseError("matrix json: data length does not match rows * cols");
        }
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i) {
            for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = flat[static_cast<std::size_t>(i * cols + k)];
        }
        return m;
    } catch (const json::exception& e) {
        throw ParseError(std::string("matrix json: ") + e.what());
    }
}

inline json event_to_json(const FusionEvent& e) {
    return {{"edge", e.edge},   {"from", e.from},   {"to", e.to},
            {"gamma", e.gamma}, {"k", e.k},         {"kind", to_string(e.kind)},
            {"score", e.score}, {"trigger_edge", e.trigger_edge}, {"backtrack_exhausted", e.backtrack_exhausted}};
}

inline FusionEvent event_from_json(const json& j) {
    FusionEvent e;
    e.edge = j.at("edge").get<int>();
    e.from = j.at("from").get<int>();
    e.to = j.at("to").get<int>();
    e.gamma = j.at("gamma").get<double>();
    e.k = j.value("k", 0L);
    const auto kind = j.at("kind").get<std::string>();
    if (kind != "fuse" && kind != "unfuse") throw ParseError("unknown event kind '" + kind + "'");
    e.kind = kind == "fuse" ? EventKind::Fuse : EventKind::Unfuse;
    e.score = j.value("score", 0.0);
    e.trigger_edge = j.value("trigger_edge", e.edge);
    e.backtrack_exhausted = j.value("backtrack_exhausted", false);
    return e;
}

inline json path_to_json(const CarpPath& p, bool with_iterates = true) {
    json j;
    j["n"] = p.n;
    j["epsilon"] = p.epsilon;
    j["gammas"] = p.gammas;
    j["clusters_per_k"] = p.clusters_per_k;
    j["backtracks"] = p.backtracks;
    j["events"] = json::array();
    for (const auto& e : p.events) j["events"].push_back(event_to_json(e));
    if (with_iterates) {
        j["stored_k"] = p.stored_k;
        j["iterates"] = json::array();
        for (const auto& u : p.iterates) j["iterates"].push_back(matrix_to_json(u));
    }
    if (p.final_U.size()) j["final_U"] = matrix_to_json(p.final_U);
    return j;
}

/// Reads what path_to_json writes. Zero masks are not serialized and come back empty.
inline CarpPath path_from_json(const json& j) {
    try {
        CarpPath p;
        p.n = j.at("n").get<int>();
        p.epsilon = j.value("epsilon", 0.0);
        p.gammas = j.at("gammas").get<std::vector<double>>();
        p.clusters_per_k = j.at("clusters_per_k").get<std::vector<int>>();
        p.backtracks = j.value("backtracks", 0L);
        for (const auto& e : j.at("events")) p.events.push_back(event_from_json(e));
        if (j.contains("iterates")) {
            p.stored_k = j.at("stored_k").get<std::vector<long>>();
            for (const auto& u : j.at("iterates")) p.iterates.push_back(matrix_from_json(u));
            if (p.stored_k.size() != p.iterates.size()) throw ParseError("path json: stored_k and iterates differ in length");
        }
        if (j.contains("final_U")) p.final_U = matrix_from_json(j.at("final_U"));
        return p;
    } catch (const json::exception& e) {
        throw ParseError(std::string("path json: ") + e.what());
    }
}

inline json bipath_to_json(const BiClusterPath& p, bool with_iterates = false) {
    return {{"rows", path_to_json(p.rows, with_iterates)},
            {"cols", path_to_json(p.cols, with_iterates)},
            {"final_U", matrix_to_json(p.final_U)},
            {"backtracks", p.backtracks}};
}

inline json grid_to_json(const GridPathResult& g) {
    json j;
    j["lambdas"] = g.lambdas;
    j["iterations"] = g.iterations;
    j["residuals"] = g.residuals;
    j["converged"] = g.converged;
    j["cluster_counts"] = g.cluster_counts;
    if (!g.col_cluster_counts.empty()) j["col_cluster_counts"] = g.col_cluster_counts;
    j["clusters"] = g.clusters;
    j["solutions"] = json::array();
    for (const auto& u : g.solutions) j["solutions"].push_back(matrix_to_json(u));
    return j;
}

inline json report_to_json(const PathDistanceReport& r) {
    return {{"d_sup_lambda", r.d_sup_lambda},
            {"d_sup_k", r.d_sup_k},
            {"d_hausdorff", r.d_hausdorff},
            {"normalizer", r.normalizer}};
}

inline json dendrogram_to_json(const Dendrogram& d) {
    json j;
    j["n_leaves"] = d.n_leaves;
    j["height_scale"] = to_string(d.height_scale);
    j["merges"] = json::array();
    for (const auto& m : d.merges) {
        j["merges"].push_back({{"left", m.left},
                               {"right", m.right},
                               {"height", m.height},
                               {"raw_gamma", m.raw_gamma},
                               {"first_gamma", m.first_gamma}});
    }
    return j;
}

inline void write_events_csv(std::ostream& out, const std::vector<FusionEvent>& events) {
    out << "k,gamma,kind,edge,from,to,trigger_edge,score,backtrack_exhausted\n" << std::setprecision(17);
    for (const auto& e : events) {
        out << e.k << ',' << e.gamma << ',' << to_string(e.kind) << ',' << e.edge << ',' << e.from << ',' << e.to
            << ',' << e.trigger_edge << ',' << e.score << ',' << (e.backtrack_exhausted ? 1 : 0) << '\n';
    }
}

/// One row per lambda: lambda, iterations, converged, residual, clusters.
inline void write_grid_csv(std::ostream& out, const GridPathResult& g) {
    out << "lambda,iterations,converged,residual,clusters";
    if (!g.col_cluster_counts.empty()) out << ",col_clusters";
    out << '\n' << std::setprecision(17);
    for (std::size_t i = 0; i < g.lambdas.size(); ++i) {
        out << g.lambdas[i] << ',' << g.iterations[i] << ',' << (g.converged[i] ? 1 : 0) << ',' << g.residuals[i]
            << ',' << g.cluster_counts[i];
        if (!g.col_cluster_counts.empty()) out << ',' << g.col_cluster_counts[i];
        out << '\n';
    }
}

inline void save_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write '" + path + "'");
    out << j.dump(1) << '\n';
}

inline json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("'" + path + "': " + e.what());
    }
}

template <class Writer>
void save_text(const std::string& path, Writer&& write) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write '" + path + "'");
    write(out);
    if (!out) throw ParseError("write to '" + path + "' failed");
}

}  // namespace cvxclust
