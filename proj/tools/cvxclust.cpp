// cvxclust command-line tool: path computation, exact grids, evaluation,
// t sweeps and synthetic data generation.

#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cvxclust/cvxclust.hpp"

namespace fs = std::filesystem;
using namespace cvxclust;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

std::string fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::uint64_t h = 1469598103934665603ULL;
    char buf[8192];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << h;
    return s.str();
}

// Collects everything that goes into manifest.json.
class Manifest {
public:
    explicit Manifest(std::string command) { j_["command"] = std::move(command); j_["seed"] = nullptr; }

    json& config() { return j_["config"]; }
    json& metrics() { return j_["metrics"]; }
    void seed(std::uint64_t s) { j_["seed"] = s; }
    void input(const std::string& path) { j_["input_hash"][path] = "fnv1a64:" + fnv1a_file(path); }
    void warning(const std::string& w) { j_["warnings"].push_back(w); }

    template <class F>
    auto time(const std::string& phase, F&& f) {
        const auto t0 = std::chrono::steady_clock::now();
        if constexpr (std::is_void_v<decltype(f())>) {
            f();
            j_["timings"][phase] = elapsed(t0);
        } else {
            auto r = f();
            j_["timings"][phase] = elapsed(t0);
            return r;
        }
    }

    std::string output(const fs::path& dir, const std::string& name) {
        j_["outputs"].push_back(name);
        return (dir / name).string();
    }

    void save(const fs::path& dir) {
        j_["outputs"].push_back("manifest.json");
        save_json((dir / "manifest.json").string(), j_);
    }

private:
    static double elapsed(std::chrono::steady_clock::time_point t0) {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    json j_;
};

fs::path resolve_out_dir(const std::string& flag) {
    fs::path dir = ".";
    if (!flag.empty()) {
        dir = flag;
    } else if (const char* env = std::getenv("CVXCLUST_OUT_DIR"); env && *env) {
        dir = env;
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ParseError("cannot create output directory '" + dir.string() + "': " + ec.message());
    return dir;
}

struct InputOpts {
    std::string path;
    bool no_header = false;
    bool no_rownames = false;
    bool standardize = false;

    void add(CLI::App* app) {
        app->add_option("input", path, "Input CSV (observations in rows)")->required();
        app->add_flag("--no-header", no_header, "Input has no header line");
        app->add_flag("--no-rownames", no_rownames, "Input has no row-name column");
        app->add_flag("--standardize", standardize, "Center and scale columns before clustering");
    }

    DataMatrix load(Manifest& m) const {
        m.input(path);
        DataMatrix d = load_csv(path, !no_header, !no_rownames);
        if (standardize) {
            std::vector<std::string> warnings;
            d = standardize_data(d, warnings);
            for (const auto& w : warnings) {
                std::cerr << "warning: " << w << '\n';
                m.warning(w);
            }
        }
        m.config()["input"] = path;
        m.config()["standardize"] = standardize;
        return d;
    }

    static DataMatrix standardize_data(const DataMatrix& d, std::vector<std::string>& warnings) {
        return cvxclust::standardize(d, &warnings);
    }
};

struct GraphOpts {
    int k_neighbors = 0;
    std::optional<double> phi;
    std::optional<double> rho;
    std::string norm = "l2";

    void add(CLI::App* app) {
        app->add_option("--k-neighbors", k_neighbors, "Nearest neighbours per row (0: max(3, ceil(log2 n)))");
        app->add_option("--phi", phi, "Gaussian kernel scale (default 1 / median squared distance)");
        app->add_option("--rho", rho, "ADMM relaxation parameter");
        app->add_option("--norm", norm, "Fusion norm: l1, l2 or linf");
    }

    WeightGraph build(const Matrix& x, Manifest& m, const std::string& key = "graph") const {
        const int k = k_neighbors > 0 ? k_neighbors : default_k_neighbors(static_cast<int>(x.rows()));
        if (k_neighbors < 0) throw PreconditionError("--k-neighbors must be >= 0");
        WeightGraph g = build_weights(x, k, phi, rho.value_or(1.0));
        m.config()[key] = {{"k_neighbors", k}, {"phi", phi ? json(*phi) : json("auto")}, {"edges", g.num_edges()}};
        return g;
    }

    PenaltySpec spec(const WeightGraph& g, Manifest& m) const {
        PenaltySpec s = PenaltySpec::from_graph(g);
        s.q = parse_norm(norm);
        m.config()["norm"] = to_string(s.q);
        return s;
    }
};

struct PathOpts {
    std::optional<double> t;
    std::optional<double> eps;
    int max_backtrack = 10;
    long keep_every = 1;
    bool no_settle = false;

    void add(CLI::App* app) {
        app->add_option("--t", t, "Multiplicative step (default 1.05, or 1.01 with --viz and for bicluster)");
        app->add_option("--eps", eps, "Initial regularization level (default chosen from the data)");
        app->add_option("--max-backtrack", max_backtrack, "Back-tracking depth limit");
        app->add_option("--keep-every", keep_every, "Store every s-th iterate");
        app->add_flag("--no-settle", no_settle, "Stop at full fusion instead of settling U onto the grand mean");
    }

    PathConfig config(bool fine, const std::optional<double>& rho, Manifest& m) const {
        PathConfig c = fine ? PathConfig::fine() : PathConfig{};
        if (t) c.t = *t;
        c.epsilon = eps;
        c.rho = rho;
        c.max_backtrack = max_backtrack;
        c.keep_every = keep_every;
        if (no_settle) c.settle_tol = 0.0;
        c.validate();
        m.config()["t"] = c.t;
        m.config()["eps"] = eps ? json(*eps) : json("auto");
        m.config()["max_backtrack"] = c.max_backtrack;
        m.config()["keep_every"] = c.keep_every;
        m.config()["settle_tol"] = c.settle_tol;
        return c;
    }
};

void write_tree_outputs(const fs::path& dir, Manifest& m, const std::string& prefix, const CarpPath& path,
                        const Dendrogram& d, const std::vector<std::string>& labels) {
    save_text(m.output(dir, prefix + "events.csv"), [&](std::ostream& o) { write_events_csv(o, path.events); });
    save_text(m.output(dir, prefix + "merges.csv"), [&](std::ostream& o) { write_merge_table(o, d); });
    save_text(m.output(dir, prefix + "dendrogram.nwk"), [&](std::ostream& o) { o << to_newick(d, labels) << '\n'; });
}

json path_metrics(const CarpPath& p, const Dendrogram& d) {
    return {{"n", p.n},
            {"steps", p.steps()},
            {"epsilon", p.epsilon},
            {"fusion_gamma", p.fusion_gamma()},
            {"fuse_events", p.fuse_count()},
            {"unfuse_events", p.unfuse_count()},
            {"backtracks", p.backtracks},
            {"recovery", dendrogram_recovery(p)},
            {"height_scale", to_string(d.height_scale)}};
}

void add_truth_metrics(json& out, const Partition& truth, const Partition& pred) {
    out["k"] = truth.k;
    out["rand"] = rand_index(pred, truth);
    out["adjusted_rand"] = adjusted_rand(pred, truth);
    out["jaccard"] = jaccard(pred, truth);
}

// ---- cluster --------------------------------------------------------------

struct ClusterCmd {
    InputOpts in;
    GraphOpts graph;
    PathOpts path;
    bool viz = false;
    bool iterates = false;
    std::string truth;
    std::string out_dir;

    void add(CLI::App* app) {
        in.add(app);
        graph.add(app);
        path.add(app);
        app->add_flag("--viz", viz, "Back-tracking path that isolates single fusions");
        app->add_flag("--iterates", iterates, "Include stored U iterates in path.json");
        app->add_option("--truth", truth, "Ground-truth partition CSV; adds agreement indices at its k");
        app->add_option("--out-dir", out_dir, "Output directory (default $CVXCLUST_OUT_DIR or .)");
    }

    int run() {
        Manifest m(viz ? "cluster --viz" : "cluster");
        const fs::path dir = resolve_out_dir(out_dir);
        const PathConfig cfg = path.config(viz, graph.rho, m);
        const DataMatrix data = in.load(m);
        const WeightGraph g = m.time("weights", [&] { return graph.build(data.values, m); });
        const PenaltySpec spec = graph.spec(g, m);
        m.config()["viz"] = viz;
        m.config()["rho"] = cfg.path_rho(g, viz);
        CarpPath p = m.time("path", [&] {
            return viz ? carp_viz_path(data.values, g, spec, cfg) : carp_path(data.values, g, spec, cfg);
        });
        p = postprocess_events(std::move(p));
        const Dendrogram d = m.time("dendrogram", [&] { return build_dendrogram(p.events, p.n); });
        m.metrics() = path_metrics(p, d);
        if (!truth.empty()) {
            m.input(truth);
            const Partition t = load_partition(truth);
            if (static_cast<Eigen::Index>(t.size()) != data.rows()) throw LengthError("truth length does not match data rows");
            add_truth_metrics(m.metrics(), t, d.cut(t.k));
        }
        m.time("write", [&] {
            save_json(m.output(dir, "path.json"), path_to_json(p, iterates));
            write_tree_outputs(dir, m, "", p, d, data.row_labels);
        });
        m.save(dir);
        std::cout << "recovery " << m.metrics()["recovery"].get<double>() << ", " << p.steps() << " steps, outputs in "
                  << dir.string() << '\n';
        return 0;
    }
};

// ---- bicluster ------------------------------------------------------------

struct BiclusterCmd {
    InputOpts in;
    GraphOpts graph;
    PathOpts path;
    int col_k_neighbors = -1;
    std::optional<double> col_phi;
    bool viz = false;
    std::string row_truth, col_truth;
    std::string out_dir;

    void add(CLI::App* app) {
        in.add(app);
        graph.add(app);
        path.add(app);
        app->add_option("--col-k-neighbors", col_k_neighbors, "Nearest neighbours per column (default as rows)");
        app->add_option("--col-phi", col_phi, "Kernel scale for the column graph");
        app->add_flag("--viz", viz, "Back-tracking over row and column fusions");
        app->add_option("--row-truth", row_truth, "Ground-truth row partition CSV");
        app->add_option("--col-truth", col_truth, "Ground-truth column partition CSV");
        app->add_option("--out-dir", out_dir, "Output directory (default $CVXCLUST_OUT_DIR or .)");
    }

    int run() {
        Manifest m(viz ? "bicluster --viz" : "bicluster");
        const fs::path dir = resolve_out_dir(out_dir);
        if (col_k_neighbors == 0) {
            throw ConnectivityError("column graph must be connected; --col-k-neighbors must be at least 1");
        }
        const PathConfig cfg = path.config(true, graph.rho, m);
        const DataMatrix data = in.load(m);
        const Matrix xt = data.values.transpose();
        const WeightGraph rg = m.time("weights", [&] { return graph.build(data.values, m, "row_graph"); });
        GraphOpts cols = graph;
        cols.k_neighbors = col_k_neighbors > 0 ? col_k_neighbors : graph.k_neighbors;
        if (col_phi) cols.phi = col_phi;
        const WeightGraph cg = m.time("col_weights", [&] { return cols.build(xt, m, "col_graph"); });
        const PenaltySpec rs = graph.spec(rg, m);
        PenaltySpec cs = PenaltySpec::from_graph(cg);
        cs.q = rs.q;
        m.config()["viz"] = viz;
        m.config()["rho"] = cfg.path_rho(rg, viz);
        BiClusterPath b = m.time("path", [&] {
            return viz ? cbass_viz_path(data.values, rg, cg, rs, cs, cfg) : cbass_path(data.values, rg, cg, rs, cs, cfg);
        });
        b.rows = postprocess_events(std::move(b.rows));
        b.cols = postprocess_events(std::move(b.cols));
        const Dendrogram dr = build_dendrogram(b.rows.events, b.rows.n);
        const Dendrogram dc = build_dendrogram(b.cols.events, b.cols.n);
        m.metrics()["rows"] = path_metrics(b.rows, dr);
        m.metrics()["cols"] = path_metrics(b.cols, dc);
        for (auto [file, d, key] : {std::tuple{&row_truth, &dr, "rows"}, std::tuple{&col_truth, &dc, "cols"}}) {
            if (file->empty()) continue;
            m.input(*file);
            const Partition t = load_partition(*file);
            if (static_cast<int>(t.size()) != d->n_leaves) throw LengthError(std::string(key) + " truth length does not match data");
            add_truth_metrics(m.metrics()[key], t, d->cut(t.k));
        }
        m.time("write", [&] {
            save_json(m.output(dir, "bipath.json"), bipath_to_json(b));
            write_tree_outputs(dir, m, "row_", b.rows, dr, data.row_labels);
            write_tree_outputs(dir, m, "col_", b.cols, dc, data.col_labels);
            // Data reordered by both dendrograms, ready for a cluster heatmap.
            const auto ro = leaf_order(dr);
            const auto co = leaf_order(dc);
            DataMatrix ordered;
            ordered.values.resize(data.rows(), data.cols());
            for (std::size_t i = 0; i < ro.size(); ++i) {
                ordered.row_labels.push_back(data.row_labels[static_cast<std::size_t>(ro[i])]);
                for (std::size_t j = 0; j < co.size(); ++j) {
                    ordered.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data.values(ro[i], co[j]);
                }
            }
            for (int c : co) ordered.col_labels.push_back(data.col_labels[static_cast<std::size_t>(c)]);
            save_csv(m.output(dir, "ordered.csv"), ordered);
        });
        m.save(dir);
        std::cout << "row recovery " << dendrogram_recovery(b.rows) << ", column recovery "
                  << dendrogram_recovery(b.cols) << ", outputs in " << dir.string() << '\n';
        return 0;
    }
};

// ---- exact ----------------------------------------------------------------

struct ExactCmd {
    InputOpts in;
    GraphOpts graph;
    int grid_points = 100;
    std::optional<double> t;
    std::optional<double> eps;
    std::string solver = "admm";
    double tol = 1e-7;
    long max_iter = 100000;
    std::string out_dir;

    void add(CLI::App* app) {
        in.add(app);
        graph.add(app);
        app->add_option("--grid-points", grid_points, "Log-spaced lambda values from eps to the fusion level");
        app->add_option("--t", t, "Use lambda_l = eps * t^l until full fusion instead of a fixed grid");
        app->add_option("--eps", eps, "Smallest lambda (default chosen from the data)");
        app->add_option("--solver", solver, "admm or ama")->check(CLI::IsMember({"admm", "ama"}));
        app->add_option("--tol", tol, "Relative change tolerance");
        app->add_option("--max-iter", max_iter, "Iteration cap per lambda");
        app->add_option("--out-dir", out_dir, "Output directory (default $CVXCLUST_OUT_DIR or .)");
    }

    int run() {
        Manifest m("exact");
        const fs::path dir = resolve_out_dir(out_dir);
        if (grid_points < 2) throw PreconditionError("--grid-points must be at least 2");
        if (t && !(*t > 1.0)) throw PreconditionError("t must exceed 1");
        const DataMatrix data = in.load(m);
        const WeightGraph g = m.time("weights", [&] { return graph.build(data.values, m); });
        const PenaltySpec spec = graph.spec(g, m);
        const SolveOptions opts{tol, max_iter};
        const double lo = eps ? *eps : default_epsilon(data.values, g);
        m.config()["solver"] = solver;
        m.config()["tol"] = tol;
        m.config()["eps"] = lo;
        GridPathResult grid;
        if (t) {
            if (solver != "admm") throw PreconditionError("--t grids are solved with admm only");
            m.config()["t"] = *t;
            grid = m.time("solve", [&] { return admm_grid_path(data.values, g, spec, lo, *t, opts); });
        } else {
            // A coarse one-step path locates full fusion; the exact solution may
            // need a larger lambda to fuse completely.
            PathConfig probe;
            probe.t = 1.2;
            probe.epsilon = lo;
            probe.keep_iterates = false;
            probe.settle_tol = 0.0;
            const double hi = m.time("probe", [&] {
                return exact_fusion_level(data.values, g, spec, carp_path(data.values, g, spec, probe).fusion_gamma(), opts);
            });
            m.config()["grid_points"] = grid_points;
            m.config()["lambda_max"] = hi;
            const auto lambdas = geometric_grid(lo, hi, grid_points);
            grid = m.time("solve", [&] {
                return exact_grid(data.values, g, spec, lambdas, opts,
                                  solver == "admm" ? ExactSolver::Admm : ExactSolver::Ama);
            });
        }
        const long unconverged = std::count(grid.converged.begin(), grid.converged.end(), false);
        if (unconverged) {
            const std::string w = std::to_string(unconverged) + " lambda values hit the iteration cap";
            std::cerr << "warning: " << w << '\n';
            m.warning(w);
        }
        m.metrics() = {{"points", grid.lambdas.size()},
                       {"recovery", dendrogram_recovery(grid, static_cast<int>(data.rows()))},
                       {"unconverged", unconverged},
                       {"total_iterations", std::accumulate(grid.iterations.begin(), grid.iterations.end(), 0L)}};
        m.time("write", [&] {
            save_json(m.output(dir, "grid.json"), grid_to_json(grid));
            save_text(m.output(dir, "grid.csv"), [&](std::ostream& o) { write_grid_csv(o, grid); });
        });
        m.save(dir);
        std::cout << grid.lambdas.size() << " grid points, recovery " << m.metrics()["recovery"].get<double>()
                  << ", outputs in " << dir.string() << '\n';
        return 0;
    }
};

// ---- evaluate -------------------------------------------------------------

struct EvaluateCmd {
    std::string truth;
    std::string pred;
    std::string path;
    int k = 0;
    std::string reference;
    std::string data_file;
    InputOpts in;
    GraphOpts graph;
    std::string out_dir;

    void add(CLI::App* app) {
        app->add_option("--truth", truth, "Ground-truth partition CSV");
        app->add_option("--pred", pred, "Predicted partition CSV");
        app->add_option("--path", path, "path.json written by cluster");
        app->add_option("--k", k, "Cut the path dendrogram at k clusters (default: truth k)");
        app->add_option("--reference", reference, "Reference path.json for the Hausdorff distance");
        app->add_option("--data", data_file, "Data CSV used to build the graph for the Hausdorff normalizer");
        app->add_flag("--no-header", in.no_header, "Data has no header line");
        app->add_flag("--no-rownames", in.no_rownames, "Data has no row-name column");
        graph.add(app);
        app->add_option("--out-dir", out_dir, "Output directory (default $CVXCLUST_OUT_DIR or .)");
    }

    int run() {
        Manifest m("evaluate");
        const fs::path dir = resolve_out_dir(out_dir);
        json& out = m.metrics();
        out = json::object();
        std::optional<CarpPath> p;
        if (!path.empty()) {
            m.input(path);
            p = path_from_json(load_json(path));
            const Dendrogram d = build_dendrogram(p->events, p->n);
            out["recovery"] = dendrogram_recovery(*p);
            out["steps"] = p->steps();
            if (!truth.empty() || k > 0) {
                Partition t;
                if (!truth.empty()) {
                    m.input(truth);
                    t = load_partition(truth);
                }
                const int cut_k = k > 0 ? k : t.k;
                const Partition cut = d.cut(cut_k);
                out["cut_k"] = cut_k;
                out["assignment"] = cut.assignment;
                if (!truth.empty()) add_truth_metrics(out, t, cut);
            }
        } else if (!pred.empty() && !truth.empty()) {
            m.input(pred);
            m.input(truth);
            add_truth_metrics(out, load_partition(truth), load_partition(pred));
        } else if (reference.empty()) {
            throw PreconditionError("evaluate needs --path, --pred with --truth, or --reference");
        }
        if (!reference.empty()) {
            if (!p) throw PreconditionError("--reference needs --path");
            if (data_file.empty()) throw PreconditionError("--reference needs --data");
            in.path = data_file;
            const DataMatrix data = in.load(m);
            const WeightGraph g = graph.build(data.values, m);
            m.input(reference);
            const CarpPath ref = path_from_json(load_json(reference));
            if (p->iterates.empty() || ref.iterates.empty()) {
                throw PreconditionError("Hausdorff distance needs paths written with --iterates");
            }
            out["hausdorff"] = report_to_json(
                m.time("hausdorff", [&] { return normalized_hausdorff(p->iterates, ref.iterates, data.values, g); }));
        }
        save_json(m.output(dir, "evaluation.json"), out);
        m.save(dir);
        std::cout << out.dump(1) << '\n';
        return 0;
    }
};

// ---- sweep ----------------------------------------------------------------

struct SweepCmd {
    InputOpts in;
    GraphOpts graph;
    std::vector<double> t_list{1.1, 1.05, 1.01, 1.005};
    double reference_t = 1.0005;
    std::optional<double> eps;
    std::string out_dir;

    void add(CLI::App* app) {
        in.add(app);
        graph.add(app);
        app->add_option("--t-list", t_list, "Step sizes to compare")->delimiter(',');
        app->add_option("--reference-t", reference_t, "Step size of the reference path");
        app->add_option("--eps", eps, "Initial regularization level (default chosen from the data)");
        app->add_option("--out-dir", out_dir, "Output directory (default $CVXCLUST_OUT_DIR or .)");
    }

    int run() {
        Manifest m("sweep");
        const fs::path dir = resolve_out_dir(out_dir);
        if (t_list.empty()) throw PreconditionError("--t-list is empty");
        for (double t : t_list) {
            if (!(t > 1.0)) throw PreconditionError("t must exceed 1");
        }
        if (!(reference_t > 1.0)) throw PreconditionError("t must exceed 1");
        const DataMatrix data = in.load(m);
        const WeightGraph g = m.time("weights", [&] { return graph.build(data.values, m); });
        const PenaltySpec spec = graph.spec(g, m);
        m.config()["t_list"] = t_list;
        m.config()["reference_t"] = reference_t;
        PathConfig base;
        base.epsilon = eps ? *eps : default_epsilon(data.values, g);
        m.config()["eps"] = *base.epsilon;
        auto run_t = [&](double t) {
            PathConfig c = base;
            c.t = t;
            return carp_path(data.values, g, spec, c);
        };
        const CarpPath ref = m.time("reference", [&] { return run_t(reference_t); });
        json rows = json::array();
        std::ostringstream csv;
        csv << "t,d_hausdorff,d_sup_lambda,d_sup_k,recovery,steps,seconds\n" << std::setprecision(17);
        for (double t : t_list) {
            const auto t0 = std::chrono::steady_clock::now();
            const CarpPath p = run_t(t);
            const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            const auto r = normalized_hausdorff(p.iterates, ref.iterates, data.values, g);
            const double rec = dendrogram_recovery(p);
            csv << t << ',' << r.d_hausdorff << ',' << r.d_sup_lambda << ',' << r.d_sup_k << ',' << rec << ','
                << p.steps() << ',' << sec << '\n';
            rows.push_back({{"t", t}, {"hausdorff", report_to_json(r)}, {"recovery", rec}, {"steps", p.steps()}});
        }
        m.metrics()["rows"] = rows;
        save_text(m.output(dir, "sweep.csv"), [&](std::ostream& o) { o << csv.str(); });
        m.save(dir);
        std::cout << csv.str();
        return 0;
    }
};

// ---- generate -------------------------------------------------------------

struct GenerateCmd {
    std::string kind;
    int k = 3;
    int n_per = 18;
    int p = 2;
    double sep = 10.0;
    double noise = 0.0;
    int row_groups = 4;
    int col_groups = 2;
    int rows_per = 5;
    int cols_per = 5;
    std::uint64_t seed = 1;
    std::string name;
    std::string out_dir;

    void add(CLI::App* app) {
        app->add_option("kind", kind, "gmm, moons or checkerboard")
            ->required()
            ->check(CLI::IsMember({"gmm", "moons", "checkerboard"}));
        app->add_option("--k", k, "Clusters (gmm)");
        app->add_option("--n-per", n_per, "Rows per cluster (gmm, moons)");
        app->add_option("--p", p, "Features (gmm, moons)");
        app->add_option("--sep", sep, "Centre spacing (gmm, checkerboard)");
        app->add_option("--noise", noise, "Noise sd (moons, checkerboard)");
        app->add_option("--row-groups", row_groups, "Row groups (checkerboard)");
        app->add_option("--col-groups", col_groups, "Column groups (checkerboard)");
        app->add_option("--rows-per", rows_per, "Rows per group (checkerboard)");
        app->add_option("--cols-per", cols_per, "Columns per group (checkerboard)");
        app->add_option("--seed", seed, "Random seed");
        app->add_option("--name", name, "File name stem (default: kind)");
        app->add_option("--out-dir", out_dir, "Output directory (default $CVXCLUST_OUT_DIR or .)");
    }

    int run() {
        Manifest m("generate " + kind);
        const fs::path dir = resolve_out_dir(out_dir);
        const std::string stem = name.empty() ? kind : name;
        m.seed(seed);
        json& c = m.config();
        if (kind == "checkerboard") {
            c = {{"row_groups", row_groups}, {"col_groups", col_groups}, {"rows_per", rows_per},
                 {"cols_per", cols_per},     {"sep", sep},               {"noise", noise}};
            const auto cb = gen_checkerboard(row_groups, col_groups, rows_per, cols_per, sep, noise, seed);
            save_csv(m.output(dir, stem + ".csv"), cb.data);
            save_partition(m.output(dir, stem + "_row_truth.csv"), cb.row_truth, cb.data.row_labels);
            save_partition(m.output(dir, stem + "_col_truth.csv"), cb.col_truth, cb.data.col_labels);
        } else {
            SyntheticData s;
            if (kind == "gmm") {
                c = {{"k", k}, {"n_per", n_per}, {"p", p}, {"sep", sep}};
                s = gen_gaussian_mixture(k, n_per, p, sep, seed);
            } else {
                c = {{"n_per", n_per}, {"p", p}, {"noise", noise}};
                s = gen_half_moons(n_per, p, noise, seed);
            }
            save_csv(m.output(dir, stem + ".csv"), s.data);
            save_partition(m.output(dir, stem + "_truth.csv"), s.truth, s.data.row_labels);
        }
        m.save(dir);
        std::cout << "wrote " << (dir / (stem + ".csv")).string() << '\n';
        return 0;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Convex clustering paths, exact solutions and dendrograms"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "cvxclust 1.0.0");

    ClusterCmd cluster;
    BiclusterCmd bicluster;
    ExactCmd exact;
    EvaluateCmd evaluate;
    SweepCmd sweep;
    GenerateCmd generate;
    cluster.add(app.add_subcommand("cluster", "One-step regularization path and dendrogram"));
    bicluster.add(app.add_subcommand("bicluster", "Row and column paths for convex bi-clustering"));
    exact.add(app.add_subcommand("exact", "Exact solutions on a lambda grid"));
    evaluate.add(app.add_subcommand("evaluate", "Partition agreement, recovery and path distance"));
    sweep.add(app.add_subcommand("sweep", "Compare paths over several step sizes"));
    generate.add(app.add_subcommand("generate", "Write a synthetic data set with ground truth"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (app.got_subcommand("cluster")) return cluster.run();
        if (app.got_subcommand("bicluster")) return bicluster.run();
        if (app.got_subcommand("exact")) return exact.run();
        if (app.got_subcommand("evaluate")) return evaluate.run();
        if (app.got_subcommand("sweep")) return sweep.run();
        if (app.got_subcommand("generate")) return generate.run();
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
