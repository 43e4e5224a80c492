#include <gtest/gtest.h>

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cvxclust/cvxclust.hpp"

using namespace cvxclust;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string err;
};

std::string data(const std::string& name) { return std::string(CVXCLUST_DATA_DIR) + "/" + name; }

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("cvxclust_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Run run(const std::string& args, const fs::path& dir) {
    const fs::path err = dir / "stderr.txt";
    const std::string cmd = std::string("\"") + CVXCLUST_EXE + "\" " + args + " > \"" + (dir / "stdout.txt").string() +
                            "\" 2> \"" + err.string() + "\"";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err);
    return r;
}

json manifest(const fs::path& dir) { return load_json((dir / "manifest.json").string()); }

}  // namespace

TEST(Cli, ClusterWritesAllOutputs) {
    const auto dir = fresh_dir("cluster");
    const auto r = run("cluster " + data("gmm54.csv") + " --truth " + data("gmm54_truth.csv") + " --out-dir " +
                           dir.string(),
                       dir);
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* f : {"path.json", "events.csv", "merges.csv", "dendrogram.nwk", "manifest.json"}) {
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    }
    const auto m = manifest(dir);
    EXPECT_EQ(m["command"], "cluster");
    EXPECT_EQ(m["metrics"]["n"], 54);
    EXPECT_GT(m["metrics"]["recovery"].get<double>(), 0.0);
    EXPECT_EQ(m["metrics"]["k"], 3);
    EXPECT_TRUE(m["input_hash"].is_object());
    const auto tree = parse_newick(slurp(dir / "dendrogram.nwk"));
    std::size_t leaves = 0;
    for (const auto& node : tree.nodes) leaves += node.children.empty();
    EXPECT_EQ(leaves, 54u);
    const std::string merges = slurp(dir / "merges.csv");
    EXPECT_EQ(std::count(merges.begin(), merges.end(), '\n'), 54);
    const auto p = path_from_json(load_json((dir / "path.json").string()));
    EXPECT_EQ(build_dendrogram(p.events, p.n).merges.size(), 53u);
}

TEST(Cli, VizRecoversEveryLevel) {
    const auto dir = fresh_dir("viz");
    const auto r = run("cluster " + data("gmm20.csv") + " --viz --out-dir " + dir.string(), dir);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto m = manifest(dir);
    EXPECT_EQ(m["command"], "cluster --viz");
    EXPECT_DOUBLE_EQ(m["metrics"]["recovery"].get<double>(), 1.0);
}

TEST(Cli, NoSettleStopsAtFullFusion) {
    const auto dir = fresh_dir("no_settle");
    ASSERT_EQ(run("cluster " + data("gmm20.csv") + " --no-settle --out-dir " + dir.string(), dir).code, 0);
    const auto m = manifest(dir);
    EXPECT_EQ(m["config"]["settle_tol"], 0.0);
    const auto p = path_from_json(load_json((dir / "path.json").string()));
    EXPECT_EQ(p.clusters_per_k.back(), 1);
    EXPECT_LT(p.gammas.back(), 2.0 * p.fusion_gamma());
}

TEST(Cli, BadStepIsAnInputError) {
    const auto dir = fresh_dir("bad_t");
    const auto r = run("cluster " + data("gmm20.csv") + " --t 0.9 --out-dir " + dir.string(), dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("t must exceed 1"), std::string::npos) << r.err;
}

TEST(Cli, MissingInputIsAnInputError) {
    const auto dir = fresh_dir("missing");
    EXPECT_EQ(run("cluster " + data("nope.csv") + " --out-dir " + dir.string(), dir).code, 2);
    EXPECT_EQ(run("frobnicate", dir).code, 2);
}

TEST(Cli, Bicluster) {
    const auto dir = fresh_dir("bicluster");
    const auto r = run("bicluster " + data("checkerboard.csv") + " --row-truth " + data("checkerboard_row_truth.csv") +
                           " --col-truth " + data("checkerboard_col_truth.csv") + " --out-dir " + dir.string(),
                       dir);
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* f : {"bipath.json", "row_dendrogram.nwk", "col_dendrogram.nwk", "ordered.csv"}) {
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    }
    const auto m = manifest(dir);
    EXPECT_DOUBLE_EQ(m["metrics"]["rows"]["adjusted_rand"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(m["metrics"]["cols"]["adjusted_rand"].get<double>(), 1.0);
    const auto ordered = load_csv((dir / "ordered.csv").string(), true, true);
    const auto original = load_csv(data("checkerboard.csv"), true, true);
    EXPECT_EQ(ordered.rows(), original.rows());
    EXPECT_NEAR(ordered.values.sum(), original.values.sum(), 1e-9);
}

TEST(Cli, BiclusterRejectsEmptyColumnGraph) {
    const auto dir = fresh_dir("bicluster_bad");
    const auto r = run("bicluster " + data("checkerboard.csv") + " --col-k-neighbors 0 --out-dir " + dir.string(), dir);
    EXPECT_EQ(r.code, 2) << r.err;
}

TEST(Cli, ExactGrid) {
    const auto dir = fresh_dir("exact");
    const auto r = run("exact " + data("gmm20.csv") + " --grid-points 20 --out-dir " + dir.string(), dir);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto m = manifest(dir);
    EXPECT_EQ(m["metrics"]["points"], 20);
    EXPECT_EQ(m["metrics"]["unconverged"], 0);
    const std::string csv = slurp(dir / "grid.csv");
    EXPECT_EQ(csv.rfind("lambda,iterations,converged,residual,clusters\n", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 21);
}

TEST(Cli, EvaluatePredictionAndPath) {
    const auto dir = fresh_dir("evaluate");
    auto r = run("evaluate --pred " + data("gmm54_truth.csv") + " --truth " + data("gmm54_truth.csv") + " --out-dir " +
                     dir.string(),
                 dir);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_DOUBLE_EQ(load_json((dir / "evaluation.json").string())["adjusted_rand"].get<double>(), 1.0);

    const auto a = fresh_dir("evaluate_a"), b = fresh_dir("evaluate_b");
    ASSERT_EQ(run("cluster " + data("gmm20.csv") + " --iterates --t 1.1 --out-dir " + a.string(), a).code, 0);
    ASSERT_EQ(run("cluster " + data("gmm20.csv") + " --iterates --t 1.01 --out-dir " + b.string(), b).code, 0);
    r = run("evaluate --path " + (a / "path.json").string() + " --reference " + (b / "path.json").string() +
                " --data " + data("gmm20.csv") + " --truth " + data("gmm20_truth.csv") + " --out-dir " + dir.string(),
            dir);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto e = load_json((dir / "evaluation.json").string());
    const double h = e["hausdorff"]["d_hausdorff"].get<double>();
    EXPECT_GT(h, 0.0);
    EXPECT_LT(h, 0.05);
    EXPECT_TRUE(e.contains("adjusted_rand"));

    EXPECT_EQ(run("evaluate --out-dir " + dir.string(), dir).code, 2);
}

TEST(Cli, SweepWritesOneRowPerStep) {
    const auto dir = fresh_dir("sweep");
    const auto r = run("sweep " + data("gmm20.csv") + " --t-list 1.1,1.05 --reference-t 1.01 --out-dir " + dir.string(),
                       dir);
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string csv = slurp(dir / "sweep.csv");
    EXPECT_EQ(csv.rfind("t,d_hausdorff,", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
    EXPECT_EQ(run("sweep " + data("gmm20.csv") + " --t-list 1.1,1.0 --out-dir " + dir.string(), dir).code, 2);
}

TEST(Cli, GenerateIsDeterministic) {
    const auto a = fresh_dir("gen_a"), b = fresh_dir("gen_b");
    for (const auto& d : {a, b}) {
        ASSERT_EQ(run("generate gmm --k 3 --n-per 6 --seed 7 --out-dir " + d.string(), d).code, 0);
    }
    EXPECT_EQ(slurp(a / "gmm.csv"), slurp(b / "gmm.csv"));
    EXPECT_EQ(load_partition((a / "gmm_truth.csv").string()).k, 3);
    EXPECT_EQ(manifest(a)["seed"], 7);
    ASSERT_EQ(run("generate checkerboard --out-dir " + a.string(), a).code, 0);
    EXPECT_TRUE(fs::exists(a / "checkerboard_col_truth.csv"));
}
