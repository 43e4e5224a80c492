#include <gtest/gtest.h>

#include <set>

#include "cvxclust/carp.hpp"
#include "cvxclust/dataio.hpp"
#include "oracles.hpp"

using namespace cvxclust;

namespace {

Matrix grand_mean(const Matrix& x) { return x.colwise().mean().replicate(x.rows(), 1); }

int oracle_cluster_count(const WeightGraph& g, const std::vector<bool>& zero) {
    std::vector<std::pair<int, int>> links;
    for (std::size_t l = 0; l < zero.size(); ++l) {
        if (zero[l]) links.emplace_back(g.edges()[l].from, g.edges()[l].to);
    }
    const auto labels = oracle::components(g.n(), links);
    return static_cast<int>(std::set<int>(labels.begin(), labels.end()).size());
}

struct Gmm {
    SyntheticData s;
    WeightGraph g;
    PenaltySpec spec;
};

Gmm gmm(int k, int n_per, std::uint64_t seed) {
    Gmm out{gen_gaussian_mixture(k, n_per, 2, 10.0, seed), {}, {}};
    out.g = build_weights(out.s.data);
    out.spec = PenaltySpec::from_graph(out.g);
    return out;
}

}  // namespace

TEST(CarpPath, TwoPointsFuseToMean) {
    Matrix x(2, 2);
    x << 0.0, 1.0, 2.0, 5.0;
    const auto g = WeightGraph::from_edges(2, {{0, 1, 1.0}});
    const auto path = carp_path(x, g, PenaltySpec::from_graph(g));
    ASSERT_EQ(path.events.size(), 1u);
    EXPECT_EQ(path.events[0].kind, EventKind::Fuse);
    EXPECT_GT(path.events[0].k, 0);
    EXPECT_EQ(path.clusters_per_k.front(), 2);
    EXPECT_EQ(path.clusters_per_k.back(), 1);
    EXPECT_LE((path.final_U - grand_mean(x)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(CarpPath, GammaGrowsGeometrically) {
    const auto m = gmm(3, 6, 4);
    PathConfig cfg;
    cfg.t = 1.1;
    const auto path = carp_path(m.s.data.values, m.g, m.spec, cfg);
    EXPECT_EQ(path.gammas.front(), path.epsilon);
    for (std::size_t i = 1; i < path.gammas.size(); ++i) {
        EXPECT_NEAR(path.gammas[i] / path.gammas[i - 1], 1.1, 1e-12);
    }
}

class Carp54 : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        data_ = new Gmm(gmm(3, 18, 1));
        path_ = new CarpPath(carp_path(data_->s.data.values, data_->g, data_->spec));
    }
    static void TearDownTestSuite() {
        delete path_;
        delete data_;
    }
    static Gmm* data_;
    static CarpPath* path_;
};

Gmm* Carp54::data_ = nullptr;
CarpPath* Carp54::path_ = nullptr;

TEST_F(Carp54, ClusterCountsMatchComponentsOfZeroRows) {
    const auto& p = *path_;
    ASSERT_EQ(p.stored_k.size(), p.zero_masks.size());
    for (std::size_t i = 0; i < p.stored_k.size(); ++i) {
        EXPECT_EQ(p.clusters_per_k[static_cast<std::size_t>(p.stored_k[i])], oracle_cluster_count(data_->g, p.zero_masks[i]))
            << "k=" << p.stored_k[i];
    }
}

TEST_F(Carp54, EventsAccountForEveryMerge) {
    const auto& p = *path_;
    EXPECT_EQ(p.fuse_count() - p.unfuse_count(), 53);
    EXPECT_EQ(p.clusters_per_k.front(), 54);
    EXPECT_EQ(p.clusters_per_k.back(), 1);
    // Replaying the events reproduces the recorded counts.
    std::vector<int> replay(p.clusters_per_k.size(), 0);
    int c = 54;
    std::size_t e = 0;
    for (std::size_t k = 0; k < replay.size(); ++k) {
        while (e < p.events.size() && p.events[e].k == static_cast<long>(k)) {
            c += p.events[e].kind == EventKind::Fuse ? -1 : 1;
            ++e;
        }
        replay[k] = c;
    }
    EXPECT_EQ(replay, p.clusters_per_k);
    for (std::size_t k = 1; k < p.clusters_per_k.size(); ++k) {
        if (p.unfuse_count() == 0) {
            EXPECT_LE(p.clusters_per_k[k], p.clusters_per_k[k - 1]);
        }
    }
}

TEST_F(Carp54, PlainPathHasNoUnfuseEvents) { EXPECT_EQ(path_->unfuse_count(), 0); }

TEST_F(Carp54, Endpoints) {
    EXPECT_EQ(path_->stored_k.front(), 0);
    EXPECT_EQ(path_->iterates.front(), data_->s.data.values);
    EXPECT_LE((path_->final_U - grand_mean(data_->s.data.values)).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_EQ(path_->stored_k.back(), path_->steps());
}

TEST_F(Carp54, EventsCarryTheirEdgeAndGamma) {
    for (const auto& e : path_->events) {
        const auto& edge = data_->g.edges()[static_cast<std::size_t>(e.edge)];
        EXPECT_EQ(e.from, edge.from);
        EXPECT_EQ(e.to, edge.to);
        EXPECT_EQ(e.gamma, path_->gammas[static_cast<std::size_t>(e.k)]);
        EXPECT_GT(e.score, 0.0);
    }
}

TEST(CarpPath, SettlingOnlyAppendsSteps) {
    const auto m = gmm(3, 6, 2);
    PathConfig raw;
    raw.settle_tol = 0.0;
    const auto stop = carp_path(m.s.data.values, m.g, m.spec, raw);
    const auto settled = carp_path(m.s.data.values, m.g, m.spec);
    // Without settling the path ends at the first step where every V row is zero.
    const auto& last = stop.zero_masks.back();
    EXPECT_TRUE(std::all_of(last.begin(), last.end(), [](bool z) { return z; }));
    const auto& before = stop.zero_masks[stop.zero_masks.size() - 2];
    EXPECT_FALSE(std::all_of(before.begin(), before.end(), [](bool z) { return z; }));
    EXPECT_LE(stop.fusion_gamma(), stop.gammas.back());
    EXPECT_EQ(stop.final_U, stop.iterates.back());
    ASSERT_GT(settled.steps(), stop.steps());
    EXPECT_EQ(settled.fusion_gamma(), stop.fusion_gamma());
    EXPECT_TRUE(std::equal(stop.gammas.begin(), stop.gammas.end(), settled.gammas.begin()));
    EXPECT_EQ(settled.fuse_count(), stop.fuse_count());
    EXPECT_LE((settled.final_U - grand_mean(m.s.data.values)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(CarpPath, KeepEveryThinsIterates) {
    const auto m = gmm(3, 6, 2);
    PathConfig cfg;
    cfg.keep_every = 25;
    const auto thin = carp_path(m.s.data.values, m.g, m.spec, cfg);
    const auto full = carp_path(m.s.data.values, m.g, m.spec);
    EXPECT_LT(thin.iterates.size(), full.iterates.size());
    EXPECT_EQ(thin.gammas, full.gammas);
    EXPECT_EQ(thin.final_U, full.final_U);
    for (long k : thin.stored_k) {
        const bool event_step = std::any_of(thin.events.begin(), thin.events.end(), [&](const auto& e) { return e.k == k; });
        EXPECT_TRUE(k % 25 == 0 || event_step || k == thin.steps());
    }
}

TEST(CarpPath, Errors) {
    const auto m = gmm(2, 4, 3);
    PathConfig bad;
    bad.t = 0.9;
    try {
        carp_path(m.s.data.values, m.g, m.spec, bad);
        FAIL();
    } catch (const PreconditionError& e) {
        EXPECT_STREQ(e.what(), "t must exceed 1");
    }
    Matrix x = m.s.data.values;
    x(0, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(carp_path(x, m.g, m.spec), NumericalError);
    EXPECT_THROW(carp_path(m.s.data.values.topRows(4), m.g, m.spec), ShapeError);
    const auto split = WeightGraph::from_edges(8, {{0, 1, 1.0}}, 1.0, false);
    EXPECT_THROW(carp_path(m.s.data.values, split, PenaltySpec::from_graph(split)), ConnectivityError);
    PathConfig capped;
    capped.max_iter = 5;
    EXPECT_THROW(carp_path(m.s.data.values, m.g, m.spec, capped), IterationCapError);
}

TEST(CarpPath, DefaultEpsilonKeepsEveryEdgeFarFromThreshold) {
    const auto m = gmm(3, 8, 5);
    const double eps = default_epsilon(m.s.data.values, m.g);
    const Vector dn = (m.g.D() * m.s.data.values).rowwise().norm();
    const Vector w = m.g.weights();
    EXPECT_LE(eps, 1e-6 * dn.maxCoeff() / w.minCoeff() * (1.0 + 1e-15));
    for (Eigen::Index l = 0; l < dn.size(); ++l) EXPECT_LE(eps * w(l), 1e-3 * m.g.rho() * dn(l) * (1.0 + 1e-12));
}

TEST(CarpViz, RecoversEveryClusterCount) {
    const auto m = gmm(4, 5, 1);
    const auto path = carp_viz_path(m.s.data.values, m.g, m.spec, PathConfig::fine());
    const std::set<int> counts(path.clusters_per_k.begin(), path.clusters_per_k.end());
    EXPECT_EQ(counts.size(), 20u);
    for (const auto& e : path.events) EXPECT_FALSE(e.backtrack_exhausted);
    // Each accepted step adds at most one fusion.
    std::map<long, int> fuses_at;
    for (const auto& e : path.events) {
        if (e.kind == EventKind::Fuse) ++fuses_at[e.k];
    }
    for (const auto& [k, c] : fuses_at) EXPECT_EQ(c, 1) << "k=" << k;
    EXPECT_GT(path.backtracks, 0);
}

TEST(CarpViz, SymmetricPairsExhaustBacktracking) {
    Matrix x(4, 1);
    x << -5.5, -4.5, 4.5, 5.5;
    const auto g = WeightGraph::from_edges(4, {{0, 1, 1.0}, {1, 2, 0.01}, {2, 3, 1.0}});
    PathConfig cfg = PathConfig::fine();
    cfg.max_backtrack = 10;
    const auto path = carp_viz_path(x, g, PenaltySpec::from_graph(g), cfg);
    ASSERT_GE(path.events.size(), 2u);
    const auto& a = path.events[0];
    const auto& b = path.events[1];
    EXPECT_EQ(a.k, b.k);
    EXPECT_EQ(a.gamma, b.gamma);
    EXPECT_TRUE(a.backtrack_exhausted);
    EXPECT_TRUE(b.backtrack_exhausted);
    EXPECT_EQ(a.edge, 0);
    EXPECT_EQ(b.edge, 2);
    EXPECT_GE(path.backtracks, 10);
}

TEST(CarpViz, BurnInReachesFirstFusionSooner) {
    const auto m = gmm(3, 6, 7);
    PathConfig cfg = PathConfig::fine();
    cfg.rho = PathConfig::viz_rho;
    const auto viz = carp_viz_path(m.s.data.values, m.g, m.spec, cfg);
    const auto plain = carp_path(m.s.data.values, m.g, m.spec, cfg);
    ASSERT_FALSE(viz.events.empty());
    ASSERT_FALSE(plain.events.empty());
    EXPECT_LT(viz.events.front().k, plain.events.front().k);
}

TEST(PathConfig, RhoSelection) {
    const auto g = WeightGraph::from_edges(2, {{0, 1, 1.0}}, 2.0);
    PathConfig cfg;
    EXPECT_EQ(cfg.path_rho(g, false), 2.0);
    EXPECT_EQ(cfg.path_rho(g, true), PathConfig::viz_rho);
    cfg.rho = 0.5;
    EXPECT_EQ(cfg.path_rho(g, true), 0.5);
    cfg.rho = -1.0;
    EXPECT_THROW(cfg.validate(), PreconditionError);
}

TEST(FusionTrackerTest, UnfuseReportsRepresentativeAndTrigger) {
    // Triangle: edges 0 = (0,1), 1 = (1,2), 2 = (0,2).
    const auto g = WeightGraph::from_edges(3, {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}});
    const auto spec = PenaltySpec::from_graph(g);
    FusionTracker tr(g, spec);
    auto rows = [](std::initializer_list<double> r) {
        Matrix v(3, 1);
        Eigen::Index i = 0;
        for (double x : r) v(i++) = x;
        return v;
    };
    auto step = [&](const Matrix& v, long k) {
        auto u = tr.propose(v, rows({1, 1, 1}), 1.0, k);
        auto events = u.events;
        tr.commit(std::move(u));
        return events;
    };
    auto ev = step(rows({0, 0, 1}), 1);
    ASSERT_EQ(ev.size(), 2u);
    EXPECT_EQ(tr.components(), 1);
    // Edge 1 leaves the zero set but edge 2 keeps the nodes connected.
    EXPECT_TRUE(step(rows({0, 1, 0}), 2).empty());
    EXPECT_EQ(tr.components(), 1);
    ev = step(rows({0, 1, 1}), 3);
    ASSERT_EQ(ev.size(), 1u);
    EXPECT_EQ(ev[0].kind, EventKind::Unfuse);
    EXPECT_EQ(ev[0].edge, 1);
    EXPECT_EQ(ev[0].trigger_edge, 2);
    EXPECT_EQ(tr.components(), 2);
}

TEST(FusionTrackerTest, SimultaneousFusesOrderedByScore) {
    const auto g = WeightGraph::from_edges(3, {{0, 1, 1.0}, {1, 2, 1.0}});
    const auto spec = PenaltySpec::from_graph(g);
    FusionTracker tr(g, spec);
    Matrix arg(2, 1);
    arg << 0.9, 0.2;
    const auto u = tr.propose(Matrix::Zero(2, 1), arg, 1.0, 1);
    ASSERT_EQ(u.events.size(), 2u);
    EXPECT_EQ(u.events[0].edge, 1);
    EXPECT_EQ(u.events[1].edge, 0);
    EXPECT_DOUBLE_EQ(u.events[0].score, 0.2);
}

TEST(ScoreKey, TiesWithinRounding) {
    EXPECT_EQ(score_key(1.0), score_key(1.0 + 1e-15));
    EXPECT_NE(score_key(1.0), score_key(1.0 + 1e-9));
    EXPECT_EQ(score_key(0.0), 0.0);
}

namespace {

CarpPath synthetic_path() {
    CarpPath p;
    p.n = 4;
    p.gammas = {0.5, 1.0, 1.01, 2.0};
    p.clusters_per_k = {4, 4, 1, 1};
    for (int e : {2, 0, 1}) {
        FusionEvent ev;
        ev.edge = e;
        ev.k = 2;
        ev.gamma = 1.01;
        ev.score = e == 1 ? 0.5 : 0.9;
        p.events.push_back(ev);
    }
    return p;
}

}  // namespace

TEST(Postprocess, SpreadsSimultaneousFusesInLogGamma) {
    const auto out = postprocess_events(synthetic_path());
    ASSERT_EQ(out.events.size(), 3u);
    // Score order then edge order: 1 (0.5), 0 (0.9), 2 (0.9).
    EXPECT_EQ(out.events[0].edge, 1);
    EXPECT_EQ(out.events[1].edge, 0);
    EXPECT_EQ(out.events[2].edge, 2);
    std::set<double> distinct;
    for (std::size_t i = 0; i < 3; ++i) {
        const double g = out.events[i].gamma;
        EXPECT_GT(g, 1.0);
        EXPECT_LE(g, 1.01);
        EXPECT_NEAR(std::log(g), std::log(1.01) * static_cast<double>(i + 1) / 3.0, 1e-14);
        distinct.insert(g);
    }
    EXPECT_EQ(distinct.size(), 3u);
}

TEST(Postprocess, SingletonStepsUnchangedAndIdempotent) {
    const auto m = gmm(3, 6, 8);
    const auto path = carp_viz_path(m.s.data.values, m.g, m.spec, PathConfig::fine());
    const auto once = postprocess_events(path);
    for (std::size_t i = 0; i < path.events.size(); ++i) {
        if (path.events[i].kind == EventKind::Fuse) {
            const bool alone = std::count_if(path.events.begin(), path.events.end(), [&](const auto& e) {
                                   return e.kind == EventKind::Fuse && e.k == path.events[i].k;
                               }) == 1;
            if (alone) {
                EXPECT_EQ(once.events[i].gamma, path.events[i].gamma);
            }
        }
    }
    const auto twice = postprocess_events(once);
    ASSERT_EQ(once.events.size(), twice.events.size());
    for (std::size_t i = 0; i < once.events.size(); ++i) {
        EXPECT_EQ(once.events[i].gamma, twice.events[i].gamma);
        EXPECT_EQ(once.events[i].edge, twice.events[i].edge);
    }
    const auto synth = postprocess_events(synthetic_path());
    const auto synth2 = postprocess_events(synth);
    for (std::size_t i = 0; i < synth.events.size(); ++i) EXPECT_EQ(synth.events[i].gamma, synth2.events[i].gamma);
}
