#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cvxclust/dataio.hpp"

using namespace cvxclust;

namespace {

DataMatrix parse(const std::string& text, bool header = true, bool rownames = true) {
    std::istringstream in(text);
    return parse_csv(in, header, rownames);
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("cvxclust_dataio_" + name)).string();
}

}  // namespace

TEST(Csv, ParsesHeaderAndRowNames) {
    const auto d = parse("id,a,b\nx,1,2\ny,3,4\nz,5,6.5\n");
    EXPECT_EQ(d.rows(), 3);
    EXPECT_EQ(d.cols(), 2);
    EXPECT_EQ(d.col_labels, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(d.row_labels, (std::vector<std::string>{"x", "y", "z"}));
    EXPECT_DOUBLE_EQ(d.values(2, 1), 6.5);
}

TEST(Csv, GeneratesLabelsWhenAbsent) {
    const auto d = parse("1,2\n3,4\n", false, false);
    EXPECT_EQ(d.row_labels, (std::vector<std::string>{"row_1", "row_2"}));
    EXPECT_EQ(d.col_labels, (std::vector<std::string>{"col_1", "col_2"}));
}

TEST(Csv, QuotedLabelsMayContainCommas) {
    const auto d = parse("\"\",\"a,b\",c\n\"r,1\",1,2\nr2,3,4\n");
    EXPECT_EQ(d.col_labels[0], "a,b");
    EXPECT_EQ(d.row_labels[0], "r,1");
}

TEST(Csv, RejectsNonNumericCell) {
    EXPECT_THROW(parse("a,b\n1,abc\n2,3\n", true, false), ParseError);
}

TEST(Csv, RejectsRaggedRows) {
    EXPECT_THROW(parse("1,2\n3\n", false, false), ParseError);
}

TEST(Csv, RejectsNonFinite) {
    EXPECT_THROW(parse("1,nan\n3,4\n", false, false), ParseError);
    EXPECT_THROW(parse("1,inf\n3,4\n", false, false), ParseError);
}

TEST(Csv, SingleRowIsDimensionError) {
    EXPECT_THROW(parse("a,b\n1,2\n", true, false), DimensionError);
}

TEST(Csv, ErrorMentionsLine) {
    try {
        parse("1,2\n3,4\n5,x\n", false, false);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(Csv, MissingFileIsParseError) {
    EXPECT_THROW(load_csv("/nonexistent/cvxclust.csv", true, true), ParseError);
}

TEST(Csv, RoundTripIsBitExact) {
    const auto s = gen_gaussian_mixture(3, 4, 3, 10.0, 7);
    const auto path = temp_path("roundtrip.csv");
    save_csv(path, s.data);
    const auto back = load_csv(path, true, true);
    EXPECT_EQ(back.values, s.data.values);
    EXPECT_EQ(back.row_labels, s.data.row_labels);
    EXPECT_EQ(back.col_labels, s.data.col_labels);
}

TEST(Partition, FromLabelsIsContiguousByFirstAppearance) {
    const auto p = Partition::from_labels({7, 7, 3, 9, 3});
    EXPECT_EQ(p.assignment, (std::vector<int>{0, 0, 1, 2, 1}));
    EXPECT_EQ(p.k, 3);
}

TEST(Partition, FileRoundTrip) {
    const auto p = Partition::from_labels({0, 1, 1, 2, 0});
    const auto path = temp_path("partition.csv");
    save_partition(path, p);
    EXPECT_EQ(load_partition(path), p);
}

TEST(Standardize, CentersAndScales) {
    DataMatrix d = make_data((Matrix(3, 1) << 1, 2, 3).finished());
    const auto s = standardize(d);
    EXPECT_NEAR(s.values(0, 0), -1.0, 1e-12);
    EXPECT_NEAR(s.values(1, 0), 0.0, 1e-12);
    EXPECT_NEAR(s.values(2, 0), 1.0, 1e-12);
}

TEST(Standardize, ConstantColumnIsCenteredWithWarning) {
    DataMatrix d = make_data((Matrix(3, 2) << 5, 1, 5, 2, 5, 4).finished());
    std::vector<std::string> warnings;
    const auto s = standardize(d, &warnings);
    EXPECT_EQ(s.values.col(0), Vector::Zero(3));
    ASSERT_EQ(warnings.size(), 1u);
    EXPECT_NE(warnings[0].find("col_1"), std::string::npos);
}

TEST(Standardize, MeanZeroSdOneAndIdempotent) {
    const auto g = gen_gaussian_mixture(2, 10, 4, 5.0, 3);
    const auto s = standardize(g.data);
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
        const auto c = s.values.col(j).array();
        EXPECT_NEAR(c.mean(), 0.0, 1e-12);
        EXPECT_NEAR(std::sqrt((c - c.mean()).square().sum() / (c.size() - 1)), 1.0, 1e-12);
    }
    EXPECT_LE((standardize(s).values - s.values).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Gmm, ThreeClustersOfEighteenRows) {
    const auto s = gen_gaussian_mixture(3, 18, 2, 10.0, 1);
    EXPECT_EQ(s.data.rows(), 54);
    EXPECT_EQ(s.data.cols(), 2);
    EXPECT_EQ(s.truth.k, 3);
}

TEST(Gmm, RejectsBadArguments) {
    EXPECT_THROW(gen_gaussian_mixture(3, 5, 2, 0.0, 1), PreconditionError);
    EXPECT_THROW(gen_gaussian_mixture(3, 5, 1, 10.0, 1), DimensionError);
    EXPECT_THROW(gen_gaussian_mixture(1, 5, 2, 10.0, 1), PreconditionError);
}

TEST(Gmm, DeterministicInSeed) {
    const auto a = gen_gaussian_mixture(3, 5, 4, 10.0, 42);
    const auto b = gen_gaussian_mixture(3, 5, 4, 10.0, 42);
    const auto c = gen_gaussian_mixture(3, 5, 4, 10.0, 43);
    EXPECT_EQ(a.data.values, b.data.values);
    EXPECT_NE(a.data.values, c.data.values);
}

TEST(Gmm, CentroidDistancesAreMultiplesOfSep) {
    for (int k : {2, 3, 5}) {
        const double sep = 7.5;
        const auto s = gen_gaussian_mixture(k, 2, 6, sep, 11);
        EXPECT_LE((s.basis.transpose() * s.basis - Matrix::Identity(2, 2)).norm(), 1e-12);
        double closest = std::numeric_limits<double>::infinity();
        for (int a = 0; a < k; ++a) {
            for (int b = a + 1; b < k; ++b) {
                const double d = (s.centroids.row(a) - s.centroids.row(b)).norm();
                const double ratio = d / sep;
                EXPECT_NEAR(ratio, std::round(ratio), 1e-9) << "k=" << k;
                closest = std::min(closest, d);
            }
        }
        EXPECT_NEAR(closest, sep, 1e-9);
    }
}

TEST(Moons, NoiselessPointsLieOnArcs) {
    const auto s = gen_half_moons(50, 2, 0.0, 5);
    ASSERT_EQ(s.data.rows(), 100);
    const Matrix planar = s.data.values * s.basis;
    for (int i = 0; i < 100; ++i) {
        const Eigen::RowVector2d centre = i < 50 ? Eigen::RowVector2d(0.0, 0.0) : Eigen::RowVector2d(1.0, 0.5);
        EXPECT_NEAR((planar.row(i) - centre).norm(), 1.0, 1e-12);
        const double y = planar(i, 1) - centre(1);
        if (i < 50) EXPECT_GE(y, -1e-12);
        else EXPECT_LE(y, 1e-12);
    }
}

TEST(Moons, NoiselessHighDimensionalIsRankTwo) {
    const auto s = gen_half_moons(20, 5, 0.0, 9);
    Eigen::JacobiSVD<Matrix> svd(s.data.values);
    EXPECT_LT(svd.singularValues()(2), 1e-8);
}

TEST(Moons, NoiseIsOrthogonalToSignal) {
    const auto clean = gen_half_moons(20, 5, 0.0, 9);
    const auto noisy = gen_half_moons(20, 5, 0.3, 9);
    EXPECT_LE(((noisy.data.values - clean.data.values) * clean.basis).norm(), 1e-10);
    EXPECT_GT((noisy.data.values - clean.data.values).norm(), 0.1);
}

TEST(Moons, DeterministicAndValidated) {
    EXPECT_EQ(gen_half_moons(10, 3, 0.1, 4).data.values, gen_half_moons(10, 3, 0.1, 4).data.values);
    EXPECT_THROW(gen_half_moons(10, 1, 0.0, 1), DimensionError);
    EXPECT_THROW(gen_half_moons(1, 2, 0.0, 1), PreconditionError);
    EXPECT_THROW(gen_half_moons(10, 2, -1.0, 1), PreconditionError);
}

TEST(Checkerboard, BlockMeansAndTruth) {
    const auto cb = gen_checkerboard(4, 2, 5, 5, 10.0, 0.0, 1);
    EXPECT_EQ(cb.data.rows(), 20);
    EXPECT_EQ(cb.data.cols(), 10);
    EXPECT_EQ(cb.row_truth.k, 4);
    EXPECT_EQ(cb.col_truth.k, 2);
    std::set<double> distinct(cb.data.values.data(), cb.data.values.data() + cb.data.values.size());
    EXPECT_EQ(distinct.size(), 8u);
    EXPECT_NEAR(cb.data.values.mean(), 0.0, 1e-12);
}
