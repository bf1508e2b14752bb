#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace npgroup;
using namespace npgroup::testing;

namespace {

Vector power_iteration(const Matrix& m) {
    const Matrix centered = m.rowwise() - m.colwise().mean();
    Matrix cov = Matrix::Zero(m.cols(), m.cols());
    for (Index a = 0; a < m.cols(); ++a) {
        for (Index b = 0; b < m.cols(); ++b) {
            double s = 0.0;
            for (Index i = 0; i < m.rows(); ++i) s += centered(i, a) * centered(i, b);
            cov(a, b) = s / static_cast<double>(m.rows() - 1);
        }
    }
    Vector v = Vector::Ones(m.cols());
    for (int it = 0; it < 5000; ++it) v = (cov * v).normalized();
    return v;
}

double abs_cos(const Vector& a, const Vector& b) { return std::abs(a.dot(b)) / (a.norm() * b.norm()); }

}  // namespace

TEST(SelectByRule, Examples) {
    const IndexSet all = {0, 1, 2};
    EXPECT_EQ(select_by_rule({0.01, 0.5, 0.03}, 0.05, PcRule::Rule1, all), (IndexSet{0, 2}));
    EXPECT_EQ(select_by_rule({0.01, 0.5, 0.03}, 0.05, PcRule::Rule2, all), (IndexSet{0, 1, 2}));
    EXPECT_EQ(select_by_rule({0.5, 0.9, 0.7}, 0.05, PcRule::Rule1, all), (IndexSet{0, 2}));
    EXPECT_EQ(select_by_rule({0.01, 0.9, 0.7}, 0.05, PcRule::Rule1, all), (IndexSet{0, 2}));
    EXPECT_EQ(select_by_rule({0.01, 0.9, 0.7}, 0.05, PcRule::Rule2, all), (IndexSet{0, 2}));
}

TEST(FirstPc, IdenticalColumns) {
    CounterRng rng(41, 0);
    const Vector c = normal_vector(40, rng);
    Matrix m(40, 2);
    m << c, c;
    const Vector pc = first_pc(m);
    EXPECT_NEAR(pc(0), 1.0 / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(pc(1), 1.0 / std::sqrt(2.0), 1e-12);
}

TEST(FirstPc, SingleColumn) {
    CounterRng rng(42, 0);
    const Vector pc = first_pc(normal_matrix(10, 1, rng));
    ASSERT_EQ(pc.size(), 1);
    EXPECT_EQ(pc(0), 1.0);
}

TEST(FirstPc, PowerIterationOracle) {
    CounterRng rng(43, 0);
    Matrix m = normal_matrix(50, 3, rng);
    m.col(0) *= 3.0;
    m.col(1) += 0.8 * m.col(0);
    const Vector pc = first_pc(m);
    Vector oracle = power_iteration(m);
    if (oracle.dot(pc) < 0) oracle = -oracle;
    EXPECT_LT((pc - oracle).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_NEAR(pc.norm(), 1.0, 1e-14);
    Index arg;
    pc.cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(pc(arg), 0.0);
}

TEST(FirstPc, ColumnSignFlips) {
    CounterRng rng(44, 0);
    Matrix m = normal_matrix(60, 3, rng);
    m.col(2) += m.col(0);
    const Vector a = first_pc(m);
    Matrix flipped = m;
    flipped.col(1) = -flipped.col(1);
    const Vector b = first_pc(flipped);
    Vector expected = a;
    expected(1) = -expected(1);
    if (expected.dot(b) < 0) expected = -expected;
    EXPECT_LT((b - expected).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(FirstPc, ZeroCovariance) {
    EXPECT_THROW(first_pc(Matrix::Ones(20, 2)), DegenerateCovariance);
}

TEST(SupervisedPc, Invariants) {
    const ModelCheckData d = gen_model_check(CheckDesign::Additive, 0.5, 200, std::uint64_t{45});
    const ProjectionResult pr = supervised_pc(d.data.y, d.x_null(), d.z_test(), TestConfig{});
    EXPECT_NEAR(pr.coef.norm(), 1.0, 1e-12);
    EXPECT_GE(pr.selected.size(), 2u);
    for (Index j = 0; j < pr.coef.size(); ++j) {
        if (std::find(pr.selected.begin(), pr.selected.end(), static_cast<std::size_t>(j)) == pr.selected.end())
            EXPECT_EQ(pr.coef(j), 0.0);
    }
    EXPECT_LT((pr.scores - d.z_test() * pr.coef).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SupervisedPc, ColumnPermutationEquivariance) {
    const ModelCheckData d = gen_model_check(CheckDesign::Additive, 0.3, 200, std::uint64_t{46});
    const Matrix z = d.z_test();
    const IndexSet perm = {2, 0, 1};   // new column k is old column perm[k]
    const Matrix zp = select_columns(z, perm);
    const ProjectionResult a = supervised_pc(d.data.y, d.x_null(), z, TestConfig{});
    const ProjectionResult b = supervised_pc(d.data.y, d.x_null(), zp, TestConfig{});
    IndexSet mapped;
    for (std::size_t k : b.selected) mapped.push_back(perm[k]);
    std::sort(mapped.begin(), mapped.end());
    EXPECT_EQ(mapped, a.selected);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(b.pvalues[k], a.pvalues[perm[k]]);
    EXPECT_NEAR(abs_cos(a.scores, b.scores), 1.0, 1e-10);
}

TEST(SupervisedPc, ConstantColumnDropped) {
    CounterRng rng(47, 0);
    const Matrix x = normal_matrix(80, 1, rng);
    Matrix z = normal_matrix(80, 3, rng);
    z.col(1).setConstant(2.0);
    const Vector y = x.col(0) + z.col(0) + normal_vector(80, rng);
    const ProjectionResult pr = supervised_pc(y, x, z, TestConfig{});
    EXPECT_EQ(pr.dropped, (IndexSet{1}));
    EXPECT_EQ(pr.selected, (IndexSet{0, 2}));
    EXPECT_FALSE(pr.warnings.empty());
}

TEST(SupervisedPc, SingleColumnIsIdentity) {
    CounterRng rng(48, 0);
    const Matrix x = normal_matrix(40, 1, rng);
    const Matrix z = normal_matrix(40, 1, rng);
    const ProjectionResult pr = supervised_pc(normal_vector(40, rng), x, z, TestConfig{});
    EXPECT_EQ(pr.coef(0), 1.0);
    EXPECT_EQ(pr.scores, z.col(0));
}

TEST(Sir, IndependentResponseHasSmallEigenvalues) {
    // permutation oracle: the observed leading eigenvalue is not extreme
    CounterRng rng(49, 0);
    const Matrix x = normal_matrix(500, 4, rng);
    const Vector y = normal_vector(500, rng);
    const double observed = sir(x, y, 10, 1).eigvals(0);
    std::vector<double> perm;
    Vector yp = y;
    for (int b = 0; b < 100; ++b) {
        for (Index i = yp.size() - 1; i > 0; --i) std::swap(yp(i), yp(static_cast<Index>(uniform_int(rng, 0, static_cast<std::size_t>(i)))));
        perm.push_back(sir(x, yp, 10, 1).eigvals(0));
    }
    std::sort(perm.begin(), perm.end());
    EXPECT_LT(observed, perm[94] * 1.5);
    EXPECT_LT(observed, 3.0 * 4.0 / 500.0 * 10.0);
}

TEST(Sir, RecoversMonotoneLinkDirection) {
    Vector beta(4);
    beta << 1, 2, 0, 0;
    beta /= std::sqrt(5.0);
    std::vector<double> cosines;
    for (std::uint64_t r = 0; r < 50; ++r) {
        CounterRng rng(50, r);
        const Matrix x = normal_matrix(1000, 4, rng);
        const Vector lin = x * beta;
        const Vector y = (lin.array() + 0.3 * lin.array().cube()).matrix() + 0.5 * normal_vector(1000, rng);
        const SirEstimate est = sir(x, y, 10, 1);
        cosines.push_back(abs_cos(est.b_matrix.row(0).transpose(), beta));
    }
    std::nth_element(cosines.begin(), cosines.begin() + 25, cosines.end());
    EXPECT_GT(cosines[25], 0.95);
}

TEST(Sir, NormalizationAndOrdering) {
    CounterRng rng(51, 0);
    Matrix x = normal_matrix(300, 5, rng);
    x.col(1) = 2.0 * x.col(1) + x.col(0);
    const Vector y = x.col(0) + x.col(2).array().square().matrix() + normal_vector(300, rng);
    const SirEstimate est = sir(x, y, 10, 2);
    const Matrix centered = x.rowwise() - x.colwise().mean();
    const Matrix cov = centered.transpose() * centered / 300.0;
    for (Index r = 0; r < 2; ++r) {
        const Vector b = est.b_matrix.row(r).transpose();
        EXPECT_NEAR(b.dot(cov * b), 1.0, 1e-10);
    }
    const Vector b0 = est.b_matrix.row(0).transpose();
    const Vector b1 = est.b_matrix.row(1).transpose();
    EXPECT_NEAR(b0.dot(cov * b1), 0.0, 1e-10);
    for (Index i = 1; i < est.eigvals.size(); ++i) EXPECT_GE(est.eigvals(i - 1), est.eigvals(i));
}

TEST(Sir, AffineInvariance) {
    CounterRng rng(52, 0);
    const Matrix x = normal_matrix(400, 3, rng);
    const Vector y = (x.col(0) + 0.5 * x.col(1)).array().exp().matrix() + 0.2 * normal_vector(400, rng);
    Matrix a(3, 3);
    a << 2, 0.3, 0, -1, 1, 0.5, 0.2, 0, 3;
    Eigen::RowVectorXd shift(3);
    shift << 5, -2, 1;
    const Matrix xt = (x * a).rowwise() + shift;
    const SirEstimate e1 = sir(x, y, 10, 1);
    const SirEstimate e2 = sir(xt, y, 10, 1);
    // X -> XA maps direction b to A^{-1} b
    const Vector mapped = a.inverse() * e1.b_matrix.row(0).transpose();
    const Matrix c = xt.rowwise() - xt.colwise().mean();
    const Matrix cov = c.transpose() * c / 400.0;
    const Vector b2 = e2.b_matrix.row(0).transpose();
    const double cosine = std::abs(mapped.dot(cov * b2)) / std::sqrt(mapped.dot(cov * mapped) * b2.dot(cov * b2));
    EXPECT_GT(cosine, 0.99);
}

TEST(Sir, Errors) {
    CounterRng rng(53, 0);
    const Matrix x = normal_matrix(50, 3, rng);
    const Vector y = normal_vector(50, rng);
    EXPECT_THROW(sir(x, y, 1, 1), ValidationError);
    EXPECT_THROW(sir(x, y, 10, 4), ValidationError);
    Matrix collinear = x;
    collinear.col(2) = collinear.col(0) - collinear.col(1);
    EXPECT_THROW(sir(collinear, y, 10, 1), SingularCovariance);
    EXPECT_THROW(sir(normal_matrix(3, 3, rng), y.head(3), 2, 1), SingularCovariance);
}

TEST(Sir, BinaryResponseUsesClasses) {
    Vector y(6);
    y << 1, 0, 1, 1, 0, 0;
    const auto s = make_slices(y, 10);
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[0], (IndexSet{1, 4, 5}));
    EXPECT_EQ(s[1], (IndexSet{0, 2, 3}));
    Vector c(7);
    c << 7, 1, 5, 3, 2, 6, 4;
    const auto t = make_slices(c, 3);
    ASSERT_EQ(t.size(), 3u);
    EXPECT_EQ(t[0], (IndexSet{1, 4}));
    EXPECT_EQ(t[1], (IndexSet{3, 6}));
    EXPECT_EQ(t[2], (IndexSet{2, 5, 0}));
}
