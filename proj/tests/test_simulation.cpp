#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace npgroup;
using namespace npgroup::testing;

namespace {

double corr(const Vector& a, const Vector& b) {
    const Vector ca = a.array() - a.mean();
    const Vector cb = b.array() - b.mean();
    return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

double variance(const Vector& a) { return (a.array() - a.mean()).square().sum() / static_cast<double>(a.size() - 1); }

}  // namespace

TEST(CounterRng, DeterministicAndStreamed) {
    CounterRng a(5, 3), b(5, 3), c(5, 4), d(6, 3);
    for (int i = 0; i < 100; ++i) {
        const auto va = a();
        EXPECT_EQ(va, b());
        EXPECT_NE(va, c());
        EXPECT_NE(va, d());
    }
    CounterRng e(5, 3);
    e.discard(99);
    CounterRng f(5, 3);
    for (int i = 0; i < 99; ++i) f();
    EXPECT_EQ(e(), f());
    EXPECT_NE(CounterRng::stream_id(0, 1), CounterRng::stream_id(1, 0));
}

TEST(GenModelCheck, AdditiveNull) {
    const ModelCheckData d = gen_model_check(CheckDesign::Additive, 0.0, 2000, std::uint64_t{71});
    EXPECT_EQ(d.data.x.cols(), 4);
    EXPECT_LT(std::abs(corr(d.data.y, d.data.x.col(1))), 3.0 / std::sqrt(2000.0));
    EXPECT_LT((d.data.y - d.data.x.col(0)).cwiseAbs().maxCoeff(), 6.0);
}

TEST(GenModelCheck, AdditiveVariance) {
    const ModelCheckData d = gen_model_check(CheckDesign::Additive, 0.8, 10000, std::uint64_t{72});
    EXPECT_NEAR(variance(d.data.y), 3.92, 0.05 * 3.92);
    for (Index c = 0; c < 4; ++c) {
        EXPECT_NEAR(d.data.x.col(c).mean(), 0.0, 3.0 / 100.0);
        EXPECT_NEAR(variance(d.data.x.col(c)), 1.0, 3.0 * std::sqrt(2.0) / 100.0);
    }
}

TEST(GenModelCheck, HeteroVarianceSlope) {
    const std::size_t n = 100000;
    const ModelCheckData d = gen_model_check(CheckDesign::Hetero, 0.0, n, std::uint64_t{73});
    const Vector resid = d.data.y - d.data.x.col(0);
    const Vector u = (d.data.x.col(1).array() * d.data.x.col(2).array()).square().matrix();
    const Vector r2 = resid.array().square().matrix();
    const Vector cu = u.array() - u.mean();
    const double slope = cu.dot(r2) / cu.squaredNorm();
    EXPECT_NEAR(slope, 0.25, 0.02);
    EXPECT_NEAR(resid.mean(), 0.0, 0.02);
}

TEST(GenModelCheck, NonAdditiveUsesSignedPower) {
    EXPECT_DOUBLE_EQ(signed_power(-8.0, 1.0 / 3.0), -2.0);
    EXPECT_DOUBLE_EQ(signed_power(4.0, 0.5), 2.0);
    EXPECT_EQ(signed_power(0.0, -1.0), 0.0);
    const ModelCheckData d = gen_model_check(CheckDesign::NonAdditive, 0.0, 500, std::uint64_t{74});
    EXPECT_EQ(d.null_cols, (IndexSet{0, 1}));
    EXPECT_EQ(d.test_cols, (IndexSet{2, 3}));
    for (Index i = 0; i < d.data.y.size(); ++i) {
        ASSERT_TRUE(std::isfinite(d.data.y(i)));
        const double mean = signed_power(d.data.x(i, 0), d.data.x(i, 1)) + signed_power(d.data.x(i, 1), 0.0);
        EXPECT_LT(std::abs(d.data.y(i) - mean), 0.7);
    }
}

TEST(GenGroupContinuous, Structure) {
    CounterRng rng(75, 0);
    const GroupData d = gen_group_continuous(1, 10000, rng);
    ASSERT_EQ(d.data.x.cols(), 48);
    ASSERT_EQ(d.groups.size(), 16u);
    EXPECT_EQ(d.true_groups, (IndexSet{2, 5}));
    const double tol = 3.0 / 100.0;
    EXPECT_NEAR(corr(d.data.x.col(2), d.data.x.col(5)), 0.5, tol);
    for (Index l = 0; l < 16; ++l) EXPECT_NEAR(variance(d.data.x.col(3 * l + 2)), 1.0, 3.0 * std::sqrt(2.0) / 100.0);
    for (Index i = 0; i < 50; ++i) {
        const double v = d.data.x(i, 2);
        EXPECT_NEAR(d.data.x(i, 0), v * v * v, 1e-12);
        EXPECT_NEAR(d.data.x(i, 1), v * v, 1e-12);
    }
}

TEST(GenGroupContinuous, ModelOneFormula) {
    const double x3 = 0.7, x6 = -1.3;
    EXPECT_DOUBLE_EQ(continuous_signal(1, x3, x6),
                     x3 * x3 * x3 + x3 * x3 + x3 + x6 * x6 * x6 / 3.0 - x6 * x6 + 2.0 * x6 / 3.0);
    CounterRng rng(76, 0);
    const GroupData d = gen_group_continuous(1, 5000, rng);
    const Vector signal = d.data.x.col(6) + d.data.x.col(7) + d.data.x.col(8) + d.data.x.col(15) / 3.0 -
                          d.data.x.col(16) + 2.0 / 3.0 * d.data.x.col(17);
    const Vector eps = d.data.y - signal;
    EXPECT_NEAR(eps.mean(), 0.0, 3.0 * 2.0 / std::sqrt(5000.0));
    EXPECT_NEAR(std::sqrt(variance(eps)), 2.0, 0.1);
}

TEST(GenGroupLogistic, InterceptProbability) {
    EXPECT_NEAR(logistic_probability(1, Vector::Zero(15)), 0.7310585786300049, 1e-12);
    EXPECT_NEAR(logistic_probability(2, Vector::Zero(15)), 0.7310585786300049, 1e-12);
}

TEST(GenGroupLogistic, MeanMatchesProbabilities) {
    for (int model = 1; model <= 3; ++model) {
        CounterRng rng(77, static_cast<std::uint64_t>(model));
        const GroupData d = gen_group_logistic(model, 10000, rng);
        double pbar = 0.0;
        for (Index i = 0; i < d.data.x.rows(); ++i) pbar += logistic_probability(model, d.data.x.row(i).transpose());
        pbar /= 10000.0;
        EXPECT_NEAR(d.data.y.mean(), pbar, 3.0 * std::sqrt(pbar * (1 - pbar) / 10000.0) + 1e-3) << "model " << model;
    }
}

TEST(GenGroupLogistic, Layout) {
    CounterRng rng(78, 0);
    const GroupData m1 = gen_group_logistic(1, 500, rng);
    EXPECT_EQ(m1.data.x.cols(), 15);
    EXPECT_EQ(m1.groups.size(), 5u);
    EXPECT_EQ(m1.true_groups, (IndexSet{0, 3}));
    EXPECT_GE(m1.data.x.minCoeff(), 0.0);
    EXPECT_LE(m1.data.x.maxCoeff(), 1.0);
    const GroupData m3 = gen_group_logistic(3, 5000, rng);
    EXPECT_EQ(m3.data.x.cols(), 12);
    EXPECT_EQ(m3.groups.size(), 4u);
    EXPECT_EQ(m3.true_groups, (IndexSet{0, 2}));
    EXPECT_NEAR(m3.data.x.col(11).mean(), -3.0, 0.05);
    EXPECT_LE(m3.data.x.leftCols(11).maxCoeff(), 3.0);
}

TEST(GenGroupLogistic, ModelThreeDependsOnlyOnTwoCovariates) {
    CounterRng rng(79, 0);
    const GroupData d = gen_group_logistic(3, 200, rng);
    for (Index i = 0; i < 200; ++i) {
        Vector row = d.data.x.row(i).transpose();
        const double p = logistic_probability(3, row);
        for (Index c : {0, 2, 3, 4, 5, 6, 8, 9, 10, 11}) row(c) = d.data.x((i + 17) % 200, c);
        EXPECT_EQ(logistic_probability(3, row), p);
    }
    Vector x = Vector::Zero(12);
    x(1) = 0.5;
    x(7) = 0.5;
    EXPECT_NEAR(logistic_probability(3, x), logistic(36.0), 1e-15);
}

TEST(Scorer, SelfTest) {
    const SelectionScore s = score_selection({2, 5}, {2, 5});
    EXPECT_EQ(s.correct, 2u);
    EXPECT_EQ(s.incorrect, 0u);
    const SelectionScore t = score_selection({0, 5, 9}, {2, 5});
    EXPECT_EQ(t.correct, 1u);
    EXPECT_EQ(t.incorrect, 2u);
}

TEST(RejectionStudy, SingleReplication) {
    SimConfig cfg = SimConfig::for_design("table1");
    cfg.grid = {0.8};
    cfg.replications = 1;
    const SimReport rep = run_study(cfg);
    ASSERT_EQ(rep.rows.size(), 1u);
    EXPECT_TRUE(rep.rows[0].rate == 0.0 || rep.rows[0].rate == 1.0);
    EXPECT_EQ(rep.rows[0].rate_se, 0.0);
}

TEST(RejectionStudy, ReproducibleAcrossJobCounts) {
    SimConfig cfg = SimConfig::for_design("table3");
    cfg.replications = 40;
    cfg.seed = 9;
    const std::string serial = to_csv(run_study(cfg));
    cfg.jobs = 4;
    const std::string parallel = to_csv(run_study(cfg));
    EXPECT_EQ(serial, parallel);
    EXPECT_EQ(to_table(run_study(cfg)), to_table(run_study(cfg)));
    cfg.seed = 10;
    EXPECT_NE(to_csv(run_study(cfg)), serial);
}

TEST(RejectionStudy, RatesAreProportions) {
    SimConfig cfg = SimConfig::for_design("table2");
    cfg.replications = 30;
    const SimReport rep = run_study(cfg);
    ASSERT_EQ(rep.rows.size(), 5u);
    for (const auto& r : rep.rows) {
        EXPECT_GE(r.rate, 0.0);
        EXPECT_LE(r.rate, 1.0);
        EXPECT_NEAR(r.rate_se, std::sqrt(r.rate * (1 - r.rate) / static_cast<double>(r.completed)), 1e-15);
    }
    EXPECT_NE(to_csv(rep).find("sign(a)|a|^b"), std::string::npos);
}

TEST(SelectionStudy, BoundsAndReproducibility) {
    SimConfig cfg = SimConfig::for_design("table5", 1);
    cfg.replications = 12;
    const SimReport a = run_study(cfg);
    cfg.jobs = 3;
    const SimReport b = run_study(cfg);
    EXPECT_EQ(to_csv(a), to_csv(b));
    const SimRow& r = a.rows.at(0);
    EXPECT_LE(r.mean_correct, 2.0);
    EXPECT_LE(r.mean_incorrect, 3.0);
    EXPECT_EQ(r.completed + r.failed, 12u);
    EXPECT_NE(to_table(a).find("# npgroup-config: "), std::string::npos);
}

TEST(SimConfig, Validation) {
    EXPECT_THROW(SimConfig::for_design("table7"), ValidationError);
    SimConfig cfg = SimConfig::for_design("table4");
    cfg.model = 4;
    EXPECT_THROW(cfg.validate(), ValidationError);
    cfg = SimConfig::for_design("table1");
    cfg.replications = 0;
    EXPECT_THROW(cfg.validate(), ValidationError);
    cfg = SimConfig::for_design("table1");
    cfg.grid.clear();
    EXPECT_THROW(cfg.validate(), ValidationError);
    EXPECT_EQ(SimConfig::for_design("table5", 3).n, 200u);
    EXPECT_EQ(SimConfig::for_design("table4").n, 100u);
}
