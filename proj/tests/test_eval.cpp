#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "bbip/bbip.hpp"
#include "test_support.hpp"

namespace bbip {
namespace {

double pearson_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0.0;
    double mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i] / n;
        mb += b[i] / n;
    }
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

TEST(Metrics, MeanSquaredError) {
    const Eigen::MatrixXd a = (Eigen::MatrixXd(2, 2) << 1, 2, 3, 4).finished();
    const Eigen::MatrixXd b = (Eigen::MatrixXd(2, 2) << 1, 0, 3, 7).finished();
    EXPECT_DOUBLE_EQ(mse(a, b), (4.0 + 9.0) / 4.0);
    EXPECT_THROW((void)mse(a, Eigen::MatrixXd::Zero(2, 3)), DomainError);
}

TEST(Metrics, PearsonMatchesDirectFormula) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> a(40);
        std::vector<double> b(40);
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = n(rng);
            b[i] = 0.5 * a[i] + n(rng);
        }
        const Eigen::Map<const Eigen::VectorXd> ea(a.data(), 40);
        const Eigen::Map<const Eigen::VectorXd> eb(b.data(), 40);
        EXPECT_NEAR(pearson(ea, eb), pearson_oracle(a, b), 1e-12);
    }
    EXPECT_EQ(pearson(Eigen::VectorXd::Constant(5, 2.0), Eigen::VectorXd::LinSpaced(5, 0, 1)), 0.0);
}

TEST(Metrics, MeanAndStandardError) {
    const std::vector<double> v{1.0, 2.0, 4.0, 7.0};
    const auto [mean, se] = mean_and_stderr(v);
    EXPECT_DOUBLE_EQ(mean, 3.5);
    // Sample variance (6.25 + 2.25 + 0.25 + 12.25) / 3 = 7.
    EXPECT_NEAR(se, std::sqrt(7.0) / 2.0, 1e-15);
    EXPECT_EQ(mean_and_stderr(std::vector<double>{3.0}).second, 0.0);
}

TEST(Lag, RecoversAKnownShift) {
    std::mt19937_64 rng(2);
    const Eigen::MatrixXd base = testing::random_normal(2, 212, rng);
    // Random walks so the correlation peak is sharp and unique.
    Eigen::MatrixXd walk = base;
    for (Eigen::Index t = 1; t < walk.cols(); ++t) walk.col(t) = 0.8 * walk.col(t - 1) + base.col(t);
    const Eigen::MatrixXd human = walk.rightCols(200);
    const Eigen::MatrixXd robot = walk.leftCols(200);  // robot[t + 12] == human[t]
    const auto lag = correlation_lag(human, robot, 30, 120.0);
    EXPECT_EQ(lag.lag_samples, 12u);
    EXPECT_DOUBLE_EQ(lag.lag_seconds, 0.1);
    EXPECT_NEAR(lag.max_total_correlation, 2.0, 1e-6);
    EXPECT_EQ(lag.curve.size(), 31u);
}

TEST(Lag, CurveEntriesAreSumsOfOverlapCorrelations) {
    std::mt19937_64 rng(3);
    const Eigen::MatrixXd human = testing::random_normal(2, 50, rng);
    const Eigen::MatrixXd robot = testing::random_normal(2, 50, rng);
    const auto lag = correlation_lag(human, robot, 10, 100.0);
    for (std::size_t l = 0; l <= 10; ++l) {
        double total = 0.0;
        for (Eigen::Index p = 0; p < 2; ++p) {
            std::vector<double> a;
            std::vector<double> b;
            for (std::size_t t = 0; t + l < 50; ++t) {
                a.push_back(human(p, static_cast<Eigen::Index>(t)));
                b.push_back(robot(p, static_cast<Eigen::Index>(t + l)));
            }
            total += pearson_oracle(a, b);
        }
        EXPECT_NEAR(lag.curve[l], total, 1e-12);
    }
}

TEST(Lag, TiesResolveToTheSmallestLagAndAveragingRetakesTheArgmax) {
    const auto r = lag_from_curve({0.5, 0.9, 0.9, 0.1}, 10.0);
    EXPECT_EQ(r.lag_samples, 1u);
    const std::vector<LagResult> parts{lag_from_curve({1.0, 0.0, 0.0}, 10.0), lag_from_curve({0.0, 0.0, 1.5}, 10.0)};
    const auto avg = average_lag(parts, 10.0);
    EXPECT_EQ(avg.lag_samples, 2u);
    EXPECT_DOUBLE_EQ(avg.max_total_correlation, 0.75);
    EXPECT_THROW((void)correlation_lag(Eigen::MatrixXd::Zero(1, 10), Eigen::MatrixXd::Zero(1, 10), 5, 1.0), DomainError);
}

// Small classes keep every demonstration; outlier rejection is covered elsewhere.
TrainConfig keep_all() {
    TrainConfig cfg;
    cfg.reject_outliers = false;
    return cfg;
}

// Identical constant demonstrations: every member equals the mean, the gain is
// zero, and the unregularized fit reproduces the constants.
std::vector<Demonstration> constant_corpus(std::size_t count) {
    const auto layout = synthetic_layout(3, 2);
    Eigen::MatrixXd v(5, 60);
    for (Eigen::Index d = 0; d < 5; ++d) v.row(d).setConstant(0.3 * static_cast<double>(d) - 0.4);
    return std::vector<Demonstration>(count, Demonstration(v, layout));
}

TEST(Corpus, ExactReproductionScoresZero) {
    TrainConfig cfg;
    cfg.basis.ridge = 0.0;
    cfg.process_noise = ProcessNoise{0.0, 0.0, 0.0};
    const auto demos = constant_corpus(4);
    const auto model = train(single_class(demos), cfg);
    const auto report = run_corpus(model, demos);
    ASSERT_EQ(report.per_demo_mse.size(), 4u);
    EXPECT_LT(report.mean_mse, 1e-20);
    EXPECT_EQ(report.stderr_mse, 0.0);
}

TEST(Corpus, IdenticalTestDemosHaveZeroStandardError) {
    const auto train_set = testing::small_corpus(2, 4, 10, 0.01);
    const auto model = train(group_by_label(train_set.demos), keep_all());
    const std::vector<Demonstration> test(5, train_set.demos[1]);
    const auto report = run_corpus(model, test, CorpusProtocol{3});
    EXPECT_GT(report.mean_mse, 0.0);
    EXPECT_EQ(report.stderr_mse, 0.0);
}

TEST(Corpus, FailuresAreRecordedNotThrown) {
    const auto train_set = testing::small_corpus(2, 4, 11, 0.01);
    const auto model = train(group_by_label(train_set.demos), keep_all());
    std::vector<Demonstration> test{train_set.demos[0], train_set.demos[5]};
    test.insert(test.begin() + 1, Demonstration(train_set.demos[2].values(), DofLayout::from_roles("ccooo")));
    const auto report = run_corpus(model, test);
    ASSERT_EQ(report.failed.size(), 1u);
    EXPECT_EQ(report.failed[0].first, 1u);
    EXPECT_EQ(report.per_demo_mse.size(), 2u);
    const std::vector<NamedReport> named{{"bbip", "test", report}};
    const auto text = format_reports(named, 3);
    EXPECT_NE(text.find("failed = 1"), std::string::npos);
    EXPECT_NE(text.find("failed_demo = 1:"), std::string::npos);
}

TEST(Corpus, InvalidMatchedPairsAreConfigurationErrors) {
    const auto train_set = testing::small_corpus(2, 4, 12, 0.01);
    const auto model = train(group_by_label(train_set.demos), keep_all());
    CorpusProtocol protocol;
    protocol.matched_pairs = {{3, 1}};  // DoF 3 is controlled
    EXPECT_THROW((void)run_corpus(model, train_set.demos, protocol), ConfigError);
}

TEST(Corpus, ResultsDoNotDependOnCorpusOrder) {
    const auto train_set = testing::small_corpus(3, 4, 13, 0.01);
    const auto test_set = testing::small_corpus(3, 3, 14, 0.02, SwitchSpec{0.5, 0.1});
    const auto model = train(group_by_label(train_set.demos), keep_all());
    CorpusProtocol protocol;
    protocol.seed = 99;
    protocol.matched_pairs = {{0, 3}, {1, 4}};
    const auto forward = run_corpus(model, test_set.demos, protocol);

    std::vector<Demonstration> reversed(test_set.demos.rbegin(), test_set.demos.rend());
    const auto backward = run_corpus(model, reversed, protocol);
    auto a = forward.per_demo_mse;
    auto b = backward.per_demo_mse;
    std::reverse(b.begin(), b.end());
    EXPECT_EQ(a, b);
    EXPECT_NEAR(forward.mean_mse, backward.mean_mse, 1e-15);
    ASSERT_TRUE(forward.lag && backward.lag);
    EXPECT_EQ(forward.lag->lag_samples, backward.lag->lag_samples);
    EXPECT_EQ(demo_seed(99, test_set.demos[0]), demo_seed(99, reversed.back()));
    EXPECT_NE(demo_seed(99, test_set.demos[0]), demo_seed(100, test_set.demos[0]));
}

TEST(Corpus, ReportTableUsesMeanPlusMinusStderr) {
    EvalReport r;
    r.per_demo_mse = {0.01, 0.03};
    r.mean_mse = 0.02;
    r.stderr_mse = 0.01;
    const std::vector<NamedReport> named{{"bip", "nonswitching", r}};
    const auto text = format_reports(named, 7);
    EXPECT_NE(text.find("bip  nonswitching  0.020 +- 0.010"), std::string::npos) << text;
    EXPECT_NE(text.find("seed = 7"), std::string::npos);
}

}  // namespace
}  // namespace bbip
