#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "netdemand/errors.hpp"
#include "netdemand/sheet.hpp"

using namespace netdemand;

TEST(Sheet, UnitVarianceIncrements) {
    const BrownianSheet sheet({4, 0.05, 11});
    const int n = 100000;
    std::vector<double> sum(4, 0.0), sq(4, 0.0);
    for (int s = 0; s < n; ++s) {
        const auto inc = sheet.increments(1.0, 0, static_cast<std::uint64_t>(s));
        for (int j = 0; j < 4; ++j) {
            sum[j] += inc.dW[j];
            sq[j] += inc.dW[j] * inc.dW[j];
        }
    }
    for (int j = 0; j < 4; ++j) {
        const double mean = sum[j] / n;
        const double var = sq[j] / n - mean * mean;
        EXPECT_GE(var, 0.99);
        EXPECT_LE(var, 1.01);
    }
}

TEST(Sheet, DeterministicAndKeyed) {
    const BrownianSheet a({14, 0.05, 3}), b({14, 0.05, 3}), c({14, 0.05, 4});
    EXPECT_EQ(a.increments(0.1, 5, 9).dW, b.increments(0.1, 5, 9).dW);
    EXPECT_NE(a.increments(0.1, 5, 9).dW, a.increments(0.1, 5, 10).dW);
    EXPECT_NE(a.increments(0.1, 5, 9).dW, a.increments(0.1, 6, 9).dW);
    EXPECT_NE(a.increments(0.1, 5, 9).dW, c.increments(0.1, 5, 9).dW);
}

TEST(Sheet, SingleFactor) {
    const BrownianSheet sheet({1, 0.05, 1});
    EXPECT_EQ(sheet.increments(0.5).dW.size(), 1u);
}

TEST(Sheet, ArgumentChecks) {
    EXPECT_THROW(BrownianSheet({0, 0.05, 1}), ArgumentError);
    EXPECT_THROW(BrownianSheet({2, 0.0, 1}), ArgumentError);
    const BrownianSheet sheet({2, 0.05, 1});
    EXPECT_THROW(sheet.increments(0.0), ArgumentError);
    EXPECT_THROW(sheet.increments(-1.0), ArgumentError);
    EXPECT_THROW(sheet.sheet_value(1.0, 0.2), ArgumentError);
    const std::vector<double> short_b{1.0};
    EXPECT_THROW(integrate(short_b, sheet.increments(1.0), 0.05), ArgumentError);
}

TEST(Sheet, IntegrateUnitAndZero) {
    const double dp = 0.05;
    const BrownianSheet sheet({3, dp, 2});
    const auto inc = sheet.increments(0.3, 1, 1);
    const std::vector<double> unit{1.0 / std::sqrt(dp), 0.0, 0.0}, zero(3, 0.0);
    EXPECT_NEAR(integrate(unit, inc, dp), inc.dW[0], 1e-15);
    EXPECT_EQ(integrate(zero, inc, dp), 0.0);
}

TEST(Sheet, NormalizedLoadingHasVarianceDt) {
    const double dp = 0.05, dt = 0.25;
    const BrownianSheet sheet({5, dp, 8});
    std::vector<double> b{1, 2, -1, 0.5, 3};
    double norm = 0;
    for (double v : b) norm += v * v * dp;
    for (double& v : b) v /= std::sqrt(norm);
    const int n = 100000;
    double sq = 0;
    for (int s = 0; s < n; ++s) {
        const double x = integrate(b, sheet.increments(dt, 0, static_cast<std::uint64_t>(s)), dp);
        sq += x * x;
    }
    EXPECT_NEAR(sq / n / dt, 1.0, 0.02);
}

TEST(Sheet, IndependentFactors) {
    const BrownianSheet sheet({6, 0.05, 21});
    const int n = 50000;
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(6, 6);
    for (int s = 0; s < n; ++s) {
        const auto inc = sheet.increments(1.0, 2, static_cast<std::uint64_t>(s));
        const Eigen::Map<const Eigen::VectorXd> v(inc.dW.data(), 6);
        acc += v * v.transpose();
    }
    acc /= n;
    for (int i = 0; i < 6; ++i)
        for (int j = i + 1; j < 6; ++j) EXPECT_LT(std::abs(acc(i, j)) / std::sqrt(acc(i, i) * acc(j, j)), 3.0 / std::sqrt(n));
}

TEST(Sheet, BoundaryValues) {
    const BrownianSheet sheet({4, 0.05, 1});
    EXPECT_EQ(sheet.sheet_value(1.0, 0.0, 3), 0.0);
    EXPECT_EQ(sheet.sheet_value(0.0, 0.1, 3), 0.0);
}

TEST(Sheet, CovarianceIsTimesMin) {
    const double t = 0.5;
    const BrownianSheet sheet({8, 0.05, 5});
    const std::vector<std::pair<double, double>> pairs{{0.05, 0.4}, {0.1, 0.3}, {0.2, 0.2}};
    const int n = 20000;
    for (auto [s1, s2] : pairs) {
        double acc = 0;
        for (int p = 0; p < n; ++p)
            acc += sheet.sheet_value(t, s1, static_cast<std::uint64_t>(p)) *
                   sheet.sheet_value(t, s2, static_cast<std::uint64_t>(p));
        const double target = t * std::min(s1, s2);
        EXPECT_NEAR(acc / n, target, 0.05 * target) << s1 << ' ' << s2;
    }
}
