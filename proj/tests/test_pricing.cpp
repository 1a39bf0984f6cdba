#include <gtest/gtest.h>

#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "netdemand/errors.hpp"
#include "netdemand/pricing.hpp"
#include "support.hpp"

using namespace netdemand;
using netdemand::testing::flat_params;

namespace {

// Written against boost's normal law rather than erfc.
double bs_oracle(double S, double K, double sigma, double T, double r) {
    const boost::math::normal_distribution<double> n;
    const double v = sigma * std::sqrt(T);
    const double d1 = (std::log(S / K) + (r + 0.5 * sigma * sigma) * T) / v;
    return S * boost::math::cdf(n, d1) - K * std::exp(-r * T) * boost::math::cdf(n, d1 - v);
}

// Small noisy grid that prices quickly.
ModelParams toy_params() {
    ModelParams p = flat_params(3, 1e6, 0.08, 2.0);
    p.pi0 = 20.0;
    return p;
}

PricingRequest toy_request(std::size_t paths) {
    PricingRequest r;
    r.expiry_years = 0.002;
    r.paths = paths;
    r.seed = 11;
    r.threads = 1;
    return r;
}

}  // namespace

TEST(Request, Validation) {
    PricingRequest r;
    EXPECT_NO_THROW(r.validate());
    EXPECT_EQ(r.steps(), 1966u);
    r.dt_years = 1.0;
    EXPECT_THROW(r.validate(), ArgumentError);
    r = PricingRequest{};
    r.paths = 0;
    EXPECT_THROW(r.validate(), ArgumentError);
    r = PricingRequest{};
    r.expiry_years = 0.0;
    EXPECT_THROW(r.validate(), ArgumentError);
}

TEST(Simulate, NoNoiseKeepsOpeningPrice) {
    const ModelParams p = flat_params(3, 1e6, 0.0, 0.5);
    PricingRequest r = toy_request(20);
    const Terminals t = simulate_terminals(p, r);
    ASSERT_EQ(t.values.size(), 20u);
    for (double v : t.values) EXPECT_EQ(v, p.pi0);
}

TEST(Simulate, SeedAndThreadReproducible) {
    const ModelParams p = toy_params();
    PricingRequest r = toy_request(64);
    const Terminals a = simulate_terminals(p, r);
    const Terminals b = simulate_terminals(p, r);
    r.threads = 3;
    const Terminals c = simulate_terminals(p, r);
    EXPECT_EQ(a.values, b.values);
    EXPECT_EQ(a.values, c.values);
    r.seed = 12;
    EXPECT_NE(simulate_terminals(p, r).values, a.values);
}

TEST(Simulate, ToyMartingale) {
    const ModelParams p = toy_params();
    const Terminals t = simulate_terminals(p, toy_request(4000));
    EXPECT_EQ(t.aborted, 0u);
    const PriceEstimate m = call_price(t.values, 0.0);
    EXPECT_NEAR(m.price, p.pi0, 3.0 * m.std_error);
    EXPECT_LE(t.max_residual_ratio, 1e-10);
    EXPECT_LT(t.max_condition, kMaxCondition);
}

TEST(Simulate, AllPathsBreached) {
    // Upper edge a hair below zero: every path leaves the grid within a few steps.
    ModelParams p = flat_params(1, 1e6, 0.08, 2.0);
    p.Q_edge0 = 2e6 * (1.0 - 1e-9);
    p.mean_logQ0 = std::log(p.Q_edge0);
    PricingRequest r = toy_request(5);
    EXPECT_THROW(simulate_terminals(p, r), SimulationFailure);
}

TEST(Payoff, Identities) {
    const std::vector<double> x{19.5, 20.0, 20.2, 20.9, 21.4};
    double mean = 0;
    for (double v : x) mean += v;
    mean /= x.size();
    EXPECT_NEAR(call_price(x, 0.0).price, mean, 1e-14);
    EXPECT_EQ(call_price(x, 30.0).price, 0.0);
    EXPECT_EQ(call_price(x, 30.0).std_error, 0.0);
    for (double k : {19.0, 20.1, 21.0})
        EXPECT_NEAR(call_price(x, k).price - put_price(x, k).price, mean - k, 1e-13);
    EXPECT_THROW(call_price({}, 1.0), ArgumentError);
}

TEST(BlackScholes, MatchesOracle) {
    for (double sigma : {0.05, 0.2, 0.5})
        for (double K : {18.0, 20.16, 22.0})
            for (double T : {0.02, 0.25})
                EXPECT_NEAR(black_scholes_call(20.16, K, sigma, T, 0.01), bs_oracle(20.16, K, sigma, T, 0.01), 1e-12);
}

TEST(ImpliedVol, RoundTrip) {
    const double S = 20.16;
    for (double sigma : {0.05, 0.2, 0.5})
        for (double m : {0.9, 1.0, 1.1})
            for (double T : {0.02, 0.25}) {
                const double K = S * m;
                // Time value below double resolution of the price: no information left to invert.
                if (bs_oracle(S, K, sigma, T, 0.0) - std::max(S - K, 0.0) < 1e-12 * S) continue;
                const auto iv = implied_vol(bs_oracle(S, K, sigma, T, 0.0), S, K, T, 0.0);
                ASSERT_TRUE(iv.has_value());
                EXPECT_NEAR(*iv, sigma, 1e-6) << sigma << ' ' << m << ' ' << T;
            }
    const auto atm = implied_vol(bs_oracle(S, S, 0.2, 0.02, 0.0), S, S, 0.02, 0.0);
    EXPECT_NEAR(*atm, 0.2, 1e-6);
}

TEST(ImpliedVol, DeepInTheMoneyCollapsesToIntrinsic) {
    const double S = 20.16, K = 0.9 * S;
    const double price = bs_oracle(S, K, 0.05, 0.02, 0.0);
    EXPECT_EQ(price, S - K);
    EXPECT_EQ(implied_vol(price, S, K, 0.02, 0.0), 0.0);
}

TEST(ImpliedVol, Boundaries) {
    EXPECT_EQ(implied_vol(1.0, 21.0, 20.0, 0.02, 0.0), 0.0);
    EXPECT_FALSE(implied_vol(0.99, 21.0, 20.0, 0.02, 0.0).has_value());
    EXPECT_FALSE(implied_vol(21.0, 21.0, 20.0, 0.02, 0.0).has_value());
    EXPECT_FALSE(implied_vol(std::nan(""), 21.0, 20.0, 0.02, 0.0).has_value());
    EXPECT_THROW(implied_vol(1.0, 21.0, 20.0, 0.0, 0.0), ArgumentError);
    EXPECT_THROW(implied_vol(1.0, -1.0, 20.0, 0.02, 0.0), ArgumentError);
}

TEST(Smile, SingleAtmQuote) {
    const ModelParams p = toy_params();
    PricingRequest r = toy_request(200);
    r.strikes = {p.pi0};
    const SmileTable t = smile(p, r);
    ASSERT_EQ(t.quotes.size(), 1u);
    EXPECT_TRUE(t.quotes[0].implied_vol.has_value());
    r.strikes.clear();
    EXPECT_THROW(smile(p, r), ArgumentError);
}

TEST(Smile, MonotoneConvexUnderCommonSample) {
    const ModelParams p = toy_params();
    PricingRequest r = toy_request(500);
    for (double k = 19.6; k <= 20.4; k += 0.05) r.strikes.push_back(k);
    const SmileTable t = smile(p, r);
    for (std::size_t i = 1; i < t.quotes.size(); ++i) EXPECT_LE(t.quotes[i].price, t.quotes[i - 1].price);
    for (std::size_t i = 1; i + 1 < t.quotes.size(); ++i)
        EXPECT_GE(t.quotes[i - 1].price - 2 * t.quotes[i].price + t.quotes[i + 1].price, -1e-12);
    for (const auto& q : t.quotes) EXPECT_GE(q.price, std::max(p.pi0 - q.strike, 0.0) - 3 * q.std_error);
}

TEST(Smile, StandardErrorScaling) {
    const ModelParams p = toy_params();
    const double K = p.pi0;
    const Terminals small = simulate_terminals(p, toy_request(100));
    const Terminals big = simulate_terminals(p, toy_request(10000));
    const double ratio = call_price(small.values, K).std_error / call_price(big.values, K).std_error;
    EXPECT_GT(ratio, 7.0);
    EXPECT_LT(ratio, 13.0);
}
