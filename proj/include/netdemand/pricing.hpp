#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "netdemand/params.hpp"
#include "netdemand/risk_neutral.hpp"

namespace netdemand {

struct PricingRequest {
    std::vector<double> strikes;
    double expiry_years = 0.02;
    std::size_t paths = 10000;
    double dt_years = 1.0 / (kTradingDaysPerYear * 390.0);  // one-minute bar
    std::uint64_t seed = 1;
    double rate = 0.0;
    int mpr_every = 1;  // re-solve the MPR system every this many steps
    Curvature curvature = Curvature::PiecewiseLinear;
    unsigned threads = 0;  // 0: hardware concurrency

    void validate() const;
    std::size_t steps() const;
    double dt_hours() const;
};

struct Terminals {
    std::vector<double> values;  // completed paths only, in path order
    std::size_t aborted = 0;
    std::size_t breach_lower = 0;
    std::size_t breach_upper = 0;
    double max_residual_ratio = 0.0;  // max over steps of |Sigma lambda - b| / |b|
    double max_condition = 0.0;
};

Terminals simulate_terminals(const ModelParams& params, const PricingRequest& req);

struct PriceEstimate {
    double price;
    double std_error;
};

PriceEstimate call_price(const std::vector<double>& terminals, double strike, double discount = 1.0);
PriceEstimate put_price(const std::vector<double>& terminals, double strike, double discount = 1.0);

double black_scholes_call(double spot, double strike, double sigma, double T, double rate);

// Undefined below intrinsic value or at/above spot.
std::optional<double> implied_vol(double price, double spot, double strike, double T, double rate);

struct OptionQuote {
    double strike;
    double price;
    double std_error;
    std::optional<double> implied_vol;
};

struct SmileTable {
    std::vector<OptionQuote> quotes;
    std::size_t aborted = 0;
    std::size_t completed = 0;
    double mean_terminal = 0.0;
    double terminal_std_error = 0.0;
};

SmileTable smile(const ModelParams& params, const PricingRequest& req);
SmileTable quote_strikes(const Terminals& terminals, const ModelParams& params, const PricingRequest& req);

}  // namespace netdemand
