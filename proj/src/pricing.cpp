#include "netdemand/pricing.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <thread>

#include "netdemand/errors.hpp"

namespace netdemand {

void PricingRequest::validate() const {
    if (!(expiry_years > 0.0)) throw ArgumentError("expiry must be positive");
    if (paths < 1) throw ArgumentError("at least one path is required");
    if (!(dt_years > 0.0) || dt_years > expiry_years * (1.0 + 1e-12)) throw ArgumentError("dt must be in (0, T]");
    if (mpr_every < 1) throw ArgumentError("mpr_every must be at least 1");
}

std::size_t PricingRequest::steps() const {
    return static_cast<std::size_t>(std::max(1.0, std::round(expiry_years / dt_years)));
}

double PricingRequest::dt_hours() const { return expiry_years * kHoursPerYear / static_cast<double>(steps()); }

namespace {

struct PathResult {
    double terminal = 0.0;
    bool ok = false;
    BreachSide breach = BreachSide::Lower;
    double residual_ratio = 0.0;
    double condition = 0.0;
};

PathResult run_path(const ModelParams& params, const PricingRequest& req, const BrownianSheet& sheet,
                    RiskNeutralStepper& stepper, std::vector<double>& dW, std::uint64_t path) {
    PathResult r;
    DemandState state = init_state(params);
    const std::size_t steps = req.steps();
    const double dt = req.dt_hours();
    try {
        for (std::size_t k = 0; k < steps; ++k) {
            if (k % static_cast<std::size_t>(req.mpr_every) == 0) {
                stepper.solve(state);
                const double bn = stepper.rhs().norm();
                if (bn > 0.0) r.residual_ratio = std::max(r.residual_ratio, stepper.residual_norm() / bn);
                r.condition = std::max(r.condition, stepper.condition());
            }
            sheet.fill(dt, path, k, dW);
            stepper.step(state, dW, dt);
        }
    } catch (const BoundaryBreach& e) {
        r.breach = e.side;
        return r;
    }
    r.terminal = state.pi;
    r.ok = true;
    return r;
}

}  // namespace

Terminals simulate_terminals(const ModelParams& params, const PricingRequest& req) {
    params.validate();
    req.validate();
    const BrownianSheet sheet({params.buckets(), params.delta_p, req.seed});
    std::vector<PathResult> results(req.paths);

    unsigned threads = req.threads ? req.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, req.paths));
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&](std::size_t begin, std::size_t end) {
        try {
            RiskNeutralStepper stepper(params, req.curvature);
            std::vector<double> dW(static_cast<std::size_t>(params.buckets()));
            for (std::size_t p = begin; p < end; ++p) results[p] = run_path(params, req, sheet, stepper, dW, p);
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    };
    if (threads <= 1) {
        worker(0, req.paths);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (req.paths + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            const std::size_t begin = t * chunk;
            const std::size_t end = std::min(req.paths, begin + chunk);
            if (begin < end) pool.emplace_back(worker, begin, end);
        }
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    // Fixed-order reduction over path index.
    Terminals out;
    out.values.reserve(req.paths);
    for (const auto& r : results) {
        if (r.ok) {
            out.values.push_back(r.terminal);
            out.max_residual_ratio = std::max(out.max_residual_ratio, r.residual_ratio);
            out.max_condition = std::max(out.max_condition, r.condition);
        } else {
            ++out.aborted;
            ++(r.breach == BreachSide::Lower ? out.breach_lower : out.breach_upper);
        }
    }
    if (out.values.empty()) throw SimulationFailure("all Monte Carlo paths breached the price grid");
    return out;
}

namespace {

template <class Payoff>
PriceEstimate mean_and_error(const std::vector<double>& terminals, Payoff payoff, double discount) {
    if (terminals.empty()) throw ArgumentError("no terminal prices");
    const double n = static_cast<double>(terminals.size());
    double mean = 0.0;
    for (double x : terminals) mean += payoff(x);
    mean /= n;
    double ss = 0.0;
    for (double x : terminals) {
        const double d = payoff(x) - mean;
        ss += d * d;
    }
    const double se = terminals.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    return {discount * mean, discount * se};
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

PriceEstimate call_price(const std::vector<double>& terminals, double strike, double discount) {
    return mean_and_error(terminals, [strike](double x) { return std::max(x - strike, 0.0); }, discount);
}

PriceEstimate put_price(const std::vector<double>& terminals, double strike, double discount) {
    return mean_and_error(terminals, [strike](double x) { return std::max(strike - x, 0.0); }, discount);
}

double black_scholes_call(double spot, double strike, double sigma, double T, double rate) {
    const double df = std::exp(-rate * T);
    if (sigma <= 0.0 || T <= 0.0) return std::max(spot - strike * df, 0.0);
    const double v = sigma * std::sqrt(T);
    const double d1 = (std::log(spot / strike) + (rate + 0.5 * sigma * sigma) * T) / v;
    return spot * norm_cdf(d1) - strike * df * norm_cdf(d1 - v);
}

std::optional<double> implied_vol(double price, double spot, double strike, double T, double rate) {
    if (!(T > 0.0) || !(spot > 0.0) || !(strike > 0.0)) throw ArgumentError("implied_vol: T, spot, strike must be positive");
    const double intrinsic = std::max(spot - strike * std::exp(-rate * T), 0.0);
    if (!std::isfinite(price) || price < intrinsic || price >= spot) return std::nullopt;
    if (price == intrinsic) return 0.0;
    double lo = 1e-6;
    double hi = 5.0;
    if (black_scholes_call(spot, strike, lo, T, rate) >= price) return lo;
    if (black_scholes_call(spot, strike, hi, T, rate) < price) return std::nullopt;
    for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (black_scholes_call(spot, strike, mid, T, rate) > price)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

SmileTable quote_strikes(const Terminals& terminals, const ModelParams& params, const PricingRequest& req) {
    SmileTable table;
    table.aborted = terminals.aborted;
    table.completed = terminals.values.size();
    const double discount = std::exp(-req.rate * req.expiry_years);
    const PriceEstimate forward = call_price(terminals.values, 0.0);
    table.mean_terminal = forward.price;
    table.terminal_std_error = forward.std_error;
    for (double strike : req.strikes) {
        const PriceEstimate e = call_price(terminals.values, strike, discount);
        table.quotes.push_back({strike, e.price, e.std_error,
                                implied_vol(e.price, params.pi0, strike, req.expiry_years, req.rate)});
    }
    return table;
}

SmileTable smile(const ModelParams& params, const PricingRequest& req) {
    if (req.strikes.empty()) throw ArgumentError("smile: no strikes");
    return quote_strikes(simulate_terminals(params, req), params, req);
}

}  // namespace netdemand
