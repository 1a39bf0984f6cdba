#include "netdemand/demand.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <string>

#include "netdemand/errors.hpp"

namespace netdemand {

double DemandState::edge() const { return std::exp(logQ_edge); }

double DemandState::q(int i) const { return std::exp(logq[static_cast<std::size_t>(i)]); }

DemandState init_state(const ModelParams& params) {
    params.validate();
    DemandState s;
    s.logQ_edge = std::log(params.Q_edge0);
    s.logq.resize(params.q0.size());
    for (std::size_t i = 0; i < params.q0.size(); ++i) s.logq[i] = std::log(params.q0[i]);
    s.pi = params.pi0;
    s.t = 0.0;
    return s;
}

double net_demand(const DemandState& state, int k) {
    const int K = state.K();
    if (k < -K || k > K) throw ArgumentError("net_demand: k=" + std::to_string(k) + " outside [-K, K]");
    double Q = state.edge();
    for (int i = 0; i < k + K; ++i) Q -= state.q(i);
    return Q;
}

std::vector<double> curve(const DemandState& state) {
    const int n = 2 * state.K();
    std::vector<double> out(static_cast<std::size_t>(n) + 1);
    out[0] = state.edge();
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i) + 1] = out[static_cast<std::size_t>(i)] - state.q(i);
    return out;
}

BucketPosition locate(int K, double x) {
    if (!(x >= -K - 1e-12 && x <= K + 1e-12)) throw ArgumentError("coordinate outside [-K, K]");
    const double y = std::clamp(x + K, 0.0, 2.0 * K);
    int i = static_cast<int>(std::ceil(y)) - 1;
    i = std::clamp(i, 0, 2 * K - 1);
    return {i, y - i};
}

double net_demand_at(const DemandState& state, double x) {
    const BucketPosition b = locate(state.K(), x);
    double Q = state.edge();
    for (int i = 0; i < b.index; ++i) Q -= state.q(i);
    return Q - b.frac * state.q(b.index);
}

double crossing_offset(const DemandState& state) {
    const int K = state.K();
    const std::vector<double> Q = curve(state);
    if (!(Q.front() > 0.0))
        throw BoundaryBreach(BreachSide::Lower, "net demand at the lower grid edge is not positive");
    if (!(Q.back() < 0.0))
        throw BoundaryBreach(BreachSide::Upper, "net demand at the upper grid edge is not negative");
    for (std::size_t m = 0; m + 1 < Q.size(); ++m) {
        if (Q[m] > 0.0 && Q[m + 1] <= 0.0) return static_cast<double>(m) - K + Q[m] / (Q[m] - Q[m + 1]);
    }
    throw BoundaryBreach(BreachSide::Upper, "no zero crossing on the grid");
}

void check_state(const DemandState& state) {
    for (double lq : state.logq)
        if (!std::isfinite(lq)) throw SimulationFailure("non-finite bucket quantity");
    if (!std::isfinite(state.logQ_edge) || !std::isfinite(state.pi)) throw SimulationFailure("non-finite state");
    crossing_offset(state);
}

Clearing clear(const DemandState& state, const ModelParams& params) {
    const int K = state.K();
    const std::vector<double> Q = curve(state);
    const double xs = crossing_offset(state);
    const double q_first = state.q(0);
    const double q_last = state.q(2 * K - 1);
    // Old curve at node coordinate z, extended linearly past the grid.
    auto old_curve = [&](double z) {
        if (z < -K) return Q.front() + (-K - z) * q_first;
        if (z > K) return Q.back() - (z - K) * q_last;
        return net_demand_at(state, z);
    };
    Clearing c;
    c.offset = xs;
    c.pi = state.pi + xs * params.delta_p;
    c.state = state;
    c.state.pi = c.pi;
    const double edge = old_curve(xs - K);
    if (!(edge > 0.0)) throw BoundaryBreach(BreachSide::Lower, "re-centered edge demand is not positive");
    c.state.logQ_edge = std::log(edge);
    for (int i = 0; i < 2 * K; ++i) {
        const double lo = xs + (i - K);
        const double mass = old_curve(lo) - old_curve(lo + 1.0);
        c.state.logq[static_cast<std::size_t>(i)] = std::log(mass);
    }
    return c;
}

namespace {

// Node coordinate y with Q(y) = x.
double inverse_coordinate(const DemandState& state, double x) {
    const int K = state.K();
    const std::vector<double> Q = curve(state);
    if (!(x <= Q.front() && x >= Q.back()))
        throw UndefinedInverse("inverse: quantity outside [Q(K), Q(-K)]");
    for (std::size_t m = 0; m + 1 < Q.size(); ++m) {
        if (x <= Q[m] && x >= Q[m + 1]) {
            const double drop = Q[m] - Q[m + 1];
            const double frac = drop > 0.0 ? (Q[m] - x) / drop : 0.0;
            return static_cast<double>(m) - K + frac;
        }
    }
    return K;
}

}  // namespace

double inverse(const DemandState& state, const ModelParams& params, double x) {
    return state.pi + inverse_coordinate(state, x) * params.delta_p;
}

double liquidation_proceeds(const DemandState& state, const ModelParams& params, double theta) {
    if (theta == 0.0) return 0.0;
    const std::vector<double> Q = curve(state);
    const double lo = std::min(0.0, theta);
    const double hi = std::max(0.0, theta);
    if (!(hi <= Q.front() && lo >= Q.back())) throw UndefinedInverse("liquidation: quantity outside the curve");
    std::vector<double> cuts{lo, hi};
    for (double v : Q)
        if (v > lo && v < hi) cuts.push_back(v);
    std::sort(cuts.begin(), cuts.end());
    auto P = [&](double x) { return inverse(state, params, x); };
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        if (cuts[i + 1] <= cuts[i]) continue;
        total += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(P, cuts[i], cuts[i + 1], 15, 1e-9);
    }
    return theta > 0.0 ? total : -total;
}

void cumulative_noise(const DemandState& state, const ModelParams& params, double x, Eigen::Ref<Eigen::VectorXd> out) {
    const BucketPosition b = locate(state.K(), x);
    out = (params.sigma_Q_rel * state.edge()) * params.edge_loading;
    for (int i = 0; i < b.index; ++i)
        out += (params.sigma_q_rel[static_cast<std::size_t>(i)] * state.q(i)) * params.loadings.row(i).transpose();
    if (b.frac > 0.0)
        out += (b.frac * params.sigma_q_rel[static_cast<std::size_t>(b.index)] * state.q(b.index)) *
               params.loadings.row(b.index).transpose();
}

Eigen::VectorXd cumulative_noise(const DemandState& state, const ModelParams& params, double x) {
    Eigen::VectorXd out(params.buckets());
    cumulative_noise(state, params, x, out);
    return out;
}

LevelDrifts level_drifts(const DemandState& state, const ModelParams& params) {
    LevelDrifts d;
    const double E = state.edge();
    d.edge = E * (-params.a_Q0 * (state.logQ_edge - params.mean_logQ0) + 0.5 * params.sigma_Q_rel * params.sigma_Q_rel);
    d.buckets.resize(state.logq.size());
    for (std::size_t i = 0; i < state.logq.size(); ++i) {
        const double s = params.sigma_q_rel[i];
        d.buckets[i] = std::exp(state.logq[i]) * (-params.a_q[i] * (state.logq[i] - params.mean_logq[i]) + 0.5 * s * s);
    }
    return d;
}

InverseDynamics inverse_dynamics_coeffs(const DemandState& state, const ModelParams& params, double x) {
    const int K = state.K();
    const double dp = params.delta_p;
    const double y = inverse_coordinate(state, x);
    const LevelDrifts drifts = level_drifts(state, params);

    auto sigma_Q = [&](double z) { return cumulative_noise(state, params, z).norm() * std::sqrt(dp); };
    auto mu_Q = [&](double z) {
        const BucketPosition b = locate(K, z);
        double mu = drifts.edge;
        for (int i = 0; i < b.index; ++i) mu -= drifts.buckets[static_cast<std::size_t>(i)];
        return mu - b.frac * drifts.buckets[static_cast<std::size_t>(b.index)];
    };
    // Stencil centre shifted inward at the grid edges.
    const double c = std::clamp(y, -K + 1.0, K - 1.0);
    const double lo = std::max(c - 1.0, -static_cast<double>(K));
    const double hi = std::min(c + 1.0, static_cast<double>(K));
    const double Q_p = (net_demand_at(state, hi) - net_demand_at(state, lo)) / ((hi - lo) * dp);
    double Q_pp = 0.0;
    if (hi - lo == 2.0)
        Q_pp = (net_demand_at(state, hi) - 2.0 * net_demand_at(state, c) + net_demand_at(state, lo)) / (dp * dp);
    const double dsigma = (sigma_Q(hi) - sigma_Q(lo)) / ((hi - lo) * dp);

    if (!(std::abs(Q_p) > std::numeric_limits<double>::min()) || !std::isfinite(Q_p))
        throw LiquiditySingularity("inverse dynamics: vanishing dQ/dp");

    const Eigen::VectorXd N = cumulative_noise(state, params, y);
    const double sQ = N.norm() * std::sqrt(dp);
    InverseDynamics out;
    out.sigma_P = -sQ / Q_p;
    out.b_P = sQ > 0.0 ? Eigen::VectorXd(-N / sQ) : Eigen::VectorXd::Zero(N.size());
    out.mu_P = -(mu_Q(y) + 0.5 * Q_pp * out.sigma_P * out.sigma_P + dsigma * out.sigma_P) / Q_p;
    return out;
}

double jump_penalty(const DemandState& state, const ModelParams& params, double theta_from, double theta_to) {
    if (theta_from == theta_to) return 0.0;
    const double L_to = liquidation_proceeds(state, params, theta_to);
    const double L_from = liquidation_proceeds(state, params, theta_from);
    return (L_to - L_from) - (theta_to - theta_from) * inverse(state, params, theta_to);
}

WealthTerms wealth_increment(const DemandState& before, const DemandState& after, const ModelParams& params,
                             const ThetaSegment& seg) {
    WealthTerms w{};
    const double theta = seg.theta_start;
    w.proceeds_change = liquidation_proceeds(after, params, theta) - liquidation_proceeds(before, params, theta);
    if (seg.quadratic_variation != 0.0) {
        const double y = inverse_coordinate(before, theta);
        const BucketPosition b = locate(before.K(), y);
        const double slope = params.delta_p / before.q(b.index);  // |dP/dx|
        w.qv_correction = -0.5 * slope * seg.quadratic_variation;
    }
    if (seg.jump) w.jump_penalty = jump_penalty(after, params, seg.theta_start, seg.theta_end);
    w.total = w.proceeds_change + w.qv_correction - w.jump_penalty;
    return w;
}

namespace {

bool same_logs(const DemandState& s, const std::vector<double>& logs) {
    if (logs.size() != s.logq.size() + 1) return false;
    return std::equal(s.logq.begin(), s.logq.end(), logs.begin()) && logs.back() == s.logQ_edge;
}

void store_levels(const DemandState& s, StepWorkspace& ws) {
    ws.logs.assign(s.logq.begin(), s.logq.end());
    ws.logs.push_back(s.logQ_edge);
    ws.levels.resize(ws.logs.size());
    for (std::size_t i = 0; i < ws.logs.size(); ++i) ws.levels[i] = std::exp(ws.logs[i]);
}

}  // namespace

std::span<const double> levels(const DemandState& state, StepWorkspace& ws) {
    if (!same_logs(state, ws.logs)) store_levels(state, ws);
    return ws.levels;
}

void advance(DemandState& s, const ModelParams& p, std::span<const double> dW, double dt,
             std::span<const double> lambda, double pi_drift_per_hour, StepWorkspace& ws) {
    const int n = p.buckets();
    if (!(dt > 0.0)) throw ArgumentError("step: dt must be positive");
    if (static_cast<int>(dW.size()) != n) throw ArgumentError("step: increment length mismatch");
    if (!lambda.empty() && static_cast<int>(lambda.size()) != n) throw ArgumentError("step: lambda length mismatch");
    const double dp = p.delta_p;
    const double sdp = std::sqrt(dp);

    if (ws.cached_dt != dt || static_cast<int>(ws.decay.size()) != n + 1) {
        ws.decay.resize(static_cast<std::size_t>(n) + 1);
        ws.spread.resize(static_cast<std::size_t>(n) + 1);
        ws.growth.resize(static_cast<std::size_t>(n) + 1);
        auto fill = [&](std::size_t slot, double a) {
            if (a * dt < 1e-12) {
                ws.decay[slot] = 1.0;
                ws.growth[slot] = dt;
                ws.spread[slot] = std::sqrt(dt);
            } else {
                ws.decay[slot] = std::exp(-a * dt);
                ws.growth[slot] = -std::expm1(-a * dt) / a;
                ws.spread[slot] = std::sqrt(-std::expm1(-2.0 * a * dt) / (2.0 * a));
            }
        };
        for (int i = 0; i < n; ++i) fill(static_cast<std::size_t>(i), p.a_q[static_cast<std::size_t>(i)]);
        fill(static_cast<std::size_t>(n), p.a_Q0);
        ws.cached_dt = dt;
    }

    // Clearing-price noise from the volatility identity at the current state:
    // dpi = -(delta_p / q_clear) sum_j N_j(0) sqrt(delta_p) dW_j.
    const int c = locate(p.K, 0.0).index;
    const std::span<const double> lv = levels(s, ws);
    ws.noise.resize(n);
    ws.noise = (p.sigma_Q_rel * lv[static_cast<std::size_t>(n)]) * p.edge_loading;
    for (int i = 0; i <= c; ++i)
        ws.noise.noalias() += (p.sigma_q_rel[static_cast<std::size_t>(i)] * lv[static_cast<std::size_t>(i)]) *
                              p.loadings.row(i).transpose();
    const double q_clear = lv[static_cast<std::size_t>(c)];
    double dpi = 0.0;
    for (int j = 0; j < n; ++j) dpi += ws.noise(j) * dW[static_cast<std::size_t>(j)];
    dpi *= -sdp * dp / q_clear;

    const double sqrt_dt = std::sqrt(dt);
    // Exact OU in logs with a constant extra drift g:
    // x' = m + (x - m)e^{-a dt} + g(1 - e^{-a dt})/a + sigma sqrt((1 - e^{-2a dt})/(2a)) Z.
    auto ou = [&](double& x, double mean, double sigma, double xi, double g, std::size_t slot) {
        x = mean + (x - mean) * ws.decay[slot] + g * ws.growth[slot] + sigma * ws.spread[slot] * (xi / sqrt_dt);
    };

    for (int i = 0; i < n; ++i) {
        const auto row = p.loadings.row(i);
        double xi = 0.0;
        double shift = 0.0;
        for (int j = 0; j < n; ++j) {
            xi += row(j) * dW[static_cast<std::size_t>(j)];
            if (!lambda.empty()) shift += row(j) * lambda[static_cast<std::size_t>(j)];
        }
        const auto ui = static_cast<std::size_t>(i);
        const double sigma = p.sigma_q_rel[ui];
        ou(s.logq[ui], p.mean_logq[ui], sigma, xi * sdp, -sigma * shift * dp, ui);
    }
    {
        double xi = 0.0;
        double shift = 0.0;
        for (int j = 0; j < n; ++j) {
            xi -= p.edge_loading(j) * dW[static_cast<std::size_t>(j)];
            if (!lambda.empty()) shift -= p.edge_loading(j) * lambda[static_cast<std::size_t>(j)];
        }
        ou(s.logQ_edge, p.mean_logQ0, p.sigma_Q_rel, xi * sdp, -p.sigma_Q_rel * shift * dp,
           static_cast<std::size_t>(n));
    }
    s.pi += dpi + pi_drift_per_hour * dt;
    s.t += dt;

    store_levels(s, ws);
    double upper = ws.levels.back();
    for (int i = 0; i < n; ++i) upper -= ws.levels[static_cast<std::size_t>(i)];
    if (!std::isfinite(upper) || !std::isfinite(s.pi)) throw SimulationFailure("non-finite state after step");
    if (!(upper < 0.0)) throw BoundaryBreach(BreachSide::Upper, "net demand at the upper grid edge is not negative");
}

DemandState step_physical(const DemandState& state, const ModelParams& params, const FactorIncrements& inc,
                          double dt) {
    DemandState next = state;
    StepWorkspace ws;
    advance(next, params, inc.dW, dt, {}, params.drift_c / params.bar_hours, ws);
    return next;
}

}  // namespace netdemand
