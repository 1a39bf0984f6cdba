#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "netdemand/params.hpp"
#include "netdemand/sheet.hpp"

namespace netdemand {

// Relative net-demand curve.  Node k in [-K, K] sits at price pi + k*delta_p;
// bucket k spans nodes (k-1, k].
struct DemandState {
    double logQ_edge = 0.0;
    std::vector<double> logq;
    double pi = 0.0;
    double t = 0.0;  // hours

    int K() const { return static_cast<int>(logq.size() / 2); }
    double edge() const;
    double q(int i) const;
};

DemandState init_state(const ModelParams& params);

// Q(k) = Q(-K) - sum_{l=-K+1..k} q(l).
double net_demand(const DemandState& state, int k);
// Piecewise-linear curve at fractional node coordinate x in [-K, K].
double net_demand_at(const DemandState& state, double x);
// Node values for k = -K..K.
std::vector<double> curve(const DemandState& state);

struct BucketPosition {
    int index;    // bucket array index
    double frac;  // filled fraction of that bucket, in [0, 1]
};
BucketPosition locate(int K, double x);

// Fractional node coordinate where the curve crosses zero.
double crossing_offset(const DemandState& state);

struct Clearing {
    double pi;
    double offset;
    DemandState state;
};

// Re-centers the curve on its zero crossing.
Clearing clear(const DemandState& state, const ModelParams& params);

double inverse(const DemandState& state, const ModelParams& params, double x);
double liquidation_proceeds(const DemandState& state, const ModelParams& params, double theta);

// Noise loading of Q(x): dQ(x) carries -sum_j N_j(x) sqrt(delta_p) dW_j.
void cumulative_noise(const DemandState& state, const ModelParams& params, double x, Eigen::Ref<Eigen::VectorXd> out);
Eigen::VectorXd cumulative_noise(const DemandState& state, const ModelParams& params, double x);

// Physical-measure drifts of the levels via Ito on the log-OU dynamics.
struct LevelDrifts {
    double edge;
    std::vector<double> buckets;
};
LevelDrifts level_drifts(const DemandState& state, const ModelParams& params);

struct InverseDynamics {
    double mu_P;
    double sigma_P;
    Eigen::VectorXd b_P;
};

// Drift, volatility and loading of the relative inverse P(x) at fixed pi.
InverseDynamics inverse_dynamics_coeffs(const DemandState& state, const ModelParams& params, double x);

struct ThetaSegment {
    double theta_start = 0.0;
    double theta_end = 0.0;
    bool jump = false;                 // theta_end reached by a jump at the end of the segment
    double quadratic_variation = 0.0;  // continuous part of [theta] over the segment
};

struct WealthTerms {
    double proceeds_change;
    double qv_correction;
    double jump_penalty;
    double total;
};

double jump_penalty(const DemandState& state, const ModelParams& params, double theta_from, double theta_to);
WealthTerms wealth_increment(const DemandState& before, const DemandState& after, const ModelParams& params,
                             const ThetaSegment& segment);

DemandState step_physical(const DemandState& state, const ModelParams& params, const FactorIncrements& inc,
                          double dt);

// Monotonicity and positivity check; throws BoundaryBreach if the curve no
// longer crosses zero inside the grid.
void check_state(const DemandState& state);

}  // namespace netdemand

namespace netdemand {

// Scratch space for repeated stepping without allocation.
struct StepWorkspace {
    Eigen::VectorXd noise;
    std::vector<double> decay;
    std::vector<double> spread;
    std::vector<double> growth;
    double cached_dt = -1.0;
    std::vector<double> logs;    // state the levels below belong to
    std::vector<double> levels;  // bucket levels, then the edge level
};

// exp of every log coordinate (buckets, then edge), reused while the state is unchanged.
std::span<const double> levels(const DemandState& state, StepWorkspace& ws);

// One exact log-OU step of every coordinate.  Increments dW are taken under
// the measure being simulated; a non-empty lambda adds the Girsanov drift
// -sigma * sum_j b(j) lambda_j delta_p to each log coordinate.  The clearing
// price moves by its volatility-identity noise plus pi_drift_per_hour * dt.
void advance(DemandState& state, const ModelParams& params, std::span<const double> dW, double dt,
             std::span<const double> lambda, double pi_drift_per_hour, StepWorkspace& ws);

}  // namespace netdemand
