#pragma once

#include <Eigen/Dense>
#include <limits>

#include "netdemand/demand.hpp"

namespace netdemand {

struct PriceVol {
    double sigma_pi = 0.0;  // currency per sqrt(hour)
    Eigen::VectorXd b_pi;   // sum_j b_pi(j)^2 delta_p = 1 unless sigma_pi = 0
};

// Volatility identity at fractional node coordinate x (0 is the clearing price).
PriceVol price_vol_at(const DemandState& state, const ModelParams& params, double x);
PriceVol price_vol(const DemandState& state, const ModelParams& params);

// Direct form: delta_p * |N| / q(clearing bucket), without building b_pi.
double sigma_pi_direct(const DemandState& state, const ModelParams& params, double x = 0.0);

// Second derivative of F at the clearing price.  Smoothed takes a central
// difference of the bucket densities; PiecewiseLinear uses the exact
// curvature of the piecewise-linear curve inside the clearing bucket (zero).
enum class Curvature { Smoothed, PiecewiseLinear };

struct DriftPieces {
    double F_pi = 0.0;
    double F_pipi = 0.0;
    double C_term = 0.0;
    Eigen::VectorXd H;
};

DriftPieces drift_pieces(const DemandState& state, const ModelParams& params,
                         Curvature curvature = Curvature::Smoothed);

inline constexpr double kMaxCondition = 1e12;

struct MprSystem {
    Eigen::MatrixXd Sigma;  // row i: hypothetical clearing node, column j: factor
    Eigen::VectorXd b;
    Eigen::VectorXd lambda;
    double residual_norm = std::numeric_limits<double>::quiet_NaN();
    double condition = std::numeric_limits<double>::quiet_NaN();
    bool solved = false;
};

MprSystem build_mpr_system(const DemandState& state, const ModelParams& params,
                           Curvature curvature = Curvature::Smoothed);

// Throws NoUniqueMpr when the estimated condition number exceeds kMaxCondition.
MprSystem solve_mpr(MprSystem system);

DemandState step_risk_neutral(const DemandState& state, const ModelParams& params, const Eigen::VectorXd& lambda,
                              const FactorIncrements& inc, double dt);

// Allocation-free assemble/solve/step loop for Monte Carlo paths.  Storage
// is bounded at compile time, which limits the grid to kMaxFactors buckets.
class RiskNeutralStepper {
public:
    static constexpr int kMaxFactors = 64;
    using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxFactors, kMaxFactors>;
    using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxFactors, 1>;

public:
    RiskNeutralStepper(const ModelParams& params, Curvature curvature);

    // Builds and solves the MPR system for the state; result kept for step().
    // A model with every volatility at zero gets lambda = 0.
    void solve(const DemandState& state);
    void step(DemandState& state, std::span<const double> dW, double dt);

    const Vector& lambda() const { return lambda_; }
    const Matrix& Sigma() const { return Sigma_; }
    const Vector& rhs() const { return b_; }
    double residual_norm() const { return residual_; }
    double condition() const { return condition_; }

private:
    bool solve_structured(std::span<const double> lv);

    const ModelParams& params_;
    Curvature curvature_;
    Matrix Sigma_;
    Vector b_;
    Vector lambda_;
    Vector work_;
    Eigen::PartialPivLU<Matrix> lu_;
    StepWorkspace ws_;
    double residual_ = 0.0;
    double condition_ = 1.0;
    bool noiseless_ = false;

    // Inverse of the loading matrix, set when it is well conditioned.
    bool structured_ = false;
    Matrix Binv_;
    Matrix Sinv_;
    Vector d_;
    Vector v_;
    Vector vA_;
};

}  // namespace netdemand
