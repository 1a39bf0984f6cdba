#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "netdemand/calibration.hpp"
#include "netdemand/errors.hpp"
#include "netdemand/risk_neutral.hpp"
#include "netdemand/sheet.hpp"
#include "support.hpp"

using namespace netdemand;
using netdemand::testing::flat_params;

namespace {

DemandState random_state(const ModelParams& p, std::mt19937_64& rng) {
    std::normal_distribution<double> z(0.0, 0.3);
    DemandState s = init_state(p);
    for (auto& x : s.logq) x += z(rng);
    s.logQ_edge += z(rng);
    return s;
}

}  // namespace

TEST(PriceVol, LoadingIsNormalized) {
    const ModelParams p = synthetic_params();
    const PriceVol pv = price_vol(init_state(p), p);
    EXPECT_GT(pv.sigma_pi, 0.0);
    EXPECT_NEAR(pv.b_pi.squaredNorm() * p.delta_p, 1.0, 1e-10);
}

TEST(PriceVol, SingleNoisyBucket) {
    ModelParams p = flat_params(3, 1e6, 0.0);
    p.sigma_q_rel[1] = 0.2;
    const PriceVol pv = price_vol(init_state(p), p);
    Eigen::VectorXd unit = p.loadings.row(1).transpose();
    unit /= unit.norm() * std::sqrt(p.delta_p);
    EXPECT_LT((pv.b_pi.cwiseAbs() - unit.cwiseAbs()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(pv.sigma_pi, p.delta_p * 0.2 * 1e6 / 1e6, 1e-15);
}

TEST(PriceVol, DirectFormAgrees) {
    const ModelParams p = reference_params();
    std::mt19937_64 rng(9);
    for (int r = 0; r < 200; ++r) {
        const DemandState s = random_state(p, rng);
        const double a = price_vol(s, p).sigma_pi, b = sigma_pi_direct(s, p);
        ASSERT_NEAR(a, b, 1e-12 * b);
    }
}

TEST(PriceVol, DoublingClearingMassHalvesVol) {
    // Numerator held fixed: sigma*q at the clearing bucket is unchanged.
    ModelParams p = synthetic_params();
    const int c = p.index_of(0);
    const DemandState s = init_state(p);
    const PriceVol before = price_vol(s, p);

    ModelParams p2 = p;
    p2.sigma_q_rel[c] *= 0.5;
    DemandState s2 = s;
    s2.logq[c] += std::log(2.0);
    s2.logQ_edge = std::log(s.edge() + s.q(c));  // keep the other nodes in place
    ModelParams p3 = p2;
    p3.sigma_Q_rel = p.sigma_Q_rel * s.edge() / s2.edge();
    const PriceVol after = price_vol(s2, p3);
    EXPECT_NEAR(after.sigma_pi, 0.5 * before.sigma_pi, 1e-12 * before.sigma_pi);
    EXPECT_LT((after.b_pi - before.b_pi).cwiseAbs().maxCoeff(), 1e-12 * before.b_pi.cwiseAbs().maxCoeff());
}

TEST(PriceVol, LiquiditySingularity) {
    ModelParams p = flat_params(2, 1e6, 0.1);
    DemandState s = init_state(p);
    s.logq[p.index_of(0)] = std::log(1e-9);
    EXPECT_THROW(price_vol(s, p), LiquiditySingularity);
}

TEST(DriftPieces, NoNoise) {
    const ModelParams p = flat_params(3, 1e6, 0.0);
    const DriftPieces d = drift_pieces(init_state(p), p);
    EXPECT_EQ(d.H.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(d.C_term, 0.0);
    EXPECT_DOUBLE_EQ(d.F_pi, -1e6 / 0.05);
}

TEST(DriftPieces, CurvatureFromDensitySlope) {
    const ModelParams p = reference_params();
    const DemandState s = init_state(p);
    const int c = p.index_of(0);
    const double dp = p.delta_p;
    // -dq/dp by a central difference of the density q/dp.
    const double oracle = -((s.q(c + 1) / dp) - (s.q(c - 1) / dp)) / (2.0 * dp);
    EXPECT_NEAR(drift_pieces(s, p, Curvature::Smoothed).F_pipi, oracle, 1e-9 * std::abs(oracle));
    EXPECT_EQ(drift_pieces(s, p, Curvature::PiecewiseLinear).F_pipi, 0.0);
}

TEST(DriftPieces, CorrectionScalesWithVolSquared) {
    ModelParams p = synthetic_params();
    const DemandState s = init_state(p);
    const double C1 = drift_pieces(s, p).C_term;
    for (auto& v : p.sigma_q_rel) v *= 2.0;
    p.sigma_Q_rel *= 2.0;
    EXPECT_NEAR(drift_pieces(s, p).C_term, 4.0 * C1, 1e-12 * std::abs(C1));
}

TEST(Mpr, ZeroNoiseIsSingular) {
    const ModelParams p = flat_params(3, 1e6, 0.0, 0.2);
    const MprSystem sys = build_mpr_system(init_state(p), p);
    EXPECT_EQ(sys.Sigma.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_THROW(solve_mpr(sys), NoUniqueMpr);
}

TEST(Mpr, TwoBucketHandInversion) {
    ModelParams p = flat_params(1, 2e6, 0.0, 0.5);
    p.sigma_Q_rel = 0.03;
    p.sigma_q_rel = {0.1, 0.2};
    p.loadings << 1.0, 0.0, 0.6, 0.8;
    p.loadings /= std::sqrt(p.delta_p);
    p.edge_loading = p.loadings.row(0).transpose();
    DemandState s = init_state(p);
    s.logq[0] += 0.1;
    s.logq[1] -= 0.2;

    // Hand-assembled rows: delta_p * cumulative noise at nodes 0 and 1.
    const double dp = p.delta_p, E = s.edge(), q0 = s.q(0), q1 = s.q(1);
    Eigen::Vector2d r0 = dp * (p.sigma_Q_rel * E * p.edge_loading + 0.1 * q0 * p.loadings.row(0).transpose());
    Eigen::Vector2d r1 = r0 + dp * 0.2 * q1 * p.loadings.row(1).transpose();

    const MprSystem sys = solve_mpr(build_mpr_system(s, p, Curvature::PiecewiseLinear));
    EXPECT_LT((sys.Sigma.row(0).transpose() - r0).cwiseAbs().maxCoeff(), 1e-9 * r0.cwiseAbs().maxCoeff());
    EXPECT_LT((sys.Sigma.row(1).transpose() - r1).cwiseAbs().maxCoeff(), 1e-9 * r1.cwiseAbs().maxCoeff());

    const double det = r0(0) * r1(1) - r0(1) * r1(0);
    const double l0 = (sys.b(0) * r1(1) - r0(1) * sys.b(1)) / det;
    const double l1 = (r0(0) * sys.b(1) - sys.b(0) * r1(0)) / det;
    EXPECT_NEAR(sys.lambda(0), l0, 1e-10 * std::abs(l0));
    EXPECT_NEAR(sys.lambda(1), l1, 1e-10 * std::abs(l1));
}

TEST(Mpr, ReferenceSystemAtStart) {
    const ModelParams p = reference_params();
    for (Curvature c : {Curvature::Smoothed, Curvature::PiecewiseLinear}) {
        const MprSystem sys = solve_mpr(build_mpr_system(init_state(p), p, c));
        EXPECT_EQ(sys.Sigma.rows(), 14);
        EXPECT_TRUE(sys.solved);
        EXPECT_LT(sys.condition, kMaxCondition);
        EXPECT_LE(sys.residual_norm, 1e-10 * sys.b.norm());
    }
}

TEST(Mpr, SolverBasics) {
    MprSystem id;
    id.Sigma = Eigen::MatrixXd::Identity(14, 14);
    id.b = Eigen::VectorXd::Unit(14, 0);
    EXPECT_EQ(solve_mpr(id).lambda, id.b);

    std::mt19937_64 rng(5);
    std::normal_distribution<double> z;
    MprSystem r;
    r.Sigma = Eigen::MatrixXd::Identity(14, 14) * 4.0;
    r.b.resize(14);
    for (int i = 0; i < 14; ++i) {
        r.b(i) = z(rng);
        for (int j = 0; j < 14; ++j) r.Sigma(i, j) += z(rng);
    }
    const MprSystem solved = solve_mpr(r);
    EXPECT_LE(solved.residual_norm, 1e-10 * r.b.norm());

    MprSystem scaled = r;
    scaled.Sigma *= 1e7;
    scaled.b *= 1e7;
    EXPECT_LT((solve_mpr(scaled).lambda - solved.lambda).cwiseAbs().maxCoeff(), 1e-12 * solved.lambda.norm());

    MprSystem bad;
    bad.Sigma = Eigen::MatrixXd::Ones(3, 3);
    bad.b = Eigen::VectorXd::Ones(3);
    EXPECT_THROW(solve_mpr(bad), NoUniqueMpr);
    bad.b = Eigen::VectorXd::Ones(2);
    EXPECT_THROW(solve_mpr(bad), ArgumentError);
}

TEST(RiskNeutralStep, ZeroLambdaMatchesPhysical) {
    ModelParams p = reference_params();
    p.drift_c = 0.0;
    const DemandState s = init_state(p);
    const BrownianSheet sheet({14, 0.05, 3});
    const auto inc = sheet.increments(0.01, 0, 0);
    const DemandState a = step_risk_neutral(s, p, Eigen::VectorXd::Zero(14), inc, 0.01);
    const DemandState b = step_physical(s, p, inc, 0.01);
    EXPECT_EQ(a.logq, b.logq);
    EXPECT_EQ(a.logQ_edge, b.logQ_edge);
    EXPECT_EQ(a.pi, b.pi);
}

TEST(RiskNeutralStep, NoNoiseIsDeterministic) {
    ModelParams p = flat_params(3, 1e6, 0.0, 0.5);
    const DemandState s = init_state(p);
    const Eigen::VectorXd lambda = Eigen::VectorXd::LinSpaced(6, -1.0, 1.0);
    const BrownianSheet sheet({6, 0.05, 3});
    const DemandState a = step_risk_neutral(s, p, lambda, sheet.increments(0.1, 0, 0), 0.1);
    const DemandState b = step_risk_neutral(s, p, lambda, sheet.increments(0.1, 1, 7), 0.1);
    EXPECT_EQ(a.logq, b.logq);
    EXPECT_EQ(a.pi, b.pi);
}

TEST(RiskNeutralStep, StepperMatchesFreeFunctions) {
    const ModelParams p = reference_params();
    const DemandState s = init_state(p);
    RiskNeutralStepper stepper(p, Curvature::Smoothed);
    stepper.solve(s);
    const MprSystem sys = solve_mpr(build_mpr_system(s, p, Curvature::Smoothed));
    EXPECT_LT((stepper.lambda() - sys.lambda).cwiseAbs().maxCoeff(), 1e-9 * sys.lambda.cwiseAbs().maxCoeff());
    // Exact 1-norm condition against the LU estimate, which never exceeds it.
    EXPECT_GE(stepper.condition(), sys.condition * (1.0 - 1e-9));
    EXPECT_LT(stepper.condition(), 3.0 * sys.condition);

    const BrownianSheet sheet({14, 0.05, 8});
    const auto inc = sheet.increments(0.01, 0, 0);
    DemandState a = s;
    stepper.step(a, inc.dW, 0.01);
    const DemandState b = step_risk_neutral(s, p, sys.lambda, inc, 0.01);
    for (int i = 0; i < 14; ++i) EXPECT_NEAR(a.logq[i], b.logq[i], 1e-12);
    EXPECT_NEAR(a.pi, b.pi, 1e-12);
}

TEST(RiskNeutralStep, StructuredSolveMatchesDenseLu) {
    ModelParams p = reference_params();
    std::mt19937_64 rng(21);
    for (int pass = 0; pass < 2; ++pass) {
        // Second pass: a repeated loading row makes B singular while the edge
        // row keeps Sigma regular, so only the dense path can solve it.
        if (pass == 1) p.loadings.row(0) = p.loadings.row(1);
        RiskNeutralStepper stepper(p, Curvature::PiecewiseLinear);
        for (int r = 0; r < 50; ++r) {
            const DemandState s = random_state(p, rng);
            stepper.solve(s);
            const MprSystem sys = solve_mpr(build_mpr_system(s, p, Curvature::PiecewiseLinear));
            ASSERT_LT((stepper.lambda() - sys.lambda).cwiseAbs().maxCoeff(), 1e-8 * sys.lambda.cwiseAbs().maxCoeff());
            ASSERT_LE(stepper.residual_norm(), 1e-10 * sys.b.norm());
        }
    }
}

TEST(RiskNeutralStep, SilentBucketHasNoUniqueMpr) {
    // Two hypothetical clearing nodes then carry the same noise.
    ModelParams p = reference_params();
    p.sigma_q_rel[3] = 0.0;
    RiskNeutralStepper stepper(p, Curvature::PiecewiseLinear);
    EXPECT_THROW(stepper.solve(init_state(p)), NoUniqueMpr);
    EXPECT_THROW(solve_mpr(build_mpr_system(init_state(p), p)), NoUniqueMpr);
}

TEST(RiskNeutralStep, DriftKillsAtEveryNode) {
    // Frozen coefficients: the Q-drift of Q at each node reduces to the
    // curvature and cross-variation terms, identical across rows.
    const ModelParams p = synthetic_params();
    const DemandState s = init_state(p);
    const MprSystem sys = solve_mpr(build_mpr_system(s, p, Curvature::Smoothed));
    const DriftPieces d = drift_pieces(s, p, Curvature::Smoothed);
    const double sig = price_vol(s, p).sigma_pi;
    const double target = -0.5 * d.F_pipi * sig * sig - d.C_term;

    const double dt = 1e-7;
    const DemandState n = step_risk_neutral(s, p, sys.lambda, FactorIncrements{std::vector<double>(14, 0.0)}, dt);
    const auto before = curve(s), after = curve(n);
    // Zero-noise step misses the Ito convexity of each level; add it back.
    double convexity = 0.5 * p.sigma_Q_rel * p.sigma_Q_rel * s.edge();
    for (int i = 0; i < p.buckets(); ++i) {
        convexity -= 0.5 * p.sigma_q_rel[i] * p.sigma_q_rel[i] * s.q(i);
        const double drift = (after[i + 1] - before[i + 1]) / dt + convexity;
        EXPECT_NEAR(drift, target, 1e-4 * s.edge()) << i;
    }
}
