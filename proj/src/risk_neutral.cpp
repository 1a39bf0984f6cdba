#include "netdemand/risk_neutral.hpp"

#include <algorithm>
#include <cmath>

#include "netdemand/errors.hpp"

namespace netdemand {

namespace {

void require_liquidity(double q, double total) {
    if (!(q > 1e-12 * total) || !std::isfinite(q))
        throw LiquiditySingularity("order density at the clearing bucket is not bounded away from zero");
}

double clearing_mass(const DemandState& state, int index) {
    const double q = state.q(index);
    double total = state.edge();
    for (double lq : state.logq) total += std::exp(lq);
    require_liquidity(q, total);
    return q;
}

double curvature_of(const DemandState& state, const ModelParams& params, int c, Curvature curvature) {
    if (curvature == Curvature::PiecewiseLinear) return 0.0;
    const int n = params.buckets();
    const double dp = params.delta_p;
    const int lo = c > 0 ? c - 1 : c;
    const int hi = c + 1 < n ? c + 1 : c;
    if (hi == lo) return 0.0;
    // F_pi = -q/delta_p, so F_pipi = -d(q/delta_p)/dp.
    return -(state.q(hi) - state.q(lo)) / (dp * dp * (hi - lo));
}

// Sigma rows are delta_p * N(node i) for nodes k = -K+1..K; b from the
// martingale condition at every hypothetical clearing node.
template <class M, class V>
void assemble(const DemandState& state, const ModelParams& params, Curvature curvature, std::span<const double> lv,
              M& Sigma, V& b, V& work) {
    const int n = params.buckets();
    const double dp = params.delta_p;
    Sigma.resize(n, n);
    b.resize(n);
    work.resize(n);

    const double E = lv[static_cast<std::size_t>(n)];
    work = (params.sigma_Q_rel * E) * params.edge_loading;
    double mu_below = 0.0;
    double total = E;
    const double mu_E =
        E * (-params.a_Q0 * (state.logQ_edge - params.mean_logQ0) + 0.5 * params.sigma_Q_rel * params.sigma_Q_rel);
    for (int i = 0; i < n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const double q = lv[ui];
        total += q;
        const double s = params.sigma_q_rel[ui];
        work.noalias() += (s * q) * params.loadings.row(i).transpose();
        Sigma.row(i).noalias() = dp * work.transpose();
        mu_below += q * (-params.a_q[ui] * (state.logq[ui] - params.mean_logq[ui]) + 0.5 * s * s);
        b(i) = mu_below - mu_E;
    }

    const int c = locate(params.K, 0.0).index;
    const double q_c = lv[static_cast<std::size_t>(c)];
    require_liquidity(q_c, total);
    // N at the clearing node is row c of Sigma / delta_p.
    const auto N0 = Sigma.row(c) / dp;
    const double norm = N0.norm() * std::sqrt(dp);
    const double sigma_pi = dp * norm / q_c;
    double C = 0.0;
    if (norm > 0.0) {
        // b_pi = -N0 / |N0|, dH/dpi = -sigma_c q_c B(c, .) / delta_p.
        const double s_c = params.sigma_q_rel[static_cast<std::size_t>(c)] * q_c / dp;
        C = sigma_pi * s_c * params.loadings.row(c).dot(N0) / norm * dp;
    }
    const double F_pipi = curvature_of(state, params, c, curvature);
    b.array() -= 0.5 * F_pipi * sigma_pi * sigma_pi + C;
}

// Eigen's estimate is unreliable once a pivot is exactly zero.
template <class LU>
double lu_condition(const LU& lu) {
    const auto pivots = lu.matrixLU().diagonal().cwiseAbs();
    if (!pivots.allFinite() || pivots.minCoeff() == 0.0) return std::numeric_limits<double>::infinity();
    const double rcond = lu.rcond();
    return rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
}

}  // namespace

PriceVol price_vol_at(const DemandState& state, const ModelParams& params, double x) {
    const BucketPosition pos = locate(state.K(), x);
    const double q = clearing_mass(state, pos.index);
    const double dp = params.delta_p;
    const Eigen::VectorXd v = -cumulative_noise(state, params, x) * (dp / q);
    PriceVol pv;
    pv.sigma_pi = v.norm() * std::sqrt(dp);
    pv.b_pi = pv.sigma_pi > 0.0 ? Eigen::VectorXd(v / pv.sigma_pi) : Eigen::VectorXd::Zero(v.size());
    return pv;
}

PriceVol price_vol(const DemandState& state, const ModelParams& params) { return price_vol_at(state, params, 0.0); }

double sigma_pi_direct(const DemandState& state, const ModelParams& params, double x) {
    const BucketPosition pos = locate(state.K(), x);
    const double q = clearing_mass(state, pos.index);
    const Eigen::VectorXd N = cumulative_noise(state, params, x);
    double sum = 0.0;
    for (Eigen::Index j = 0; j < N.size(); ++j) sum += N(j) * N(j) * params.delta_p;
    return params.delta_p * std::sqrt(sum) / q;
}

DriftPieces drift_pieces(const DemandState& state, const ModelParams& params, Curvature curvature) {
    const int c = locate(state.K(), 0.0).index;
    const double dp = params.delta_p;
    const double q_c = clearing_mass(state, c);
    const PriceVol pv = price_vol(state, params);
    DriftPieces d;
    d.F_pi = -q_c / dp;
    d.F_pipi = curvature_of(state, params, c, curvature);
    d.H = -cumulative_noise(state, params, 0.0);
    const Eigen::VectorXd dH =
        -(params.sigma_q_rel[static_cast<std::size_t>(c)] * q_c / dp) * params.loadings.row(c).transpose();
    d.C_term = pv.sigma_pi * dH.dot(pv.b_pi) * dp;
    return d;
}

MprSystem build_mpr_system(const DemandState& state, const ModelParams& params, Curvature curvature) {
    MprSystem sys;
    Eigen::VectorXd work;
    StepWorkspace ws;
    sys.Sigma.resize(params.buckets(), params.buckets());
    assemble(state, params, curvature, levels(state, ws), sys.Sigma, sys.b, work);
    return sys;
}

MprSystem solve_mpr(MprSystem sys) {
    if (sys.Sigma.rows() != sys.Sigma.cols() || sys.Sigma.rows() != sys.b.size())
        throw ArgumentError("MPR system must be square and match its right-hand side");
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys.Sigma);
    sys.condition = lu_condition(lu);
    if (!(sys.condition <= kMaxCondition))
        throw NoUniqueMpr(sys.condition, "market price of risk system is singular or ill-conditioned");
    sys.lambda = lu.solve(sys.b);
    if (!sys.lambda.allFinite()) throw NoUniqueMpr(sys.condition, "market price of risk system is singular");
    sys.residual_norm = (sys.Sigma * sys.lambda - sys.b).norm();
    sys.solved = true;
    return sys;
}

DemandState step_risk_neutral(const DemandState& state, const ModelParams& params, const Eigen::VectorXd& lambda,
                              const FactorIncrements& inc, double dt) {
    DemandState next = state;
    StepWorkspace ws;
    advance(next, params, inc.dW, dt, std::span<const double>(lambda.data(), static_cast<std::size_t>(lambda.size())),
            0.0, ws);
    return next;
}

RiskNeutralStepper::RiskNeutralStepper(const ModelParams& params, Curvature curvature)
    : params_(params), curvature_(curvature), lu_(params.buckets()) {
    const int n = params.buckets();
    if (n > kMaxFactors) throw ArgumentError("grid too large for the path stepper");
    Sigma_.resize(n, n);
    b_.resize(n);
    lambda_ = Eigen::VectorXd::Zero(n);
    work_.resize(n);
    noiseless_ = params.sigma_Q_rel == 0.0 &&
                 std::all_of(params.sigma_q_rel.begin(), params.sigma_q_rel.end(), [](double v) { return v == 0.0; });
    const Eigen::PartialPivLU<Matrix> lb(params.loadings);
    if (lb.rcond() > 1e-8) {
        structured_ = true;
        Binv_ = lb.inverse();
        Sinv_.resize(n, n);
        d_.resize(n);
        v_.resize(n);
        vA_.resize(n);
    }
}

// Sigma = L R with L the lower-triangular ones matrix and
// R = delta_p D (B + e_0 v^T), D = diag(sigma_i q_i), v the edge row over d_0.
// With B^{-1} fixed, Sherman-Morrison gives Sigma^{-1} in O(n^2).
bool RiskNeutralStepper::solve_structured(std::span<const double> lv) {
    const int n = params_.buckets();
    const double dp = params_.delta_p;
    for (int i = 0; i < n; ++i) {
        d_(i) = params_.sigma_q_rel[static_cast<std::size_t>(i)] * lv[static_cast<std::size_t>(i)];
        if (!(d_(i) > 0.0)) return false;
    }
    v_ = (params_.sigma_Q_rel * lv[static_cast<std::size_t>(n)] / d_(0)) * params_.edge_loading;
    vA_.noalias() = Binv_.transpose() * v_;
    const double denom = 1.0 + vA_(0);
    if (!(std::abs(denom) > 1e-14)) return false;
    // Columns of R^{-1}, then the difference operator L^{-1} on the right.
    Sinv_ = Binv_;
    Sinv_.noalias() -= (Binv_.col(0) / denom) * vA_.transpose();
    for (int j = 0; j < n; ++j) Sinv_.col(j) /= dp * d_(j);
    for (int j = 0; j + 1 < n; ++j) Sinv_.col(j) -= Sinv_.col(j + 1);
    lambda_.noalias() = Sinv_ * b_;
    condition_ = Sigma_.cwiseAbs().colwise().sum().maxCoeff() * Sinv_.cwiseAbs().colwise().sum().maxCoeff();
    return std::isfinite(condition_);
}

void RiskNeutralStepper::solve(const DemandState& state) {
    // Without noise there is no measure to change; the curve is deterministic.
    if (noiseless_) {
        lambda_.setZero();
        b_.setZero();
        residual_ = 0.0;
        condition_ = 0.0;
        return;
    }
    const std::span<const double> lv = levels(state, ws_);
    assemble(state, params_, curvature_, lv, Sigma_, b_, work_);
    if (structured_ && solve_structured(lv) && condition_ <= kMaxCondition) {
        work_.noalias() = Sigma_ * lambda_;
        work_ -= b_;
        residual_ = work_.norm();
        if (residual_ <= 1e-12 * b_.norm()) return;
    }
    lu_.compute(Sigma_);
    condition_ = lu_condition(lu_);
    if (!(condition_ <= kMaxCondition))
        throw NoUniqueMpr(condition_, "market price of risk system is singular or ill-conditioned");
    lambda_.noalias() = lu_.solve(b_);
    if (!lambda_.allFinite()) throw NoUniqueMpr(condition_, "market price of risk system is singular");
    work_.noalias() = Sigma_ * lambda_;
    work_ -= b_;
    residual_ = work_.norm();
}

void RiskNeutralStepper::step(DemandState& state, std::span<const double> dW, double dt) {
    advance(state, params_, dW, dt, std::span<const double>(lambda_.data(), static_cast<std::size_t>(lambda_.size())),
            0.0, ws_);
}

}  // namespace netdemand
