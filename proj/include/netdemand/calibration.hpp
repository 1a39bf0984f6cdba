#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "netdemand/messages.hpp"
#include "netdemand/params.hpp"

namespace netdemand {

inline constexpr std::int64_t kBarNs = 60 * kNsPerSecond;

struct PanelOptions {
    double pi0 = 20.16;
    int K = 7;
    double delta_p = 0.05;
    std::int64_t bar_ns = kBarNs;
    std::int64_t open_ns = kSessionOpenNs;
    std::int64_t close_ns = kSessionCloseNs;
};

struct PanelData {
    int K = 0;
    double delta_p = 0.0;
    double bar_hours = 0.0;
    std::vector<std::size_t> session;      // session index per bar
    std::vector<std::int64_t> times_ns;    // bar end, since midnight
    std::vector<double> pi;
    std::vector<std::vector<double>> q;    // [bucket index][bar], k = -K+1..K
    std::vector<double> edge;              // Q(-K) per bar
    std::vector<double> below_grid;        // quantity assigned to the k = -K slot
    std::vector<double> resting_total;
    std::vector<std::size_t> clipped_orders;
    std::vector<bool> gap;                 // some value carried forward
    ReplayStats replay;
    std::size_t bars() const { return pi.size(); }
};

// Replays annotated events session by session (a session ends when the
// timestamp goes backwards) and samples the book at every bar end.
PanelData build_panel(const std::vector<MessageEvent>& events, const PanelOptions& opts);

struct Ar1Fit {
    double a;          // per hour
    double mean;
    double sigma_rel;  // per sqrt(hour)
    double phi;
    double intercept;
    double residual_sd;
};

Ar1Fit fit_ar1(const std::vector<double>& x, double delta_t);
std::vector<double> ar1_residuals(const std::vector<double>& x, const Ar1Fit& fit);

// Projects a symmetric matrix onto the correlation matrices (unit diagonal,
// positive semidefinite).
Eigen::MatrixXd nearest_correlation(const Eigen::MatrixXd& A, int max_iterations = 200, double tol = 1e-12);

struct LoadingFit {
    Eigen::MatrixXd loadings;
    Eigen::MatrixXd correlation;
    bool repaired = false;
    bool degenerate = false;
};

LoadingFit fit_loadings(const PanelData& panel);

struct JarqueBera {
    double statistic;
    double p_value;
};

JarqueBera jarque_bera(const std::vector<double>& x);
// Uses the supplied skewness and excess kurtosis directly.
JarqueBera jarque_bera_from_moments(std::size_t n, double skewness, double excess_kurtosis);

double fit_drift(const std::vector<double>& pi);

struct Summary {
    std::size_t nobs = 0;
    double minimum = 0, maximum = 0;
    double q1 = 0, median = 0, q3 = 0;
    double mean = 0, sum = 0;
    double variance = 0, stdev = 0, se_mean = 0;
    double lcl = 0, ucl = 0;  // 95% confidence interval of the mean
    std::optional<double> skewness;
    std::optional<double> kurtosis;  // excess
};

Summary summarize(const std::vector<double>& x);

struct CalibrationOptions {
    PanelOptions panel;
    double p_min = 20.00;
    double p_max = 20.62;
    bool strict = false;
};

struct FitReport {
    std::vector<Ar1Fit> buckets;
    Ar1Fit edge{};
    LoadingFit loadings;
    double drift_c = 0.0;
    std::optional<JarqueBera> jb;
    Summary pi_summary;
    double retention = 1.0;
    std::size_t orphan_deletes = 0;
    std::size_t gap_bars = 0;
    std::size_t bars = 0;
};

FitReport fit_panel(const PanelData& panel);
struct Calibration {
    FitReport report;
    PanelData panel;
    ModelParams params;
};

Calibration calibrate(const std::vector<MessageEvent>& raw, const CalibrationOptions& opts);
// Initial state taken from the last bar of the panel.
ModelParams to_params(const FitReport& report, const PanelData& panel);
std::string format_report(const FitReport& report, int K);

// Synthetic order flow: one resting order per relative bucket, sizes driven
// by the log-OU model with a constant clearing price.
struct SyntheticLog {
    std::vector<MessageEvent> events;
    std::vector<std::vector<double>> q;  // exact integer sizes per bucket and bar
    std::vector<double> edge;
};

ModelParams synthetic_params();
SyntheticLog synthesize_log(const ModelParams& params, std::size_t bars, std::uint64_t seed);

}  // namespace netdemand
