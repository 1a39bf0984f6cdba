#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace netdemand {

inline constexpr double kTradingHoursPerDay = 6.5;
inline constexpr double kTradingDaysPerYear = 252.0;
inline constexpr double kHoursPerYear = kTradingHoursPerDay * kTradingDaysPerYear;

// Coefficients of the log-OU relative demand model.  Time is in hours.
// Bucket arrays are indexed i = 0..2K-1 for relative bucket k = i - K + 1.
struct ModelParams {
    int K = 7;
    double delta_p = 0.05;
    double bar_hours = 1.0 / 60.0;

    double Q_edge0 = 0.0;
    double a_Q0 = 0.0;
    double mean_logQ0 = 0.0;
    double sigma_Q_rel = 0.0;

    std::vector<double> q0;
    std::vector<double> a_q;
    std::vector<double> mean_logq;
    std::vector<double> sigma_q_rel;

    Eigen::MatrixXd loadings;      // rows: buckets, columns: factors
    Eigen::VectorXd edge_loading;  // loading of log Q(-K) over factors

    double pi0 = 20.16;
    double drift_c = 0.0;  // clearing-price drift per bar, physical measure

    int buckets() const { return 2 * K; }
    int index_of(int k) const;
    int k_of(int i) const { return i - K + 1; }

    // Throws ArgumentError.
    void validate() const;
};

Eigen::MatrixXd identity_loadings(int n, double delta_p);

// Reference intraday parameters on a 14-bucket grid at 5 cents.
ModelParams reference_params();

// Model keys are read from the top level of the document; other sections
// (sheet, pricing) are ignored here.
ModelParams params_from_json(const std::string& text);
std::string params_to_json(const ModelParams& params);
ModelParams load_params(const std::string& path);
void save_params(const ModelParams& params, const std::string& path);

}  // namespace netdemand
