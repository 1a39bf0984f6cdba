#include "netdemand/calibration.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "netdemand/errors.hpp"
#include "netdemand/sheet.hpp"

namespace netdemand {

namespace {

struct Sampler {
    const PanelOptions& opts;
    PanelData& panel;
    std::vector<double> last;
    double last_edge = 0.0;
    bool have_last = false;

    void sample(const OrderBook& book, std::size_t session, std::int64_t t) {
        const int K = opts.K;
        const int n = 2 * K;
        const double pi = book.clearing_price();
        const double edge_price = pi - K * opts.delta_p;
        std::vector<double> buckets(static_cast<std::size_t>(n), 0.0);
        double below = 0.0;
        double total = 0.0;
        double edge = 0.0;
        std::size_t clipped = 0;
        for (const LimitOrder& o : book.resting_orders()) {
            const double qty = static_cast<double>(o.quantity);
            total += qty;
            long k = std::lround((o.limit_price - pi) / opts.delta_p);
            if (k < -K || k > K) {
                ++clipped;
                k = std::clamp<long>(k, -K, K);
            }
            if (k == -K)
                below += qty;
            else
                buckets[static_cast<std::size_t>(k + K - 1)] += qty;
            if (o.side == Side::Buy && o.limit_price >= edge_price - 1e-9) edge += qty;
            if (o.side == Side::Sell && o.limit_price <= edge_price + 1e-9) edge -= qty;
        }
        bool gap = false;
        for (int i = 0; i < n; ++i) {
            auto& v = buckets[static_cast<std::size_t>(i)];
            if (v <= 0.0) {
                gap = true;
                if (have_last) v = last[static_cast<std::size_t>(i)];
            }
        }
        if (edge <= 0.0) {
            gap = true;
            if (have_last) edge = last_edge;
        }
        panel.session.push_back(session);
        panel.times_ns.push_back(t);
        panel.pi.push_back(pi);
        for (int i = 0; i < n; ++i) panel.q[static_cast<std::size_t>(i)].push_back(buckets[static_cast<std::size_t>(i)]);
        panel.edge.push_back(edge);
        panel.below_grid.push_back(below);
        panel.resting_total.push_back(total);
        panel.clipped_orders.push_back(clipped);
        panel.gap.push_back(gap);
        last = buckets;
        last_edge = edge;
        have_last = true;
    }
};

double mean_of(const std::vector<double>& x) { return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size()); }

}  // namespace

PanelData build_panel(const std::vector<MessageEvent>& events, const PanelOptions& opts) {
    if (opts.K < 1 || !(opts.delta_p > 0.0) || opts.bar_ns <= 0 || opts.close_ns <= opts.open_ns)
        throw ArgumentError("build_panel: invalid grid or session options");
    PanelData panel;
    panel.K = opts.K;
    panel.delta_p = opts.delta_p;
    panel.bar_hours = static_cast<double>(opts.bar_ns) / (3600.0 * kNsPerSecond);
    panel.q.assign(static_cast<std::size_t>(2 * opts.K), {});
    Sampler sampler{opts, panel, {}, 0.0, false};

    const auto bars_per_session = static_cast<std::size_t>((opts.close_ns - opts.open_ns) / opts.bar_ns);
    double opening = opts.pi0;
    std::size_t pos = 0;
    std::size_t session = 0;
    while (pos < events.size()) {
        // Session extent: until the timestamp goes backwards.
        std::size_t end = pos + 1;
        while (end < events.size() && events[end].timestamp_ns >= events[end - 1].timestamp_ns) ++end;
        Replayer replay(opening);
        std::size_t e = pos;
        for (std::size_t b = 0; b < bars_per_session; ++b) {
            const std::int64_t bar_end = opts.open_ns + static_cast<std::int64_t>(b + 1) * opts.bar_ns;
            while (e < end && events[e].timestamp_ns <= bar_end) replay.apply(events[e++]);
            sampler.sample(replay.book(), session, bar_end);
        }
        opening = replay.book().clearing_price();
        const ReplayStats& st = replay.stats();
        panel.replay.applied += st.applied;
        panel.replay.orphans += st.orphans;
        panel.replay.rejected += st.rejected;
        panel.replay.trades += st.trades;
        pos = end;
        ++session;
    }
    return panel;
}

Ar1Fit fit_ar1(const std::vector<double>& x, double delta_t) {
    if (x.size() < 30) throw FitError("fit_ar1: at least 30 observations required");
    if (!(delta_t > 0.0)) throw ArgumentError("fit_ar1: delta_t must be positive");
    const std::size_t m = x.size() - 1;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        mx += x[i];
        my += x[i + 1];
    }
    mx /= static_cast<double>(m);
    my /= static_cast<double>(m);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (x[i + 1] - my);
    }
    if (!(sxx > 1e-300 * static_cast<double>(m))) throw FitError("fit_ar1: degenerate (constant) series");
    Ar1Fit f{};
    f.phi = sxy / sxx;
    f.intercept = my - f.phi * mx;
    if (!(f.phi > 0.0)) throw FitError("fit_ar1: unstable fit, phi <= 0");
    double ssr = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double r = x[i + 1] - f.intercept - f.phi * x[i];
        ssr += r * r;
    }
    f.residual_sd = std::sqrt(ssr / static_cast<double>(m - 2));
    if (f.phi >= 1.0) {
        f.a = 0.0;
        f.mean = mean_of(x);
        f.sigma_rel = f.residual_sd / std::sqrt(delta_t);
    } else {
        f.a = -std::log(f.phi) / delta_t;
        f.mean = f.intercept / (1.0 - f.phi);
        f.sigma_rel = f.residual_sd * std::sqrt(2.0 * f.a / (1.0 - f.phi * f.phi));
    }
    return f;
}

std::vector<double> ar1_residuals(const std::vector<double>& x, const Ar1Fit& fit) {
    std::vector<double> r;
    r.reserve(x.size());
    for (std::size_t i = 0; i + 1 < x.size(); ++i) r.push_back(x[i + 1] - fit.intercept - fit.phi * x[i]);
    return r;
}

Eigen::MatrixXd nearest_correlation(const Eigen::MatrixXd& A, int max_iterations, double tol) {
    const Eigen::Index n = A.rows();
    Eigen::MatrixXd Y = 0.5 * (A + A.transpose());
    Eigen::MatrixXd dS = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd X = Y;
    for (int it = 0; it < max_iterations; ++it) {
        const Eigen::MatrixXd R = Y - dS;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(R);
        const Eigen::VectorXd w = eig.eigenvalues().cwiseMax(0.0);
        X = eig.eigenvectors() * w.asDiagonal() * eig.eigenvectors().transpose();
        dS = X - R;
        const Eigen::MatrixXd Y_prev = Y;
        Y = X;
        Y.diagonal().setOnes();
        if ((Y - Y_prev).norm() <= tol * std::max(1.0, Y.norm()) && (Y - X).norm() <= tol * std::max(1.0, Y.norm()))
            break;
    }
    return Y;
}

LoadingFit fit_loadings(const PanelData& panel) {
    const int n = 2 * panel.K;
    if (panel.bars() < 100) throw ArgumentError("fit_loadings: at least 100 bars required");
    LoadingFit out;
    out.correlation = Eigen::MatrixXd::Identity(n, n);
    out.loadings = identity_loadings(n, panel.delta_p);

    std::vector<std::vector<double>> res(static_cast<std::size_t>(n));
    try {
        for (int i = 0; i < n; ++i) {
            std::vector<double> logs;
            for (double v : panel.q[static_cast<std::size_t>(i)]) {
                if (!(v > 0.0)) throw FitError("non-positive bucket quantity");
                logs.push_back(std::log(v));
            }
            res[static_cast<std::size_t>(i)] = ar1_residuals(logs, fit_ar1(logs, panel.bar_hours));
        }
    } catch (const FitError&) {
        out.degenerate = true;
        return out;
    }

    const std::size_t m = res[0].size();
    Eigen::MatrixXd Z(static_cast<Eigen::Index>(m), n);
    for (int i = 0; i < n; ++i) {
        const auto& r = res[static_cast<std::size_t>(i)];
        const double mu = mean_of(r);
        for (std::size_t t = 0; t < m; ++t) Z(static_cast<Eigen::Index>(t), i) = r[t] - mu;
    }
    Eigen::MatrixXd C = Z.transpose() * Z;
    const Eigen::VectorXd sd = C.diagonal().cwiseSqrt();
    if ((sd.array() <= 0.0).any()) {
        out.degenerate = true;
        return out;
    }
    C = sd.cwiseInverse().asDiagonal() * C * sd.cwiseInverse().asDiagonal();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C);
    if (eig.eigenvalues().minCoeff() < 0.0) {
        C = nearest_correlation(C);
        out.repaired = true;
        eig.compute(C);
    }
    out.correlation = C;
    const Eigen::VectorXd w = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    Eigen::MatrixXd root = eig.eigenvectors() * w.asDiagonal() * eig.eigenvectors().transpose();
    for (int i = 0; i < n; ++i) {
        const double norm = root.row(i).norm();
        if (!(norm > 0.0)) {
            out.degenerate = true;
            out.loadings = identity_loadings(n, panel.delta_p);
            return out;
        }
        root.row(i) /= norm * std::sqrt(panel.delta_p);
    }
    out.loadings = root;
    return out;
}

JarqueBera jarque_bera_from_moments(std::size_t n, double skewness, double excess_kurtosis) {
    const double nn = static_cast<double>(n);
    const double s_star = std::sqrt(nn / 6.0) * skewness;
    const double k_star = std::sqrt(nn / 24.0) * excess_kurtosis;
    JarqueBera jb;
    jb.statistic = s_star * s_star + k_star * k_star;
    jb.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(2.0), jb.statistic));
    return jb;
}

JarqueBera jarque_bera(const std::vector<double>& x) {
    if (x.size() < 8) throw ArgumentError("jarque_bera: at least 8 observations required");
    const double n = static_cast<double>(x.size());
    const double mu = mean_of(x);
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = v - mu;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if (!(m2 > 0.0)) return {0.0, 1.0};
    return jarque_bera_from_moments(x.size(), m3 / std::pow(m2, 1.5), m4 / (m2 * m2) - 3.0);
}

double fit_drift(const std::vector<double>& pi) {
    if (pi.size() < 2) throw ArgumentError("fit_drift: at least 2 observations required");
    const double n = static_cast<double>(pi.size());
    const double mt = (n - 1.0) / 2.0;
    const double mp = mean_of(pi);
    double stt = 0.0, stp = 0.0;
    for (std::size_t i = 0; i < pi.size(); ++i) {
        const double dt = static_cast<double>(i) - mt;
        stt += dt * dt;
        stp += dt * (pi[i] - mp);
    }
    return stp / stt;
}

Summary summarize(const std::vector<double>& x) {
    if (x.empty()) throw ArgumentError("summarize: empty series");
    Summary s;
    s.nobs = x.size();
    const double n = static_cast<double>(x.size());
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    s.minimum = sorted.front();
    s.maximum = sorted.back();
    auto quantile = [&](double p) {
        const double h = (n - 1.0) * p;
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    };
    s.q1 = quantile(0.25);
    s.median = quantile(0.5);
    s.q3 = quantile(0.75);
    s.sum = std::accumulate(x.begin(), x.end(), 0.0);
    // A constant series keeps its exact value; the running sum would round it.
    s.mean = s.minimum == s.maximum ? s.minimum : s.sum / n;
    double ss = 0.0;
    for (double v : x) ss += (v - s.mean) * (v - s.mean);
    if (x.size() > 1) {
        s.variance = ss / (n - 1.0);
        s.stdev = std::sqrt(s.variance);
        s.se_mean = s.stdev / std::sqrt(n);
        const double t = boost::math::quantile(boost::math::students_t(n - 1.0), 0.975);
        s.lcl = s.mean - t * s.se_mean;
        s.ucl = s.mean + t * s.se_mean;
    } else {
        s.lcl = s.ucl = s.mean;
    }
    if (s.variance > 0.0) {
        double m3 = 0.0, m4 = 0.0;
        for (double v : x) {
            const double z = (v - s.mean) / s.stdev;
            m3 += z * z * z;
            m4 += z * z * z * z;
        }
        s.skewness = m3 / n;
        s.kurtosis = m4 / n - 3.0;
    }
    return s;
}

FitReport fit_panel(const PanelData& panel) {
    FitReport r;
    r.bars = panel.bars();
    const int n = 2 * panel.K;
    for (int i = 0; i < n; ++i) {
        std::vector<double> logs;
        for (double v : panel.q[static_cast<std::size_t>(i)]) {
            if (!(v > 0.0)) throw FitError("bucket k=" + std::to_string(i - panel.K + 1) + " has no resting quantity");
            logs.push_back(std::log(v));
        }
        Ar1Fit f = fit_ar1(logs, panel.bar_hours);
        r.buckets.push_back(f);
    }
    std::vector<double> edge_logs;
    for (double v : panel.edge) {
        if (!(v > 0.0)) throw FitError("net demand at the lower grid edge is not positive");
        edge_logs.push_back(std::log(v));
    }
    r.edge = fit_ar1(edge_logs, panel.bar_hours);
    r.loadings = fit_loadings(panel);
    r.drift_c = fit_drift(panel.pi);
    r.pi_summary = summarize(panel.pi);
    if (panel.pi.size() >= 8 && r.pi_summary.variance > 0.0) r.jb = jarque_bera(panel.pi);
    r.gap_bars = static_cast<std::size_t>(std::count(panel.gap.begin(), panel.gap.end(), true));
    return r;
}

Calibration calibrate(const std::vector<MessageEvent>& raw, const CalibrationOptions& opts) {
    const CleanResult cleaned = clean(raw, opts.p_min, opts.p_max, opts.panel.open_ns, opts.panel.close_ns);
    const CancellationResult annotated = infer_cancellations(cleaned.events);
    Calibration c;
    c.panel = build_panel(annotated.events, opts.panel);
    c.report = fit_panel(c.panel);
    c.report.retention = cleaned.retention;
    c.report.orphan_deletes = annotated.orphan_deletes;
    c.params = to_params(c.report, c.panel);
    return c;
}

ModelParams to_params(const FitReport& report, const PanelData& panel) {
    if (panel.bars() == 0) throw ArgumentError("to_params: empty panel");
    ModelParams p;
    p.K = panel.K;
    p.delta_p = panel.delta_p;
    p.bar_hours = panel.bar_hours;
    p.Q_edge0 = panel.edge.back();
    p.a_Q0 = report.edge.a;
    p.mean_logQ0 = report.edge.mean;
    p.sigma_Q_rel = report.edge.sigma_rel;
    for (std::size_t i = 0; i < report.buckets.size(); ++i) {
        p.q0.push_back(panel.q[i].back());
        p.a_q.push_back(report.buckets[i].a);
        p.mean_logq.push_back(report.buckets[i].mean);
        p.sigma_q_rel.push_back(report.buckets[i].sigma_rel);
    }
    p.loadings = report.loadings.loadings;
    p.edge_loading = p.loadings.row(0).transpose();
    p.pi0 = panel.pi.back();
    p.drift_c = report.drift_c;
    p.validate();
    return p;
}

std::string format_report(const FitReport& r, int K) {
    std::ostringstream os;
    os << std::setprecision(6);
    os << "bars " << r.bars << "  retention " << r.retention << "  orphan deletes " << r.orphan_deletes
       << "  gap bars " << r.gap_bars << '\n';
    os << "k\ta(k)\tmean_log\tsigma_rel_hourly\n";
    for (std::size_t i = 0; i < r.buckets.size(); ++i)
        os << static_cast<int>(i) - K + 1 << '\t' << r.buckets[i].a << '\t' << r.buckets[i].mean << '\t'
           << r.buckets[i].sigma_rel << '\n';
    os << "edge\t" << r.edge.a << '\t' << r.edge.mean << '\t' << r.edge.sigma_rel << '\n';
    os << "drift c per bar " << r.drift_c << '\n';
    const Summary& s = r.pi_summary;
    os << "pi: nobs " << s.nobs << "  mean " << s.mean << "  stdev " << s.stdev << "  min " << s.minimum << "  max "
       << s.maximum << "  median " << s.median;
    if (s.skewness) os << "  skewness " << *s.skewness << "  kurtosis " << *s.kurtosis;
    os << '\n';
    if (r.jb) os << "Jarque-Bera " << r.jb->statistic << "  p-value " << r.jb->p_value << '\n';
    if (r.loadings.degenerate) os << "warning: degenerate loadings, identity used\n";
    if (r.loadings.repaired) os << "note: correlation matrix repaired to nearest correlation\n";
    return os.str();
}

ModelParams synthetic_params() {
    ModelParams p;
    p.K = 7;
    p.delta_p = 0.05;
    p.bar_hours = 1.0 / 60.0;
    const int n = p.buckets();
    p.Q_edge0 = 1.0e9;
    p.a_Q0 = 20.0;
    p.mean_logQ0 = std::log(p.Q_edge0);
    p.sigma_Q_rel = 0.1;
    for (int i = 0; i < n; ++i) {
        const double q = 1.0e8 * (1.0 + 0.1 * (i % 3));
        p.q0.push_back(q);
        p.mean_logq.push_back(std::log(q));
        p.a_q.push_back(15.0 + 15.0 * i / (n - 1));
        p.sigma_q_rel.push_back(0.05 + 0.25 * ((i * 5) % n) / (n - 1));
    }
    Eigen::MatrixXd R(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) R(i, j) = std::exp(-std::abs(i - j) / 3.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(R);
    Eigen::MatrixXd root =
        eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
    for (int i = 0; i < n; ++i) root.row(i) /= root.row(i).norm() * std::sqrt(p.delta_p);
    p.loadings = root;
    p.edge_loading = root.row(0).transpose();
    p.pi0 = 20.16;
    p.drift_c = 0.0;
    return p;
}

SyntheticLog synthesize_log(const ModelParams& p, std::size_t bars, std::uint64_t seed) {
    p.validate();
    const int K = p.K;
    const int n = p.buckets();
    const double dt = p.bar_hours;
    const double sdp = std::sqrt(p.delta_p);
    const CounterRng rng(seed);

    std::vector<double> x(p.mean_logq.begin(), p.mean_logq.end());
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = std::log(p.q0[static_cast<std::size_t>(i)]);
    double xe = std::log(p.Q_edge0);
    auto ou = [dt](double& v, double a, double m, double s, double z) {
        const double e = std::exp(-a * dt);
        const double spread = a > 0.0 ? std::sqrt(-std::expm1(-2.0 * a * dt) / (2.0 * a)) : std::sqrt(dt);
        v = m + (v - m) * e + s * spread * z;
    };

    SyntheticLog log;
    log.q.assign(static_cast<std::size_t>(n), {});
    const auto bars_per_session = static_cast<std::size_t>((kSessionCloseNs - kSessionOpenNs) / kBarNs);
    std::vector<double> z(static_cast<std::size_t>(n));
    std::vector<std::int64_t> sizes(static_cast<std::size_t>(n) + 1);
    for (std::size_t bar = 0; bar < bars; ++bar) {
        if (bar > 0) {
            rng.normals(0, bar, z);
            for (int i = 0; i < n; ++i) {
                const double xi = sdp * p.loadings.row(i).dot(Eigen::Map<const Eigen::VectorXd>(z.data(), n));
                const auto ui = static_cast<std::size_t>(i);
                ou(x[ui], p.a_q[ui], p.mean_logq[ui], p.sigma_q_rel[ui], xi);
            }
            const double xi_e = -sdp * p.edge_loading.dot(Eigen::Map<const Eigen::VectorXd>(z.data(), n));
            ou(xe, p.a_Q0, p.mean_logQ0, p.sigma_Q_rel, xi_e);
        }
        // Slot 0 is the buy order at the k = -K node; slot i + 1 is bucket i.
        std::int64_t buys = 0;
        for (int i = 0; i < n; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            sizes[ui + 1] = std::llround(std::exp(x[ui]));
            if (p.k_of(i) <= 0) buys += sizes[ui + 1];
        }
        sizes[0] = std::llround(std::exp(xe)) - buys;
        if (sizes[0] <= 0) throw SimulationFailure("synthetic edge demand below the buy-side mass");
        for (int i = 0; i < n; ++i) log.q[static_cast<std::size_t>(i)].push_back(static_cast<double>(sizes[static_cast<std::size_t>(i) + 1]));
        log.edge.push_back(static_cast<double>(sizes[0] + buys));

        const std::size_t session = bar / bars_per_session;
        const std::size_t b = bar % bars_per_session;
        const std::int64_t t0 = kSessionOpenNs + static_cast<std::int64_t>(b) * kBarNs + kNsPerSecond;
        for (int slot = 0; slot <= n; ++slot) {
            const int k = slot == 0 ? -K : p.k_of(slot - 1);
            MessageEvent ev;
            ev.type = b == 0 ? MsgType::Add : MsgType::Modify;
            ev.side = k <= 0 ? Side::Buy : Side::Sell;
            ev.timestamp_ns = t0 + slot * 1'000'000;
            ev.order_id = session * 1000 + static_cast<std::uint64_t>(slot) + 1;
            ev.price = std::round((p.pi0 + k * p.delta_p) / kTickSize) * kTickSize;
            ev.size = sizes[static_cast<std::size_t>(slot)];
            log.events.push_back(ev);
        }
    }
    return log;
}

}  // namespace netdemand
