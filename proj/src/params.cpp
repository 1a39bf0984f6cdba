#include "netdemand/params.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "netdemand/errors.hpp"

namespace netdemand {

using nlohmann::json;

int ModelParams::index_of(int k) const {
    if (k < -K + 1 || k > K) throw ArgumentError("bucket k=" + std::to_string(k) + " outside the grid");
    return k + K - 1;
}

void ModelParams::validate() const {
    const auto n = static_cast<std::size_t>(buckets());
    if (K < 1) throw ArgumentError("K must be at least 1");
    if (!(delta_p > 0.0)) throw ArgumentError("delta_p must be positive");
    if (!(bar_hours > 0.0)) throw ArgumentError("bar_hours must be positive");
    if (!(Q_edge0 > 0.0)) throw ArgumentError("initial edge demand must be positive");
    if (a_Q0 < 0.0 || sigma_Q_rel < 0.0) throw ArgumentError("edge a and sigma must be non-negative");
    for (const auto* v : {&q0, &a_q, &mean_logq, &sigma_q_rel})
        if (v->size() != n) throw ArgumentError("bucket arrays must have 2K entries");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(q0[i] > 0.0)) throw ArgumentError("initial bucket quantities must be positive");
        if (a_q[i] < 0.0 || sigma_q_rel[i] < 0.0) throw ArgumentError("bucket a and sigma must be non-negative");
    }
    if (loadings.rows() != static_cast<Eigen::Index>(n) || loadings.cols() != static_cast<Eigen::Index>(n))
        throw ArgumentError("loadings must be 2K x 2K");
    if (edge_loading.size() != static_cast<Eigen::Index>(n)) throw ArgumentError("edge loading must have 2K entries");
    for (Eigen::Index i = 0; i < loadings.rows(); ++i)
        if (std::abs(loadings.row(i).squaredNorm() * delta_p - 1.0) > 1e-9)
            throw ArgumentError("loading row " + std::to_string(i) + " is not normalized");
    if (std::abs(edge_loading.squaredNorm() * delta_p - 1.0) > 1e-9)
        throw ArgumentError("edge loading is not normalized");
    if (!(pi0 > 0.0)) throw ArgumentError("pi0 must be positive");
}

Eigen::MatrixXd identity_loadings(int n, double delta_p) {
    return Eigen::MatrixXd::Identity(n, n) / std::sqrt(delta_p);
}

ModelParams reference_params() {
    ModelParams p;
    p.K = 7;
    p.delta_p = 0.05;
    p.bar_hours = 1.0 / 60.0;
    p.Q_edge0 = 1.02705e11;
    p.a_Q0 = 0.3;
    p.mean_logQ0 = std::log(p.Q_edge0);
    p.sigma_Q_rel = 0.01976;
    // k = -6 .. 6; k = 7 repeats k = 6.
    p.q0 = {0.95314, 1.41994, 2.35893, 0.82541, 0.14050, 4.13487, 0.21397,
            9.95599, 4.61052, 3.51037, 2.42507, 0.14219, 2.70257, 2.70257};
    for (double& q : p.q0) q *= 1e11;
    p.sigma_q_rel = {0.04883, 0.04655, 0.01706, 0.04423, 0.04877, 0.03744, 0.00461,
                     0.00379, 0.03496, 0.00653, 0.01224, 0.00036, 0.00969, 0.00969};
    p.a_q = {0.11903, 0.29142, 0.25250, 0.36708, 0.36752, 0.29380, 0.21991,
             0.25219, 0.36316, 0.15248, 0.19830, 0.34405, 0.13387, 0.13387};
    for (double q : p.q0) p.mean_logq.push_back(std::log(q));
    p.loadings = identity_loadings(p.buckets(), p.delta_p);
    p.edge_loading = p.loadings.row(0).transpose();
    p.pi0 = 20.16;
    p.drift_c = 0.000374764;
    return p;
}

namespace {

Eigen::MatrixXd matrix_from_json(const json& j, int n, double delta_p) {
    if (j.is_string()) {
        if (j.get<std::string>() != "identity") throw ArgumentError("unknown loadings keyword");
        return identity_loadings(n, delta_p);
    }
    Eigen::MatrixXd m(n, n);
    if (!j.is_array() || static_cast<int>(j.size()) != n) throw ArgumentError("loadings must have 2K rows");
    for (int i = 0; i < n; ++i) {
        if (!j[i].is_array() || static_cast<int>(j[i].size()) != n) throw ArgumentError("loadings must have 2K columns");
        for (int c = 0; c < n; ++c) m(i, c) = j[i][c].get<double>();
    }
    return m;
}

}  // namespace

ModelParams params_from_json(const std::string& text) {
    ModelParams p;
    try {
        const json doc = json::parse(text);
        const json& grid = doc.at("grid");
        p.K = grid.at("K").get<int>();
        p.delta_p = grid.at("delta_p").get<double>();
        p.bar_hours = grid.value("bar_hours", 1.0 / 60.0);

        const json& edge = doc.at("edge");
        p.Q_edge0 = edge.at("Q_edge_0").get<double>();
        p.a_Q0 = edge.at("a").get<double>();
        p.sigma_Q_rel = edge.at("sigma_rel_hourly").get<double>();
        p.mean_logQ0 = edge.contains("mean_log") ? edge["mean_log"].get<double>() : std::log(p.Q_edge0);

        const int n = 2 * p.K;
        const json& rows = doc.at("buckets");
        if (!rows.is_array() || static_cast<int>(rows.size()) != n) throw ArgumentError("buckets must list 2K rows");
        p.q0.resize(n);
        p.a_q.resize(n);
        p.sigma_q_rel.resize(n);
        p.mean_logq.resize(n);
        std::vector<bool> seen(n, false);
        for (const json& row : rows) {
            const int i = p.index_of(row.at("k").get<int>());
            if (seen[i]) throw ArgumentError("bucket listed twice");
            seen[i] = true;
            p.q0[i] = row.at("q_k_0").get<double>() * 1e11;
            p.sigma_q_rel[i] = row.at("sigma_rel_hourly").get<double>();
            p.a_q[i] = row.at("a_k").get<double>();
            p.mean_logq[i] = row.contains("mean_log") ? row["mean_log"].get<double>() : std::log(p.q0[i]);
        }

        p.loadings = matrix_from_json(doc.value("loadings", json("identity")), n, p.delta_p);
        if (doc.contains("edge_loading")) {
            const json& e = doc["edge_loading"];
            if (!e.is_array() || static_cast<int>(e.size()) != n) throw ArgumentError("edge_loading must have 2K entries");
            p.edge_loading.resize(n);
            for (int c = 0; c < n; ++c) p.edge_loading(c) = e[c].get<double>();
        } else {
            p.edge_loading = p.loadings.row(0).transpose();
        }
        p.pi0 = doc.at("pi0").get<double>();
        p.drift_c = doc.value("drift_c", 0.0);
    } catch (const json::exception& e) {
        throw ArgumentError(std::string("config: ") + e.what());
    }
    p.validate();
    return p;
}

std::string params_to_json(const ModelParams& p) {
    json doc;
    doc["grid"] = {{"K", p.K}, {"delta_p", p.delta_p}, {"bar_hours", p.bar_hours}};
    doc["edge"] = {{"Q_edge_0", p.Q_edge0},
                   {"a", p.a_Q0},
                   {"sigma_rel_hourly", p.sigma_Q_rel},
                   {"mean_log", p.mean_logQ0}};
    json rows = json::array();
    for (int i = 0; i < p.buckets(); ++i) {
        rows.push_back({{"k", p.k_of(i)},
                        {"q_k_0", p.q0[i] / 1e11},
                        {"sigma_rel_hourly", p.sigma_q_rel[i]},
                        {"a_k", p.a_q[i]},
                        {"mean_log", p.mean_logq[i]}});
    }
    doc["buckets"] = rows;
    json m = json::array();
    for (Eigen::Index i = 0; i < p.loadings.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index c = 0; c < p.loadings.cols(); ++c) r.push_back(p.loadings(i, c));
        m.push_back(r);
    }
    doc["loadings"] = m;
    json e = json::array();
    for (Eigen::Index c = 0; c < p.edge_loading.size(); ++c) e.push_back(p.edge_loading(c));
    doc["edge_loading"] = e;
    doc["pi0"] = p.pi0;
    doc["drift_c"] = p.drift_c;
    return doc.dump(2);
}

ModelParams load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return params_from_json(ss.str());
}

void save_params(const ModelParams& params, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << params_to_json(params) << '\n';
}

}  // namespace netdemand
