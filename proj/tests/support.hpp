#pragma once

#include <cmath>

#include "netdemand/params.hpp"

namespace netdemand::testing {

// Flat curve: every bucket holds q, the edge holds K*q so the crossing sits at node 0.
inline ModelParams flat_params(int K, double q, double sigma, double a = 0.0) {
    ModelParams p;
    p.K = K;
    p.delta_p = 0.05;
    p.bar_hours = 1.0 / 60.0;
    const int n = 2 * K;
    p.Q_edge0 = K * q;
    p.a_Q0 = a;
    p.mean_logQ0 = std::log(p.Q_edge0);
    p.sigma_Q_rel = sigma;
    p.q0.assign(n, q);
    p.a_q.assign(n, a);
    p.mean_logq.assign(n, std::log(q));
    p.sigma_q_rel.assign(n, sigma);
    p.loadings = identity_loadings(n, p.delta_p);
    p.edge_loading = p.loadings.row(0).transpose();
    p.pi0 = 20.0;
    return p;
}

}  // namespace netdemand::testing
