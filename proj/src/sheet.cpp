#include "netdemand/sheet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "netdemand/errors.hpp"

namespace netdemand {

namespace {

constexpr std::uint64_t splitmix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline double to_unit(std::uint64_t bits) { return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53; }

}  // namespace

double CounterRng::uniform(std::uint64_t path, std::uint64_t step, std::uint64_t index) const {
    const std::uint64_t key = splitmix(splitmix(splitmix(seed_) ^ path) ^ step);
    return to_unit(splitmix(key ^ splitmix(index)));
}

void CounterRng::normals(std::uint64_t path, std::uint64_t step, std::span<double> out) const {
    const std::uint64_t key = splitmix(splitmix(splitmix(seed_) ^ path) ^ step);
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; i += 2) {
        const double u1 = to_unit(splitmix(key ^ splitmix(i)));
        const double u2 = to_unit(splitmix(key ^ splitmix(i + 1)));
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        out[i] = r * std::cos(theta);
        if (i + 1 < n) out[i + 1] = r * std::sin(theta);
    }
}

BrownianSheet::BrownianSheet(const SheetConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    if (cfg.factor_count < 1) throw ArgumentError("factor_count must be at least 1");
    if (!(cfg.delta_p > 0.0)) throw ArgumentError("delta_p must be positive");
}

FactorIncrements BrownianSheet::increments(double dt, std::uint64_t path, std::uint64_t step) const {
    FactorIncrements inc;
    inc.dW.resize(static_cast<std::size_t>(cfg_.factor_count));
    fill(dt, path, step, inc.dW);
    return inc;
}

void BrownianSheet::fill(double dt, std::uint64_t path, std::uint64_t step, std::span<double> dW) const {
    if (!(dt > 0.0)) throw ArgumentError("increments: dt must be positive");
    if (dW.size() != static_cast<std::size_t>(cfg_.factor_count)) throw ArgumentError("increments: wrong length");
    rng_.normals(path, step, dW);
    const double scale = std::sqrt(dt);
    for (double& w : dW) w *= scale;
}

double BrownianSheet::sheet_value(double t, double s, std::uint64_t path) const {
    const double width = cfg_.factor_count * cfg_.delta_p;
    if (s < 0.0 || s > width * (1.0 + 1e-12)) throw ArgumentError("sheet_value: s outside [0, factor_count*delta_p]");
    if (t < 0.0) throw ArgumentError("sheet_value: t must be non-negative");
    if (t == 0.0 || s == 0.0) return 0.0;
    // beta_j(t) ~ N(0, t); integral of g_j over [0, s] is the bucket overlap / sqrt(delta_p).
    const FactorIncrements beta = increments(t, path, 0);
    double w = 0.0;
    for (int j = 0; j < cfg_.factor_count; ++j) {
        const double lo = j * cfg_.delta_p;
        const double overlap = std::clamp(s - lo, 0.0, cfg_.delta_p);
        if (overlap <= 0.0) break;
        w += beta.dW[static_cast<std::size_t>(j)] * overlap / std::sqrt(cfg_.delta_p);
    }
    return w;
}

double integrate(std::span<const double> loadings, const FactorIncrements& inc, double delta_p) {
    if (loadings.size() != inc.dW.size()) throw ArgumentError("integrate: loading length mismatch");
    double sum = 0.0;
    for (std::size_t j = 0; j < loadings.size(); ++j) sum += loadings[j] * inc.dW[j];
    return sum * std::sqrt(delta_p);
}

}  // namespace netdemand
