#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace netdemand {

struct SheetConfig {
    int factor_count = 14;
    double delta_p = 0.05;
    std::uint64_t seed = 1;
};

struct FactorIncrements {
    std::vector<double> dW;
};

// Stateless keyed generator: (seed, path, step, index) -> value.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    // Uniform on (0, 1).
    double uniform(std::uint64_t path, std::uint64_t step, std::uint64_t index) const;
    // Fills out with iid standard normals.
    void normals(std::uint64_t path, std::uint64_t step, std::span<double> out) const;

private:
    std::uint64_t seed_;
};

// Discretized sheet: one Wiener factor per price bucket, indicator basis
// scaled by 1/sqrt(delta_p).
class BrownianSheet {
public:
    explicit BrownianSheet(const SheetConfig& cfg);

    const SheetConfig& config() const { return cfg_; }

    FactorIncrements increments(double dt, std::uint64_t path = 0, std::uint64_t step = 0) const;
    void fill(double dt, std::uint64_t path, std::uint64_t step, std::span<double> dW) const;

    // Partial-sum value of W(t, s) for one path.
    double sheet_value(double t, double s, std::uint64_t path = 0) const;

private:
    SheetConfig cfg_;
    CounterRng rng_;
};

// sum_j b_j sqrt(delta_p) dW_j
double integrate(std::span<const double> loadings, const FactorIncrements& inc, double delta_p);

}  // namespace netdemand
