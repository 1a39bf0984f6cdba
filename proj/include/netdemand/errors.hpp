#pragma once

#include <stdexcept>
#include <string>

namespace netdemand {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid caller input (bad sizes, out-of-grid indices, non-positive steps).
struct ArgumentError : Error {
    using Error::Error;
};

struct RejectError : Error {
    using Error::Error;
};

struct NotFoundError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

enum class BreachSide { Lower, Upper };

// The net-demand curve no longer crosses zero inside the price grid.
// Lower: Q(-K) <= 0.  Upper: Q(K) >= 0.
struct BoundaryBreach : Error {
    BreachSide side;
    BoundaryBreach(BreachSide s, const std::string& what) : Error(what), side(s) {}
};

struct UndefinedInverse : Error {
    using Error::Error;
};

struct LiquiditySingularity : Error {
    using Error::Error;
};

struct NoUniqueMpr : Error {
    double condition;
    NoUniqueMpr(double cond, const std::string& what) : Error(what), condition(cond) {}
};

struct SimulationFailure : Error {
    using Error::Error;
};

struct FitError : Error {
    using Error::Error;
};

}  // namespace netdemand
