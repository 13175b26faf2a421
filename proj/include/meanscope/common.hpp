#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace meanscope {

// Closed interval [lo, hi] with 0 < lo < hi, the analysis scope of every
// operation in this library.
struct Interval {
    double lo = 1e-3;
    double hi = 1e3;

    bool contains(double x, double slack = 0.0) const {
        return x >= lo * (1.0 - slack) && x <= hi * (1.0 + slack);
    }
    double log_mid() const { return std::sqrt(lo * hi); }
};

inline constexpr Interval kDefaultWindow{1e-3, 1e3};

struct ParseError : std::runtime_error {
    // 1-based character position of the offending token (or end of input).
    std::size_t position;
    ParseError(const std::string& msg, std::size_t pos)
        : std::runtime_error(msg + " at offset " + std::to_string(pos)), position(pos) {}
};

struct EvalError : std::runtime_error {
    double point;
    EvalError(const std::string& msg, double x)
        : std::runtime_error(msg + " (x = " + std::to_string(x) + ")"), point(x) {}
};

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RangeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Strict monotonicity failed on a sampled pair x1 < x2.
struct MonotonicityError : std::runtime_error {
    double x1, x2, f1, f2;
    MonotonicityError(double a, double b, double fa, double fb)
        : std::runtime_error("generator is not strictly monotone: f(" + std::to_string(a) +
                             ") = " + std::to_string(fa) + ", f(" + std::to_string(b) +
                             ") = " + std::to_string(fb)),
          x1(a), x2(b), f1(fa), f2(fb) {}
};

struct StepUnderflowError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace meanscope
