// Independent reference computations used to check the library. Nothing
// here calls into the code under test.
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <random>

namespace oracle {

/// Root of a continuous f with a sign change on [lo, hi].
inline double bisect(const std::function<double(double)>& f, double lo, double hi,
                     double tol = 1e-15) {
    double flo = f(lo);
    for (int i = 0; i < 300 && hi - lo > tol; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

inline double central_difference(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// k(x) = k_S (x / (L - x))^2 written out independently.
inline double stiffness(double k_S, double L, double x) {
    const double r = x / (L - x);
    return k_S * r * r;
}

/// Fraction of one period, within the half period centred on an equilibrium
/// crossing, where sin^2(phase) <= q. Scans `per_period` samples per period
/// and refines the two window edges by linear interpolation.
inline double timing_window_scan(double q, long per_period = 1000000) {
    const double h = 2.0 * std::numbers::pi / static_cast<double>(per_period);
    const long half = per_period / 4; // samples in a quarter period
    auto g = [q](double phase) { return std::sin(phase) * std::sin(phase) - q; };
    // Walk outward from the crossing until the condition first fails.
    long i = 0;
    while (i < half && g(static_cast<double>(i + 1) * h) <= 0.0) {
        ++i;
    }
    double edge = static_cast<double>(i) * h;
    if (i < half) {
        const double a = g(static_cast<double>(i) * h);
        const double b = g(static_cast<double>(i + 1) * h);
        edge += h * a / (a - b);
    } else {
        edge = std::numbers::pi / 2.0;
    }
    // The window is symmetric about the crossing.
    return 2.0 * edge / (2.0 * std::numbers::pi);
}

inline std::mt19937_64 rng(std::uint64_t salt = 0) {
    return std::mt19937_64(0x5eed5eedULL ^ salt);
}

inline double uniform(std::mt19937_64& gen, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(gen);
}

inline int uniform_int(std::mt19937_64& gen, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(gen);
}

} // namespace oracle
