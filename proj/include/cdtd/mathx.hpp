#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cdtd {

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); }

// Inverse standard normal cdf (Wichura's PPND16). Absolute error below
// 1e-15 on (0,1); the preprocessing contract only needs 1e-9.
double norm_ppf(double p);

inline double sigmoid(double x) {
    if (x >= 0.0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

inline double logit(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("logit: argument must be in (0,1)");
    return std::log(p / (1.0 - p));
}

inline double softplus(double x) {
    if (x > 30.0) return x;
    return std::log1p(std::exp(x));
}

// inverse of softplus, i.e. softplus(softplus_inv(y)) == y for y > 0
inline double softplus_inv(double y) {
    if (!(y > 0.0)) throw std::domain_error("softplus_inv: argument must be > 0");
    if (y > 30.0) return y;
    return std::log(std::expm1(y));
}

}  // namespace cdtd
