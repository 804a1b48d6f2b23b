// Residual normality diagnostics: two-sided Kolmogorov-Smirnov test against
// a zero-mean Gaussian with estimated scale, plus excess kurtosis.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "csid/common.hpp"

namespace csid {

struct KsReport {
    double statistic = 0.0;      // sup-norm distance D
    double critical = 0.0;       // asymptotic critical value at alpha / sqrt(n)
    bool reject = false;
    double excess_kurtosis = 0.0;
    std::size_t n = 0;
    bool degenerate = false;     // all residuals identical (point mass)
};

namespace detail {

inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Kolmogorov survival function Q(t) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 t^2).
inline double kolmogorov_survival(double t) {
    if (t <= 0.0) return 1.0;
    double s = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * t * t);
        s += (j % 2 == 1) ? term : -term;
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * s, 0.0, 1.0);
}

// Inverse of the survival function by bisection: K with Q(K) = alpha, e.g.
// K ~= 1.358 at alpha = 0.05.
inline double kolmogorov_critical(double alpha) {
    double lo = 0.01, hi = 5.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (kolmogorov_survival(mid) > alpha) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

inline double excess_kurtosis(const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    double m2 = 0.0, m4 = 0.0;
    for (double x : xs) {
        const double d = x - mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m4 /= n;
    if (m2 <= 0.0) return 0.0;
    return m4 / (m2 * m2) - 3.0;
}

// Two-sided K-S test of `residuals` against N(0, s^2), s^2 estimated as the
// mean square of the sample (the residual model has zero mean). Rejection
// uses the asymptotic critical value K(alpha)/sqrt(n).
inline KsReport ks_normality_diagnostic(const std::vector<double>& residuals,
                                        double alpha_level = 0.05) {
    if (residuals.size() < 8) {
        throw insufficient_data_error("ks_normality_diagnostic: need at least 8 residuals, got " +
                                      std::to_string(residuals.size()));
    }
    KsReport report;
    report.n = residuals.size();
    report.excess_kurtosis = excess_kurtosis(residuals);

    const double n = static_cast<double>(residuals.size());
    double ss = 0.0;
    for (double r : residuals) ss += r * r;
    const double s = std::sqrt(ss / n);
    report.critical = detail::kolmogorov_critical(alpha_level) / std::sqrt(n);

    if (s < 1e-15) {
        report.degenerate = true;
        report.statistic = 1.0;
        report.reject = true;
        return report;
    }

    std::vector<double> sorted = residuals;
    std::sort(sorted.begin(), sorted.end());
    double d_max = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = detail::std_normal_cdf(sorted[i] / s);
        const double hi = static_cast<double>(i + 1) / n - f;
        const double lo = f - static_cast<double>(i) / n;
        d_max = std::max({d_max, hi, lo});
    }
    report.statistic = d_max;
    report.reject = d_max > report.critical;
    return report;
}

} // namespace csid
