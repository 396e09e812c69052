#pragma once

// Small statistical oracle used by sampling tests: chi-square goodness of
// fit against a uniform distribution, with the p-value computed through
// the regularized incomplete gamma function (series + continued fraction).

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace ecorank::test {

namespace detail {

inline double gamma_series_p(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < 500; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_contfrac_q(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

// Q(a, x) = 1 - P(a, x)
inline double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_q: bad arguments");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_series_p(a, x);
    return gamma_contfrac_q(a, x);
}

}  // namespace detail

inline double chi_square_statistic(const std::vector<std::size_t>& counts) {
    if (counts.size() < 2) throw std::invalid_argument("need at least 2 bins");
    std::size_t total = 0;
    for (std::size_t c : counts) total += c;
    const double expected = static_cast<double>(total) / counts.size();
    double chi2 = 0.0;
    for (std::size_t c : counts) {
        const double diff = static_cast<double>(c) - expected;
        chi2 += diff * diff / expected;
    }
    return chi2;
}

// p-value of the uniformity hypothesis; survives at level alpha iff p > alpha.
inline double chi_square_uniform_pvalue(const std::vector<std::size_t>& counts) {
    const double chi2 = chi_square_statistic(counts);
    const double dof = static_cast<double>(counts.size() - 1);
    return detail::gamma_q(dof / 2.0, chi2 / 2.0);
}

}  // namespace ecorank::test
