#pragma once

// Closed-form constants for the conformal/Yamabe toolbox: Gamma/Beta
// machinery, unit-sphere areas, the best Sobolev constant T, the K-moments
// of the standard bubble, and the exact identities tying them together.
//
// Everything here is a pure function of its arguments.  Double precision
// throughout; the Gamma evaluations are delegated to the C library
// (Lanczos-class, relative error well under 1e-12 for the arguments we use).

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ylab {

inline constexpr double pi = 3.14159265358979323846264338327950288;

// Gamma(x) for x > 0.
inline double gamma_fn(double x) {
    if (!(x > 0.0))
        throw std::domain_error("gamma_fn: argument must be positive, got " + std::to_string(x));
    return std::tgamma(x);
}

// log Gamma(x), x > 0.  Used to form ratios without overflow.
inline double log_gamma(double x) {
    if (!(x > 0.0))
        throw std::domain_error("log_gamma: argument must be positive");
    return std::lgamma(x);
}

// Euler Beta function B(a,b) = Gamma(a)Gamma(b)/Gamma(a+b), via logs.
inline double beta_fn(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0))
        throw std::domain_error("beta_fn: arguments must be positive");
    return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

// Area of the unit (n-1)-sphere in R^n: omega_n = 2 pi^{n/2} / Gamma(n/2).
inline double sphere_area(int n) {
    if (n < 2)
        throw std::domain_error("sphere_area: need n >= 2");
    return 2.0 * std::pow(pi, 0.5 * n) / gamma_fn(0.5 * n);
}

// Critical Sobolev exponent p = 2n/(n-2).
inline double critical_exponent(int n) {
    if (n < 3)
        throw std::domain_error("critical_exponent: need n >= 3");
    return 2.0 * n / (n - 2.0);
}

// Dimensional constant a = 4(n-1)/(n-2) in the conformal Laplacian.
inline double conformal_a(int n) {
    if (n < 3)
        throw std::domain_error("conformal_a: need n >= 3");
    return 4.0 * (n - 1.0) / (n - 2.0);
}

// Best Sobolev constant for the embedding H^1(R^n) -> L^p(R^n),
// T = pi n(n-2) (Gamma(n/2)/Gamma(n))^{2/n}.
inline double best_sobolev_T(int n) {
    if (n < 3)
        throw std::domain_error("best_sobolev_T: need n >= 3");
    const double lg = std::lgamma(0.5 * n) - std::lgamma(double(n));
    return pi * n * (n - 2.0) * std::exp(2.0 * lg / n);
}

// Radial moment of the standard bubble:
//   I(k, m) = \int_{R^n} |y|^{2k} / (1+|y|^2)^m dy
//           = omega_n * (1/2) * B((n+2k)/2, (2m-n-2k)/2),
// finite iff 2m - n - 2k > 0.  The 1/2 is the Beta-integral half factor;
// it matters for absolute values even though it cancels in every ratio.
inline double bubble_moment(int n, int k, int m) {
    const double a = 0.5 * (n + 2.0 * k);
    const double b = 0.5 * (2.0 * m - n - 2.0 * k);
    if (!(a > 0.0) || !(b > 0.0))
        throw std::domain_error("bubble_moment: integral diverges for these exponents");
    return sphere_area(n) * 0.5 * beta_fn(a, b);
}

// The three bubble moments used throughout, plus T and omega_n.
// K3 is only integrable for n >= 5; at n = 4 it carries an explicit
// infinity flag (never a large float -- downstream logic branches on it).
struct MomentSet {
    int n = 0;
    double K1 = 0.0;       // (n-2)^2 \int |y|^2/(1+|y|^2)^n
    double K2 = 0.0;       // (\int 1/(1+|y|^2)^n)^{2/p}
    double K3 = 0.0;       // \int 1/(1+|y|^2)^{n-2}; +inf flag at n = 4
    bool K3_infinite = false;
    double T = 0.0;
    double omega_n = 0.0;
};

inline MomentSet k_moments(int n) {
    if (n < 4)
        throw std::domain_error("k_moments: need n >= 4");
    MomentSet ms;
    ms.n = n;
    ms.omega_n = sphere_area(n);
    ms.T = best_sobolev_T(n);
    ms.K1 = (n - 2.0) * (n - 2.0) * bubble_moment(n, 1, n);
    const double p = critical_exponent(n);
    ms.K2 = std::pow(bubble_moment(n, 0, n), 2.0 / p);
    if (n == 4) {
        ms.K3_infinite = true;
        ms.K3 = std::numeric_limits<double>::infinity();
    } else {
        ms.K3 = bubble_moment(n, 0, n - 2);
    }
    return ms;
}

// Ratio \int |y|^2/(1+|y|^2)^n dy  /  \int 1/(1+|y|^2)^{n-2} dy, computed
// from the Gamma representation of the two moments.  Collapses to
// n(n-4) / (4(n-1)(n-2)) in exact arithmetic -- callers check against that.
// Requires n >= 5 (the denominator integral diverges at n = 4).
inline double moment_ratio(int n) {
    if (n <= 4)
        throw std::domain_error("moment_ratio: need n >= 5 (denominator diverges at n = 4)");
    return bubble_moment(n, 1, n) / bubble_moment(n, 0, n - 2);
}

// Residual of the Legendre-duplication identity closing the constant
// bookkeeping: (n-2) - T * K2^{-2/(n-2)} / n.  Exactly zero in exact
// arithmetic for every n >= 4.
inline double duplication_residual(int n) {
    if (n < 4)
        throw std::domain_error("duplication_residual: need n >= 4");
    const MomentSet ms = k_moments(n);
    return (n - 2.0) - ms.T * std::pow(ms.K2, -2.0 / (n - 2.0)) / n;
}

} // namespace ylab
