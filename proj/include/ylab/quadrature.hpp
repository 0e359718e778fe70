#pragma once

// Radial and full-ball integration.  Every n-dimensional integral in the
// constructions reduces, after angular averaging, to
//     omega_n * \int_0^r s^{n-1} f(s) ds
// which we evaluate by composite Gauss-Legendre with panels log-spaced
// toward s = 0 (bubble profiles at small eps concentrate at scale
// sqrt(eps)).  A seeded uniform-ball Monte Carlo integrator provides the
// independent cross-check path.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "special_functions.hpp"

namespace ylab {

// 16-point Gauss-Legendre rule on [-1, 1] (positive half; rule is symmetric).
namespace detail {
inline constexpr int gl_half = 8;
inline constexpr double gl_x[gl_half] = {
    0.0950125098376374401853193, 0.2816035507792589132304605,
    0.4580167776572273863424194, 0.6178762444026437484466718,
    0.7554044083550030338951012, 0.8656312023878317438804679,
    0.9445750230732325760779884, 0.9894009349916499325961542};
inline constexpr double gl_w[gl_half] = {
    0.1894506104550684962853967, 0.1826034150449235888667637,
    0.1691565193950025381893121, 0.1495959888165767320815017,
    0.1246289712555338720524763, 0.0951585116824927848099251,
    0.0622535239386478928628438, 0.0271524594117540948517806};
} // namespace detail

// Quadrature nodes/weights on (0, r]; sum of weights reproduces r.
struct RadialGrid {
    double r = 0.0;
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Composite Gauss-Legendre grid on [0, r].  Panel boundaries are geometric
// toward 0 (finest panel ~ r * shrink^{panels-1}); pass eps_hint > 0 to force
// sqrt(eps_hint) in as a boundary so the bubble's concentration scale is
// always resolved by dedicated panels.
inline RadialGrid make_radial_grid(double r, int panels = 64, double eps_hint = 0.0) {
    if (!(r > 0.0))
        throw std::domain_error("make_radial_grid: r must be positive");
    if (panels < 1)
        throw std::domain_error("make_radial_grid: need at least one panel");

    // geometric boundaries b_0 = 0 < b_1 < ... < b_panels = r
    const double shrink = 0.75;
    std::vector<double> bnd(panels + 1);
    bnd[panels] = r;
    for (int i = panels - 1; i >= 1; --i) bnd[i] = bnd[i + 1] * shrink;
    bnd[0] = 0.0;
    if (eps_hint > 0.0) {
        const double se = std::sqrt(eps_hint);
        if (se < r) {
            // snap the nearest boundary onto sqrt(eps) (keep ordering)
            int best = 1;
            double dist = std::abs(std::log(bnd[1] / se));
            for (int i = 2; i < panels; ++i) {
                const double d = std::abs(std::log(bnd[i] / se));
                if (d < dist) { dist = d; best = i; }
            }
            bnd[best] = se;
        }
    }

    RadialGrid g;
    g.r = r;
    g.nodes.reserve(size_t(panels) * 2 * detail::gl_half);
    g.weights.reserve(size_t(panels) * 2 * detail::gl_half);
    for (int pnl = 0; pnl < panels; ++pnl) {
        const double lo = bnd[pnl], hi = bnd[pnl + 1];
        const double mid = 0.5 * (lo + hi), hw = 0.5 * (hi - lo);
        // emit the 16 points of this panel in ascending order
        for (int k = detail::gl_half - 1; k >= 0; --k) {
            g.nodes.push_back(mid - hw * detail::gl_x[k]);
            g.weights.push_back(hw * detail::gl_w[k]);
        }
        for (int k = 0; k < detail::gl_half; ++k) {
            g.nodes.push_back(mid + hw * detail::gl_x[k]);
            g.weights.push_back(hw * detail::gl_w[k]);
        }
    }
    return g;
}

// A radial function sampled on a grid, with derivative values (analytic when
// the caller has them; else fill via finite differences).  `second` holds
// second-derivative samples when an analytic formula exists (used by the
// correction right-hand side); it may be left empty.
struct RadialField {
    RadialGrid grid;
    std::vector<double> values;
    std::vector<double> derivative;
    std::vector<double> second; // optional
};

// omega_n \int_0^r s^{n-1} f(s) ds over the grid.
inline double radial_integrate(const std::function<double(double)>& f,
                               const RadialGrid& grid, int n) {
    const double on = sphere_area(n);
    double acc = 0.0;
    for (size_t k = 0; k < grid.nodes.size(); ++k) {
        const double s = grid.nodes[k];
        const double v = f(s);
        if (!std::isfinite(v))
            throw std::runtime_error("radial_integrate: non-finite integrand at s = " + std::to_string(s));
        acc += grid.weights[k] * std::pow(s, n - 1) * v;
    }
    return on * acc;
}

// Same reduction for sampled values (one value per grid node).
inline double radial_integrate_samples(const std::vector<double>& vals,
                                       const RadialGrid& grid, int n) {
    if (vals.size() != grid.nodes.size())
        throw std::invalid_argument("radial_integrate_samples: size mismatch");
    const double on = sphere_area(n);
    double acc = 0.0;
    for (size_t k = 0; k < vals.size(); ++k) {
        if (!std::isfinite(vals[k]))
            throw std::runtime_error("radial_integrate_samples: non-finite sample");
        acc += grid.weights[k] * std::pow(grid.nodes[k], n - 1) * vals[k];
    }
    return on * acc;
}

// Plain composite integral of f over (0, grid.r], without the spherical
// measure factors (for substituted integrands that carry their own Jacobian).
inline double integrate_1d(const std::function<double(double)>& f, const RadialGrid& grid) {
    double acc = 0.0;
    for (size_t k = 0; k < grid.nodes.size(); ++k) {
        const double v = f(grid.nodes[k]);
        if (!std::isfinite(v))
            throw std::runtime_error("integrate_1d: non-finite integrand value");
        acc += grid.weights[k] * v;
    }
    return acc;
}

// Average over the unit sphere of y^T A y for symmetric A: trace(A)/n.
// Odd moments vanish identically and are treated as exact zeros by callers.
inline double angular_average_quadratic(const std::vector<std::vector<double>>& A) {
    const size_t n = A.size();
    double tr = 0.0;
    for (size_t i = 0; i < n; ++i) {
        if (A[i].size() != n)
            throw std::domain_error("angular_average_quadratic: matrix not square");
        for (size_t j = 0; j < n; ++j)
            if (std::abs(A[i][j] - A[j][i]) > 1e-12 * (1.0 + std::abs(A[i][j])))
                throw std::domain_error("angular_average_quadratic: matrix not symmetric");
        tr += A[i][i];
    }
    return tr / double(n);
}

struct McEstimate {
    double estimate = 0.0;
    double stderr_ = 0.0;
    std::uint64_t samples = 0;
};

// Uniform Monte Carlo over the ball |y| <= r in R^n.  Deterministic for a
// fixed seed: mt19937_64, uniforms via (x >> 11) * 2^-53, direction from
// Box-Muller normals, radius r * U^{1/n}.  Reduction order is the sample
// order, so estimates are bit-stable across runs.
inline McEstimate mc_ball_integrate(const std::function<double(const std::vector<double>&)>& f,
                                    int n, double r, std::uint64_t N, std::uint64_t seed) {
    if (N < 1000)
        throw std::domain_error("mc_ball_integrate: need N >= 1e3");
    std::mt19937_64 rng(seed);
    auto u01 = [&rng]() { return double(rng() >> 11) * 0x1.0p-53; };

    const double vol = sphere_area(n) / n * std::pow(r, n);
    std::vector<double> y(n);
    double sum = 0.0, sumsq = 0.0;
    bool have_spare = false;
    double spare = 0.0;
    auto normal = [&]() {
        if (have_spare) { have_spare = false; return spare; }
        double u1 = u01(), u2 = u01();
        while (u1 <= 0.0) u1 = u01();
        const double m = std::sqrt(-2.0 * std::log(u1));
        spare = m * std::sin(2.0 * pi * u2);
        have_spare = true;
        return m * std::cos(2.0 * pi * u2);
    };

    for (std::uint64_t k = 0; k < N; ++k) {
        double norm2 = 0.0;
        for (int i = 0; i < n; ++i) { y[i] = normal(); norm2 += y[i] * y[i]; }
        double nrm = std::sqrt(norm2);
        if (nrm == 0.0) nrm = 1.0;
        const double rad = r * std::pow(u01(), 1.0 / n);
        for (int i = 0; i < n; ++i) y[i] *= rad / nrm;
        const double v = f(y);
        if (!std::isfinite(v)) {
            std::string where = "(";
            for (int i = 0; i < n; ++i) where += std::to_string(y[i]) + (i + 1 < n ? "," : ")");
            throw std::runtime_error("mc_ball_integrate: non-finite sample at " + where);
        }
        sum += v;
        sumsq += v * v;
    }
    McEstimate e;
    e.samples = N;
    const double mean = sum / double(N);
    const double var = std::max(0.0, sumsq / double(N) - mean * mean);
    e.estimate = vol * mean;
    e.stderr_ = vol * std::sqrt(var / double(N));
    return e;
}

} // namespace ylab
