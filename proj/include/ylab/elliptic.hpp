#pragma once

// Linear elliptic solves: radial Dirichlet problems on balls (the correction
// PDE), a mean-zero periodic problem on a flat torus, and a radial Neumann
// variant.  The radial discretization is conservative finite-volume on a
// uniform grid (node i at s = i h, control volume [s-h/2, s+h/2] with exact
// s^{n-1} face areas and cell masses): tridiagonal, symmetric in the
// cell-mass inner product, an M-matrix whenever the potential is >= 0, and
// second order.  The center cell has zero inner flux, which is exactly the
// u'(0) = 0 regularity condition; the outer node carries the Dirichlet value.

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadrature.hpp"
#include "special_functions.hpp"

namespace ylab {

// --- radial operator --------------------------------------------------------

struct RadialOperator {
    double r = 0.0;
    int N = 0;             // unknowns u_0 .. u_{N-1}; u_N = 0 is the boundary node
    int n = 0;
    double a_coeff = 0.0;  // a = 4(n-1)/(n-2)
    std::vector<double> potential; // per interior node, >= 0 in the intended regime

    // derived FV coefficients
    double h = 0.0;
    std::vector<double> cp, cm, cellmass; // outer/inner flux coeffs, cell masses V_i
};

inline RadialOperator make_radial_operator(double r, int N, int n,
                                           const std::function<double(double)>& potential) {
    if (!(r > 0.0) || N < 8)
        throw std::domain_error("make_radial_operator: need r > 0 and N >= 8");
    RadialOperator op;
    op.r = r;
    op.N = N;
    op.n = n;
    op.a_coeff = conformal_a(n);
    op.h = r / N;
    op.cp.resize(N);
    op.cm.resize(N);
    op.cellmass.resize(N);
    op.potential.resize(N);
    for (int i = 0; i < N; ++i) {
        const double s = i * op.h;
        const double sp = s + 0.5 * op.h;
        const double sm = (i == 0) ? 0.0 : s - 0.5 * op.h;
        const double V = (std::pow(sp, n) - std::pow(sm, n)) / n;
        op.cellmass[i] = V;
        op.cp[i] = op.a_coeff * std::pow(sp, n - 1) / (op.h * V);
        op.cm[i] = (i == 0) ? 0.0 : op.a_coeff * std::pow(sm, n - 1) / (op.h * V);
        op.potential[i] = potential(s);
    }
    return op;
}

inline RadialOperator make_radial_operator(double r, int N, int n, double constant_potential) {
    return make_radial_operator(r, N, n, [constant_potential](double) { return constant_potential; });
}

// Apply the discrete operator (homogeneous Dirichlet closure at i = N).
inline std::vector<double> radial_apply(const RadialOperator& op, const std::vector<double>& u) {
    if (int(u.size()) != op.N)
        throw std::invalid_argument("radial_apply: size mismatch");
    std::vector<double> out(op.N);
    for (int i = 0; i < op.N; ++i) {
        const double up = (i + 1 < op.N) ? u[i + 1] : 0.0;
        const double um = (i > 0) ? u[i - 1] : 0.0;
        out[i] = (op.cp[i] + op.cm[i] + op.potential[i]) * u[i] - op.cp[i] * up - op.cm[i] * um;
    }
    return out;
}

// Same, accumulated in long double: the residual floor of the double-precision
// stencil is (a/h^2) * sup|u| * eps_mach, which matters for fine grids.
inline std::vector<double> radial_residual(const RadialOperator& op, const std::vector<double>& u,
                                           const std::vector<double>& rhs) {
    std::vector<double> res(op.N);
    for (int i = 0; i < op.N; ++i) {
        const long double up = (i + 1 < op.N) ? u[i + 1] : 0.0L;
        const long double um = (i > 0) ? u[i - 1] : 0.0L;
        const long double Au = (long double)(op.cp[i] + op.cm[i] + op.potential[i]) * u[i]
                             - (long double)op.cp[i] * up - (long double)op.cm[i] * um;
        res[i] = double(Au - (long double)rhs[i]);
    }
    return res;
}

// Thomas algorithm for the operator's tridiagonal system (optionally with a
// modified diagonal, used by Newton steps).
inline std::vector<double> radial_thomas(const RadialOperator& op, const std::vector<double>& diag,
                                         const std::vector<double>& rhs) {
    const int N = op.N;
    std::vector<double> c(N), d(N);
    double piv = diag[0];
    if (piv == 0.0) throw std::runtime_error("radial_thomas: singular pivot at row 0");
    c[0] = op.cp[0] / piv;
    d[0] = rhs[0] / piv;
    for (int i = 1; i < N; ++i) {
        piv = diag[i] - op.cm[i] * c[i - 1];
        if (piv == 0.0) throw std::runtime_error("radial_thomas: singular pivot at row " + std::to_string(i));
        c[i] = op.cp[i] / piv;
        d[i] = (rhs[i] + op.cm[i] * d[i - 1]) / piv;
    }
    std::vector<double> u(N);
    u[N - 1] = d[N - 1];
    for (int i = N - 2; i >= 0; --i) u[i] = d[i] + c[i] * u[i + 1];
    return u;
}

struct RadialSolveResult {
    std::vector<double> u;       // interior nodes 0..N-1 (u(r) = 0 appended by callers)
    double residual_rel = 0.0;   // max|Au - rhs| / max|rhs|
};

// Solve (-a Laplacian + potential) u = rhs with u(r) = 0, u'(0) = 0.
// The reported residual is recomputed by re-applying the discrete operator.
inline RadialSolveResult solve_radial_dirichlet(const RadialOperator& op,
                                                const std::vector<double>& rhs) {
    if (int(rhs.size()) != op.N)
        throw std::invalid_argument("solve_radial_dirichlet: rhs size mismatch");
    std::vector<double> diag(op.N);
    for (int i = 0; i < op.N; ++i) diag[i] = op.cp[i] + op.cm[i] + op.potential[i];
    RadialSolveResult out;
    out.u = radial_thomas(op, diag, rhs);
    const auto res = radial_residual(op, out.u, rhs);
    double rmax = 0.0, smax = 0.0;
    for (int i = 0; i < op.N; ++i) {
        rmax = std::max(rmax, std::abs(res[i]));
        smax = std::max(smax, std::abs(rhs[i]));
    }
    out.residual_rel = (smax > 0.0) ? rmax / smax : rmax;
    return out;
}

// Right-hand side of the correction PDE:  a Laplacian(u) + R u - R u^{1-gamma},
// evaluated nodewise from the analytic radial Laplacian of u.  R is the
// angular-averaged scalar model (constant = scalar0 at the radii used here).
inline std::vector<double> correction_rhs(const RadialOperator& op, double gamma, double scalar0,
                                          const std::function<double(double)>& u_value,
                                          const std::function<double(double)>& u_laplacian) {
    if (!(gamma > 0.0) || !(gamma < 1.0))
        throw std::domain_error("correction_rhs: gamma must lie in (0,1)");
    std::vector<double> rhs(op.N);
    for (int i = 0; i < op.N; ++i) {
        const double s = i * op.h;
        const double uv = u_value(s);
        const double lap = u_laplacian(s);
        rhs[i] = op.a_coeff * lap + scalar0 * uv - scalar0 * std::pow(uv, 1.0 - gamma);
    }
    return rhs;
}

struct PositivityReport {
    bool positive = false;
    double min_value = 0.0;
    double min_location = 0.0;
};

// Strict positivity over interior nodes (the Dirichlet boundary value 0 at
// s = r is not part of the check).
inline PositivityReport positivity_check(const std::vector<double>& u, double h) {
    PositivityReport rep;
    if (u.empty()) return rep;
    size_t arg = 0;
    for (size_t i = 1; i < u.size(); ++i)
        if (u[i] < u[arg]) arg = i;
    rep.min_value = u[arg];
    rep.min_location = double(arg) * h;
    rep.positive = rep.min_value > 0.0;
    return rep;
}

// --- periodic torus ---------------------------------------------------------

// Flat n-torus [0, L)^n sampled on m points per axis (m a power of two).
struct TorusProblem {
    int n = 0;
    double L = 0.0;
    int m = 0;
    std::vector<double> source;   // row-major, size m^n
    std::vector<double> solution; // filled by the solver
};

namespace detail {

// in-place radix-2 complex FFT (forward: sign = -1)
inline void fft_pow2(std::vector<std::complex<double>>& a, int sign) {
    const size_t n = a.size();
    if (n == 0 || (n & (n - 1)))
        throw std::invalid_argument("fft_pow2: length must be a power of two");
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * pi / double(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

// apply FFT along one axis of an m^n hypercube (complex data)
inline void fft_axis(std::vector<std::complex<double>>& data, int n, int m, int axis, int sign) {
    size_t stride = 1;
    for (int ax = n - 1; ax > axis; --ax) stride *= size_t(m);
    const size_t total = data.size();
    const size_t block = stride * size_t(m);
    std::vector<std::complex<double>> line(m);
    for (size_t base = 0; base < total; base += block)
        for (size_t off = 0; off < stride; ++off) {
            for (int k = 0; k < m; ++k) line[k] = data[base + off + stride * size_t(k)];
            fft_pow2(line, sign);
            for (int k = 0; k < m; ++k) data[base + off + stride * size_t(k)] = line[k];
        }
}

} // namespace detail

// Spectral application of -a Laplacian on the torus grid (trig-exact).
inline std::vector<double> torus_neg_a_laplacian(const TorusProblem& tp,
                                                 const std::vector<double>& u) {
    const size_t total = u.size();
    std::vector<std::complex<double>> hat(total);
    for (size_t i = 0; i < total; ++i) hat[i] = u[i];
    for (int ax = 0; ax < tp.n; ++ax) detail::fft_axis(hat, tp.n, tp.m, ax, -1);

    const double a = conformal_a(tp.n);
    std::vector<int> idx(tp.n, 0);
    for (size_t flat = 0; flat < total; ++flat) {
        double k2 = 0.0;
        size_t rem = flat;
        for (int ax = tp.n - 1; ax >= 0; --ax) {
            int k = int(rem % size_t(tp.m));
            rem /= size_t(tp.m);
            if (k > tp.m / 2) k -= tp.m;
            const double f = 2.0 * pi * k / tp.L;
            k2 += f * f;
        }
        hat[flat] *= a * k2;
    }
    for (int ax = 0; ax < tp.n; ++ax) detail::fft_axis(hat, tp.n, tp.m, ax, +1);
    std::vector<double> out(total);
    const double norm = 1.0 / std::pow(double(tp.m), tp.n);
    for (size_t i = 0; i < total; ++i) out[i] = hat[i].real() * norm;
    return out;
}

// Solve -a Laplacian u = F on the torus with mean(u) = 0, spectrally.
// F must have zero mean (solvability); checked against 1e-12 * ||F||_inf.
inline std::vector<double> solve_torus_mean_zero(TorusProblem& tp) {
    const size_t total = tp.source.size();
    const size_t expect = size_t(std::llround(std::pow(double(tp.m), tp.n)));
    if (total != expect)
        throw std::invalid_argument("solve_torus_mean_zero: source size mismatch");
    double mean = 0.0, fmax = 0.0;
    for (double v : tp.source) {
        mean += v;
        fmax = std::max(fmax, std::abs(v));
    }
    mean /= double(total);
    if (std::abs(mean) > 1e-12 * std::max(fmax, 1.0))
        throw std::domain_error("solve_torus_mean_zero: source mean is not zero (no solution)");

    std::vector<std::complex<double>> hat(total);
    for (size_t i = 0; i < total; ++i) hat[i] = tp.source[i];
    for (int ax = 0; ax < tp.n; ++ax) detail::fft_axis(hat, tp.n, tp.m, ax, -1);

    const double a = conformal_a(tp.n);
    for (size_t flat = 0; flat < total; ++flat) {
        double k2 = 0.0;
        size_t rem = flat;
        for (int ax = tp.n - 1; ax >= 0; --ax) {
            int k = int(rem % size_t(tp.m));
            rem /= size_t(tp.m);
            if (k > tp.m / 2) k -= tp.m;
            const double f = 2.0 * pi * k / tp.L;
            k2 += f * f;
        }
        hat[flat] = (k2 == 0.0) ? 0.0 : hat[flat] / (a * k2);
    }
    for (int ax = 0; ax < tp.n; ++ax) detail::fft_axis(hat, tp.n, tp.m, ax, +1);
    tp.solution.resize(total);
    const double norm = 1.0 / std::pow(double(tp.m), tp.n);
    for (size_t i = 0; i < total; ++i) tp.solution[i] = hat[i].real() * norm;
    return tp.solution;
}

// --- radial Neumann variant -------------------------------------------------

// Solve -a Laplacian u = F on the flat ball of given radius with zero
// Neumann data, normalized to zero cell-mass mean.  Compatibility
// sum(V_i F_i) = 0 is required (Fredholm alternative).  Unknowns live at
// nodes s = i h for i = 0..N; the outer node's half cell ends exactly at
// s = radius, where the zero flux is the natural boundary closure.
inline RadialSolveResult solve_ball_neumann(const std::vector<double>& F, double radius,
                                            int N, int n) {
    if (int(F.size()) != N + 1)
        throw std::invalid_argument("solve_ball_neumann: rhs must have N+1 samples");
    const double a = conformal_a(n);
    const double h = radius / N;
    std::vector<double> cp(N + 1, 0.0), cm(N + 1, 0.0), V(N + 1);
    for (int i = 0; i <= N; ++i) {
        const double s = i * h;
        const double sp = (i == N) ? radius : s + 0.5 * h;
        const double sm = (i == 0) ? 0.0 : s - 0.5 * h;
        V[i] = (std::pow(sp, n) - std::pow(sm, n)) / n;
        if (i < N) cp[i] = a * std::pow(sp, n - 1) / (h * V[i]);
        if (i > 0) cm[i] = a * std::pow(sm, n - 1) / (h * V[i]);
    }

    double compat = 0.0, fscale = 0.0, mass = 0.0;
    for (int i = 0; i <= N; ++i) {
        compat += V[i] * F[i];
        fscale = std::max(fscale, std::abs(F[i]));
        mass += V[i];
    }
    // Gross incompatibility is an error; discretization-level imbalance
    // (analytic sources sampled at nodes carry O(h^2) mean) is projected out.
    if (std::abs(compat) > 1e-3 * std::max(fscale, 1.0) * mass)
        throw std::domain_error("solve_ball_neumann: incompatible source (nonzero mean)");
    std::vector<double> Fp = F;
    const double shift = compat / mass;
    for (double& v : Fp) v -= shift;

    // singular system with constant nullspace: pin the outer node (largest
    // cell, so the unenforced row carries no 1/V amplification), recentre.
    const int M = N + 1;
    std::vector<double> diag(M), cc(M), dd(M);
    for (int i = 0; i < M; ++i) diag[i] = cp[i] + cm[i];
    diag[M - 1] = 1.0;
    Fp[M - 1] = 0.0;
    const double cmN = cm[M - 1];
    cm[M - 1] = 0.0;

    cc[0] = cp[0] / diag[0];
    dd[0] = Fp[0] / diag[0];
    for (int i = 1; i < M; ++i) {
        const double piv = diag[i] - cm[i] * cc[i - 1];
        if (piv == 0.0) throw std::runtime_error("solve_ball_neumann: singular pivot");
        cc[i] = cp[i] / piv;
        dd[i] = (Fp[i] + cm[i] * dd[i - 1]) / piv;
    }
    RadialSolveResult out;
    out.u.resize(M);
    out.u[M - 1] = dd[M - 1];
    for (int i = M - 2; i >= 0; --i) out.u[i] = dd[i] + cc[i] * out.u[i + 1];
    cm[M - 1] = cmN;

    double um = 0.0;
    for (int i = 0; i < M; ++i) um += V[i] * out.u[i];
    um /= mass;
    for (double& v : out.u) v -= um;

    // residual against the true Neumann operator and the projected source
    Fp[M - 1] = F[M - 1] - shift;
    double rmax = 0.0;
    for (int i = 0; i < M; ++i) {
        const double up = (i + 1 < M) ? out.u[i + 1] : 0.0; // cp[N] = 0: unused
        const double um2 = (i > 0) ? out.u[i - 1] : 0.0;
        const double Au = (cp[i] + cm[i]) * out.u[i] - cp[i] * up - cm[i] * um2;
        rmax = std::max(rmax, std::abs(Au - Fp[i]));
    }
    out.residual_rel = (fscale > 0.0) ? rmax / fscale : rmax;
    return out;
}

} // namespace ylab
