#pragma once

// Curvature data at a point ("jets"), tensor symmetrization/decomposition,
// and the second-order normal-coordinate metric expansion that turns jet
// data into radial integrand weights.
//
// Conventions:
//   ricci_{jl}  = sum_i R_{ijil}
//   scalar0     = sum_j ricci_{jj}
//   g^{ij}(x)   = delta^{ij} - (1/3) R_{irjs} x^r x^s + O(|x|^3)
//   sqrt(det g) = 1 - (1/6) Ric(x, x) + O(|x|^3)
// The index placement in g^{ij} is the standard normal-coordinate expansion;
// only traces of it enter the downstream integrals.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace ylab {

// Dense rank-4 tensor, row-major n^4 storage.
struct Rank4 {
    int n = 0;
    std::vector<double> a;

    Rank4() = default;
    explicit Rank4(int dim) : n(dim), a(size_t(dim) * dim * dim * dim, 0.0) {}
    double& operator()(int i, int j, int k, int l) {
        return a[size_t(((i * n + j) * n + k)) * n + l];
    }
    double operator()(int i, int j, int k, int l) const {
        return a[size_t(((i * n + j) * n + k)) * n + l];
    }
};

using Matrix = std::vector<std::vector<double>>;

inline Matrix zero_matrix(int n) { return Matrix(n, std::vector<double>(n, 0.0)); }

// Closure of a raw array onto the algebraic curvature symmetries.
//
// Step 1 propagates each entry through the 8-element symmetry group
// {antisymmetry in (ij), antisymmetry in (kl), pair interchange}: every
// orbit takes its value from the lexicographically smallest signed position,
// so a single seeded entry like R_{1212} = kappa fills its whole orbit with
// the right signs instead of being shrunk by averaging.  Step 2 removes the
// totally antisymmetric part b_{ijkl} = (R_{ijkl}+R_{iklj}+R_{iljk})/3,
// which enforces the first Bianchi identity.  Idempotent by construction.
inline Rank4 symmetrize_riemann(const Rank4& raw) {
    const int n = raw.n;
    if (n <= 0 || raw.a.size() != size_t(n) * n * n * n)
        throw std::invalid_argument("symmetrize_riemann: bad tensor shape");

    Rank4 s(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l) {
                    // orbit of (i,j,k,l): signs -1 for each pair swap, +1 for interchange
                    const std::array<std::array<int, 4>, 8> pos = {{
                        {i, j, k, l}, {j, i, k, l}, {i, j, l, k}, {j, i, l, k},
                        {k, l, i, j}, {l, k, i, j}, {k, l, j, i}, {l, k, j, i}}};
                    const std::array<double, 8> sgn = {+1, -1, -1, +1, +1, -1, -1, +1};
                    int best = 0;
                    for (int m = 1; m < 8; ++m)
                        if (pos[m] < pos[best]) best = m;
                    // diagonal-degenerate orbits (i == j or k == l) force zero
                    if (i == j || k == l) {
                        s(i, j, k, l) = 0.0;
                        continue;
                    }
                    const auto& c = pos[best];
                    s(i, j, k, l) = sgn[best] * raw(c[0], c[1], c[2], c[3]);
                }

    Rank4 out(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l) {
                    const double b = (s(i, j, k, l) + s(i, k, l, j) + s(i, l, j, k)) / 3.0;
                    out(i, j, k, l) = s(i, j, k, l) - b;
                }
    return out;
}

// Ricci contraction, scalar trace, and the trace-free Weyl part
// (Kulkarni-Nomizu subtraction with the flat metric at the center).
inline void decompose_curvature(const Rank4& riem, int n,
                                Matrix& ricci, double& scalar0, Rank4& weyl) {
    if (n <= 3)
        throw std::domain_error("decompose_curvature: Weyl part needs n >= 4");
    ricci = zero_matrix(n);
    for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += riem(i, j, i, l);
            ricci[j][l] = acc;
        }
    scalar0 = 0.0;
    for (int j = 0; j < n; ++j) scalar0 += ricci[j][j];

    weyl = Rank4(n);
    const double c1 = 1.0 / (n - 2.0);
    const double c2 = scalar0 / ((n - 1.0) * (n - 2.0));
    auto d = [](int i, int j) { return i == j ? 1.0 : 0.0; };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l) {
                    const double kn = ricci[i][k] * d(j, l) - ricci[i][l] * d(j, k)
                                    + ricci[j][l] * d(i, k) - ricci[j][k] * d(i, l);
                    weyl(i, j, k, l) = riem(i, j, k, l) - c1 * kn
                                     + c2 * (d(i, k) * d(j, l) - d(i, l) * d(j, k));
                }
}

// Curvature data at the center of a geodesic ball.  Ricci, scalar and Weyl
// are always recomputed from `riemann` (never trusted from a file).
struct CurvatureJet {
    int n = 0;
    Rank4 riemann;
    Matrix ricci;
    double scalar0 = 0.0;
    std::vector<double> scalar_grad; // first-order scalar-curvature data
    Rank4 weyl;
    double validity_radius = 0.0;

    double max_weyl_entry() const {
        double m = 0.0;
        for (double v : weyl.a) m = std::max(m, std::abs(v));
        return m;
    }
    bool weyl_nonzero(double tol = 1e-12) const { return max_weyl_entry() > tol; }
};

struct MetricSample {
    Matrix inverse_metric;
    double sqrt_det = 1.0;
    std::vector<double> point;
};

inline double max_riemann_entry(const Rank4& r) {
    double m = 0.0;
    for (double v : r.a) m = std::max(m, std::abs(v));
    return m;
}

// Constant-curvature tensor R_{ijkl} = kappa (d_{ik} d_{jl} - d_{il} d_{jk}).
inline Rank4 constant_curvature_tensor(int n, double kappa) {
    Rank4 r(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            r(i, j, i, j) += kappa;
            r(i, j, j, i) -= kappa;
        }
    return r;
}

// Second-order truncation of the inverse metric and volume element.
inline MetricSample metric_expansion(const CurvatureJet& jet, const std::vector<double>& x) {
    const int n = jet.n;
    if (int(x.size()) != n)
        throw std::invalid_argument("metric_expansion: point dimension mismatch");
    double nrm = 0.0;
    for (double xi : x) nrm += xi * xi;
    nrm = std::sqrt(nrm);
    if (nrm > jet.validity_radius)
        throw std::domain_error("metric_expansion: point outside validity radius");

    MetricSample ms;
    ms.point = x;
    ms.inverse_metric = zero_matrix(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double corr = 0.0;
            for (int r = 0; r < n; ++r)
                for (int s = 0; s < n; ++s)
                    corr += jet.riemann(i, r, j, s) * x[r] * x[s];
            ms.inverse_metric[i][j] = (i == j ? 1.0 : 0.0) - corr / 3.0;
        }
    double ric_xx = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            ric_xx += jet.ricci[i][j] * x[i] * x[j];
    ms.sqrt_det = 1.0 - ric_xx / 6.0;
    return ms;
}

// First-order scalar-curvature model R(0) + grad . x.
inline double scalar_model(const CurvatureJet& jet, const std::vector<double>& x) {
    if (int(x.size()) != jet.n)
        throw std::invalid_argument("scalar_model: point dimension mismatch");
    double nrm = 0.0;
    for (double xi : x) nrm += xi * xi;
    if (std::sqrt(nrm) > jet.validity_radius)
        throw std::domain_error("scalar_model: point outside validity radius");
    double v = jet.scalar0;
    for (int i = 0; i < jet.n; ++i) v += jet.scalar_grad[i] * x[i];
    return v;
}

// Angular average of the volume weight at radius s:
//   <sqrt_det>(s) = 1 - (scalar0 / (6n)) s^2.
inline double volume_weight(const CurvatureJet& jet, double s) {
    return 1.0 - jet.scalar0 / (6.0 * jet.n) * s * s;
}

// Spectral radius of a symmetric matrix via power iteration on A^2
// (captures the largest |eigenvalue| regardless of sign).
inline double sym_spectral_radius(const Matrix& A) {
    const size_t n = A.size();
    std::vector<double> v(n, 1.0 / std::sqrt(double(n))), w(n), t(n);
    double lam = 0.0;
    for (int it = 0; it < 200; ++it) {
        for (size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (size_t j = 0; j < n; ++j) acc += A[i][j] * v[j];
            t[i] = acc;
        }
        for (size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (size_t j = 0; j < n; ++j) acc += A[i][j] * t[j];
            w[i] = acc;
        }
        double nrm = 0.0;
        for (double x : w) nrm += x * x;
        nrm = std::sqrt(nrm);
        if (nrm == 0.0) return 0.0;
        lam = nrm;
        for (size_t i = 0; i < n; ++i) v[i] = w[i] / nrm;
    }
    return std::sqrt(lam);
}

// Largest r such that the expansion stays uniformly elliptic: eigenvalues of
// g^{ij} and sqrt_det within [0.5, 1.5].  Bisection against curvature-norm
// bounds.  The metric correction is bounded by splitting off the
// constant-curvature part (whose worst case is exactly |kappa| r^2 / 3) and
// taking the Frobenius norm of the remainder; the volume correction uses the
// exact Ricci spectral radius.  Tight for near-constant-curvature jets,
// conservative otherwise.  Flat jets get a large sentinel.
inline double validity_radius_for(const Rank4& riem, const Matrix& ricci, int n,
                                  double scalar0, double r_cap = 1e6) {
    const double kappa = scalar0 / (double(n) * (n - 1.0));
    const Rank4 cc = constant_curvature_tensor(n, kappa);
    double frob_rest = 0.0;
    for (size_t k = 0; k < riem.a.size(); ++k) {
        const double d = riem.a[k] - cc.a[k];
        frob_rest += d * d;
    }
    frob_rest = std::sqrt(frob_rest);
    const double ric_norm = sym_spectral_radius(ricci);
    const double metric_coeff = (std::abs(kappa) + frob_rest) / 3.0;
    const double volume_coeff = ric_norm / 6.0;
    if (metric_coeff == 0.0 && volume_coeff == 0.0) return r_cap;

    auto ok = [&](double r) {
        return metric_coeff * r * r <= 0.5 && volume_coeff * r * r <= 0.5;
    };
    double lo = 0.0, hi = r_cap;
    if (ok(hi)) return r_cap;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (ok(mid) ? lo : hi) = mid;
    }
    return lo;
}

// Assemble a jet from a raw (possibly asymmetric) rank-4 array.
inline CurvatureJet make_jet(const Rank4& raw, const std::vector<double>& scalar_grad = {}) {
    CurvatureJet jet;
    jet.n = raw.n;
    jet.riemann = symmetrize_riemann(raw);
    decompose_curvature(jet.riemann, jet.n, jet.ricci, jet.scalar0, jet.weyl);
    jet.scalar_grad = scalar_grad.empty() ? std::vector<double>(jet.n, 0.0) : scalar_grad;
    if (int(jet.scalar_grad.size()) != jet.n)
        throw std::invalid_argument("make_jet: scalar_grad dimension mismatch");
    jet.validity_radius = validity_radius_for(jet.riemann, jet.ricci, jet.n, jet.scalar0);
    return jet;
}

// Seeded synthetic jet: random symmetrized Riemann entries (scaled so the
// Weyl part is nonzero), then shifted by a constant-curvature tensor to hit
// a target scalar curvature at the center.  This is how test inputs with
// R(0) < 0 and Weyl != 0 are produced.
inline CurvatureJet synthetic_jet(int n, double target_scalar0, double weyl_scale,
                                  std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto u01 = [&rng]() { return double(rng() >> 11) * 0x1.0p-53; };
    Rank4 raw(n);
    for (double& v : raw.a) v = weyl_scale * (2.0 * u01() - 1.0);
    Rank4 sym = symmetrize_riemann(raw);

    Matrix ric;
    double sc = 0.0;
    Rank4 weyl(n);
    decompose_curvature(sym, n, ric, sc, weyl);
    const double kappa = (target_scalar0 - sc) / (double(n) * (n - 1.0));
    Rank4 cc = constant_curvature_tensor(n, kappa);
    for (size_t k = 0; k < sym.a.size(); ++k) sym.a[k] += cc.a[k];
    return make_jet(sym);
}

// Flat jet (all curvature zero).
inline CurvatureJet flat_jet(int n) { return make_jet(Rank4(n)); }

// JSON serialization: dimension, flattened Riemann (row-major, all n^4
// entries), scalar gradient.  Derived tensors are recomputed on load.
inline nlohmann::json jet_to_json(const CurvatureJet& jet) {
    nlohmann::json j;
    j["n"] = jet.n;
    j["riemann"] = jet.riemann.a;
    j["scalar_grad"] = jet.scalar_grad;
    return j;
}

inline CurvatureJet jet_from_json(const nlohmann::json& j) {
    const int n = j.at("n").get<int>();
    Rank4 raw(n);
    const auto flat = j.at("riemann").get<std::vector<double>>();
    if (flat.size() != raw.a.size())
        throw std::invalid_argument("jet_from_json: riemann entry count mismatch");
    raw.a = flat;
    std::vector<double> grad;
    if (j.contains("scalar_grad")) grad = j.at("scalar_grad").get<std::vector<double>>();
    return make_jet(raw, grad);
}

} // namespace ylab
