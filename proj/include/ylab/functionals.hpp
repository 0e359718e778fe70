#pragma once

// The quotient functionals and the variational reduction.  Two quotient
// conventions coexist in the constructions and mixing them silently is the
// likeliest bug, so both live behind an explicit flag:
//   geometric:   Q(u) = (a |grad u|^2 + \int R u^2 + pert) / ||u||_p^2,  vs  aT
//   normalized:  everything divided by a,                               vs   T
// with a = 4(n-1)/(n-2).  All integrals are metric-weighted through the
// angular-averaged expansion: gradient weight g^{ss} = 1 exactly in normal
// coordinates, volume weight 1 - (scalar0/(6n)) s^2, curvature weight the
// angular-averaged scalar model (= scalar0; the gradient term is odd and
// integrates to zero exactly).

#include <cmath>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "curvature.hpp"
#include "quadrature.hpp"
#include "special_functions.hpp"
#include "test_functions.hpp"

namespace ylab {

enum class QuotientConvention { geometric, normalized };

struct QuotientReport {
    double grad_term = 0.0;         // a |grad u|^2 (geometric) or |grad u|^2 (normalized)
    double curvature_term = 0.0;    // \int R u^2 (scaled by 1/a when normalized)
    double perturbation_term = 0.0; // -beta \int u^2 (scaled by 1/a when normalized)
    double lp_norm_sq = 0.0;
    double value = 0.0;
    double threshold = 0.0;         // aT or T
    QuotientConvention convention = QuotientConvention::geometric;
    bool passed = false;            // value < threshold
};

inline const char* convention_name(QuotientConvention c) {
    return c == QuotientConvention::geometric ? "geometric" : "normalized";
}

// Shared evaluation path for both quotients.  beta = 0 gives the unperturbed
// Yamabe quotient.
inline QuotientReport quotient_eval(const RadialField& field, const CurvatureJet& jet,
                                    QuotientConvention convention, double beta) {
    const int n = jet.n;
    if (field.grid.r > jet.validity_radius)
        throw std::domain_error("quotient_eval: field support exceeds jet validity radius");
    if (field.values.size() != field.grid.nodes.size() ||
        field.derivative.size() != field.grid.nodes.size())
        throw std::invalid_argument("quotient_eval: field samples inconsistent with grid");

    const double a = conformal_a(n);
    const double p = critical_exponent(n);
    const size_t m = field.values.size();

    std::vector<double> ig(m), ic(m), i2(m), ip(m);
    for (size_t k = 0; k < m; ++k) {
        const double s = field.grid.nodes[k];
        const double wt = volume_weight(jet, s);
        const double u = field.values[k];
        const double du = field.derivative[k];
        ig[k] = du * du * wt;                    // g^{ss} = 1
        ic[k] = jet.scalar0 * u * u * wt;        // angular-averaged scalar model
        i2[k] = u * u * wt;
        ip[k] = std::pow(std::abs(u), p) * wt;
    }
    const double grad = radial_integrate_samples(ig, field.grid, n);
    const double curv = radial_integrate_samples(ic, field.grid, n);
    const double mass = radial_integrate_samples(i2, field.grid, n);
    const double lp = radial_integrate_samples(ip, field.grid, n);
    if (!(lp > 0.0))
        throw std::domain_error("quotient_eval: field is zero in L^p");

    QuotientReport rep;
    rep.convention = convention;
    rep.lp_norm_sq = std::pow(lp, 2.0 / p);
    const double scale = (convention == QuotientConvention::geometric) ? 1.0 : 1.0 / a;
    rep.grad_term = (convention == QuotientConvention::geometric ? a : 1.0) * grad;
    rep.curvature_term = scale * curv;
    rep.perturbation_term = -beta * scale * mass;
    rep.value = (rep.grad_term + rep.curvature_term + rep.perturbation_term) / rep.lp_norm_sq;
    rep.threshold = (convention == QuotientConvention::geometric ? a : 1.0) * best_sobolev_T(n);
    rep.passed = rep.value < rep.threshold;
    return rep;
}

// Unperturbed Yamabe quotient.
inline QuotientReport yamabe_quotient(const RadialField& field, const CurvatureJet& jet,
                                      QuotientConvention convention) {
    return quotient_eval(field, jet, convention, 0.0);
}

// Perturbed quotient in the normalized convention:
//   ( |grad u|^2 + (1/a) \int (R - beta) u^2 ) / ||u||_p^2  vs  T.
inline QuotientReport perturbed_quotient(const RadialField& field, const CurvatureJet& jet,
                                         double beta) {
    if (!(beta > 0.0))
        throw std::domain_error("perturbed_quotient: beta must be positive");
    return quotient_eval(field, jet, QuotientConvention::normalized, beta);
}

// --- variational reduction -------------------------------------------------
//
// For the fibering functional J*(tu) built from
//   V1 = a |grad u|^2,  V2 = \int (-R + beta) u^2,  W = ||u||_{L^p}
// the critical scaling, mountain-pass level, and the threshold level kappa0.

// t0 = (V1 - V2)^{1/(p-2)} / W^{p/(p-2)}; zero-maximizer sentinel when
// V1 <= V2 (the threshold inequality then holds trivially).
inline double critical_t0(double V1, double V2, double W, int n) {
    if (!(W > 0.0))
        throw std::domain_error("critical_t0: W must be positive");
    if (V1 <= V2) return 0.0;
    const double p = critical_exponent(n);
    return std::pow(V1 - V2, 1.0 / (p - 2.0)) / std::pow(W, p / (p - 2.0));
}

// sup_t J*(tu) = (1/n) (V1 - V2)^{n/2} / W^n.
inline double mountain_pass_level(double V1, double V2, double W, int n) {
    if (!(W > 0.0))
        throw std::domain_error("mountain_pass_level: W must be positive");
    if (V1 <= V2) return 0.0;
    return std::pow(V1 - V2, 0.5 * n) / std::pow(W, double(n)) / double(n);
}

// kappa0 = (1/n) lambda^{(2-n)/2} a^{n/2} T^{n/2}.
inline double kappa0(int n, double lambda, double T) {
    if (!(lambda > 0.0))
        throw std::domain_error("kappa0: lambda must be positive");
    const double a = conformal_a(n);
    return std::pow(lambda, 0.5 * (2.0 - n)) * std::pow(a * T, 0.5 * n) / double(n);
}

// The two sides of the threshold equivalence.  Raising MP < kappa0 to the
// power 2/n gives (V1-V2)/W^2 < lambda^{(2-n)/n} aT, i.e.
//   J0 := lambda^{2/p} (V1 - V2) / W^2 < aT
// (the lambda^{2/p} is the lambda-weighted L^p volume factor).  Both sides
// are computed from the same (V1, V2, W) so the agreement must be exact.
inline bool threshold_by_mountain_pass(double V1, double V2, double W, int n, double lambda) {
    return mountain_pass_level(V1, V2, W, n) < kappa0(n, lambda, best_sobolev_T(n));
}

inline bool threshold_by_quotient(double V1, double V2, double W, int n, double lambda) {
    const double p = critical_exponent(n);
    const double J0 = std::pow(lambda, 2.0 / p) * (V1 - V2) / (W * W);
    return J0 < conformal_a(n) * best_sobolev_T(n);
}

inline nlohmann::json quotient_report_to_json(const QuotientReport& r) {
    return nlohmann::json{{"grad_term", r.grad_term},
                          {"curvature_term", r.curvature_term},
                          {"perturbation_term", r.perturbation_term},
                          {"lp_norm_sq", r.lp_norm_sq},
                          {"value", r.value},
                          {"threshold", r.threshold},
                          {"convention", convention_name(r.convention)},
                          {"passed", r.passed}};
}

} // namespace ylab
