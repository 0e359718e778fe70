#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "ylab/functionals.hpp"

using namespace ylab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
RadialField bubble_on_flat(int n, double eps, double r) {
    const auto grid = make_radial_grid(r, 64, eps);
    return aubin_field(aubin_profile(n, eps, r), grid);
}
} // namespace

TEST_CASE("quotient is scale invariant") {
    const auto jet = flat_jet(5);
    auto f = bubble_on_flat(5, 1e-3, 1.0);
    const auto base = yamabe_quotient(f, jet, QuotientConvention::normalized);

    for (double& v : f.values) v *= 3.7;
    for (double& v : f.derivative) v *= 3.7;
    const auto scaled = yamabe_quotient(f, jet, QuotientConvention::normalized);
    CHECK_THAT(scaled.value, WithinRel(base.value, 1e-12));

    const auto geo = yamabe_quotient(f, jet, QuotientConvention::geometric);
    const auto geo2 = yamabe_quotient(f, jet, QuotientConvention::geometric);
    CHECK(geo.value == geo2.value); // deterministic
}

TEST_CASE("geometric and normalized conventions differ by exactly a") {
    const auto jet = synthetic_jet(5, -1.0, 0.5, 2024);
    const double r = std::min(1.0, 0.9 * jet.validity_radius);
    const auto grid = make_radial_grid(r, 64, 1e-3);
    const auto f = aubin_field(aubin_profile(5, 1e-3, r), grid);

    const auto g = yamabe_quotient(f, jet, QuotientConvention::geometric);
    const auto m = yamabe_quotient(f, jet, QuotientConvention::normalized);
    const double a = conformal_a(5);

    CHECK_THAT(g.value, WithinRel(a * m.value, 1e-12));
    CHECK_THAT(g.threshold, WithinRel(a * m.threshold, 1e-12));
    CHECK_THAT(g.grad_term, WithinRel(a * m.grad_term, 1e-12));
    CHECK_THAT(g.curvature_term, WithinRel(a * m.curvature_term, 1e-12));
    CHECK(g.passed == m.passed); // same inequality either way
    CHECK(m.curvature_term < 0.0); // R(0) < 0 pulls the quotient down
}

TEST_CASE("truncated bubble nearly attains the Sobolev threshold on flat space") {
    const int n = 5;
    const auto jet = flat_jet(n);
    const auto f = bubble_on_flat(n, 1e-4, 1.0);
    const auto rep = yamabe_quotient(f, jet, QuotientConvention::normalized);

    const double T = best_sobolev_T(n);
    CHECK(rep.curvature_term == 0.0);
    CHECK(rep.perturbation_term == 0.0);
    // truncation can only raise the quotient above the full-space infimum,
    // and at eps = 1e-4 the excess is far below 0.1%
    CHECK(rep.value >= T - 1e-9);
    CHECK_THAT(rep.value, WithinRel(T, 1e-3));
    CHECK(rep.threshold == T);
}

TEST_CASE("perturbation strictly lowers the quotient") {
    const auto jet = synthetic_jet(5, -1.0, 0.5, 88);
    const double r = std::min(1.0, 0.9 * jet.validity_radius);
    const auto grid = make_radial_grid(r, 64, 1e-3);
    const auto f = aubin_field(aubin_profile(5, 1e-3, r), grid);

    const auto q0 = yamabe_quotient(f, jet, QuotientConvention::normalized);
    const auto q1 = perturbed_quotient(f, jet, 0.1);
    const auto q2 = perturbed_quotient(f, jet, 0.5);
    CHECK(q1.value < q0.value);
    CHECK(q2.value < q1.value);
    CHECK(q1.perturbation_term < 0.0);

    CHECK_THROWS_AS(perturbed_quotient(f, jet, 0.0), std::domain_error);
    CHECK_THROWS_AS(perturbed_quotient(f, jet, -1.0), std::domain_error);
}

TEST_CASE("quotient refuses fields outside the expansion's validity radius") {
    const auto jet = synthetic_jet(5, -1.0, 2.0, 5); // strong curvature, small radius
    REQUIRE(jet.validity_radius < 5.0);
    const double r = 2.0 * jet.validity_radius;
    const auto grid = make_radial_grid(r, 16);
    const auto f = aubin_field(aubin_profile(5, 1e-2, r), grid);
    CHECK_THROWS_AS(yamabe_quotient(f, jet, QuotientConvention::normalized),
                    std::domain_error);
}

TEST_CASE("fibering maximum: closed form against direct maximization") {
    const int n = 5;
    const double p = critical_exponent(n);
    const double V1 = 3.4, V2 = 0.9, W = 1.7;

    const double t0 = critical_t0(V1, V2, W, n);
    const double mp = mountain_pass_level(V1, V2, W, n);

    // J(t) = (t^2/2)(V1 - V2) - (t^p/p) W^p has its sup at t0 with value mp
    auto J = [&](double t) {
        return 0.5 * t * t * (V1 - V2) - std::pow(t, p) / p * std::pow(W, p);
    };
    CHECK_THAT(J(t0), WithinRel(mp, 1e-13));
    // stationarity and maximality
    const double h = 1e-6 * t0;
    CHECK(std::abs(J(t0 + h) - J(t0 - h)) / (2.0 * h) < 1e-8 * std::abs(mp) / t0 + 1e-10);
    double best = 0.0;
    for (double t = 0.0; t <= 4.0 * t0; t += t0 / 2000.0) best = std::max(best, J(t));
    CHECK_THAT(best, WithinRel(mp, 1e-6));
    // mp = t0^2 (V1 - V2)/n is the same identity reshuffled
    CHECK_THAT(mp, WithinRel(t0 * t0 * (V1 - V2) / n, 1e-13));
}

TEST_CASE("degenerate fibering cases") {
    CHECK(critical_t0(1.0, 2.0, 1.0, 5) == 0.0); // V1 <= V2: zero maximizer
    CHECK(mountain_pass_level(1.0, 2.0, 1.0, 5) == 0.0);
    CHECK(critical_t0(1.0, 1.0, 1.0, 5) == 0.0);
    CHECK_THROWS_AS(critical_t0(1.0, 0.0, 0.0, 5), std::domain_error);
    CHECK_THROWS_AS(mountain_pass_level(1.0, 0.0, -1.0, 5), std::domain_error);
    CHECK_THROWS_AS(kappa0(5, 0.0, best_sobolev_T(5)), std::domain_error);
}

TEST_CASE("kappa0 closed form") {
    const int n = 6;
    const double T = best_sobolev_T(n);
    const double a = conformal_a(n);
    CHECK_THAT(kappa0(n, 1.0, T), WithinRel(std::pow(a * T, 3.0) / 6.0, 1e-13));
    // decreasing in lambda (exponent (2-n)/2 < 0)
    CHECK(kappa0(n, 2.0, T) < kappa0(n, 1.0, T));
    CHECK(kappa0(n, 0.5, T) > kappa0(n, 1.0, T));
}

TEST_CASE("threshold tests agree: mountain-pass level vs scaled quotient") {
    std::mt19937_64 rng(314159);
    auto unif = [&rng](double lo, double hi) {
        return lo + (hi - lo) * double(rng() >> 11) * 0x1.0p-53;
    };
    int below = 0, above = 0;
    for (int trial = 0; trial < 400; ++trial) {
        const int n = 4 + int(rng() % 5);
        const double V1 = std::exp(unif(-2.0, 4.0));
        const double V2 = std::exp(unif(-2.0, 4.0)) * (rng() % 2 ? 1.0 : -1.0);
        const double W = std::exp(unif(-1.0, 1.0));
        const double lambda = std::exp(unif(-2.0, 2.0));
        const bool by_mp = threshold_by_mountain_pass(V1, V2, W, n, lambda);
        const bool by_q = threshold_by_quotient(V1, V2, W, n, lambda);
        INFO("n=" << n << " V1=" << V1 << " V2=" << V2 << " W=" << W
                  << " lambda=" << lambda);
        REQUIRE(by_mp == by_q);
        (by_mp ? below : above)++;
    }
    // the sample must actually exercise both outcomes
    CHECK(below > 20);
    CHECK(above > 20);
}

TEST_CASE("quotient report serialization") {
    const auto jet = flat_jet(4);
    const auto f = bubble_on_flat(4, 1e-2, 1.0);
    const auto rep = yamabe_quotient(f, jet, QuotientConvention::geometric);
    const auto j = quotient_report_to_json(rep);
    CHECK(j.at("value").get<double>() == rep.value);
    CHECK(j.at("threshold").get<double>() == rep.threshold);
    CHECK(j.at("convention").get<std::string>() == "geometric");
    CHECK(j.at("passed").get<bool>() == rep.passed);
}
