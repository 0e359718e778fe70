// Acceptance gate: nine numbered criteria, each printing exactly one line
//   criterion N: PASS — details
//   criterion N: FAIL — details
// Run with a criterion number as the only argument, or with no arguments to
// run all nine.  Exit code 0 iff every requested criterion passed.
//
// Runtime budgets are part of the criteria, so each body measures its own
// wall time and fails when over budget.

#include <chrono>
#include <cmath>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ylab/cli.hpp"

using namespace ylab;

namespace {

struct Outcome {
    bool pass = false;
    std::string details;
};

using Clock = std::chrono::steady_clock;

double elapsed_s(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 3) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

// --- 1: constant identities ------------------------------------------------

Outcome criterion1() {
    const auto t0 = Clock::now();
    double worst_dup = 0.0, worst_closed = 0.0, worst_quad = 0.0, worst_mr = 0.0;
    for (int n = 4; n <= 12; ++n) {
        const auto ks = k_moments(n);
        worst_dup = std::max(worst_dup, std::abs(duplication_residual(n)));
        worst_closed = std::max(worst_closed, std::abs(ks.T * ks.K2 - ks.K1) / ks.K1);
        const double K1q =
            detail::moment_by_quadrature(n, 1, n, 64) * (n - 2.0) * (n - 2.0);
        const double K2q = std::pow(detail::moment_by_quadrature(n, 0, n, 64), (n - 2.0) / n);
        worst_quad = std::max(worst_quad, std::abs(ks.T * K2q - K1q) / K1q);
        if (n >= 5) {
            const double target = n * (n - 4.0) / (4.0 * (n - 1.0) * (n - 2.0));
            worst_mr = std::max(worst_mr, std::abs(moment_ratio(n) - target) / target);
        }
    }
    const double dt = elapsed_s(t0);
    Outcome o;
    o.pass = worst_dup <= 1e-10 && worst_closed <= 1e-10 && worst_quad <= 1e-6 &&
             worst_mr <= 1e-6 && dt <= 10.0;
    o.details = "n=4..12: duplication residual " + fmt(worst_dup) +
                " (<=1e-10), T*K2 vs K1 closed-form rel " + fmt(worst_closed) +
                " (<=1e-10), vs quadrature rel " + fmt(worst_quad) +
                " (<=1e-6), moment-ratio rel (n>=5) " + fmt(worst_mr) + " (<=1e-6), " +
                fmt(dt, 2) + "s (<=10s)";
    return o;
}

// --- 2: Euclidean Laplacian identity ----------------------------------------

Outcome criterion2() {
    const auto t0 = Clock::now();
    double worst_rel = 0.0, worst_origin = 0.0, worst_order = 99.0;
    for (int n = 4; n <= 8; ++n) {
        const double h = 1e-3;
        auto [rel_h, lap0] = detail::laplacian_identity_check(n, h);
        // order from the 4h -> 2h pair, where truncation dominates rounding
        auto [rel_2h, lap0_2] = detail::laplacian_identity_check(n, 2.0 * h);
        auto [rel_4h, lap0_4] = detail::laplacian_identity_check(n, 4.0 * h);
        (void)lap0_2;
        (void)lap0_4;
        worst_rel = std::max(worst_rel, rel_h);
        worst_order = std::min(worst_order, std::log2(rel_4h / rel_2h));
        worst_origin = std::max(
            worst_origin, std::abs(lap0 + 2.0 * n * (n - 2.0)) / (2.0 * n * (n - 2.0)));
    }
    const double dt = elapsed_s(t0);
    Outcome o;
    o.pass = worst_rel <= 1e-6 && worst_order >= 1.9 && worst_origin <= 1e-5 && dt <= 5.0;
    o.details = "n=4..8 at h=1e-3: max rel err " + fmt(worst_rel) +
                " (<=1e-6), refinement order " + fmt(worst_order) +
                " (>=1.9), origin value vs -2n(n-2) rel " + fmt(worst_origin) + ", " +
                fmt(dt, 2) + "s (<=5s)";
    return o;
}

// --- 3: epsilon sweep, n = 5 -------------------------------------------------

Outcome criterion3() {
    const auto t0 = Clock::now();
    const auto jet = synthetic_jet(5, -1.0, 0.0, 7);
    const auto sr = epsilon_sweep(jet, 3.5, 0.1, detail::geomspace(1e-6, 3.2e-5, 8), 5);
    double min_deficit = sr.values[0];
    for (double v : sr.values) min_deficit = std::min(min_deficit, v);
    const double predicted = *sr.predicted_coefficient;
    const double rel = std::abs(sr.fitted_coefficient - predicted) / predicted;
    const double dt = elapsed_s(t0);
    Outcome o;
    o.pass = rel <= 0.10 && min_deficit > 0.0 && dt <= 60.0;
    o.details = "fitted slope " + fmt(sr.fitted_coefficient, 6) + " vs closed form " +
                fmt(predicted, 6) + " (rel dev " + fmt(rel) +
                ", <=0.10); min deficit T-Q = " + fmt(min_deficit) + " (>0 at all 8 eps); " +
                fmt(dt, 2) + "s (<=60s)";
    return o;
}

// --- 4: epsilon sweep, n = 4 -------------------------------------------------

Outcome criterion4() {
    const auto t0 = Clock::now();
    const auto jet = synthetic_jet(4, -1.0, 0.0, 7);
    const auto sr = epsilon_sweep(jet, 3.4, 1.0, detail::geomspace(1e-8, 1e-6, 10), 4);
    double min_deficit = sr.values[0];
    for (double v : sr.values) min_deficit = std::min(min_deficit, v);
    // the fit drops the two largest eps; the remaining window must span a decade
    const size_t kept = sr.parameters.size() - 2;
    const double decades = std::log10(sr.parameters[kept - 1] / sr.parameters[0]);
    double signal = 0.0;
    for (size_t i = 0; i < kept; ++i) signal += sr.values[i] * sr.values[i];
    signal = std::sqrt(signal / double(kept));
    const double dt = elapsed_s(t0);
    Outcome o;
    o.pass = sr.fitted_coefficient > 0.0 && sr.residual_rms <= 0.2 * signal &&
             decades >= 1.0 && min_deficit > 0.0 && dt <= 60.0;
    o.details = "eps|log eps| slope " + fmt(sr.fitted_coefficient, 6) +
                " (>0), residual rms " + fmt(sr.residual_rms) + " vs 20% of signal " +
                fmt(0.2 * signal) + ", window " + fmt(decades) +
                " decades (>=1); min deficit " + fmt(min_deficit) + " (>0); " + fmt(dt, 2) +
                "s (<=60s)";
    return o;
}

// --- 5: correction pipeline ---------------------------------------------------

Outcome criterion5() {
    const auto t0 = Clock::now();
    std::ostringstream d;
    bool positivity = true, slopes = true, below_threshold = true;
    for (int n : {5, 4}) {
        const auto jet = synthetic_jet(n, -1.0, 0.5, 9001);
        const double gamma = (n == 5) ? 0.02 : 0.05;
        const double beta0 = 2.0 * std::sqrt(1e-4) * 0.2;
        const auto rep = corrected_test_function(jet, 0.2, beta0, 1e-4, gamma, 100000);
        positivity = positivity && rep.positivity.positive;
        const auto dr = d_sweep(jet, gamma, detail::geomspace(0.04, 0.4, 6), 1e-4, 100000);
        const bool slope_ok = dr.lp.fitted_exponent >= dr.bound_exponent_lp - 0.3 &&
                              dr.l2.fitted_exponent >= dr.bound_exponent_l2 - 0.3;
        slopes = slopes && slope_ok;
        const bool q_ok = rep.report_u_plus_v.passed || rep.report_abs_v.passed;
        below_threshold = below_threshold && q_ok;
        const double a = conformal_a(n);
        d << "n=" << n << ": u+v>0 " << (rep.positivity.positive ? "yes" : "NO")
          << ", Lp slope " << fmt(dr.lp.fitted_exponent, 4) << " (bound "
          << fmt(dr.bound_exponent_lp, 4) << "), L2 slope " << fmt(dr.l2.fitted_exponent, 4)
          << " (bound " << fmt(dr.bound_exponent_l2, 4) << "), a*Q(phi) = "
          << fmt(a * rep.report.value, 8) << " vs a*T = " << fmt(a * rep.report.threshold, 8)
          << " -> " << (q_ok ? "below" : "NOT below") << "; ";
    }
    const double dt = elapsed_s(t0);
    Outcome o;
    o.pass = positivity && slopes && below_threshold && dt <= 120.0;
    o.details = d.str() + fmt(dt, 2) + "s (<=120s)";
    return o;
}

// --- 6: conformal negativity ---------------------------------------------------

Outcome criterion6() {
    const auto t0 = Clock::now();
    const std::vector<double> P(4, 0.5);
    const auto res = conformal_negativity(4, 1.0, 32, P, 2.0, 0.2);
    const auto& c = res.certificate;
    const double dt = elapsed_s(t0);
    Outcome o;
    o.pass = c.passed && dt <= 30.0;
    o.details = "flat 4-torus, C=2: mean F " + fmt(std::abs(c.mean_F)) +
                " (<=1e-12*C), sup|u'| " + fmt(c.sup_uprime) + " (<= C/8 = 0.25), u in [" +
                fmt(c.u_min) + ", " + fmt(c.u_max) + "] (within [0.25, 0.75]), H(P) = " +
                fmt(c.H_at_P) + " (<0), bump radius " + fmt(c.bump_radius) + " after " +
                std::to_string(c.shrink_count) + " shrinks; " + fmt(dt, 2) + "s (<=30s)";
    return o;
}

// --- 7: existence dichotomy ------------------------------------------------------

Outcome criterion7() {
    std::ostringstream d;
    bool ok = true;

    auto converged_case = [&](const char* label, const CurvatureJet& jet, double r,
                              double beta, int n) {
        const auto t0 = Clock::now();
        const auto tr = subcritical_continuation(jet, r, 1.0, beta, default_q_schedule(n), 4000);
        const double dt = elapsed_s(t0);
        const bool good = tr.terminal_status == TerminalStatus::converged_at_p &&
                          tr.final_residual_rel <= 1e-8 && tr.positive && dt <= 120.0;
        ok = ok && good;
        d << label << ": " << terminal_status_name(tr.terminal_status) << ", residual "
          << fmt(tr.final_residual_rel) << ", positive " << (tr.positive ? "yes" : "NO")
          << ", " << fmt(dt, 2) << "s; ";
    };
    converged_case("(flat, beta=1, n=4)", flat_jet(4), 7.0, 1.0, 4);
    converged_case("(scalar0=-1, beta=0, n=5)", synthetic_jet(5, -1.0, 0.0, 3), 7.5, 0.0, 5);

    const auto t0 = Clock::now();
    // Tail ends at p - 2.5e-4: the last subcritical step the N = 6000 grid can
    // still carry (the discrete branch dies near p - 1.8e-4 at sup ~ 15), so the
    // terminal Newton failure lands exactly on q = p as the detector requires.
    const auto tr = subcritical_continuation(flat_jet(5), 7.0, 100.0, 0.0,
                                             default_q_schedule(5, 0.05, 2.5e-4), 6000);
    const double dt = elapsed_s(t0);
    const bool blow = tr.terminal_status == TerminalStatus::blow_up_detected &&
                      tr.growth_last_third >= 10.0 && dt <= 120.0;
    ok = ok && blow;
    d << "(flat, beta=0, n=5): " << terminal_status_name(tr.terminal_status) << ", sup growth "
      << fmt(tr.growth_last_third) << "x over final third (>=10x), " << fmt(dt, 2) << "s";

    Outcome o;
    o.pass = ok;
    o.details = d.str() + " (each <=120s)";
    return o;
}

// --- 8: determinism ---------------------------------------------------------------

Outcome criterion8() {
    const auto t0 = Clock::now();
    auto run_to = [](const std::string& dir) {
        RunConfig c;
        c.command = "sweep-eps";
        c.n = 5;
        c.outdir = dir;
        return run(c);
    };
    const auto a1 = run_to("acceptance_out/rep1");
    const auto a2 = run_to("acceptance_out/rep2");
    const bool ran = a1.exit_code == 0 && a2.exit_code == 0;
    const bool same_names =
        ran && a1.csv_path.substr(a1.csv_path.rfind('/')) ==
                   a2.csv_path.substr(a2.csv_path.rfind('/'));
    const bool same_csv = ran && read_text_file(a1.csv_path) == read_text_file(a2.csv_path);
    const bool same_json = ran && read_text_file(a1.json_path) == read_text_file(a2.json_path);
    const double dt = elapsed_s(t0);
    Outcome o;
    o.pass = ran && same_names && same_csv && same_json;
    o.details = std::string("two sweep-eps runs: exit codes ") +
                (ran ? "0/0" : "nonzero") + ", filenames " +
                (same_names ? "match" : "DIFFER") + ", CSV bodies " +
                (same_csv ? "byte-identical" : "DIFFER") + ", JSON bodies " +
                (same_json ? "byte-identical" : "DIFFER") + "; " + fmt(dt, 2) + "s";
    return o;
}

// --- 9: variational reduction consistency ------------------------------------------

Outcome criterion9() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u3(-3.0, 3.0), u2(-2.0, 2.0), coin(0.0, 1.0);
    std::uniform_int_distribution<int> dim(4, 8);
    int agree = 0, holds = 0, fails = 0;
    for (int k = 0; k < 50; ++k) {
        const int n = dim(rng);
        const double V1 = std::exp(u3(rng));
        const double V2 = (coin(rng) < 0.5 ? -1.0 : 1.0) * std::exp(u3(rng));
        const double W = std::exp(u2(rng));
        const double lambda = std::exp(u2(rng));
        const bool by_mp = threshold_by_mountain_pass(V1, V2, W, n, lambda);
        const bool by_q = threshold_by_quotient(V1, V2, W, n, lambda);
        if (by_mp == by_q) ++agree;
        (by_mp ? holds : fails)++;
    }
    const double dt = elapsed_s(t0);
    Outcome o;
    o.pass = agree == 50;
    o.details = "50 random (V1, V2, W, lambda, n): mountain-pass vs quotient threshold agree " +
                std::to_string(agree) + "/50 (threshold held " + std::to_string(holds) +
                ", failed " + std::to_string(fails) + "); " + fmt(dt, 2) + "s";
    return o;
}

Outcome dispatch(int k) {
    switch (k) {
        case 1: return criterion1();
        case 2: return criterion2();
        case 3: return criterion3();
        case 4: return criterion4();
        case 5: return criterion5();
        case 6: return criterion6();
        case 7: return criterion7();
        case 8: return criterion8();
        case 9: return criterion9();
    }
    return {false, "unknown criterion"};
}

} // namespace

int main(int argc, char** argv) {
    std::vector<int> wanted;
    if (argc > 1) {
        const int k = std::atoi(argv[1]);
        if (k < 1 || k > 9) {
            std::cerr << "usage: acceptance [1..9]\n";
            return 1;
        }
        wanted.push_back(k);
    } else {
        for (int k = 1; k <= 9; ++k) wanted.push_back(k);
    }

    bool all_pass = true;
    for (int k : wanted) {
        Outcome o;
        try {
            o = dispatch(k);
        } catch (const std::exception& e) {
            o.pass = false;
            o.details = std::string("exception: ") + e.what();
        }
        all_pass = all_pass && o.pass;
        std::cout << "criterion " << k << ": " << (o.pass ? "PASS" : "FAIL") << " — "
                  << o.details << std::endl;
    }
    return all_pass ? 0 : 1;
}
