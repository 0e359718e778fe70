#pragma once

// Batch front door: configuration ingestion, command dispatch, deterministic
// CSV/JSON emission, and a manifest recording the effective configuration.
//
// Exit codes: 0 success; 2 precondition or hypothesis failure (bad dimension,
// vanishing Weyl tensor, malformed config); 3 numerical failure (solver or
// construction breakdown).  The mapping rides on the exception taxonomy the
// library already uses: domain/invalid-argument errors are preconditions,
// runtime errors are numerical.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "curvature.hpp"
#include "elliptic.hpp"
#include "functionals.hpp"
#include "io.hpp"
#include "pipelines.hpp"
#include "quadrature.hpp"
#include "special_functions.hpp"
#include "test_functions.hpp"

namespace ylab {

struct RunConfig {
    std::string command;

    int n = 5;

    // jet source: a file wins over the synthetic spec when both are given
    std::string jet_file;
    std::uint64_t seed = 12345;
    double target_scalar0 = -1.0;
    // < 0 -> per-command default: 0.5 where the construction needs a nonzero
    // Weyl part (correct, sweep-d), else 0 (conformally round model, whose
    // validity radius admits the wide sweep/quotient balls).
    double weyl_scale = -1.0;

    // numeric controls
    int grid_N = 6000;      // FV resolution for solves
    int correct_N = 200000; // FV resolution for the correction pipeline
    int panels = 64;        // quadrature panels
    double tolerance = 1e-10;

    // scalar parameters (shared across commands; unused ones are ignored)
    double r = 3.5;
    double beta = 0.0;
    double lambda = 1.0;
    double eps = 1e-4;
    double gamma = 0.0;   // 0 -> default 0.1/(n-2)
    double d = 0.2;
    double beta0 = 0.0;   // 0 -> 2 sqrt(eps) * d
    double eps_base = 1e-4;
    std::string convention = "normalized";

    // sweep lists (empty -> per-command defaults)
    std::vector<double> eps_list;
    std::vector<double> d_list;
    std::vector<double> q_schedule;

    // torus parameters
    double torus_L = 1.0;
    int torus_m = 32;
    double C_height = 2.0;
    double bump_radius = 0.2; // must stay above the 3 L/m resolution floor
    std::vector<double> point_P; // empty -> torus center

    // constants / identity-check range
    int n_min = 4;
    int n_max = 10;

    // output
    std::string outdir; // empty -> $YLAB_OUTDIR or "out"
    bool emit_csv = true;
    bool emit_json = true;
};

inline const std::vector<std::string>& command_list() {
    static const std::vector<std::string> cmds = {
        "constants", "identity-check", "quotient", "sweep-eps",
        "sweep-d",   "correct",        "solve",    "conformal"};
    return cmds;
}

// --- config ingestion ----------------------------------------------------------

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    auto get = [&](const nlohmann::json& obj, const char* key, auto& slot) {
        if (obj.contains(key)) slot = obj.at(key).get<std::decay_t<decltype(slot)>>();
    };
    get(j, "command", c.command);
    get(j, "n", c.n);
    if (j.contains("jet")) {
        const auto& jj = j.at("jet");
        get(jj, "file", c.jet_file);
        get(jj, "seed", c.seed);
        get(jj, "target_scalar0", c.target_scalar0);
        get(jj, "weyl_scale", c.weyl_scale);
    }
    if (j.contains("numeric")) {
        const auto& nj = j.at("numeric");
        get(nj, "grid_N", c.grid_N);
        get(nj, "correct_N", c.correct_N);
        get(nj, "panels", c.panels);
        get(nj, "tolerance", c.tolerance);
    }
    if (j.contains("params")) {
        const auto& pj = j.at("params");
        get(pj, "r", c.r);
        get(pj, "beta", c.beta);
        get(pj, "lambda", c.lambda);
        get(pj, "eps", c.eps);
        get(pj, "gamma", c.gamma);
        get(pj, "d", c.d);
        get(pj, "beta0", c.beta0);
        get(pj, "eps_base", c.eps_base);
        get(pj, "convention", c.convention);
        get(pj, "L", c.torus_L);
        get(pj, "m", c.torus_m);
        get(pj, "C", c.C_height);
        get(pj, "bump_radius", c.bump_radius);
        get(pj, "P", c.point_P);
        get(pj, "n_min", c.n_min);
        get(pj, "n_max", c.n_max);
    }
    if (j.contains("sweep")) {
        const auto& sj = j.at("sweep");
        get(sj, "eps_list", c.eps_list);
        get(sj, "d_list", c.d_list);
        get(sj, "q_schedule", c.q_schedule);
    }
    if (j.contains("output")) {
        const auto& oj = j.at("output");
        get(oj, "directory", c.outdir);
        get(oj, "csv", c.emit_csv);
        get(oj, "json", c.emit_json);
    }
    return c;
}

// The effective configuration with every default materialized.  The "output"
// block is kept out of the hash so relocating results does not rename them.
inline nlohmann::json config_to_json(const RunConfig& c, bool include_output = true) {
    nlohmann::json j;
    j["command"] = c.command;
    j["n"] = c.n;
    j["jet"] = {{"file", c.jet_file},
                {"seed", c.seed},
                {"target_scalar0", c.target_scalar0},
                {"weyl_scale", c.weyl_scale}};
    j["numeric"] = {{"grid_N", c.grid_N},
                    {"correct_N", c.correct_N},
                    {"panels", c.panels},
                    {"tolerance", c.tolerance}};
    j["params"] = {{"r", c.r},
                   {"beta", c.beta},
                   {"lambda", c.lambda},
                   {"eps", c.eps},
                   {"gamma", c.gamma},
                   {"d", c.d},
                   {"beta0", c.beta0},
                   {"eps_base", c.eps_base},
                   {"convention", c.convention},
                   {"L", c.torus_L},
                   {"m", c.torus_m},
                   {"C", c.C_height},
                   {"bump_radius", c.bump_radius},
                   {"P", c.point_P},
                   {"n_min", c.n_min},
                   {"n_max", c.n_max}};
    j["sweep"] = {{"eps_list", c.eps_list}, {"d_list", c.d_list}, {"q_schedule", c.q_schedule}};
    if (include_output)
        j["output"] = {{"directory", c.outdir}, {"csv", c.emit_csv}, {"json", c.emit_json}};
    return j;
}

namespace detail {

inline void validate(const RunConfig& c) {
    bool known = false;
    for (const auto& cmd : command_list())
        if (cmd == c.command) known = true;
    if (!known) throw std::invalid_argument("unknown command '" + c.command + "'");
    if (!(c.tolerance > 0.0)) throw std::domain_error("tolerance must be positive");
    if (c.panels < 1) throw std::domain_error("quadrature panels must be >= 1");
    const bool curvature_command = c.command == "quotient" || c.command == "sweep-eps" ||
                                   c.command == "sweep-d" || c.command == "correct" ||
                                   c.command == "solve";
    if (curvature_command && c.n < 4)
        throw std::domain_error("command '" + c.command +
                                "' requires dimension n >= 4 (the local method's hypothesis)");
    if ((c.command == "constants" || c.command == "identity-check") &&
        (c.n_min < 4 || c.n_max < c.n_min))
        throw std::domain_error("constants/identity-check need 4 <= n_min <= n_max");
}

inline double effective_weyl_scale(const RunConfig& c) {
    if (c.weyl_scale >= 0.0) return c.weyl_scale;
    return (c.command == "correct" || c.command == "sweep-d") ? 0.5 : 0.0;
}

inline CurvatureJet load_jet(const RunConfig& c) {
    if (!c.jet_file.empty())
        return jet_from_json(nlohmann::json::parse(read_text_file(c.jet_file)));
    return synthetic_jet(c.n, c.target_scalar0, effective_weyl_scale(c), c.seed);
}

inline double default_gamma(const RunConfig& c) {
    return c.gamma > 0.0 ? c.gamma : 0.1 / (c.n - 2);
}

inline std::vector<double> geomspace(double lo, double hi, int k) {
    std::vector<double> out(size_t(k), 0.0);
    for (int i = 0; i < k; ++i)
        out[size_t(i)] = lo * std::pow(hi / lo, double(i) / (k - 1));
    return out;
}

// Discrete radial Laplacian of (1+s^2)^{-(n-2)} versus the closed form
// 2(n-2)^2 (s^2 - n/(n-2)) / (1+s^2)^n; returns (max rel err, origin value).
// The stencil is the five-point fourth-order one: any three-point stencil has
// truncation ~ (n-1)(2n-1)/(2n) h^2 on this family, a few times above 1e-6
// at h = 1e-3 no matter how the error is normalized.
inline std::pair<double, double> laplacian_identity_check(int n, double h) {
    auto u = [n](double s) { return std::pow(1.0 + s * s, -(n - 2.0)); };
    auto exact = [n](double s) {
        return 2.0 * (n - 2.0) * (n - 2.0) * (s * s - n / (n - 2.0)) /
               std::pow(1.0 + s * s, n);
    };
    double maxrel = 0.0;
    for (double s = 0.1; s <= 2.0 + 1e-12; s += 0.05) {
        const double d2 = (-u(s + 2 * h) + 16.0 * u(s + h) - 30.0 * u(s) +
                           16.0 * u(s - h) - u(s - 2 * h)) /
                          (12.0 * h * h);
        const double d1 =
            (-u(s + 2 * h) + 8.0 * u(s + h) - 8.0 * u(s - h) + u(s - 2 * h)) / (12.0 * h);
        const double lap = d2 + (n - 1) * d1 / s;
        // the closed form crosses zero at s = sqrt(n/(n-2)); a relative error
        // is meaningless there, so skip points below 1% of the peak 2n(n-2)
        if (std::abs(exact(s)) < 0.02 * n * (n - 2.0)) continue;
        maxrel = std::max(maxrel, std::abs(lap - exact(s)) / std::abs(exact(s)));
    }
    // radial origin closure: u'(0) = 0, so Lap u(0) ~ 2n (u(h) - u(0)) / h^2
    const double lap0 = 2.0 * n * (u(h) - u(0.0)) / (h * h);
    return {maxrel, lap0};
}

// bubble moment by quadrature over the substitution s = t/(1-t)
inline double moment_by_quadrature(int n, int k, int m, int panels) {
    auto grid = make_radial_grid(1.0, panels);
    auto f = [&](double t) {
        const double s = t / (1.0 - t);
        const double jac = 1.0 / ((1.0 - t) * (1.0 - t));
        return std::pow(s, n - 1 + 2 * k) * std::pow(1.0 + s * s, -double(m)) * jac;
    };
    return sphere_area(n) * integrate_1d(f, grid);
}

} // namespace detail

// --- command implementations -----------------------------------------------------

namespace detail {

struct CommandOutput {
    CsvTable csv;
    nlohmann::json json;
    std::vector<std::uint64_t> seeds;
};

inline CommandOutput cmd_constants(const RunConfig& c) {
    CommandOutput out;
    out.csv.columns = {"n", "omega_n", "T", "K1", "K2", "K3", "duplication_residual"};
    for (int n = c.n_min; n <= c.n_max; ++n) {
        const auto ks = k_moments(n);
        out.csv.push_row({std::to_string(n), format_double(ks.omega_n), format_double(ks.T),
                          format_double(ks.K1), format_double(ks.K2), format_double(ks.K3),
                          format_double(duplication_residual(n))});
        nlohmann::json row;
        row["n"] = n;
        row["omega_n"] = ks.omega_n;
        row["T"] = ks.T;
        row["K1"] = ks.K1;
        row["K2"] = ks.K2;
        row["K3_infinite"] = ks.K3_infinite;
        if (!ks.K3_infinite) row["K3"] = ks.K3;
        row["duplication_residual"] = duplication_residual(n);
        out.json.push_back(row);
    }
    return out;
}

inline CommandOutput cmd_identity_check(const RunConfig& c) {
    CommandOutput out;
    out.csv.columns = {"n",
                       "duplication_residual",
                       "tk2_vs_k1_closed_rel",
                       "tk2_vs_k1_quadrature_rel",
                       "moment_ratio_err",
                       "laplacian_max_rel_err",
                       "laplacian_origin_err",
                       "laplacian_order"};
    bool all_ok = true;
    for (int n = c.n_min; n <= c.n_max; ++n) {
        const auto ks = k_moments(n);
        const double dup = duplication_residual(n);
        const double closed_rel = std::abs(ks.T * ks.K2 - ks.K1) / ks.K1;
        const double K1q = detail::moment_by_quadrature(n, 1, n, c.panels) * (n - 2.0) * (n - 2.0);
        const double K2q =
            std::pow(detail::moment_by_quadrature(n, 0, n, c.panels), (n - 2.0) / n);
        const double quad_rel = std::abs(ks.T * K2q - K1q) / K1q;
        double mr_err = std::numeric_limits<double>::quiet_NaN();
        if (n >= 5) {
            const double target = n * (n - 4.0) / (4.0 * (n - 1.0) * (n - 2.0));
            mr_err = std::abs(moment_ratio(n) - target) / target;
            all_ok = all_ok && mr_err <= 1e-6;
        }
        const double h = 1e-3;
        auto [rel_h, lap0] = detail::laplacian_identity_check(n, h);
        // observed order from the 4h -> 2h pair: at h itself the truncation is
        // already near the h^-2 rounding floor of the second difference
        auto [rel_2h, lap0_2] = detail::laplacian_identity_check(n, 2.0 * h);
        auto [rel_4h, lap0_4] = detail::laplacian_identity_check(n, 4.0 * h);
        (void)lap0_2;
        (void)lap0_4;
        const double order = std::log2(rel_4h / rel_2h);
        const double origin_err = std::abs(lap0 - (-2.0 * n * (n - 2.0))) / (2.0 * n * (n - 2.0));
        all_ok = all_ok && std::abs(dup) <= 1e-10 && closed_rel <= 1e-10 && quad_rel <= 1e-6 &&
                 rel_h <= 1e-6 && order >= 1.9;
        out.csv.push_row({std::to_string(n), format_double(dup), format_double(closed_rel),
                          format_double(quad_rel), format_double(mr_err), format_double(rel_h),
                          format_double(origin_err), format_double(order)});
        nlohmann::json row;
        row["n"] = n;
        row["duplication_residual"] = dup;
        row["tk2_vs_k1_closed_rel"] = closed_rel;
        row["tk2_vs_k1_quadrature_rel"] = quad_rel;
        if (n >= 5) row["moment_ratio_err"] = mr_err;
        row["laplacian_max_rel_err"] = rel_h;
        row["laplacian_origin_err"] = origin_err;
        row["laplacian_order"] = order;
        out.json.push_back(row);
    }
    if (!all_ok) throw std::runtime_error("identity-check: an identity exceeded its tolerance");
    return out;
}

inline CommandOutput cmd_quotient(const RunConfig& c) {
    const auto jet = load_jet(c);
    auto grid = make_radial_grid(c.r, c.panels, c.eps);
    auto field = aubin_field(aubin_profile(c.n, c.eps, c.r), grid);
    const auto conv = (c.convention == "geometric") ? QuotientConvention::geometric
                                                    : QuotientConvention::normalized;
    const auto rep = quotient_eval(field, jet, conv, c.beta);
    CommandOutput out;
    if (c.jet_file.empty()) out.seeds.push_back(c.seed);
    out.csv.columns = {"n",    "eps",   "r",           "beta",      "convention",
                       "grad", "curv",  "perturbation", "lp_norm_sq", "value",
                       "threshold", "passed"};
    out.csv.push_row({std::to_string(c.n), format_double(c.eps), format_double(c.r),
                      format_double(c.beta), convention_name(conv), format_double(rep.grad_term),
                      format_double(rep.curvature_term), format_double(rep.perturbation_term),
                      format_double(rep.lp_norm_sq), format_double(rep.value),
                      format_double(rep.threshold), rep.passed ? "1" : "0"});
    out.json = quotient_report_to_json(rep);
    out.json["n"] = c.n;
    out.json["eps"] = c.eps;
    out.json["r"] = c.r;
    out.json["beta"] = c.beta;
    return out;
}

inline CommandOutput cmd_sweep_eps(const RunConfig& c) {
    const auto jet = load_jet(c);
    std::vector<double> eps = c.eps_list;
    if (eps.empty())
        eps = (c.n >= 5) ? geomspace(1e-6, 3.2e-5, 8) : geomspace(1e-8, 1e-6, 10);
    const double beta = (c.beta > 0.0) ? c.beta : (c.n >= 5 ? 0.1 : 1.0);
    auto sr = epsilon_sweep(jet, c.r, beta, eps, c.n, c.panels);
    CommandOutput out;
    if (c.jet_file.empty()) out.seeds.push_back(c.seed);
    out.csv.columns = {"eps", "deficit"};
    for (size_t i = 0; i < sr.parameters.size(); ++i)
        out.csv.push_row({format_double(sr.parameters[i]), format_double(sr.values[i])});
    out.json = sweep_result_to_json(sr);
    out.json["n"] = c.n;
    out.json["beta"] = beta;
    out.json["r"] = c.r;
    return out;
}

inline CommandOutput cmd_sweep_d(const RunConfig& c) {
    const auto jet = load_jet(c);
    std::vector<double> ds = c.d_list;
    if (ds.empty()) ds = geomspace(0.04, 0.4, 6);
    const double g = default_gamma(c);
    auto dr = d_sweep(jet, g, ds, c.eps_base, c.correct_N);
    CommandOutput out;
    if (c.jet_file.empty()) out.seeds.push_back(c.seed);
    out.csv.columns = {"d", "ratio_lp", "ratio_l2"};
    for (size_t i = 0; i < dr.lp.parameters.size(); ++i)
        out.csv.push_row({format_double(dr.lp.parameters[i]), format_double(dr.lp.values[i]),
                          format_double(dr.l2.values[i])});
    out.json["lp"] = sweep_result_to_json(dr.lp);
    out.json["l2"] = sweep_result_to_json(dr.l2);
    out.json["bound_exponent_lp"] = dr.bound_exponent_lp;
    out.json["bound_exponent_l2"] = dr.bound_exponent_l2;
    out.json["bound_constant_lp"] = dr.bound_constant_lp;
    out.json["bound_constant_l2"] = dr.bound_constant_l2;
    out.json["gamma"] = g;
    return out;
}

inline CommandOutput cmd_correct(const RunConfig& c) {
    const auto jet = load_jet(c);
    const double g = default_gamma(c);
    const double b0 = (c.beta0 > 0.0) ? c.beta0 : 2.0 * std::sqrt(c.eps) * c.d;
    auto rep = corrected_test_function(jet, c.d, b0, c.eps, g, c.correct_N);
    CommandOutput out;
    if (c.jet_file.empty()) out.seeds.push_back(c.seed);
    out.csv.columns = {"s", "phi"};
    const size_t stride = std::max<size_t>(rep.nodes.size() / 2048, 1);
    for (size_t i = 0; i < rep.nodes.size(); i += stride)
        out.csv.push_row({format_double(rep.nodes[i]), format_double(rep.phi[i])});
    out.json["n"] = rep.n;
    out.json["d"] = rep.d;
    out.json["eps"] = rep.eps;
    out.json["eps_scaled"] = rep.eps_scaled;
    out.json["beta0"] = rep.beta0;
    out.json["gamma"] = rep.gamma;
    out.json["branch"] = rep.branch;
    out.json["report"] = quotient_report_to_json(rep.report);
    out.json["report_u_plus_v"] = quotient_report_to_json(rep.report_u_plus_v);
    out.json["report_abs_v"] = quotient_report_to_json(rep.report_abs_v);
    out.json["positive"] = rep.positivity.positive;
    out.json["min_value"] = rep.positivity.min_value;
    out.json["l2_w"] = rep.l2_w;
    out.json["lp_w"] = rep.lp_w;
    out.json["lp_u"] = rep.lp_u;
    out.json["solve_residual"] = rep.solve_residual;
    return out;
}

inline CommandOutput cmd_solve(const RunConfig& c) {
    const auto jet = load_jet(c);
    std::vector<double> qs = c.q_schedule;
    if (qs.empty()) qs = default_q_schedule(c.n);
    auto tr = subcritical_continuation(jet, c.r, c.lambda, c.beta, qs, c.grid_N);
    CommandOutput out;
    if (c.jet_file.empty()) out.seeds.push_back(c.seed);
    out.csv.columns = {"q", "sup_u", "lp_norm", "converged"};
    for (size_t i = 0; i < tr.exponents.size(); ++i)
        out.csv.push_row({format_double(tr.exponents[i]), format_double(tr.sup_values[i]),
                          format_double(tr.lp_norms[i]), tr.converged_flags[i] ? "1" : "0"});
    out.json = continuation_trace_to_json(tr);
    out.json["n"] = c.n;
    out.json["r"] = c.r;
    out.json["lambda"] = c.lambda;
    out.json["beta"] = c.beta;
    return out;
}

inline CommandOutput cmd_conformal(const RunConfig& c) {
    std::vector<double> P = c.point_P;
    if (P.empty()) P.assign(size_t(c.n), c.torus_L / 2.0);
    auto res = conformal_negativity(c.n, c.torus_L, c.torus_m, P, c.C_height, c.bump_radius);
    const auto& cert = res.certificate;
    CommandOutput out;
    out.csv.columns = {"mean_F",   "eps_bar", "sup_uprime", "u_min",  "u_max",
                       "H_at_P",   "bump_radius", "shrink_count", "passed"};
    out.csv.push_row({format_double(cert.mean_F), format_double(cert.eps_bar),
                      format_double(cert.sup_uprime), format_double(cert.u_min),
                      format_double(cert.u_max), format_double(cert.H_at_P),
                      format_double(cert.bump_radius), std::to_string(cert.shrink_count),
                      cert.passed ? "1" : "0"});
    out.json = conformal_certificate_to_json(cert);
    out.json["n"] = c.n;
    out.json["L"] = c.torus_L;
    out.json["m"] = c.torus_m;
    out.json["C"] = c.C_height;
    out.json["P"] = P;
    return out;
}

} // namespace detail

// --- dispatch --------------------------------------------------------------------

struct RunArtifacts {
    int exit_code = 0;
    std::string message;
    std::string csv_path, json_path, manifest_path;
};

inline RunArtifacts run(const RunConfig& cfg_in) {
    RunArtifacts art;
    try {
        RunConfig cfg = cfg_in;
        detail::validate(cfg);
        cfg.weyl_scale = detail::effective_weyl_scale(cfg); // materialize for the hash

        std::string outdir = cfg.outdir;
        if (outdir.empty()) {
            const char* env = std::getenv("YLAB_OUTDIR");
            outdir = env ? env : "out";
        }
        std::filesystem::create_directories(outdir);

        detail::CommandOutput out;
        if (cfg.command == "constants") out = detail::cmd_constants(cfg);
        else if (cfg.command == "identity-check") out = detail::cmd_identity_check(cfg);
        else if (cfg.command == "quotient") out = detail::cmd_quotient(cfg);
        else if (cfg.command == "sweep-eps") out = detail::cmd_sweep_eps(cfg);
        else if (cfg.command == "sweep-d") out = detail::cmd_sweep_d(cfg);
        else if (cfg.command == "correct") out = detail::cmd_correct(cfg);
        else if (cfg.command == "solve") out = detail::cmd_solve(cfg);
        else if (cfg.command == "conformal") out = detail::cmd_conformal(cfg);

        const std::string hash = config_hash(config_to_json(cfg, /*include_output=*/false));
        const std::string base = outdir + "/" + cfg.command + "-" + hash;

        Manifest man;
        man.command = cfg.command;
        man.config = config_to_json(cfg);
        man.hash = hash;
        man.seeds = out.seeds;
        if (cfg.emit_csv) {
            art.csv_path = base + ".csv";
            write_text_file(art.csv_path, csv_to_string(out.csv));
            man.outputs.push_back(art.csv_path);
        }
        if (cfg.emit_json) {
            art.json_path = base + ".json";
            write_text_file(art.json_path, out.json.dump(2) + "\n");
            man.outputs.push_back(art.json_path);
        }
        art.manifest_path = outdir + "/manifest.json";
        write_text_file(art.manifest_path, manifest_to_json(man).dump(2) + "\n");
        art.exit_code = 0;
    } catch (const std::domain_error& e) {
        art.exit_code = 2;
        art.message = e.what();
    } catch (const std::invalid_argument& e) {
        art.exit_code = 2;
        art.message = e.what();
    } catch (const nlohmann::json::exception& e) {
        art.exit_code = 2;
        art.message = e.what();
    } catch (const std::exception& e) {
        art.exit_code = 3;
        art.message = e.what();
    }
    return art;
}

} // namespace ylab
