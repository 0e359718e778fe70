// Command-line front end.  Flags override values from --config; the merged,
// fully-defaulted configuration is what gets hashed into output filenames.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ylab/cli.hpp"
#include "ylab/io.hpp"

namespace {

struct FlagSlots {
    std::string config_path;
    int n = 0;
    std::uint64_t seed = 0;
    std::string jet_file;
    double scalar0 = 0, weyl_scale = 0;
    int grid_N = 0, correct_N = 0, panels = 0;
    double tolerance = 0;
    double r = 0, beta = 0, lambda = 0, eps = 0, gamma = 0, d = 0, beta0 = 0, eps_base = 0;
    std::string convention;
    double L = 0, C = 0, bump_radius = 0;
    int m = 0, n_min = 0, n_max = 0;
    std::vector<double> P, eps_list, d_list, q_schedule;
    std::string outdir;
    bool no_csv = false, no_json = false;
};

void add_options(CLI::App* sub, FlagSlots& fs, std::vector<std::pair<CLI::Option*, std::string>>& binds) {
    auto bind = [&](CLI::Option* opt, const std::string& pointer) {
        binds.emplace_back(opt, pointer);
    };
    bind(sub->add_option("--config", fs.config_path, "JSON configuration file"), "");
    bind(sub->add_option("--n", fs.n, "dimension"), "/n");
    bind(sub->add_option("--seed", fs.seed, "seed for synthetic curvature data"), "/jet/seed");
    bind(sub->add_option("--jet-file", fs.jet_file, "curvature jet JSON file"), "/jet/file");
    bind(sub->add_option("--scalar0", fs.scalar0, "target scalar curvature at the center"),
         "/jet/target_scalar0");
    bind(sub->add_option("--weyl-scale", fs.weyl_scale, "synthetic Weyl amplitude"),
         "/jet/weyl_scale");
    bind(sub->add_option("--grid-N", fs.grid_N, "radial solver resolution"), "/numeric/grid_N");
    bind(sub->add_option("--correct-N", fs.correct_N, "correction pipeline resolution"),
         "/numeric/correct_N");
    bind(sub->add_option("--panels", fs.panels, "quadrature panels"), "/numeric/panels");
    bind(sub->add_option("--tolerance", fs.tolerance, "solver tolerance"), "/numeric/tolerance");
    bind(sub->add_option("--r", fs.r, "ball radius"), "/params/r");
    bind(sub->add_option("--beta", fs.beta, "perturbation strength"), "/params/beta");
    bind(sub->add_option("--lambda", fs.lambda, "nonlinear eigenvalue"), "/params/lambda");
    bind(sub->add_option("--eps", fs.eps, "concentration parameter"), "/params/eps");
    bind(sub->add_option("--gamma", fs.gamma, "correction exponent"), "/params/gamma");
    bind(sub->add_option("--d", fs.d, "ball diameter for the correction"), "/params/d");
    bind(sub->add_option("--beta0", fs.beta0, "linked perturbation parameter"), "/params/beta0");
    bind(sub->add_option("--eps-base", fs.eps_base, "base eps before the d^2 rescale"),
         "/params/eps_base");
    bind(sub->add_option("--convention", fs.convention, "quotient convention"),
         "/params/convention");
    bind(sub->add_option("--L", fs.L, "torus side length"), "/params/L");
    bind(sub->add_option("--m", fs.m, "torus grid points per axis (power of two)"), "/params/m");
    bind(sub->add_option("--C", fs.C, "bump height C > 1"), "/params/C");
    bind(sub->add_option("--bump-radius", fs.bump_radius, "initial bump radius"),
         "/params/bump_radius");
    bind(sub->add_option("--P", fs.P, "bump center point")->delimiter(','), "/params/P");
    bind(sub->add_option("--n-min", fs.n_min, "lowest dimension"), "/params/n_min");
    bind(sub->add_option("--n-max", fs.n_max, "highest dimension"), "/params/n_max");
    bind(sub->add_option("--eps-list", fs.eps_list, "sweep eps values")->delimiter(','),
         "/sweep/eps_list");
    bind(sub->add_option("--d-list", fs.d_list, "sweep d values")->delimiter(','),
         "/sweep/d_list");
    bind(sub->add_option("--q-schedule", fs.q_schedule, "continuation exponent schedule")
             ->delimiter(','),
         "/sweep/q_schedule");
    bind(sub->add_option("--outdir", fs.outdir, "output directory"), "/output/directory");
    bind(sub->add_flag("--no-csv", fs.no_csv, "skip CSV emission"), "/output/csv");
    bind(sub->add_flag("--no-json", fs.no_json, "skip JSON emission"), "/output/json");
}

nlohmann::json slot_value(const FlagSlots& fs, const std::string& pointer) {
    if (pointer == "/n") return fs.n;
    if (pointer == "/jet/seed") return fs.seed;
    if (pointer == "/jet/file") return fs.jet_file;
    if (pointer == "/jet/target_scalar0") return fs.scalar0;
    if (pointer == "/jet/weyl_scale") return fs.weyl_scale;
    if (pointer == "/numeric/grid_N") return fs.grid_N;
    if (pointer == "/numeric/correct_N") return fs.correct_N;
    if (pointer == "/numeric/panels") return fs.panels;
    if (pointer == "/numeric/tolerance") return fs.tolerance;
    if (pointer == "/params/r") return fs.r;
    if (pointer == "/params/beta") return fs.beta;
    if (pointer == "/params/lambda") return fs.lambda;
    if (pointer == "/params/eps") return fs.eps;
    if (pointer == "/params/gamma") return fs.gamma;
    if (pointer == "/params/d") return fs.d;
    if (pointer == "/params/beta0") return fs.beta0;
    if (pointer == "/params/eps_base") return fs.eps_base;
    if (pointer == "/params/convention") return fs.convention;
    if (pointer == "/params/L") return fs.L;
    if (pointer == "/params/m") return fs.m;
    if (pointer == "/params/C") return fs.C;
    if (pointer == "/params/bump_radius") return fs.bump_radius;
    if (pointer == "/params/P") return fs.P;
    if (pointer == "/params/n_min") return fs.n_min;
    if (pointer == "/params/n_max") return fs.n_max;
    if (pointer == "/sweep/eps_list") return fs.eps_list;
    if (pointer == "/sweep/d_list") return fs.d_list;
    if (pointer == "/sweep/q_schedule") return fs.q_schedule;
    if (pointer == "/output/directory") return fs.outdir;
    if (pointer == "/output/csv") return !fs.no_csv;
    if (pointer == "/output/json") return !fs.no_json;
    return nullptr;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for conformal scalar-curvature constructions"};
    app.require_subcommand(1);

    FlagSlots fs;
    std::vector<std::pair<CLI::Option*, std::string>> binds;
    std::vector<CLI::App*> subs;
    for (const auto& name : ylab::command_list())
        subs.push_back(app.add_subcommand(name, name + " run"));
    for (auto* sub : subs) add_options(sub, fs, binds);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2; // help/version exit 0; flag misuse is a precondition error
    }

    const CLI::App* active = app.get_subcommands().front();

    nlohmann::json merged = nlohmann::json::object();
    if (!fs.config_path.empty()) {
        try {
            merged = nlohmann::json::parse(ylab::read_text_file(fs.config_path));
        } catch (const std::exception& e) {
            std::cerr << "error: cannot read config: " << e.what() << "\n";
            return 2;
        }
    }
    for (const auto& [opt, pointer] : binds) {
        if (pointer.empty() || opt->count() == 0) continue;
        merged[nlohmann::json::json_pointer(pointer)] = slot_value(fs, pointer);
    }

    ylab::RunConfig cfg;
    try {
        cfg = ylab::config_from_json(merged);
    } catch (const std::exception& e) {
        std::cerr << "error: bad configuration: " << e.what() << "\n";
        return 2;
    }
    cfg.command = active->get_name();

    const auto art = ylab::run(cfg);
    if (art.exit_code != 0) {
        std::cerr << "error (" << (art.exit_code == 2 ? "precondition" : "numerical") << "): "
                  << art.message << "\n";
        return art.exit_code;
    }
    if (!art.csv_path.empty()) std::cout << art.csv_path << "\n";
    if (!art.json_path.empty()) std::cout << art.json_path << "\n";
    std::cout << art.manifest_path << "\n";
    return 0;
}
