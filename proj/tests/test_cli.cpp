#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <sys/wait.h>

#include "ylab/cli.hpp"
#include "ylab/io.hpp"

using namespace ylab;
using Catch::Matchers::WithinRel;

namespace fs = std::filesystem;

namespace {

std::string fresh_dir(const std::string& name) {
    const std::string dir = "cli_test_out/" + name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// drive the real binary; returns the exit code, captures stdout
int run_cli(const std::string& args, std::string* out = nullptr) {
    const std::string cmd =
        std::string(YLAB_BIN) + " " + args + " > cli_stdout.txt 2> cli_stderr.txt";
    const int rc = std::system(cmd.c_str());
    if (out) *out = read_text_file("cli_stdout.txt");
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

double cell(const CsvTable& t, size_t row, const std::string& col) {
    for (size_t c = 0; c < t.columns.size(); ++c)
        if (t.columns[c] == col) return parse_double(t.rows.at(row).at(c));
    throw std::out_of_range("no column " + col);
}

} // namespace

TEST_CASE("config round trip and hash stability") {
    RunConfig c;
    c.command = "quotient";
    c.n = 6;
    c.seed = 99;
    c.weyl_scale = 0.25;
    c.eps = 3e-5;
    c.eps_list = {1e-6, 1e-5};
    c.point_P = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
    c.outdir = "somewhere";
    c.emit_csv = false;

    const auto j = config_to_json(c);
    const auto c2 = config_from_json(j);
    CHECK(c2.command == "quotient");
    CHECK(c2.n == 6);
    CHECK(c2.seed == 99);
    CHECK(c2.weyl_scale == 0.25);
    CHECK(c2.eps == 3e-5);
    CHECK(c2.eps_list == c.eps_list);
    CHECK(c2.point_P == c.point_P);
    CHECK(c2.outdir == "somewhere");
    CHECK(c2.emit_csv == false);

    SECTION("the output block stays out of the hash") {
        RunConfig moved = c;
        moved.outdir = "elsewhere";
        moved.emit_csv = true;
        CHECK(config_hash(config_to_json(c, false)) ==
              config_hash(config_to_json(moved, false)));
        CHECK(config_hash(config_to_json(c, true)) !=
              config_hash(config_to_json(moved, true)));
    }
}

TEST_CASE("constants command emits the table and a manifest") {
    RunConfig c;
    c.command = "constants";
    c.outdir = fresh_dir("constants");
    const auto art = run(c);
    REQUIRE(art.exit_code == 0);
    REQUIRE(fs::exists(art.csv_path));
    REQUIRE(fs::exists(art.json_path));
    REQUIRE(fs::exists(art.manifest_path));

    const auto t = read_csv(art.csv_path);
    REQUIRE(t.columns.size() == 7);
    REQUIRE(t.rows.size() == 7); // n = 4..10
    CHECK(cell(t, 0, "n") == 4.0);
    CHECK_THAT(cell(t, 1, "T"), WithinRel(best_sobolev_T(5), 1e-14));
    CHECK(std::abs(cell(t, 3, "duplication_residual")) < 1e-12);

    const auto man = nlohmann::json::parse(read_text_file(art.manifest_path));
    CHECK(man.at("command") == "constants");
    CHECK(man.at("outputs").size() == 2);
    CHECK(man.at("config").at("command") == "constants");
    CHECK(man.contains("library_version"));
    // the filename carries the config hash from the manifest
    CHECK(art.csv_path.find(man.at("config_hash").get<std::string>()) != std::string::npos);
    // constants takes no synthetic curvature input, so no seed is recorded
    CHECK(man.at("seeds").empty());

    SECTION("per-command default for the Weyl amplitude is materialized") {
        CHECK(man.at("config").at("jet").at("weyl_scale").get<double>() == 0.0);
    }
}

TEST_CASE("identical configs produce identical artifacts in different directories") {
    RunConfig c;
    c.command = "quotient";
    c.n = 5;
    c.eps = 1e-5;
    c.outdir = fresh_dir("det_a");
    const auto a1 = run(c);
    c.outdir = fresh_dir("det_b");
    const auto a2 = run(c);
    REQUIRE(a1.exit_code == 0);
    REQUIRE(a2.exit_code == 0);
    CHECK(fs::path(a1.csv_path).filename() == fs::path(a2.csv_path).filename());
    CHECK(read_text_file(a1.csv_path) == read_text_file(a2.csv_path));
    CHECK(read_text_file(a1.json_path) == read_text_file(a2.json_path));
}

TEST_CASE("quotient command reports a self-consistent threshold decision") {
    RunConfig c;
    c.command = "quotient";
    c.n = 5;
    c.outdir = fresh_dir("quotient");
    const auto art = run(c);
    REQUIRE(art.exit_code == 0);
    const auto t = read_csv(art.csv_path);
    REQUIRE(t.rows.size() == 1);
    const double value = cell(t, 0, "value");
    const double threshold = cell(t, 0, "threshold");
    const double passed = cell(t, 0, "passed");
    CHECK_THAT(threshold, WithinRel(best_sobolev_T(5), 1e-12));
    CHECK(((value < threshold) == (passed == 1.0)));

    const auto j = nlohmann::json::parse(read_text_file(art.json_path));
    CHECK_THAT(j.at("value").get<double>(), WithinRel(value, 1e-12));
}

TEST_CASE("sweep-eps command uses the documented defaults") {
    RunConfig c;
    c.command = "sweep-eps";
    c.n = 5;
    c.outdir = fresh_dir("sweepeps");
    const auto art = run(c);
    REQUIRE(art.exit_code == 0);
    const auto j = nlohmann::json::parse(read_text_file(art.json_path));
    CHECK(j.at("fit_model") == "linear_in_eps");
    CHECK(j.at("parameters").size() == 8);
    CHECK(j.at("beta").get<double>() == 0.1);
    REQUIRE(j.contains("predicted_coefficient"));
    // the CLI path reproduces the library-level slope agreement
    const double fitted = j.at("fitted_coefficient").get<double>();
    const double predicted = j.at("predicted_coefficient").get<double>();
    CHECK(std::abs(fitted - predicted) <= 0.10 * predicted);
    const auto t = read_csv(art.csv_path);
    CHECK(t.columns == std::vector<std::string>{"eps", "deficit"});
    CHECK(t.rows.size() == 8);
}

TEST_CASE("sweep-d command with a reduced resolution") {
    RunConfig c;
    c.command = "sweep-d";
    c.n = 5;
    c.correct_N = 20000;
    c.outdir = fresh_dir("sweepd");
    const auto art = run(c);
    REQUIRE(art.exit_code == 0);
    const auto j = nlohmann::json::parse(read_text_file(art.json_path));
    const double g = j.at("gamma").get<double>();
    CHECK_THAT(g, WithinRel(0.1 / 3.0, 1e-12)); // default gamma = 0.1 / (n - 2)
    CHECK_THAT(j.at("bound_exponent_lp").get<double>(), WithinRel(2.0 + 1.5 * g, 1e-12));
    CHECK(j.at("bound_constant_lp").get<double>() > 0.0);
    const auto t = read_csv(art.csv_path);
    CHECK(t.columns == std::vector<std::string>{"d", "ratio_lp", "ratio_l2"});
    CHECK(t.rows.size() == 6);
}

TEST_CASE("correct command emits the sampled test function") {
    RunConfig c;
    c.command = "correct";
    c.n = 5;
    c.correct_N = 20000;
    c.outdir = fresh_dir("correct");
    const auto art = run(c);
    REQUIRE(art.exit_code == 0);
    const auto j = nlohmann::json::parse(read_text_file(art.json_path));
    CHECK(j.at("positive").get<bool>());
    CHECK(j.at("solve_residual").get<double>() < 1e-10);
    CHECK((j.at("branch") == "u_plus_v" || j.at("branch") == "abs_v"));
    CHECK(j.at("report").contains("value"));
    const auto t = read_csv(art.csv_path);
    CHECK(t.columns == std::vector<std::string>{"s", "phi"});
    CHECK(t.rows.size() > 100);                 // strided profile samples
    CHECK(cell(t, 0, "s") == 0.0);
    CHECK(cell(t, 0, "phi") > 0.0);
}

TEST_CASE("solve command walks a short schedule") {
    RunConfig c;
    c.command = "solve";
    c.n = 5;
    c.grid_N = 800;
    c.q_schedule = {2.8, 3.0};
    c.outdir = fresh_dir("solve");
    const auto art = run(c);
    REQUIRE(art.exit_code == 0);
    const auto t = read_csv(art.csv_path);
    REQUIRE(t.rows.size() == 2);
    CHECK(cell(t, 0, "q") == 2.8);
    CHECK(cell(t, 0, "converged") == 1.0);
    CHECK(cell(t, 1, "sup_u") > 0.0);
    const auto j = nlohmann::json::parse(read_text_file(art.json_path));
    CHECK(j.at("terminal_status") == "stalled"); // schedule stops below p
    CHECK(j.at("positive").get<bool>());
}

TEST_CASE("conformal command certifies the torus construction") {
    RunConfig c;
    c.command = "conformal";
    c.n = 4;
    c.torus_m = 16;
    c.outdir = fresh_dir("conformal");
    const auto art = run(c);
    REQUIRE(art.exit_code == 0);
    const auto t = read_csv(art.csv_path);
    REQUIRE(t.rows.size() == 1);
    CHECK(cell(t, 0, "passed") == 1.0);
    CHECK(cell(t, 0, "H_at_P") < 0.0);
    const auto j = nlohmann::json::parse(read_text_file(art.json_path));
    CHECK(j.at("P").size() == 4);
    CHECK(j.at("P")[0].get<double>() == 0.5); // defaults to the torus center
}

TEST_CASE("exit codes follow the failure taxonomy") {
    SECTION("precondition failures exit 2") {
        RunConfig c;
        c.command = "correct";
        c.n = 3; // below the construction's dimensional hypothesis
        c.outdir = fresh_dir("exit2");
        const auto art = run(c);
        CHECK(art.exit_code == 2);
        CHECK(!art.message.empty());

        c = RunConfig{};
        c.command = "no-such-command";
        CHECK(run(c).exit_code == 2);

        c = RunConfig{};
        c.command = "quotient";
        c.panels = 0;
        CHECK(run(c).exit_code == 2);
    }
    SECTION("numerical failures exit 3") {
        RunConfig c;
        c.command = "conformal";
        c.n = 4;
        c.torus_m = 16;
        c.bump_radius = 0.05; // below the 3 L/m resolution floor
        c.outdir = fresh_dir("exit3");
        const auto art = run(c);
        CHECK(art.exit_code == 3);
        CHECK(art.message.find("resolved") != std::string::npos);
    }
}

TEST_CASE("empty outdir falls back to the environment") {
    const std::string dir = fresh_dir("envdir");
    ::setenv("YLAB_OUTDIR", dir.c_str(), 1);
    RunConfig c;
    c.command = "constants";
    c.n_min = 4;
    c.n_max = 5;
    const auto art = run(c);
    ::unsetenv("YLAB_OUTDIR");
    REQUIRE(art.exit_code == 0);
    CHECK(art.csv_path.rfind(dir + "/", 0) == 0);
    CHECK(fs::exists(art.csv_path));
}

TEST_CASE("binary: subcommand runs end to end") {
    const std::string dir = fresh_dir("bin_constants");
    std::string out;
    const int rc = run_cli("constants --n-min 4 --n-max 6 --outdir " + dir, &out);
    REQUIRE(rc == 0);
    // stdout lists the artifact paths, manifest last
    REQUIRE(out.find("manifest.json") != std::string::npos);
    const auto t = read_csv(dir + "/" + fs::path(out.substr(0, out.find('\n'))).filename().string());
    CHECK(t.rows.size() == 3);
}

TEST_CASE("binary: flags override the config file") {
    const std::string dir = fresh_dir("bin_merge");
    nlohmann::json filecfg;
    filecfg["params"]["eps"] = 1e-5;
    filecfg["params"]["r"] = 3.0;
    filecfg["output"]["directory"] = dir;
    write_text_file(dir + "/cfg.json", filecfg.dump(2));

    const int rc = run_cli("quotient --config " + dir + "/cfg.json --eps 1e-3");
    REQUIRE(rc == 0);
    const auto man = nlohmann::json::parse(read_text_file(dir + "/manifest.json"));
    CHECK(man.at("config").at("params").at("eps").get<double>() == 1e-3); // flag wins
    CHECK(man.at("config").at("params").at("r").get<double>() == 3.0);    // file survives
}

TEST_CASE("binary: emission can be narrowed to JSON") {
    const std::string dir = fresh_dir("bin_nocsv");
    const int rc = run_cli("constants --n-min 4 --n-max 5 --outdir " + dir + " --no-csv");
    REQUIRE(rc == 0);
    const auto man = nlohmann::json::parse(read_text_file(dir + "/manifest.json"));
    REQUIRE(man.at("outputs").size() == 1);
    const std::string only = man.at("outputs")[0].get<std::string>();
    CHECK(only.substr(only.size() - 5) == ".json");
}

TEST_CASE("binary: comma-separated list flags parse") {
    const std::string dir = fresh_dir("bin_epslist");
    const int rc = run_cli("sweep-eps --n 5 --eps-list 1e-6,2e-6,4e-6,8e-6,1.6e-5,3.2e-5 --outdir " +
                           dir);
    REQUIRE(rc == 0);
    const auto man = nlohmann::json::parse(read_text_file(dir + "/manifest.json"));
    const auto lst = man.at("config").at("sweep").at("eps_list");
    REQUIRE(lst.size() == 6);
    CHECK(lst[1].get<double>() == 2e-6);
}

TEST_CASE("binary: bad inputs exit nonzero") {
    CHECK(run_cli("correct --n 3 --outdir cli_test_out/bin_bad") == 2);
    CHECK(run_cli("definitely-not-a-command") != 0);
    CHECK(run_cli("") != 0); // a subcommand is required
    CHECK(run_cli("sweep-eps --eps-list not,numbers") == 2); // parse errors are preconditions
}
