#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "aao/experiment.hpp"
#include "aao/io.hpp"

using namespace aao;
namespace ex = aao::experiment;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("aao_test_cli_" + name);
    fs::remove_all(p);
    return p;
}

struct Run {
    int code;
    std::string err;
};

Run run_cli(const std::string& args, const fs::path& err_file) {
    const std::string cmd = std::string(AAO_CLI_PATH) + " " + args + " > /dev/null 2> " + err_file.string();
    const int status = std::system(cmd.c_str());
    return {WEXITSTATUS(status), slurp(err_file)};
}

ex::ExperimentConfig small_is(const fs::path& out) {
    ex::ExperimentConfig c;
    c.fine_n = 13;
    c.coarse_n = 9;
    c.observations = 30;
    c.samples = 1;
    c.noise_levels = {0.01};
    c.output_dir = out.string();
    return c;
}

}  // namespace

TEST_CASE("config JSON round trip and defaults") {
    const ex::ExperimentConfig d;
    CHECK(d.fine_n == 41);
    CHECK(d.coarse_n == 31);
    CHECK(d.observations == 100);
    CHECK(d.delta == 0.01);
    CHECK(d.kappa_p == 1e-2);
    CHECK(d.gamma_p == 35.0);
    CHECK(d.bh_kappa == 1.5);
    CHECK(d.bh_gamma == 0.5);
    CHECK(d.T == 0.1);
    CHECK(d.N == 4);
    ex::ExperimentConfig c;
    c.delta = 0.02;
    c.alpha = 3e-5;
    c.problem = "backwards_heat";
    const ex::ExperimentConfig r = ex::ExperimentConfig::from_json(c.to_json());
    CHECK(r.to_json() == c.to_json());
    CHECK(r.alpha_for(1.0) == 3e-5);
    CHECK(d.alpha_for(0.5) == 0.25);
    CHECK(d.alpha_for(0.0) == 1e-8);
}

TEST_CASE("config validation") {
    CHECK_THROWS_WITH_AS(ex::ExperimentConfig::from_json({{"fine_nn", 3}}), doctest::Contains("unknown config key"), std::invalid_argument);
    CHECK_THROWS_AS(ex::ExperimentConfig::from_json({{"fine_n", 31}}), std::invalid_argument);
    CHECK_THROWS_AS(ex::ExperimentConfig::from_json({{"delta", -1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(ex::ExperimentConfig::from_json({{"fine_n", "big"}}), std::invalid_argument);
    CHECK_THROWS_AS(ex::ExperimentConfig::from_json({{"problem", "wave"}}), std::invalid_argument);
}

TEST_CASE("bump and linear fit") {
    CHECK(ex::bump(0.5, 0.5, 0.45) == doctest::Approx(1.0));
    CHECK(ex::bump(0.5, 0.96, 0.45) == 0.0);
    const auto f = ex::linear_fit({1, 2, 3, 4}, {3, 5, 7, 9});
    CHECK(f[0] == doctest::Approx(1.0));
    CHECK(f[1] == doctest::Approx(2.0));
    CHECK(f[2] == doctest::Approx(1.0));
}

TEST_CASE("observation files carry a grid tag checked at load") {
    const fs::path dir = scratch("obs");
    fs::create_directories(dir);
    ex::ObservationData d{ex::grid_tag(41), {{0.1, 0.2}, {0.3, 0.4}}, {1.0, 2.0}, {1.1, 2.1}, 0.1};
    ex::write_observations(dir / "o.csv", d);
    const ex::ObservationData back = ex::read_observations(dir / "o.csv", ex::grid_tag(31));
    CHECK(back.values == d.values);
    CHECK(back.points == d.points);
    CHECK_THROWS_WITH(ex::read_observations(dir / "o.csv", ex::grid_tag(41)), doctest::Contains("reconstruction grid"));
}

TEST_CASE("reconstruction is deterministic and writes one manifest") {
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    ex::run_reconstruction(small_is(a));
    ex::run_reconstruction(small_is(b));
    for (const auto& e : fs::directory_iterator(a)) {
        const std::string name = e.path().filename().string();
        if (name == "manifest.json") continue;
        CHECK_MESSAGE(slurp(e.path()) == slurp(b / name), name);
    }
    const auto m = io::read_json(a / "manifest.json");
    CHECK(m["status"] == "ok");
    CHECK(m["results"]["observation_grid"] == "p1-13x13");
    // PGM header and size
    const std::string pgm = slurp(a / "theta_map.pgm");
    CHECK(pgm.rfind("P5\n9 9\n255\n", 0) == 0);
    CHECK(pgm.size() == std::string("P5\n9 9\n255\n").size() + 81);
}

TEST_CASE("rerunning from the manifest config reproduces the artifacts") {
    const fs::path a = scratch("rerun_a");
    ex::run_link_check(small_is(a));
    auto cfg_json = io::read_json(a / "manifest.json")["config"];
    const fs::path b = scratch("rerun_b");
    cfg_json["output_dir"] = b.string();
    ex::run_link_check(ex::ExperimentConfig::from_json(cfg_json));
    CHECK(slurp(a / "link_check.csv") == slurp(b / "link_check.csv"));
}

TEST_CASE("failed CG still writes a manifest with failure status") {
    const fs::path dir = scratch("cgfail");
    ex::ExperimentConfig c = small_is(dir);
    c.cg_max_iter = 1;
    c.cg_tol = 1e-15;
    CHECK_THROWS_AS(ex::run_reconstruction(c), CgFailure);
    const auto m = io::read_json(dir / "manifest.json");
    CHECK(m["status"] == "failed");
    CHECK(m["error"].contains("cg_iterations"));
}

TEST_CASE("command line: overrides, error JSON and exit codes") {
    const fs::path dir = scratch("proc");
    fs::create_directories(dir);
    const Run ok = run_cli("spc --spc_modes 3 --spc_draws 10 --output_dir " + (dir / "spc").string(), dir / "err.txt");
    CHECK(ok.code == 0);
    const auto m = io::read_json(dir / "spc" / "manifest.json");
    CHECK(m["config"]["spc_modes"] == 3);

    const Run bad = run_cli("spc --fine_n 3 --output_dir " + (dir / "bad").string(), dir / "err2.txt");
    CHECK(bad.code != 0);
    const auto err = nlohmann::json::parse(bad.err);
    CHECK(err["status"] == "error");
    CHECK(err["error"]["type"] == "config");

    const Run usage = run_cli("spectrum --no-such-flag 1", dir / "err3.txt");
    CHECK(usage.code != 0);
    CHECK(nlohmann::json::parse(usage.err)["error"]["type"] == "usage");

    std::ofstream(dir / "cfg.json") << R"({"problem": "backwards_heat", "spectral_modes": 4, "backend": "spectral"})";
    const Run file = run_cli("spectrum --config " + (dir / "cfg.json").string() + " --N 2 --output-dir " + (dir / "f").string(), dir / "err4.txt");
    CHECK(file.code == 0);
    const auto fm = io::read_json(dir / "f" / "manifest.json");
    CHECK(fm["config"]["N"] == 2);
    CHECK(fm["config"]["problem"] == "backwards_heat");
}
