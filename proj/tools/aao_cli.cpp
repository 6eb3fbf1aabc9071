// aao_cli: spectrum, reconstruct, link-check and spc experiments.
//
//   aao_cli reconstruct --config run.json --delta 0.02 --output_dir out/r2
//
// Every config key is also a flag; values are parsed as JSON when possible.
// On failure a JSON error object goes to stderr and the exit code is nonzero.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "aao/experiment.hpp"
#include "aao/io.hpp"

using nlohmann::json;
namespace ex = aao::experiment;

namespace {

int fail(const std::string& type, const std::string& message, int code) {
    const json err{{"status", "error"}, {"error", {{"type", type}, {"message", message}}}};
    std::cerr << err.dump() << "\n";
    return code;
}

std::string hyphenated(std::string key) {
    for (char& c : key)
        if (c == '_') c = '-';
    return key;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"All-at-once Bayesian inverse source and backwards heat experiments"};
    app.require_subcommand(1);
    const json defaults = ex::ExperimentConfig{}.to_json();

    struct Sub {
        CLI::App* app;
        std::string config_path;
        std::map<std::string, std::string> overrides;
    };
    std::map<std::string, Sub> subs;
    const std::map<std::string, std::string> help = {
        {"spectrum", "eigenvalues of the transformed all-at-once operator"},
        {"reconstruct", "synthetic data, MAP estimates, posterior samples and errors"},
        {"link-check", "empirical link-condition ratios"},
        {"spc", "squared posterior contraction decomposition"}};
    for (const auto& [name, text] : help) {
        Sub& s = subs[name];
        s.app = app.add_subcommand(name, text);
        s.app->add_option("--config", s.config_path, "JSON config file")->check(CLI::ExistingFile);
        for (const auto& [key, value] : defaults.items()) {
            std::string names = "--" + key;
            if (hyphenated(key) != key) names += ",--" + hyphenated(key);
            s.app->add_option(names, s.overrides[key], "override '" + key + "' (default " + value.dump() + ")");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), 2);
    }

    for (auto& [name, s] : subs) {
        if (!s.app->parsed()) continue;
        ex::ExperimentConfig cfg;
        try {
            json j = json::object();
            if (!s.config_path.empty()) j = aao::io::read_json(s.config_path);
            if (!j.is_object()) return fail("config", "config file must hold a JSON object", 2);
            for (const auto& [key, raw] : s.overrides) {
                if (s.app->count("--" + key) == 0) continue;
                if (defaults[key].is_string()) {
                    j[key] = raw;
                } else {
                    const json parsed = json::parse(raw, nullptr, false);
                    j[key] = parsed.is_discarded() ? json(raw) : parsed;
                }
            }
            cfg = ex::ExperimentConfig::from_json(j);
        } catch (const std::exception& e) {
            return fail("config", e.what(), 2);
        }
        try {
            ex::RunResult r;
            if (name == "spectrum") r = ex::run_spectrum(cfg);
            else if (name == "reconstruct") r = ex::run_reconstruction(cfg);
            else if (name == "link-check") r = ex::run_link_check(cfg);
            else r = ex::run_spc(cfg);
            const json out{{"status", "ok"}, {"command", name}, {"output_dir", cfg.output_dir},
                           {"outputs", r.outputs}, {"results", r.results}};
            std::cout << out.dump(2) << "\n";
            return 0;
        } catch (const aao::CgFailure& e) {
            return fail("cg_failure", e.what(), 3);
        } catch (const aao::NumericalError& e) {
            return fail("numerical", e.what(), 3);
        } catch (const std::exception& e) {
            return fail("runtime", e.what(), 1);
        }
    }
    return fail("usage", "no subcommand", 2);
}
