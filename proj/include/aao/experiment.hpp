#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aao/aao_bh.hpp"
#include "aao/bayes.hpp"
#include "aao/priors.hpp"

namespace aao::experiment {

struct ExperimentConfig {
    std::string problem = "inverse_source";  // or backwards_heat
    std::string backend = "fe";              // fe or spectral (spectrum and link-check)
    std::size_t fine_n = 41;
    std::size_t coarse_n = 31;
    std::size_t observations = 100;
    double delta = 0.01;                     // noise std relative to max |data|
    std::optional<double> alpha;             // default (noise std)^2, 1e-8 when noiseless
    std::uint64_t seed = 1;
    double kappa_p = 1e-2, gamma_p = 35.0;   // IS parameter prior
    double kappa_s = 1e-2, gamma_s = 35.0;   // IS state prior
    double bh_kappa = 1.5, bh_gamma = 0.5;   // BH parameter prior
    std::string prior = "semigroup";         // BH: semigroup or heuristic
    std::string variable = "both";           // IS: theta, u or both; BH: theta
    double T = 0.1;
    int N = 4;
    double spectrum_T = 1.0;
    std::size_t spectrum_n = 0;              // 0: 18 (IS) or 13 (BH)
    std::size_t spectrum_count = 0;          // 0: 500 (IS) or 700 (BH)
    std::size_t spectral_modes = 16;
    double bump_radius = 0.45;
    std::size_t samples = 3;
    bool sweep = true;
    std::vector<double> noise_levels = {0.01, 0.02, 0.03};
    std::size_t link_samples = 200;
    std::size_t link_probes = 50;
    std::size_t bh_link_modes = 8;
    std::size_t spc_modes = 6;
    std::size_t spc_draws = 200;
    double spc_source_exponent = 1.0;
    double cg_tol = 1e-8;
    int cg_max_iter = 500;
    std::string output_dir = "out";

    nlohmann::json to_json() const;
    // Unknown keys are rejected.
    static ExperimentConfig from_json(const nlohmann::json& j);
    void validate() const;
    double alpha_for(double noise) const;
    bool is_inverse_source() const { return problem == "inverse_source"; }
};

struct RunResult {
    bool ok = true;
    nlohmann::json results;
    std::vector<std::string> outputs;
};

// Each run creates output_dir, writes its artifacts and exactly one
// manifest.json (also on failure, with "status": "failed").
RunResult run_spectrum(const ExperimentConfig& cfg);
RunResult run_reconstruction(const ExperimentConfig& cfg);
RunResult run_link_check(const ExperimentConfig& cfg);
RunResult run_spc(const ExperimentConfig& cfg);

// IS source: exp(1 - 1/(1 - r^2/R^2)) inside the disc of radius R about (0.5, 0.5).
double bump(double x, double y, double radius);

// Noisy point data tagged with the grid it was generated on.
struct ObservationData {
    std::string grid_tag;
    std::vector<std::array<double, 2>> points;
    Vector clean;
    Vector values;
    double noise_std = 0.0;
};

void write_observations(const std::filesystem::path& path, const ObservationData& d);
// Throws if the file was produced on the grid named `forbidden_tag`.
ObservationData read_observations(const std::filesystem::path& path, const std::string& forbidden_tag);

std::string grid_tag(std::size_t n);

// Fit y = a + b x; returns {a, b, R^2}.
std::array<double, 3> linear_fit(const Vector& x, const Vector& y);

}  // namespace aao::experiment
