#include "aao/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "aao/io.hpp"

namespace aao::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

json ExperimentConfig::to_json() const {
    json j;
    j["problem"] = problem;
    j["backend"] = backend;
    j["fine_n"] = fine_n;
    j["coarse_n"] = coarse_n;
    j["observations"] = observations;
    j["delta"] = delta;
    j["alpha"] = alpha ? json(*alpha) : json(nullptr);
    j["seed"] = seed;
    j["kappa_p"] = kappa_p;
    j["gamma_p"] = gamma_p;
    j["kappa_s"] = kappa_s;
    j["gamma_s"] = gamma_s;
    j["bh_kappa"] = bh_kappa;
    j["bh_gamma"] = bh_gamma;
    j["prior"] = prior;
    j["variable"] = variable;
    j["T"] = T;
    j["N"] = N;
    j["spectrum_T"] = spectrum_T;
    j["spectrum_n"] = spectrum_n;
    j["spectrum_count"] = spectrum_count;
    j["spectral_modes"] = spectral_modes;
    j["bump_radius"] = bump_radius;
    j["samples"] = samples;
    j["sweep"] = sweep;
    j["noise_levels"] = noise_levels;
    j["link_samples"] = link_samples;
    j["link_probes"] = link_probes;
    j["bh_link_modes"] = bh_link_modes;
    j["spc_modes"] = spc_modes;
    j["spc_draws"] = spc_draws;
    j["spc_source_exponent"] = spc_source_exponent;
    j["cg_tol"] = cg_tol;
    j["cg_max_iter"] = cg_max_iter;
    j["output_dir"] = output_dir;
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    ExperimentConfig c;
    const json defaults = c.to_json();
    for (const auto& [key, value] : j.items())
        if (!defaults.contains(key)) throw std::invalid_argument("unknown config key: " + key);
    const auto get = [&](const char* key, auto& field) {
        if (!j.contains(key)) return;
        try {
            j.at(key).get_to(field);
        } catch (const json::exception&) {
            throw std::invalid_argument(std::string("config key '") + key + "' has the wrong type");
        }
    };
    get("problem", c.problem);
    get("backend", c.backend);
    get("fine_n", c.fine_n);
    get("coarse_n", c.coarse_n);
    get("observations", c.observations);
    get("delta", c.delta);
    if (j.contains("alpha") && !j["alpha"].is_null()) {
        double a;
        get("alpha", a);
        c.alpha = a;
    }
    get("seed", c.seed);
    get("kappa_p", c.kappa_p);
    get("gamma_p", c.gamma_p);
    get("kappa_s", c.kappa_s);
    get("gamma_s", c.gamma_s);
    get("bh_kappa", c.bh_kappa);
    get("bh_gamma", c.bh_gamma);
    get("prior", c.prior);
    get("variable", c.variable);
    get("T", c.T);
    get("N", c.N);
    get("spectrum_T", c.spectrum_T);
    get("spectrum_n", c.spectrum_n);
    get("spectrum_count", c.spectrum_count);
    get("spectral_modes", c.spectral_modes);
    get("bump_radius", c.bump_radius);
    get("samples", c.samples);
    get("sweep", c.sweep);
    get("noise_levels", c.noise_levels);
    get("link_samples", c.link_samples);
    get("link_probes", c.link_probes);
    get("bh_link_modes", c.bh_link_modes);
    get("spc_modes", c.spc_modes);
    get("spc_draws", c.spc_draws);
    get("spc_source_exponent", c.spc_source_exponent);
    get("cg_tol", c.cg_tol);
    get("cg_max_iter", c.cg_max_iter);
    get("output_dir", c.output_dir);
    c.validate();
    return c;
}

void ExperimentConfig::validate() const {
    const auto fail = [](const std::string& m) { throw std::invalid_argument("invalid config: " + m); };
    if (problem != "inverse_source" && problem != "backwards_heat") fail("problem must be inverse_source or backwards_heat");
    if (backend != "fe" && backend != "spectral") fail("backend must be fe or spectral");
    if (prior != "semigroup" && prior != "heuristic") fail("prior must be semigroup or heuristic");
    if (variable != "theta" && variable != "u" && variable != "both") fail("variable must be theta, u or both");
    if (!is_inverse_source() && variable == "u") fail("the backwards heat reconstruction is theta-reduced");
    if (coarse_n < 3) fail("coarse_n must be at least 3");
    if (fine_n <= coarse_n) fail("fine_n must exceed coarse_n");
    if (observations == 0) fail("observations must be positive");
    if (!(delta >= 0.0)) fail("delta must be nonnegative");
    if (alpha && !(*alpha > 0.0)) fail("alpha must be positive");
    if (!(T > 0.0) || !(spectrum_T > 0.0)) fail("T must be positive");
    if (N < 1) fail("N must be positive");
    if (!(bump_radius > 0.0 && bump_radius <= 0.5)) fail("bump_radius must lie in (0, 0.5]");
    for (double d : noise_levels)
        if (!(d >= 0.0)) fail("noise levels must be nonnegative");
    if (spectral_modes == 0 || spc_modes == 0 || bh_link_modes == 0) fail("mode counts must be positive");
    if (!(cg_tol > 0.0) || cg_max_iter < 1) fail("CG settings must be positive");
}

double ExperimentConfig::alpha_for(double noise) const {
    if (alpha) return *alpha;
    return noise > 0.0 ? noise * noise : 1e-8;
}

double bump(double x, double y, double radius) {
    const double r2 = ((x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5)) / (radius * radius);
    return r2 < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - r2)) : 0.0;
}

std::string grid_tag(std::size_t n) { return "p1-" + std::to_string(n) + "x" + std::to_string(n); }

void write_observations(const fs::path& path, const ObservationData& d) {
    io::CsvWriter w(path, {"grid", "x", "y", "clean", "value", "noise_std"});
    for (std::size_t i = 0; i < d.points.size(); ++i)
        w.row({d.grid_tag, io::format_double(d.points[i][0]), io::format_double(d.points[i][1]),
               io::format_double(d.clean[i]), io::format_double(d.values[i]), io::format_double(d.noise_std)});
}

ObservationData read_observations(const fs::path& path, const std::string& forbidden_tag) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "grid,x,y,clean,value,noise_std") throw std::runtime_error(path.string() + ": unexpected header");
    ObservationData d;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 6) throw std::runtime_error(path.string() + ": malformed row");
        if (d.grid_tag.empty()) d.grid_tag = cells[0];
        if (cells[0] != d.grid_tag) throw std::runtime_error(path.string() + ": mixed grid tags");
        d.points.push_back({std::stod(cells[1]), std::stod(cells[2])});
        d.clean.push_back(std::stod(cells[3]));
        d.values.push_back(std::stod(cells[4]));
        d.noise_std = std::stod(cells[5]);
    }
    if (d.grid_tag == forbidden_tag)
        throw std::runtime_error("observations were generated on the reconstruction grid " + forbidden_tag);
    return d;
}

std::array<double, 3> linear_fit(const Vector& x, const Vector& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("linear_fit: need at least two points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n, my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    const double b = sxy / sxx, a = my - b * mx;
    const double r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return {a, b, r2};
}

namespace {

struct Context {
    const ExperimentConfig& cfg;
    fs::path dir;
    json outputs = json::array();
    RunResult result;

    fs::path file(const std::string& name) {
        outputs.push_back({{"file", name}});
        result.outputs.push_back(name);
        return dir / name;
    }
    void image(const std::string& name, const fem::NodalField& f) {
        const io::PgmInfo info = io::write_pgm(dir / name, f);
        outputs.push_back({{"file", name}, {"width", info.width}, {"height", info.height}, {"min", info.min}, {"max", info.max}});
        result.outputs.push_back(name);
    }
};

RunResult guarded(const ExperimentConfig& cfg, const std::string& command, const std::function<void(Context&)>& body) {
    cfg.validate();
    Context ctx{cfg, fs::path(cfg.output_dir), json::array(), RunResult{}};
    fs::create_directories(ctx.dir);
    json manifest;
    manifest["command"] = command;
    manifest["config"] = cfg.to_json();
    try {
        body(ctx);
        manifest["status"] = "ok";
        manifest["results"] = ctx.result.results;
        manifest["outputs"] = ctx.outputs;
        io::write_json(ctx.dir / "manifest.json", manifest);
    } catch (const std::exception& e) {
        manifest["status"] = "failed";
        manifest["error"] = {{"type", typeid(e).name()}, {"message", e.what()}};
        if (const auto* cg = dynamic_cast<const CgFailure*>(&e)) {
            manifest["error"]["cg_iterations"] = cg->iterations;
            manifest["error"]["cg_residual"] = cg->residual;
        }
        manifest["results"] = ctx.result.results;
        manifest["outputs"] = ctx.outputs;
        io::write_json(ctx.dir / "manifest.json", manifest);
        throw;
    }
    return ctx.result;
}

double max_abs_or_one(const Vector& v) {
    const double m = max_abs(v);
    return m > 0.0 ? m : 1.0;
}

// Relative error in the M norm.
double relative_error(const DenseSymMatrix& m, const Vector& approx, const Vector& truth) {
    const Vector d = sub(approx, truth);
    const double den = dot(truth, m.apply(truth));
    return std::sqrt(dot(d, m.apply(d)) / (den > 0.0 ? den : 1.0));
}

json cluster_json(const std::vector<bh::Cluster>& cs) {
    json a = json::array();
    for (const auto& c : cs) {
        json e{{"target", c.target}, {"members", c.members}};
        e["center"] = c.members ? json(c.center) : json(nullptr);
        e["max_distance"] = c.members ? json(c.max_distance) : json(nullptr);
        a.push_back(e);
    }
    return a;
}

Vector sorted_desc(Vector v) {
    std::sort(v.begin(), v.end(), std::greater<>());
    return v;
}

void spectrum_is(Context& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    struct Row {
        double value;
        bool upper;
        double mu;
        double analytic;
    };
    std::vector<Row> rows;
    if (cfg.backend == "fe") {
        const fem::Mesh mesh(cfg.spectrum_n ? cfg.spectrum_n : 18);
        const std::size_t count = cfg.spectrum_count ? cfg.spectrum_count : 500;
        for (const auto& e : is::discrete_spectrum(mesh, count)) rows.push_back({e.value, e.upper_branch, e.mu_hat, e.analytic});
        ctx.result.results["mesh_n"] = mesh.nodes_per_dim();
    } else {
        const ModalBasis basis = ModalBasis::spectral(cfg.spectral_modes);
        for (std::size_t n = 0; n < basis.size(); ++n) {
            const double g = basis.eigenvalue(n), mu = 1.0 / (g * g);
            Matrix t(2, 2);
            t(0, 0) = 1.0 + mu;
            t(0, 1) = t(1, 0) = -1.0;
            t(1, 1) = 1.0;
            const Vector ev = sym_eigvals(DenseSymMatrix(t)).eigenvalues;
            const auto pair = is::analytic_eigenvalue_pair(mu);
            rows.push_back({ev[1], true, mu, pair.upper});
            rows.push_back({ev[0], false, mu, pair.lower});
        }
        std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.value > b.value; });
        ctx.result.results["modes_per_dim"] = cfg.spectral_modes;
    }

    io::CsvWriter w(ctx.file("spectrum.csv"), {"rank", "value", "branch", "mu_hat", "analytic"});
    Vector upper, lower;
    double max_err = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        w.row({std::to_string(r), io::format_double(rows[r].value), rows[r].upper ? "upper" : "lower",
               io::format_double(rows[r].mu), io::format_double(rows[r].analytic)});
        (rows[r].upper ? upper : lower).push_back(rows[r].value);
        max_err = std::max(max_err, std::abs(rows[r].value - rows[r].analytic));
    }
    json& res = ctx.result.results;
    res["count"] = rows.size();
    res["max_abs_error_vs_closed_form"] = max_err;
    if (!upper.empty()) {
        res["upper_center"] = std::accumulate(upper.begin(), upper.end(), 0.0) / static_cast<double>(upper.size());
        res["upper_min"] = *std::min_element(upper.begin(), upper.end());
    }
    if (!lower.empty()) {
        res["lower_center"] = std::accumulate(lower.begin(), lower.end(), 0.0) / static_cast<double>(lower.size());
        res["lower_max"] = *std::max_element(lower.begin(), lower.end());
    }
    if (!upper.empty() && !lower.empty()) res["cluster_gap"] = res["upper_min"].get<double>() - res["lower_max"].get<double>();
    if (lower.size() >= 3) {
        const Vector l = sorted_desc(lower);
        Vector inv_k, root, logk, logl;
        for (std::size_t k = 0; k < l.size(); ++k) {
            inv_k.push_back(1.0 / static_cast<double>(k + 1));
            root.push_back(std::sqrt(l[k]));
            logk.push_back(std::log(static_cast<double>(k + 1)));
            logl.push_back(std::log(l[k]));
        }
        res["lower_sqrt_vs_inverse_index_r2"] = linear_fit(inv_k, root)[2];
        res["lower_decay_exponent"] = linear_fit(logk, logl)[1];
    }
}

void spectrum_bh(Context& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    const double T = cfg.spectrum_T;
    Vector values;
    json& res = ctx.result.results;
    if (cfg.backend == "fe") {
        const fem::Mesh mesh(cfg.spectrum_n ? cfg.spectrum_n : 13);
        const std::size_t dim = (static_cast<std::size_t>(cfg.N) + 2) * mesh.interior_count();
        const std::size_t count = std::min(cfg.spectrum_count ? cfg.spectrum_count : 700, dim);
        values = bh::discrete_spectrum_bh(mesh, cfg.N, T, count);
        io::CsvWriter w(ctx.file("spectrum.csv"), {"rank", "value"});
        for (std::size_t r = 0; r < values.size(); ++r) w.row({std::to_string(r), io::format_double(values[r])});
        res["mesh_n"] = mesh.nodes_per_dim();
    } else {
        const ModalBasis basis = ModalBasis::spectral(cfg.spectral_modes);
        double bound_ratio = 0.0;
        io::CsvWriter w(ctx.file("spectrum.csv"), {"mode", "gamma", "mu", "root_small", "root_mid", "root_large", "complex_pair"});
        for (std::size_t n = 0; n < basis.size(); ++n) {
            const double mu = 1.0 / basis.eigenvalue(n);
            const auto r = bh::analytic_cubic_roots(bh::BhCubicCoefficients::make(mu, T));
            w.row({std::to_string(n), io::format_double(basis.eigenvalue(n)), io::format_double(mu), io::format_double(r.roots[0]),
                   io::format_double(r.roots[1]), io::format_double(r.roots[2]), r.complex_pair ? "1" : "0"});
            for (double v : r.roots)
                if (std::isfinite(v)) values.push_back(v);
            // The remaining N eigenvalues of each mode block equal one.
            values.insert(values.end(), static_cast<std::size_t>(cfg.N), 1.0);
            if (std::isfinite(r.roots[0]))
                bound_ratio = std::max(bound_ratio, r.roots[0] / (2.0 * mu * std::exp(-2.0 * T / mu)));
        }
        res["small_root_bound_ratio_max"] = bound_ratio;
        values = sorted_desc(values);
    }
    res["T"] = T;
    res["N"] = cfg.N;
    res["count"] = values.size();
    res["clusters"] = cluster_json(bh::cluster_summary(values, {1.0, 1.5, T + 1.0}, 0.25));
}

bayes::CostConfig is_cost(const ExperimentConfig& cfg, const ModalBasis& basis, const Matrix& obs, double alpha,
                          const Vector& y) {
    const std::size_t d = basis.size();
    Vector c1(d), c3(d), diag(d);
    for (std::size_t n = 0; n < d; ++n) {
        const double g = basis.eigenvalue(n);
        const double pu = cfg.kappa_s + cfg.gamma_s * g, pt = cfg.kappa_p + cfg.gamma_p * g;
        c1[n] = pu / (g * g);
        c3[n] = pt;
        double data = 0.0;
        for (std::size_t i = 0; i < obs.rows(); ++i) data += obs(i, n) * obs(i, n);
        diag[n] = 1.0 / (data / (g * g) + alpha * (c1[n] + pt));
    }
    bayes::CostConfig c;
    c.alpha = alpha;
    c.C1 = [c1](const Vector& x) { return hadamard(c1, x); };
    c.C3 = [c3](const Vector& x) { return hadamard(c3, x); };
    c.y = y;
    c.preconditioner = [diag](const Vector& x) { return hadamard(diag, x); };
    return c;
}

CgOptions cg_options(const ExperimentConfig& cfg) {
    CgOptions o;
    o.tol = cfg.cg_tol;
    o.max_iter = cfg.cg_max_iter;
    return o;
}

ObservationData observe_fine(const ExperimentConfig& cfg, const fem::NodalField& fine_field) {
    const double margin = 1.0 / static_cast<double>(cfg.coarse_n - 1);
    ObservationData d;
    d.grid_tag = grid_tag(cfg.fine_n);
    d.points = fem::random_points(cfg.observations, margin, cfg.seed);
    d.clean = fem::observation_operator(fine_field.mesh, d.points).apply(fine_field.values);
    d.noise_std = cfg.delta * max_abs_or_one(d.clean);
    d.values = fem::add_noise(d.clean, d.noise_std, cfg.seed + 1);
    return d;
}

void write_fields(Context& ctx, const fem::Mesh& mesh, const std::vector<std::string>& names, const std::vector<const Vector*>& cols) {
    std::vector<std::string> header{"x", "y"};
    header.insert(header.end(), names.begin(), names.end());
    io::CsvWriter w(ctx.file("fields.csv"), header);
    for (std::size_t k = 0; k < mesh.interior_count(); ++k) {
        const auto p = mesh.interior_node(k);
        std::vector<double> row{p[0], p[1]};
        for (const Vector* c : cols) row.push_back((*c)[k]);
        w.row(row);
    }
}

json map_json(const bayes::MapResult& m) {
    return {{"cg_iterations", m.iterations}, {"cg_residual", m.cg_residual}, {"gradient_norm", m.gradient_norm}};
}

void reconstruct_is(Context& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    json& res = ctx.result.results;
    const fem::Mesh fine(cfg.fine_n), coarse(cfg.coarse_n);
    const auto truth_fn = [&](double x, double y) { return bump(x, y, cfg.bump_radius); };
    res["truth"] = {{"kind", "bump"},
                    {"formula", "exp(1 - 1/(1 - r^2/R^2)) for r < R, r = |(x,y) - (0.5,0.5)|"},
                    {"R", cfg.bump_radius}};

    // Data on the fine grid: K u = M theta.
    const fem::NodalField theta_fine = fem::interpolate(fine, truth_fn);
    const fem::NodalField u_fine{fine, Cholesky(fem::assemble_stiffness(fine)).solve(fem::assemble_mass(fine).apply(theta_fine.values))};
    write_observations(ctx.file("observations.csv"), observe_fine(cfg, u_fine));
    const ObservationData data = read_observations(ctx.dir / "observations.csv", grid_tag(cfg.coarse_n));

    const ModalBasis basis = ModalBasis::finite_element(coarse);
    const Matrix obs = basis.point_evaluation(data.points);
    const is::IsOperator op(basis);
    const bayes::LinearProblem prob = bayes::is_problem(op, &obs);
    const double alpha = cfg.alpha_for(data.noise_std);
    const bayes::CostConfig cost = is_cost(cfg, basis, obs, alpha, data.values);
    res["alpha"] = alpha;
    res["delta"] = cfg.delta;
    res["noise_std"] = data.noise_std;
    res["observation_grid"] = data.grid_tag;
    res["reconstruction_grid"] = grid_tag(cfg.coarse_n);

    const fem::NodalField theta_true = fem::interpolate(coarse, truth_fn);
    const fem::NodalField u_true = fem::restrict_to_coarse(u_fine, coarse);
    const DenseSymMatrix& m = basis.mass();
    ctx.image("theta_true.pgm", theta_true);
    ctx.image("u_true.pgm", u_true);

    std::optional<bayes::MapResult> map_theta, map_u;
    Vector theta_nodal, u_nodal;
    if (cfg.variable != "u") {
        map_theta = bayes::map_estimate(prob, cost, bayes::Variable::theta, cg_options(cfg));
        theta_nodal = basis.to_nodal(map_theta->theta, coarse).values;
        u_nodal = basis.to_nodal(map_theta->u, coarse).values;
        res["theta_map"] = map_json(*map_theta);
        res["theta_map"]["theta_error"] = relative_error(m, theta_nodal, theta_true.values);
        res["theta_map"]["u_error"] = relative_error(m, u_nodal, u_true.values);
        ctx.image("theta_map.pgm", {coarse, theta_nodal});
        ctx.image("u_map.pgm", {coarse, u_nodal});
    }
    if (cfg.variable != "theta") {
        map_u = bayes::map_estimate(prob, cost, bayes::Variable::u, cg_options(cfg));
        const Vector th = basis.to_nodal(map_u->theta, coarse).values;
        const Vector uu = basis.to_nodal(map_u->u, coarse).values;
        res["u_map"] = map_json(*map_u);
        res["u_map"]["theta_error"] = relative_error(m, th, theta_true.values);
        res["u_map"]["u_error"] = relative_error(m, uu, u_true.values);
        ctx.image("theta_from_u_map.pgm", {coarse, th});
        if (theta_nodal.empty()) {
            theta_nodal = th;
            u_nodal = uu;
        }
    }
    write_fields(ctx, coarse, {"theta_true", "theta_map", "u_true", "u_map"},
                 {&theta_true.values, &theta_nodal, &u_true.values, &u_nodal});

    if (cfg.samples > 0) {
        const bayes::MapResult& mr = map_theta ? *map_theta : *map_u;
        const bayes::PosteriorModel post = bayes::posterior_from_map(prob, cost, mr, data.noise_std);
        res["posterior_spread"] = bayes::posterior_spread(post);
        const auto draws = bayes::sample_posterior(post, cfg.seed + 2, cfg.samples);
        for (std::size_t k = 0; k < draws.size(); ++k) {
            // Draws live in the MAP variable; show the parameter.
            const Vector th = mr.variable == bayes::Variable::theta ? draws[k] : prob.Q(draws[k]);
            ctx.image("theta_sample_" + std::to_string(k) + ".pgm", basis.to_nodal(th, coarse));
        }
    }

    if (cfg.sweep) {
        io::CsvWriter w(ctx.file("noise_sweep.csv"), {"delta", "alpha", "noise_std", "theta_error", "u_error", "cg_iterations"});
        json sweep = json::array();
        for (std::size_t i = 0; i < cfg.noise_levels.size(); ++i) {
            const double level = cfg.noise_levels[i];
            const double sd = level * max_abs_or_one(data.clean);
            const Vector y = fem::add_noise(data.clean, sd, cfg.seed + 100 + i);
            const double a = cfg.alpha_for(sd);
            const auto mr = bayes::map_estimate(prob, is_cost(cfg, basis, obs, a, y), bayes::Variable::theta, cg_options(cfg));
            const double te = relative_error(m, basis.to_nodal(mr.theta, coarse).values, theta_true.values);
            const double ue = relative_error(m, basis.to_nodal(mr.u, coarse).values, u_true.values);
            w.row(std::vector<double>{level, a, sd, te, ue, static_cast<double>(mr.iterations)});
            sweep.push_back({{"delta", level}, {"alpha", a}, {"theta_error", te}, {"u_error", ue}, {"cg_iterations", mr.iterations}});
        }
        res["noise_sweep"] = sweep;
    }
}

// Evaluation-based state penalty sum_i w_i |u(t_i)|^2 at t_1..t_N, as an
// operator on U0 generators: per mode gamma Gram^{-1} E^T W E.
LinearOp heuristic_state_precision(const bh::BhOperator& op) {
    const int N = op.grid().steps();
    const std::size_t s = static_cast<std::size_t>(N) + 2;
    auto blocks = std::make_shared<std::vector<Matrix>>();
    for (std::size_t n = 0; n < op.size(); ++n) {
        const bh::ModeTime& mt = op.mode_time(n);
        Matrix ewe(s, s);
        Vector unit(s, 0.0);
        Matrix e(static_cast<std::size_t>(N), s);
        for (std::size_t j = 0; j < s; ++j) {
            unit[j] = 1.0;
            for (int i = 1; i <= N; ++i) e(static_cast<std::size_t>(i - 1), j) = mt.state_value(unit.data(), op.grid().node(i));
            unit[j] = 0.0;
        }
        for (int i = 1; i <= N; ++i) {
            const double w = op.grid().tau() * (i == N ? 0.5 : 1.0);
            for (std::size_t a = 0; a < s; ++a)
                for (std::size_t b = 0; b < s; ++b) ewe(a, b) += w * e(i - 1, a) * e(i - 1, b);
        }
        const Cholesky gram(DenseSymMatrix(mt.gram()));
        Matrix blk(s, s);
        for (std::size_t b = 0; b < s; ++b) {
            const Vector col = gram.solve(ewe.column(b));
            for (std::size_t a = 0; a < s; ++a) blk(a, b) = mt.gamma() * col[a];
        }
        blocks->push_back(std::move(blk));
    }
    return [blocks, s](const Vector& v) {
        Vector out(v.size(), 0.0);
        for (std::size_t n = 0; n < blocks->size(); ++n) {
            const Matrix& b = (*blocks)[n];
            for (std::size_t a = 0; a < s; ++a) {
                double acc = 0.0;
                for (std::size_t c = 0; c < s; ++c) acc += b(a, c) * v[n * s + c];
                out[n * s + a] = acc;
            }
        }
        return out;
    };
}

bayes::CostConfig bh_cost(const ExperimentConfig& cfg, const bh::BhOperator& op, const bayes::LinearProblem& prob,
                          double alpha, const Vector& y) {
    const std::size_t d = op.size();
    Vector c3(d);
    bayes::CostConfig c;
    c.alpha = alpha;
    c.y = y;
    for (std::size_t n = 0; n < d; ++n) {
        const double g = op.basis().eigenvalue(n);
        if (cfg.prior == "semigroup")
            c3[n] = (cfg.N + 2) * (cfg.bh_kappa + cfg.bh_gamma * g) / g;
        else
            c3[n] = 1.0 / (std::sqrt(g) * g);
    }
    c.C3 = [c3](const Vector& x) { return hadamard(c3, x); };
    if (cfg.prior == "heuristic") c.C1 = heuristic_state_precision(op);
    // Jacobi preconditioner from the exact Hessian diagonal.
    Vector diag(d);
    Vector e(d, 0.0);
    for (std::size_t n = 0; n < d; ++n) {
        e[n] = 1.0;
        diag[n] = 1.0 / bayes::reduced_hessian_theta_action(prob, c, e)[n];
        e[n] = 0.0;
    }
    c.preconditioner = [diag](const Vector& x) { return hadamard(diag, x); };
    return c;
}

void reconstruct_bh(Context& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    json& res = ctx.result.results;
    const fem::Mesh fine(cfg.fine_n), coarse(cfg.coarse_n);

    // Truth: draw from N(0, (kappa M + gamma K)^{-1}) on the fine grid.
    const DenseSymMatrix mf = fem::assemble_mass(fine);
    const DenseSymMatrix kf = fem::assemble_stiffness(fine);
    Matrix prec = mf.matrix();
    prec *= cfg.bh_kappa;
    Matrix kk = kf.matrix();
    kk *= cfg.bh_gamma;
    const Cholesky pchol(DenseSymMatrix(prec + kk));
    Rng rng(cfg.seed + 3);
    const fem::NodalField theta_fine{fine, pchol.solve_upper(rng.normals(fine.interior_count()))};
    res["truth"] = {{"kind", "prior draw"}, {"precision", "kappa M + gamma K"}, {"kappa", cfg.bh_kappa}, {"gamma", cfg.bh_gamma},
                    {"seed", cfg.seed + 3}};

    // Observed quantity u(T) + theta = e^{-T A_h} theta on the fine grid.
    const ModalBasis fine_basis = ModalBasis::finite_element(fine);
    Vector c = fine_basis.from_nodal(theta_fine);
    for (std::size_t n = 0; n < c.size(); ++n) c[n] *= std::exp(-cfg.T * fine_basis.eigenvalue(n));
    const fem::NodalField final_fine = fine_basis.to_nodal(c, fine);
    write_observations(ctx.file("observations.csv"), observe_fine(cfg, final_fine));
    const ObservationData data = read_observations(ctx.dir / "observations.csv", grid_tag(cfg.coarse_n));

    const ModalBasis basis = ModalBasis::finite_element(coarse);
    const Matrix obs = basis.point_evaluation(data.points);
    const bh::BhOperator op(basis, bh::TimeGrid(cfg.T, cfg.N));
    const bayes::LinearProblem prob = bayes::bh_problem(op, &obs);
    const double alpha = cfg.alpha_for(data.noise_std);
    const bayes::CostConfig cost = bh_cost(cfg, op, prob, alpha, data.values);
    res["alpha"] = alpha;
    res["delta"] = cfg.delta;
    res["noise_std"] = data.noise_std;
    res["prior"] = cfg.prior;
    res["observation_grid"] = data.grid_tag;
    res["reconstruction_grid"] = grid_tag(cfg.coarse_n);

    const fem::NodalField theta_true = fem::restrict_to_coarse(theta_fine, coarse);
    const fem::NodalField final_true = fem::restrict_to_coarse(final_fine, coarse);
    const DenseSymMatrix& m = basis.mass();
    const auto final_of = [&](const Vector& theta) {
        const Vector u = prob.S(theta);
        return add(op.state_final(bh::unflatten(op, concat(u, theta)).u), theta);
    };

    const bayes::MapResult mr = bayes::map_estimate(prob, cost, bayes::Variable::theta, cg_options(cfg));
    const Vector theta_nodal = basis.to_nodal(mr.theta, coarse).values;
    const Vector final_nodal = basis.to_nodal(final_of(mr.theta), coarse).values;
    res["theta_map"] = map_json(mr);
    res["theta_map"]["theta_error"] = relative_error(m, theta_nodal, theta_true.values);
    res["theta_map"]["final_state_error"] = relative_error(m, final_nodal, final_true.values);
    ctx.image("theta_true.pgm", theta_true);
    ctx.image("theta_map.pgm", {coarse, theta_nodal});
    ctx.image("final_true.pgm", final_true);
    ctx.image("final_map.pgm", {coarse, final_nodal});

    // State slices u(t_k) + theta of the MAP.
    {
        const bh::SpaceTimeField u = bh::unflatten(op, concat(prob.S(mr.theta), mr.theta)).u;
        const auto slices = op.state_slices(u);
        for (std::size_t k = 0; k < slices.size(); ++k)
            ctx.image("state_map_t" + std::to_string(k) + ".pgm", basis.to_nodal(add(slices[k], mr.theta), coarse));
    }
    write_fields(ctx, coarse, {"theta_true", "theta_map", "final_true", "final_map"},
                 {&theta_true.values, &theta_nodal, &final_true.values, &final_nodal});

    if (cfg.samples > 0) {
        const bayes::PosteriorModel post = bayes::posterior_from_map(prob, cost, mr, data.noise_std);
        res["posterior_spread"] = bayes::posterior_spread(post);
        const auto draws = bayes::sample_posterior(post, cfg.seed + 2, cfg.samples);
        for (std::size_t k = 0; k < draws.size(); ++k)
            ctx.image("theta_sample_" + std::to_string(k) + ".pgm", basis.to_nodal(draws[k], coarse));
    }

    if (cfg.sweep) {
        io::CsvWriter w(ctx.file("noise_sweep.csv"), {"delta", "alpha", "noise_std", "theta_error", "final_state_error", "cg_iterations"});
        json sweep = json::array();
        for (std::size_t i = 0; i < cfg.noise_levels.size(); ++i) {
            const double level = cfg.noise_levels[i];
            const double sd = level * max_abs_or_one(data.clean);
            const Vector y = fem::add_noise(data.clean, sd, cfg.seed + 100 + i);
            const double a = cfg.alpha_for(sd);
            const auto r = bayes::map_estimate(prob, bh_cost(cfg, op, prob, a, y), bayes::Variable::theta, cg_options(cfg));
            const double te = relative_error(m, basis.to_nodal(r.theta, coarse).values, theta_true.values);
            const double fe = relative_error(m, basis.to_nodal(final_of(r.theta), coarse).values, final_true.values);
            w.row(std::vector<double>{level, a, sd, te, fe, static_cast<double>(r.iterations)});
            sweep.push_back({{"delta", level}, {"alpha", a}, {"theta_error", te}, {"final_state_error", fe}, {"cg_iterations", r.iterations}});
        }
        res["noise_sweep"] = sweep;
    }
}

ModalBasis link_basis(const ExperimentConfig& cfg, std::size_t modes_per_dim) {
    if (cfg.backend == "spectral") return ModalBasis::spectral(modes_per_dim);
    return ModalBasis::finite_element(fem::Mesh(modes_per_dim + 2));
}

json report_json(const priors::LinkCheckReport& r) {
    return {{"samples", r.samples},         {"skipped", r.skipped},         {"min_ratio", r.min_ratio},
            {"max_ratio", r.max_ratio},     {"diverges", r.diverges},       {"lower_stable", r.lower_stable},
            {"probes", r.probe_ratios.size()}};
}

void link_check(Context& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    json& res = ctx.result.results;
    io::CsvWriter w(ctx.file("link_check.csv"), {"setup", "kind", "mode", "ratio"});
    const auto emit = [&](const priors::LinkSetup& s) {
        const auto r = priors::check_link_condition(s.psi, s.g, s.sampler, cfg.link_samples, s.probes, cfg.seed);
        for (std::size_t i = 0; i < r.ratios.size(); ++i) w.row({s.name, "sample", std::to_string(i), io::format_double(r.ratios[i])});
        for (std::size_t i = 0; i < r.probe_ratios.size(); ++i)
            w.row({s.name, "probe", std::to_string(r.probe_modes[i]), io::format_double(r.probe_ratios[i])});
        res[s.name] = report_json(r);
    };
    if (cfg.is_inverse_source()) {
        const is::IsOperator op(link_basis(cfg, cfg.spectral_modes));
        emit(priors::is_trivial_link(op, cfg.link_probes));
        emit(priors::is_inverse_link(op, cfg.link_probes));
    } else {
        const bh::BhOperator op(link_basis(cfg, cfg.bh_link_modes), bh::TimeGrid(cfg.T, cfg.N));
        emit(priors::bh_smoothing_link(op, cfg.link_probes));
        const auto st = priors::heuristic_remainder_stats(op, cfg.link_samples, cfg.seed);
        res["heuristic_remainder_over_G"] = {{"min", st[0]}, {"mean", st[1]}, {"max", st[2]}};
    }
}

void spc(Context& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    json& res = ctx.result.results;
    const is::IsOperator op(ModalBasis::spectral(cfg.spc_modes));
    const std::size_t d = op.size();
    const priors::PriorModel c0 = priors::is_trivial_prior(op);
    const LinearOp g = priors::is_forward(op);
    // Truth in the range of C0: x* = C0 v, v = (0, 1/(n+1)).
    Vector v(2 * d, 0.0);
    for (std::size_t n = 0; n < d; ++n) v[d + n] = 1.0 / static_cast<double>(n + 1);
    const Vector truth = c0.cov(v);
    const double alpha = cfg.alpha_for(cfg.delta);
    bayes::SpcReport r = bayes::spc_components(g, 2 * d, c0, alpha, cfg.delta, truth, cfg.spc_draws, cfg.seed);

    // Spectrum of H = B*B = (G*G)^2 for the trivial prior.
    Vector h;
    for (std::size_t n = 0; n < d; ++n) {
        const double gm = op.basis().eigenvalue(n);
        Matrix t(2, 2);
        t(0, 0) = 1.0;
        t(0, 1) = -1.0;
        t(1, 0) = 1.0 / gm;
        for (double s : sym_eigvals(DenseSymMatrix(t.transpose() * t)).eigenvalues) h.push_back(s * s);
    }
    r.bound = bayes::spc_bound_trivial_prior(h, alpha, cfg.delta, cfg.spc_source_exponent);

    io::CsvWriter w(ctx.file("spc.csv"), {"quantity", "value"});
    const std::vector<std::pair<std::string, double>> rows = {
        {"bias_sq", r.bias_sq},       {"variance", r.variance},   {"variance_exact", r.variance_exact},
        {"variance_se", r.variance_se}, {"spread", r.spread},     {"total", r.total},
        {"total_se", r.total_se},     {"bound", *r.bound},        {"alpha", alpha},
        {"delta", cfg.delta}};
    for (const auto& [k, val] : rows) {
        w.row({k, io::format_double(val)});
        res[k] = val;
    }
    res["draws"] = r.draws;
    res["decomposition_gap"] = r.total - (r.bias_sq + r.variance + r.spread);
}

}  // namespace

RunResult run_spectrum(const ExperimentConfig& cfg) {
    return guarded(cfg, "spectrum", [](Context& ctx) {
        if (ctx.cfg.is_inverse_source()) spectrum_is(ctx);
        else spectrum_bh(ctx);
    });
}

RunResult run_reconstruction(const ExperimentConfig& cfg) {
    return guarded(cfg, "reconstruct", [](Context& ctx) {
        if (ctx.cfg.is_inverse_source()) reconstruct_is(ctx);
        else reconstruct_bh(ctx);
    });
}

RunResult run_link_check(const ExperimentConfig& cfg) { return guarded(cfg, "link-check", link_check); }

RunResult run_spc(const ExperimentConfig& cfg) { return guarded(cfg, "spc", spc); }

}  // namespace aao::experiment
