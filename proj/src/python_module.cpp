#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "aao/aao_bh.hpp"
#include "aao/aao_is.hpp"
#include "aao/experiment.hpp"
#include "aao/modal.hpp"

namespace py = pybind11;
namespace ex = aao::experiment;

namespace {

// Configs and results cross the boundary as JSON text.
std::string run(const std::string& command, const std::string& config) {
    const ex::ExperimentConfig cfg = ex::ExperimentConfig::from_json(nlohmann::json::parse(config));
    ex::RunResult r;
    if (command == "spectrum") r = ex::run_spectrum(cfg);
    else if (command == "reconstruct") r = ex::run_reconstruction(cfg);
    else if (command == "link-check") r = ex::run_link_check(cfg);
    else if (command == "spc") r = ex::run_spc(cfg);
    else throw std::invalid_argument("unknown command: " + command);
    return nlohmann::json{{"outputs", r.outputs}, {"results", r.results}}.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "all-at-once Bayesian inverse source and backwards heat core";

    py::register_exception<aao::NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.def("default_config", [] { return ex::ExperimentConfig{}.to_json().dump(); });
    m.def("run", &run, py::arg("command"), py::arg("config"), py::call_guard<py::gil_scoped_release>());

    m.def("spectral_eigenvalues", [](std::size_t j) { return aao::ModalBasis::spectral(j).eigenvalues(); }, py::arg("modes_per_dim"));
    m.def(
        "is_eigenvalue_pair",
        [](double mu) {
            const auto p = aao::is::analytic_eigenvalue_pair(mu);
            return std::make_pair(p.upper, p.lower);
        },
        py::arg("mu"));
    m.def(
        "is_discrete_spectrum",
        [](std::size_t n, std::size_t count) {
            std::vector<double> v;
            for (const auto& e : aao::is::discrete_spectrum(aao::fem::Mesh(n), count)) v.push_back(e.value);
            return v;
        },
        py::arg("nodes_per_dim"), py::arg("count"));
    m.def(
        "bh_cubic_roots",
        [](double mu, double T) {
            const auto r = aao::bh::analytic_cubic_roots(aao::bh::BhCubicCoefficients::make(mu, T));
            return py::make_tuple(std::vector<double>(r.roots.begin(), r.roots.end()), r.complex_pair, r.log_smallest);
        },
        py::arg("mu"), py::arg("T"));
    m.def(
        "bh_discrete_spectrum",
        [](std::size_t n, int N, double T, std::size_t count) { return aao::bh::discrete_spectrum_bh(aao::fem::Mesh(n), N, T, count); },
        py::arg("nodes_per_dim"), py::arg("N"), py::arg("T"), py::arg("count"));
}
