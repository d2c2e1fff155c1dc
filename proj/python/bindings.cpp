// Copyright 2026 The modalflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "modalflow/experiments.hpp"
#include "modalflow/jump.hpp"
#include "modalflow/naimark.hpp"
#include "modalflow/oscillator.hpp"

namespace py = pybind11;
using namespace modalflow;

namespace {

// Outcome values default to the outcome index.
JumpModel make_model(const CMatrix& hamiltonian, const std::vector<CMatrix>& projectors, const CVector& initial) {
    std::vector<cplx> values;
    for (std::size_t k = 0; k < projectors.size(); ++k) values.emplace_back(static_cast<double>(k));
    return JumpModel{HermitianOperator(hamiltonian),
                     MeasureSet::from_elements(MeasureKind::Projective, projectors, std::move(values)),
                     PureState(initial)};
}

OscillatorScenario scenario(const std::string& state, int n, cplx beta, double omega, int levels,
                            const std::string& measure) {
    OscillatorScenario s;
    s.omega = omega;
    s.truncation = levels;
    s.measure = parse_oscillator_measure(measure);
    if (state == "fock")
        s.initial = FockSpec{n};
    else if (state == "coherent")
        s.initial = CoherentSpec{beta};
    else
        throw py::value_error("state must be 'fock' or 'coherent'");
    s.validate();
    return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Modal-interpretation jump dynamics, Naimark lifting and oscillator phase-space flows";
    m.attr("__version__") = MODALFLOW_VERSION;

    const auto error = py::register_exception<Error>(m, "Error");
    py::register_exception<ConfigError>(m, "ConfigError", error.ptr());

    m.def(
        "born_probabilities",
        [](const CVector& psi, const std::vector<CMatrix>& elements) {
            const auto measure = MeasureSet::from_elements(MeasureKind::POM, elements,
                                                           std::vector<cplx>(elements.size(), cplx(0.0)));
            return born_probabilities(PureState(psi), measure);
        },
        py::arg("psi"), py::arg("elements"));

    m.def(
        "trine_extension",
        [] {
            const TrineModel t = build_trine_extension();
            return py::make_tuple(t.pom.elements(), t.extension.projectors().elements());
        },
        "(trine POM elements, lifted orthogonal projectors)");

    m.def(
        "simulate_ensemble",
        [](const CMatrix& h, const std::vector<CMatrix>& projectors, const CVector& initial, double t_max, double dt,
           long count, std::uint64_t seed, int record_every) {
            EnsembleOptions o;
            o.t_max = t_max;
            o.dt = dt;
            o.count = count;
            o.seed = seed;
            o.record_every = record_every;
            o.keep_trajectories = 0;
            EnsembleResult r;
            {
                py::gil_scoped_release release;
                r = simulate_ensemble(make_model(h, projectors, initial), o);
            }
            return py::make_tuple(r.stats.times(), Eigen::MatrixXd(r.stats.counts().cast<double>()));
        },
        py::arg("hamiltonian"), py::arg("projectors"), py::arg("initial"), py::arg("t_max"), py::arg("dt"),
        py::arg("count"), py::arg("seed") = 0, py::arg("record_every") = 1,
        "(times, occupation counts [time, outcome]) of a jump ensemble");

    m.def(
        "integrate_master_equation",
        [](const CMatrix& h, const std::vector<CMatrix>& projectors, const CVector& initial,
           const std::vector<double>& times) {
            return integrate_master_equation(make_model(h, projectors, initial), times);
        },
        py::arg("hamiltonian"), py::arg("projectors"), py::arg("initial"), py::arg("times"));

    m.def(
        "oscillator_trajectory",
        [](const std::string& measure, const std::string& state, cplx start, const std::vector<double>& times, int n,
           cplx beta, double omega, int levels, bool closed) {
            const OscillatorScenario s = scenario(state, n, beta, omega, levels, measure);
            const bool bohm = s.measure == OscillatorMeasure::PositionProjective;
            if (closed) {
                const cplx a0 = bohm ? integrate_bohm(s, start.real(), {0.0}).alpha.front() : start;
                return closed_form_trajectory(s, a0, times).alpha;
            }
            if (bohm) return integrate_bohm(s, start.real(), times).alpha;
            return integrate_husimi(s, start, times).alpha;
        },
        py::arg("measure"), py::arg("state"), py::arg("start"), py::arg("times"), py::arg("n") = 0,
        py::arg("beta") = cplx(0.0), py::arg("omega") = 1.0, py::arg("levels") = 64, py::arg("closed_form") = false,
        "alpha(t) on the Husimi flow (start = alpha0) or the Bohm flow (start = x0)");

    m.def("husimi_amplitude", &husimi_amplitude, py::arg("x_plus"), py::arg("y_minus"), py::arg("fock"));

    m.def(
        "run",
        [](const std::string& config, const std::vector<std::string>& overrides) {
            std::ostringstream out, err;
            const int code = run_command(config, overrides, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("config"), py::arg("overrides") = std::vector<std::string>{}, "(exit code, stdout, stderr)");

    m.def(
        "verify",
        [](std::uint64_t seed) {
            VerifyOptions o;
            o.seed = seed;
            return format_verify_report(verify_all(o));
        },
        py::arg("seed") = 2026);
}
