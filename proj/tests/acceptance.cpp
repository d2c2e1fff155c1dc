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


// Acceptance harness: `acceptance [criterion ...]` prints one PASS/FAIL line
// per criterion and exits nonzero if any fails. Runtime limits are part of
// each criterion.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "modalflow/bohm.hpp"
#include "modalflow/jump.hpp"
#include "modalflow/naimark.hpp"
#include "modalflow/oscillator.hpp"
#include "oracles.hpp"

using namespace modalflow;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
    bool passed = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double limit_seconds;
    std::function<Outcome()> run;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

/// alpha(0) with |alpha(0)| uniform in [0.5, 3] and uniform phase.
std::vector<cplx> random_starts(std::uint64_t seed, int count) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> r(0.5, 3.0), phi(0.0, 2.0 * kPi);
    std::vector<cplx> out;
    for (int k = 0; k < count; ++k) out.push_back(std::polar(r(gen), phi(gen)));
    return out;
}

double deviation(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        num = std::max(num, std::abs(a[k] - b[k]));
        den = std::max(den, std::abs(b[k]));
    }
    return num / den;
}

Outcome trine_statics() {
    const TrineModel t = build_trine_extension();
    const JumpModel m{HermitianOperator::zero(4), t.extension.projectors(), t.extension.lift(trine_state(1))};
    EnsembleOptions o;
    o.t_max = 1.0;
    o.dt = 0.1;
    o.count = 100000;
    o.seed = 2026;
    o.keep_trajectories = 0;
    const EnsembleResult r = simulate_ensemble(m, o);
    const double p[] = {2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 0.0};
    double worst = 0.0;
    long completion = 0;
    for (std::size_t k = 0; k < r.stats.times().size(); ++k) {
        for (int n = 0; n < 3; ++n) {
            const double sigma = std::sqrt(p[n] * (1 - p[n]) / o.count);
            worst = std::max(worst, std::abs(r.stats.frequency(static_cast<int>(k), n) - p[n]) / (4.0 * sigma));
        }
        completion += r.stats.occupation(static_cast<int>(k), 3);
    }
    return {worst <= 1.0 && completion == 0,
            "max |f-p|/(4 sigma) = " + fmt(worst) + ", outcome 4 count = " + std::to_string(completion)};
}

Outcome naimark_identity() {
    const TrineModel t = build_trine_extension();
    const DilationReport r = verify_extension(t.pom, t.extension, 1000, 2026);
    const auto pi = t.extension.projectors().elements();
    CMatrix sum = CMatrix::Zero(4, 4);
    double pro2 = 0.0;
    for (std::size_t a = 0; a < pi.size(); ++a) {
        sum += pi[a];
        for (std::size_t b = 0; b < pi.size(); ++b) {
            const CMatrix expect = a == b ? pi[a] : CMatrix::Zero(4, 4);
            pro2 = std::max(pro2, (pi[a] * pi[b] - expect).cwiseAbs().maxCoeff());
        }
    }
    const double pro1 = (sum - CMatrix::Identity(4, 4)).cwiseAbs().maxCoeff();
    return {r.max_deviation < 1e-10 && pro1 < 1e-12 && pro2 < 1e-12,
            "dilation " + fmt(r.max_deviation) + ", pro1 " + fmt(pro1) + ", pro2 " + fmt(pro2)};
}

Outcome husimi_number() {
    const std::vector<double> times = uniform_times(20.0, 400);
    double worst = 0.0;
    for (int n : {1, 4, 9}) {
        OscillatorScenario s;
        s.initial = FockSpec{n};
        for (const cplx a0 : random_starts(100 + n, 10)) {
            const double wp = (1.0 + n / std::norm(a0)) / 2.0;
            std::vector<cplx> ref;
            for (double t : times) ref.push_back(a0 * std::polar(1.0, -wp * t));
            worst = std::max(worst, deviation(integrate_husimi(s, a0, times).alpha, ref));
        }
    }
    return {worst < 1e-6, "max relative deviation " + fmt(worst) + " over n = 1, 4, 9 (30 starts)"};
}

Outcome husimi_coherent() {
    const std::vector<double> times = uniform_times(20.0, 400);
    double worst = 0.0;
    for (cplx beta : {cplx(1.0, 0.0), cplx(2.0, 1.0)}) {
        OscillatorScenario s;
        s.initial = CoherentSpec{beta};
        for (const cplx a0 : random_starts(200 + static_cast<int>(beta.imag()), 10)) {
            std::vector<cplx> ref;
            for (double t : times) ref.push_back((a0 - beta) * std::polar(1.0, -t / 2.0) + beta * std::polar(1.0, -t));
            worst = std::max(worst, deviation(integrate_husimi(s, a0, times).alpha, ref));
        }
    }
    return {worst < 1e-6, "max relative deviation " + fmt(worst) + " over beta = 1, 2+i (20 starts)"};
}

Outcome bohm_oscillator() {
    const std::vector<double> times = uniform_times(20.0, 400);
    double drift = 0.0, worst = 0.0;
    for (int n : {1, 4, 9}) {
        OscillatorScenario s;
        s.measure = OscillatorMeasure::PositionProjective;
        s.initial = FockSpec{n};
        for (double x0 : sample_initial(s, 10, 300 + n).x)
            for (const cplx a : integrate_bohm(s, x0, times).alpha)
                drift = std::max(drift, std::abs(a - cplx(x0 / std::sqrt(2.0), 0.0)));
    }
    for (cplx beta : {cplx(1.0, 0.0), cplx(2.0, 1.0)}) {
        OscillatorScenario s;
        s.measure = OscillatorMeasure::PositionProjective;
        s.initial = CoherentSpec{beta};
        for (double x0 : sample_initial(s, 10, 400).x) {
            const PhaseTrajectory tr = integrate_bohm(s, x0, times);
            const cplx a0 = tr.alpha.front();
            std::vector<cplx> ref;
            for (double t : times) ref.push_back(beta * std::polar(1.0, -t) + (a0 - beta));
            worst = std::max(worst, deviation(tr.alpha, ref));
        }
    }
    return {drift < 1e-10 && worst < 1e-6,
            "number-state drift " + fmt(drift) + ", coherent relative deviation " + fmt(worst)};
}

Outcome classical_limit() {
    const std::vector<int> ns{1, 4, 16, 64};
    const ClassicalLimitReport h = classical_limit_report(OscillatorMeasure::HusimiPOM, ns, 1.0, 200, 2026);
    const ClassicalLimitReport p = classical_limit_report(OscillatorMeasure::PositionProjective, ns, 1.0, 200, 2026);
    std::ostringstream d;
    d << "Husimi medians";
    for (const auto& r : h.rows) d << " " << fmt(r.median);
    d << "; Position medians";
    for (const auto& r : p.rows) d << " " << fmt(r.median);
    return {h.median_decreasing() && p.min_median() > 0.5, d.str()};
}

cplx plateau(double x) {
    const double a = std::abs(x);
    return a <= 1.0 ? 1.0 : std::exp(-(a - 1.0) * (a - 1.0) / 2.0);
}

Outcome continuum_dichotomy() {
    const std::vector<double> eps{1e-1, 3e-2, 1e-2, 3e-3};
    const double kappa = 0.5;
    double sx = 0, sy = 0, sxx = 0, sxy = 0, cubic_rel = 0, mean_rel = 0;
    for (double e : eps) {
        const Grid1D g = Grid1D::with_spacing(-7.0, 7.0, e);
        const ContinuumDiagnostics q = continuum_diagnostics(
            lattice_state(g, [](double x) { return std::exp(-x * x / 2.0) * std::polar(1.0, x); }),
            LatticeHamiltonian::quadratic(g, 1.0), g.nearest(0.3));
        const double x = std::log(e), y = std::log(q.dispersion_rate);
        sx += x, sy += y, sxx += x * x, sxy += x * y;
        const ContinuumDiagnostics c =
            continuum_diagnostics(lattice_state(g, plateau), LatticeHamiltonian::cubic(g, kappa), g.nearest(0.3));
        cubic_rel = std::max(cubic_rel, std::abs(e * c.dispersion_rate - 12.0 * kappa) / (12.0 * kappa));
        mean_rel = std::max(mean_rel, std::abs(c.mean_rate) / c.gross_rate);
    }
    const double n = static_cast<double>(eps.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return {std::abs(slope - 1.0) <= 0.1 && cubic_rel <= 0.01 && mean_rel <= 1e-12,
            "quadratic slope " + fmt(slope) + ", cubic |eps E[dx^2]/dt - 12 kappa|/(12 kappa) " + fmt(cubic_rel) +
                ", |E[dx]/dt|/gross " + fmt(mean_rel)};
}

Outcome lattice_to_bohm() {
    const double omega = 1.0;
    const cplx beta = 1.0;
    std::vector<double> dev;
    for (double e : {0.1, 0.05, 0.025}) {
        const Grid1D g = Grid1D::with_spacing(-7.0, 7.0, e);
        const auto h = LatticeHamiltonian::quadratic(g, 1.0 / omega, [omega](double x) { return omega * x * x / 2.0; });
        const double c = std::sqrt(2.0) * beta.real();
        const PureState psi =
            lattice_state(g, [c](double x) { return std::pow(kPi, -0.25) * std::exp(-(x - c) * (x - c) / 2.0); });
        const JumpModel m{h.dense(), lattice_measure(g), psi};
        EnsembleOptions o;
        o.t_max = kPi / omega;
        o.dt = 1e-3;
        o.count = 40000;
        o.record_every = 50;
        o.keep_trajectories = 0;
        o.seed = 2026;
        o.initial_index = g.nearest(0.0);
        const EnsembleResult r = simulate_ensemble(m, o);
        const double x0 = g.x(*o.initial_index);
        double worst = 0.0;
        for (std::size_t k = 0; k < r.stats.times().size(); ++k) {
            const double t = r.stats.times()[k];
            const double bohm = x0 + std::sqrt(2.0) * (beta * (std::polar(1.0, -omega * t) - 1.0)).real();
            worst = std::max(worst, std::abs(r.stats.mean_value(static_cast<int>(k), m.measure.values()).real() - bohm));
        }
        dev.push_back(worst);
    }
    const double r1 = dev[0] / dev[1], r2 = dev[1] / dev[2];
    auto halves = [](double r) { return r >= 2.0 * 0.75 && r <= 2.0 * 1.25; };
    return {halves(r1) && halves(r2), "max deviations " + fmt(dev[0]) + ", " + fmt(dev[1]) + ", " + fmt(dev[2]) +
                                          "; ratios " + fmt(r1) + ", " + fmt(r2)};
}

Outcome appendix_identity() {
    std::mt19937_64 gen(2026);
    std::normal_distribution<double> g;
    const int support = 8, d = 24;
    CVector c = CVector::Zero(d);
    for (int m = 0; m < support; ++m) c[m] = {g(gen), g(gen)};
    c.normalize();
    const std::vector<cplx> coeffs(c.data(), c.data() + support);
    double series = 0.0, vacuum = 0.0;
    for (int i = 0; i <= 20; ++i)
        for (int j = 0; j <= 20; ++j) {
            const cplx a(-3.0 + 0.3 * i, -3.0 + 0.3 * j);
            if (std::abs(a) > 3.0) continue;
            series = std::max(series, std::abs(husimi_amplitude(a.real(), a.imag(), c) -
                                               oracle::phase_point_overlap(a.real(), a.imag(), coeffs)));
            const CVector bra = phase_point_bra(a.real(), a.imag(), d, d);
            for (int m = 0; m < 12; ++m)
                vacuum = std::max(vacuum, std::abs(std::conj(bra[m * d]) -
                                                   oracle::coherent_amplitude(a, m) / std::sqrt(kPi)));
        }
    return {series < 1e-8 && vacuum < 1e-8,
            "series vs quadrature " + fmt(series) + ", <m,0|x+,y-> vs coherent/sqrt(pi) " + fmt(vacuum)};
}

Outcome master_consistency() {
    CMatrix sx(2, 2);
    sx << 0.0, 1.0, 1.0, 0.0;
    const JumpModel rabi{HermitianOperator(sx), MeasureSet::computational(2, {0.0, 1.0}), PureState::basis(2, 0)};
    EnsembleOptions o;
    o.t_max = 3.0;
    o.dt = 0.01;
    o.count = 100000;
    o.record_every = 10;
    o.keep_trajectories = 0;
    o.seed = 2026;
    const EnsembleResult r = simulate_ensemble(rabi, o);
    const MasterCheck a = check_against_master(r.stats, integrate_master_equation(rabi, r.stats.times()));

    const int levels = 16;
    const NaimarkExtension ext = build_husimi_extension(levels);
    const JumpModel hus{ext.lift_operator(fock::number(levels)), ext.projectors(),
                        ext.lift(make_state(CoherentSpec{1.0}, levels))};
    EnsembleOptions oh;
    oh.t_max = 1.0;
    oh.dt = 0.01;
    oh.count = 10000;
    oh.keep_trajectories = 0;
    oh.seed = 2026;
    const EnsembleResult rh = simulate_ensemble(hus, oh);
    const MasterCheck b = check_against_master(rh.stats, integrate_master_equation(hus, rh.stats.times()));
    return {a.ok && b.ok, "worst binomial z/4: Rabi " + fmt(a.worst_ratio) + ", Husimi D=16 " +
                              fmt(b.worst_ratio)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {1, "trine statics", 10.0, trine_statics},
        {2, "Naimark dilation identity", 1.0, naimark_identity},
        {3, "Husimi number-state trajectory", 5.0, husimi_number},
        {4, "Husimi coherent-state trajectory", 5.0, husimi_coherent},
        {5, "Bohmian oscillator", 5.0, bohm_oscillator},
        {6, "classical limit", 60.0, classical_limit},
        {7, "continuum-limit dichotomy", 10.0, continuum_dichotomy},
        {8, "lattice to Bohm convergence", 120.0, lattice_to_bohm},
        {9, "phase-point amplitude identity", 10.0, appendix_identity},
        {10, "master-equation consistency", 60.0, master_consistency},
    };
    std::vector<int> chosen;
    for (int i = 1; i < argc; ++i) chosen.push_back(std::atoi(argv[i]));
    bool ok = true;
    for (const auto& c : all) {
        if (!chosen.empty() && std::find(chosen.begin(), chosen.end(), c.id) == chosen.end()) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool pass = o.passed && secs < c.limit_seconds;
        ok = ok && pass;
        std::cout << "criterion " << c.id << " " << (pass ? "PASS" : "FAIL") << " " << c.name << ": " << o.detail
                  << " [" << fmt(secs) << " s, limit " << fmt(c.limit_seconds) << " s]" << std::endl;
    }
    return ok ? 0 : 1;
}
