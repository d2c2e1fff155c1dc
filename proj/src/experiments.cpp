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

#include "modalflow/experiments.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "modalflow/bohm.hpp"
#include "modalflow/csv.hpp"
#include "modalflow/jump.hpp"
#include "modalflow/oscillator.hpp"
#include "modalflow/rng.hpp"

namespace modalflow {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

/// Runs model construction, reporting any library error as a ConfigError.
template <typename F>
auto configure(const std::string& what, F&& build) {
    try {
        return build();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

JumpScheme parse_scheme(const std::string& s) {
    if (s == "exponential") return JumpScheme::Exponential;
    if (s == "bernoulli") return JumpScheme::Bernoulli;
    throw ConfigError("parameters.scheme: expected 'exponential' or 'bernoulli', got '" + s + "'");
}

EnsembleOptions ensemble_options(Parameters& p, std::uint64_t seed, double t_max, double dt, long count) {
    EnsembleOptions o;
    o.t_max = p.number("t_max", t_max);
    o.dt = p.number("dt", dt);
    o.count = p.integer("count", count);
    o.record_every = static_cast<int>(p.integer("record_every", 1));
    o.keep_trajectories = static_cast<int>(p.integer("keep_trajectories", 4));
    o.scheme = parse_scheme(p.text("scheme", "exponential"));
    o.seed = seed;
    require(o.t_max > 0.0, "parameters.t_max: must be positive");
    require(o.dt > 0.0, "parameters.dt: must be positive");
    require(o.count > 0, "parameters.count: must be positive");
    require(o.record_every > 0, "parameters.record_every: must be positive");
    require(o.keep_trajectories >= 0, "parameters.keep_trajectories: must be non-negative");
    return o;
}

OscillatorState parse_oscillator_state(Parameters& p, const std::string& fallback) {
    const std::string kind = p.text("state", fallback);
    if (kind == "fock") {
        const long n = p.integer("n", 1);
        require(n >= 0, "parameters.n: must be non-negative");
        return FockSpec{static_cast<int>(n)};
    }
    if (kind == "coherent") return CoherentSpec{p.complex("beta", cplx(1.0, 0.0))};
    throw ConfigError("parameters.state: expected 'fock' or 'coherent', got '" + kind + "'");
}

std::string state_label(const OscillatorState& s) {
    if (const auto* f = std::get_if<FockSpec>(&s)) return "fock(" + std::to_string(f->n) + ")";
    const cplx b = std::get<CoherentSpec>(s).beta;
    return "coherent(" + format_number(b.real()) + "," + format_number(b.imag()) + ")";
}

void save(ExperimentOutput& out, const fs::path& dir, const std::string& name, const CsvTable& table) {
    table.save(dir / name);
    out.files.push_back(name);
}

void write_frequencies(ExperimentOutput& out, const fs::path& dir, const EnsembleStats& stats) {
    CsvTable t({"t", "outcome", "frequency", "halfwidth"});
    for (std::size_t k = 0; k < stats.times().size(); ++k)
        for (int n = 0; n < stats.outcome_count(); ++n)
            t.row() << stats.times()[k] << n << stats.frequency(static_cast<int>(k), n)
                    << stats.halfwidth(static_cast<int>(k), n);
    save(out, dir, "frequencies.csv", t);
}

void write_trajectories(ExperimentOutput& out, const fs::path& dir, const std::vector<JumpTrajectory>& trajs) {
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        CsvTable t({"t", "index", "value_re", "value_im"});
        const auto& tr = trajs[i];
        for (std::size_t k = 0; k < tr.times.size(); ++k)
            t.row() << tr.times[k] << tr.indices[k] << tr.values[k].real() << tr.values[k].imag();
        save(out, dir, "trajectory_" + std::to_string(i) + ".csv", t);
    }
}

void write_phase(ExperimentOutput& out, const fs::path& dir, const std::string& name,
                 const std::vector<PhaseTrajectory>& trajs) {
    CsvTable t({"t", "alpha_re", "alpha_im", "source"});
    for (const auto& tr : trajs)
        for (std::size_t k = 0; k < tr.alpha.size(); ++k)
            t.row() << tr.times[k] << tr.alpha[k].real() << tr.alpha[k].imag() << to_string(tr.source);
    save(out, dir, name, t);
}

Check master_check(const std::string& name, const EnsembleStats& stats, const RMatrix& reference) {
    const MasterCheck m = check_against_master(stats, reference);
    std::ostringstream d;
    d << "worst at t=" << format_number(m.worst_time >= 0 ? stats.times()[m.worst_time] : 0.0)
      << " outcome " << m.worst_outcome << " (binomial sigma-equivalent / 4)";
    return check_below(name, m.worst_ratio, 1.0, d.str());
}

json diagnostics_json(const EnsembleDiagnostics& d) {
    return {{"jumps", d.jumps},
            {"forced_jumps", d.forced_jumps},
            {"starved_events", d.starved_events},
            {"refinements", d.refinements},
            {"max_refinement_depth", d.max_depth}};
}

// ---------------------------------------------------------------------------
// Models

struct LatticeCoherent {
    Grid1D grid;
    LatticeHamiltonian hamiltonian;
    JumpModel model;
};

/// Oscillator H = p^2/(2M) + w x^2/2, M = 1/w, on a quadratic lattice with
/// the coherent state |beta> as guiding state.
LatticeCoherent lattice_coherent(double eps, double omega, cplx beta, double half_width) {
    const Grid1D grid = Grid1D::with_spacing(-half_width, half_width, eps);
    auto h = LatticeHamiltonian::quadratic(grid, 1.0 / omega, [omega](double x) { return omega * x * x / 2.0; });
    const double centre = std::sqrt(2.0) * beta.real();
    const double kick = std::sqrt(2.0) * beta.imag();
    const PureState psi = lattice_state(grid, [&](double x) {
        return std::pow(kPi, -0.25) * std::exp(-(x - centre) * (x - centre) / 2.0) * std::polar(1.0, kick * x);
    });
    JumpModel model{h.dense(), lattice_measure(grid), psi};
    return {grid, h, std::move(model)};
}

double lattice_bohm_x(double x0, double omega, cplx beta, double t) {
    return x0 + std::sqrt(2.0) * (beta * (std::polar(1.0, -omega * t) - 1.0)).real();
}

JumpModel model_from_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("parameters.model_file: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("parameters.model_file: " + std::string(e.what()));
    }
    return configure("parameters.model_file", [&] {
        const HermitianOperator h(matrix_from_json(j.at("hamiltonian")));
        std::vector<CMatrix> projectors;
        for (const auto& m : j.at("projectors")) projectors.push_back(matrix_from_json(m));
        std::vector<cplx> values;
        if (j.contains("values"))
            for (const auto& v : j.at("values")) values.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
        else
            for (std::size_t n = 0; n < projectors.size(); ++n) values.emplace_back(static_cast<double>(n), 0.0);
        MeasureSet m = MeasureSet::from_elements(MeasureKind::Projective, std::move(projectors), std::move(values));
        const MeasureReport rep = validate_measure(m);
        if (!rep.ok) throw MeasureKindError("measure fails " + rep.invariant);
        PureState psi = PureState::normalized(vector_from_json(j.at("initial")));
        return JumpModel{h, std::move(m), std::move(psi)};
    });
}

// ---------------------------------------------------------------------------
// Experiments

ExperimentOutput trine_static(const RunConfig& cfg, Parameters& p) {
    const long which = p.integer("state", 1);
    require(which >= 1 && which <= 3, "parameters.state: trine state index must be 1, 2 or 3");
    EnsembleOptions o = ensemble_options(p, cfg.seed, 1.0, 0.1, 100000);
    p.reject_unused();

    const TrineModel trine = build_trine_extension();
    const PureState psi = trine_state(static_cast<int>(which));
    const int dim = trine.extension.enlarged_dim();
    const JumpModel model{HermitianOperator::zero(dim), trine.extension.projectors(), trine.extension.lift(psi)};
    const EnsembleResult r = simulate_ensemble(model, o);

    ExperimentOutput out;
    write_frequencies(out, cfg.output_dir, r.stats);
    write_trajectories(out, cfg.output_dir, r.trajectories);

    std::vector<double> born = born_probabilities(psi, trine.pom);
    born.push_back(0.0);
    const double n = static_cast<double>(r.stats.count());
    for (int k = 0; k < 4; ++k) {
        double worst = 0.0;
        for (std::size_t t = 0; t < r.stats.times().size(); ++t)
            worst = std::max(worst, std::abs(r.stats.frequency(static_cast<int>(t), k) - born[k]));
        const double bound = 4.0 * std::sqrt(born[k] * (1.0 - born[k]) / n);
        out.checks.push_back(check_below("frequency_outcome_" + std::to_string(k), worst, bound,
                                         "Born probability " + format_number(born[k])));
    }
    out.summary["born"] = born;
    out.summary["diagnostics"] = diagnostics_json(r.stats.diagnostics);
    return out;
}

ExperimentOutput jump_generic(const RunConfig& cfg, Parameters& p) {
    const std::string kind = p.text("model", "rabi");
    std::optional<JumpModel> model;
    std::optional<LatticeCoherent> lattice;
    std::optional<double> x0;
    double omega = 1.0;
    cplx beta = 1.0;
    bool master_default = true;
    double t_default = 2.0, dt_default = 0.01;
    long count_default = 20000;

    if (kind == "rabi") {
        const double rabi = p.number("rabi_frequency", 1.0);
        CMatrix h(2, 2);
        h << 0.0, rabi / 2.0, rabi / 2.0, 0.0;
        model = configure("rabi model", [&] {
            return JumpModel{HermitianOperator(h), MeasureSet::computational(2, {1.0, -1.0}), PureState::basis(2, 0)};
        });
        t_default = 2.0 * kPi / std::max(rabi, 1e-12);
    } else if (kind == "husimi_truncated") {
        const long levels = p.integer("levels", 16);
        omega = p.number("omega", 1.0);
        beta = p.complex("beta", cplx(1.0, 0.0));
        require(levels >= 2 && levels <= 80, "parameters.levels: must be in [2, 80]");
        model = configure("husimi_truncated model", [&] {
            const NaimarkExtension ext = build_husimi_extension(static_cast<int>(levels));
            const PureState psi = make_state(CoherentSpec{beta}, static_cast<int>(levels));
            return JumpModel{ext.lift_operator(omega * fock::number(static_cast<int>(levels))), ext.projectors(),
                             ext.lift(psi)};
        });
        t_default = 1.0;
        count_default = 10000;
    } else if (kind == "lattice_coherent") {
        const double eps = p.number("epsilon", 0.05);
        omega = p.number("omega", 1.0);
        beta = p.complex("beta", cplx(1.0, 0.0));
        const double half = p.number("half_width", 7.0);
        if (p.has("x0")) x0 = p.number("x0");
        require(eps > 0.0, "parameters.epsilon: must be positive");
        require(omega > 0.0, "parameters.omega: must be positive");
        lattice = configure("lattice_coherent model", [&] { return lattice_coherent(eps, omega, beta, half); });
        model = lattice->model;
        master_default = false;
        t_default = kPi / omega;
        dt_default = 1e-3;
        count_default = 40000;
    } else if (kind == "file") {
        model = model_from_file(p.text("model_file", ""));
    } else {
        throw ConfigError("parameters.model: expected rabi, husimi_truncated, lattice_coherent or file, got '" + kind +
                          "'");
    }
    EnsembleOptions o = ensemble_options(p, cfg.seed, t_default, dt_default, count_default);
    const bool master = p.flag("master_check", master_default);
    if (lattice && x0) o.initial_index = lattice->grid.nearest(*x0);
    p.reject_unused();

    const EnsembleResult r = simulate_ensemble(*model, o);
    ExperimentOutput out;
    write_frequencies(out, cfg.output_dir, r.stats);
    write_trajectories(out, cfg.output_dir, r.trajectories);

    const std::vector<cplx>& values = model->measure.values();
    CsvTable mean({"t", "value_re", "value_im"});
    for (std::size_t k = 0; k < r.stats.times().size(); ++k) {
        const cplx m = r.stats.mean_value(static_cast<int>(k), values);
        mean.row() << r.stats.times()[k] << m.real() << m.imag();
    }
    save(out, cfg.output_dir, "mean_value.csv", mean);

    if (master) {
        const RMatrix ref = integrate_master_equation(*model, r.stats.times());
        CsvTable t({"t", "outcome", "probability"});
        for (int k = 0; k < ref.rows(); ++k)
            for (int n = 0; n < ref.cols(); ++n) t.row() << r.stats.times()[k] << n << ref(k, n);
        save(out, cfg.output_dir, "master.csv", t);
        out.checks.push_back(master_check("master_equation", r.stats, ref));
    }
    if (lattice && x0) {
        const double start = lattice->grid.x(*o.initial_index);
        double dev = 0.0;
        for (std::size_t k = 0; k < r.stats.times().size(); ++k) {
            const double xm = r.stats.mean_value(static_cast<int>(k), values).real();
            dev = std::max(dev, std::abs(xm - lattice_bohm_x(start, omega, beta, r.stats.times()[k])));
        }
        out.summary["max_deviation_from_bohm"] = dev;
        out.summary["start_site_x"] = start;
    }
    out.summary["diagnostics"] = diagnostics_json(r.stats.diagnostics);
    return out;
}

ExperimentOutput bohm_trajectory(const RunConfig& cfg, Parameters& p) {
    OscillatorScenario s;
    s.measure = OscillatorMeasure::PositionProjective;
    s.omega = p.number("omega", 1.0);
    s.initial = parse_oscillator_state(p, "coherent");
    s.truncation = static_cast<int>(p.integer("levels", 64));
    s.t_max = p.number("t_max", 10.0);
    const double dt = p.number("dt", 0.01);
    const std::vector<double> starts = p.numbers("x0", {-1.0, 0.0, 1.0});
    p.reject_unused();
    configure("oscillator scenario", [&] {
        s.validate();
        return 0;
    });
    require(dt > 0.0, "parameters.dt: must be positive");
    require(!starts.empty(), "parameters.x0: need at least one start");

    const std::vector<double> times = uniform_times(s.t_max, std::max(1, static_cast<int>(std::lround(s.t_max / dt))));
    const auto field = bohm_field(s);
    ExperimentOutput out;
    std::vector<BohmTrajectory> trajs;
    for (std::size_t i = 0; i < starts.size(); ++i) {
        BohmTrajectory tr = integrate_trajectory(starts[i], field->provider(), times);
        CsvTable t({"t", "x"});
        for (std::size_t k = 0; k < tr.t.size(); ++k) t.row() << tr.t[k] << tr.x[k];
        save(out, cfg.output_dir, "bohm_" + std::to_string(i) + ".csv", t);
        trajs.push_back(std::move(tr));
    }
    // A single-valued field keeps trajectories ordered.
    bool ordered = true;
    for (std::size_t i = 0; i < trajs.size(); ++i)
        for (std::size_t j = 0; j < trajs.size(); ++j)
            if (starts[i] < starts[j])
                for (std::size_t k = 0; k < times.size(); ++k)
                    if (!(trajs[i].x[k] < trajs[j].x[k])) ordered = false;
    out.checks.push_back(check_true("trajectories_non_crossing", ordered));
    out.summary["state"] = state_label(s.initial);
    return out;
}

ExperimentOutput continuum_sweep(const RunConfig& cfg, Parameters& p) {
    const std::string kind = p.text("discretization", "cubic");
    require(kind == "cubic" || kind == "quadratic", "parameters.discretization: expected 'cubic' or 'quadratic'");
    const bool cubic = kind == "cubic";
    const double kappa = cubic ? p.number("kappa", 0.5) : 0.0;
    const double mass = cubic ? 1.0 : p.number("mass", 1.0);
    const double momentum = cubic ? 0.0 : p.number("momentum", 1.0);
    const std::vector<double> eps = p.numbers("epsilons", {1e-1, 3e-2, 1e-2, 3e-3});
    const double half = p.number("half_width", 7.0);
    const double probe_x = p.number("probe", 0.3);
    p.reject_unused();
    require(eps.size() >= 2, "parameters.epsilons: need at least two spacings");

    ExperimentOutput out;
    CsvTable t({"epsilon", "mean_rate", "dispersion_rate"});
    std::vector<ContinuumDiagnostics> rows;
    for (double e : eps) {
        require(e > 0.0, "parameters.epsilons: spacings must be positive");
        const auto [h, psi] = configure("lattice", [&] {
            const Grid1D g = Grid1D::with_spacing(-half, half, e);
            if (cubic) {
                // Flat top on |x| <= 1 with Gaussian shoulders: the probe sees
                // a locally constant real wavefunction.
                auto f = [](double x) {
                    const double a = std::abs(x);
                    return cplx(a <= 1.0 ? 1.0 : std::exp(-(a - 1.0) * (a - 1.0) / 2.0));
                };
                return std::pair{LatticeHamiltonian::cubic(g, kappa), lattice_state(g, f)};
            }
            auto f = [momentum](double x) { return std::exp(-x * x / 2.0) * std::polar(1.0, momentum * x); };
            return std::pair{LatticeHamiltonian::quadratic(g, mass), lattice_state(g, f)};
        });
        const ContinuumDiagnostics d = continuum_diagnostics(psi, h, h.grid().nearest(probe_x));
        t.row() << d.epsilon << d.mean_rate << d.dispersion_rate;
        rows.push_back(d);
    }
    save(out, cfg.output_dir, "diagnostics.csv", t);

    if (cubic) {
        double worst_disp = 0.0, worst_mean = 0.0;
        for (const auto& d : rows) {
            worst_disp = std::max(worst_disp, std::abs(d.epsilon * d.dispersion_rate - 12.0 * kappa) / (12.0 * kappa));
            worst_mean = std::max(worst_mean, std::abs(d.mean_rate) / std::max(d.gross_rate, 1e-300));
        }
        out.checks.push_back(check_below("epsilon_dispersion_equals_12_kappa", worst_disp, 0.01,
                                         "relative error of eps * E[dx^2]/dt against 12 kappa"));
        out.checks.push_back(
            check_below("mean_rate_vanishes", worst_mean, 1e-12, "|E[dx]/dt| relative to sum |dx| T"));
    } else {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double n = static_cast<double>(rows.size());
        for (const auto& d : rows) {
            const double x = std::log(d.epsilon), y = std::log(d.dispersion_rate);
            sx += x, sy += y, sxx += x * x, sxy += x * y;
        }
        const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        out.summary["loglog_slope"] = slope;
        out.checks.push_back(check_below("dispersion_slope_is_one", std::abs(slope - 1.0), 0.1,
                                         "slope " + format_number(slope)));
    }
    return out;
}

std::vector<cplx> oscillator_starts(Parameters& p, const OscillatorScenario& s, std::uint64_t seed, bool position,
                                    std::vector<double>* xs) {
    std::vector<cplx> starts;
    if (p.has(position ? "x0" : "alpha0")) {
        if (position) {
            for (double x : p.numbers("x0", {})) xs->push_back(x);
        } else {
            starts.push_back(p.complex("alpha0", 1.0));
        }
        return starts;
    }
    const long count = p.integer("count", 1);
    require(count > 0, "parameters.count: must be positive");
    const InitialSamples init = sample_initial(s, static_cast<int>(count), seed);
    if (position) *xs = init.x;
    return init.alpha;
}

ExperimentOutput husimi_oscillator(const RunConfig& cfg, Parameters& p) {
    OscillatorScenario s;
    s.measure = OscillatorMeasure::HusimiPOM;
    s.omega = p.number("omega", 1.0);
    s.initial = parse_oscillator_state(p, "fock");
    s.truncation = static_cast<int>(p.integer("levels", 64));
    s.t_max = p.number("t_max", 20.0);
    const double dt = p.number("dt", 0.05);
    configure("oscillator scenario", [&] {
        s.validate();
        return 0;
    });
    require(dt > 0.0, "parameters.dt: must be positive");
    const std::vector<cplx> starts =
        configure("initial conditions", [&] { return oscillator_starts(p, s, cfg.seed, false, nullptr); });
    p.reject_unused();

    const std::vector<double> times = uniform_times(s.t_max, std::max(1, static_cast<int>(std::lround(s.t_max / dt))));
    ExperimentOutput out;
    double worst = 0.0;
    for (std::size_t i = 0; i < starts.size(); ++i) {
        const PhaseTrajectory num = integrate_husimi(s, starts[i], times);
        const PhaseTrajectory ref = closed_form_trajectory(s, starts[i], times);
        worst = std::max(worst, relative_deviation(num, ref));
        write_phase(out, cfg.output_dir, "husimi_" + std::to_string(i) + ".csv", {num, ref});
    }
    out.checks.push_back(check_below("closed_form_residual", worst, ode_match_tol,
                                     "max relative deviation from the closed form"));
    out.summary["state"] = state_label(s.initial);
    out.summary["closed_form_residual"] = worst;
    return out;
}

ExperimentOutput bohm_oscillator(const RunConfig& cfg, Parameters& p) {
    OscillatorScenario s;
    s.measure = OscillatorMeasure::PositionProjective;
    s.omega = p.number("omega", 1.0);
    s.initial = parse_oscillator_state(p, "coherent");
    s.truncation = static_cast<int>(p.integer("levels", 64));
    s.t_max = p.number("t_max", 20.0);
    const double dt = p.number("dt", 0.05);
    configure("oscillator scenario", [&] {
        s.validate();
        return 0;
    });
    require(dt > 0.0, "parameters.dt: must be positive");
    std::vector<double> xs;
    configure("initial conditions", [&] { return oscillator_starts(p, s, cfg.seed, true, &xs); });
    p.reject_unused();
    require(!xs.empty(), "parameters.x0: need at least one start");

    const std::vector<double> times = uniform_times(s.t_max, std::max(1, static_cast<int>(std::lround(s.t_max / dt))));
    ExperimentOutput out;
    double worst = 0.0, drift = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const PhaseTrajectory num = integrate_bohm(s, xs[i], times);
        const PhaseTrajectory ref = closed_form_trajectory(s, num.alpha.front(), times);
        worst = std::max(worst, relative_deviation(num, ref));
        for (const cplx a : num.alpha) drift = std::max(drift, std::abs(a - num.alpha.front()));
        write_phase(out, cfg.output_dir, "bohm_" + std::to_string(i) + ".csv", {num, ref});
    }
    if (s.is_fock())
        out.checks.push_back(check_below("number_state_drift", drift, 1e-10, "max |alpha(t) - alpha(0)|"));
    else
        out.checks.push_back(check_below("closed_form_residual", worst, ode_match_tol,
                                         "max relative deviation from the closed form"));
    out.summary["state"] = state_label(s.initial);
    out.summary["closed_form_residual"] = worst;
    return out;
}

ExperimentOutput classical_limit(const RunConfig& cfg, Parameters& p) {
    const double omega = p.number("omega", 1.0);
    const std::vector<long> ns = p.integers("ns", {1, 4, 16, 64});
    const long samples = p.integer("samples", 200);
    p.reject_unused();
    require(omega > 0.0, "parameters.omega: must be positive");
    require(samples > 0, "parameters.samples: must be positive");
    std::vector<int> levels;
    for (long n : ns) {
        require(n >= 1 && n <= 200, "parameters.ns: entries must be in [1, 200]");
        levels.push_back(static_cast<int>(n));
    }
    const ClassicalLimitReport husimi = classical_limit_report(OscillatorMeasure::HusimiPOM, levels, omega,
                                                               static_cast<int>(samples), derive_seed(cfg.seed, 1));
    const ClassicalLimitReport position = classical_limit_report(
        OscillatorMeasure::PositionProjective, levels, omega, static_cast<int>(samples), derive_seed(cfg.seed, 2));

    ExperimentOutput out;
    json report = {{"husimi", husimi.to_json()}, {"position", position.to_json()}};
    write_file_atomic(cfg.output_dir / "classical_limit.json", report.dump(2) + "\n");
    out.files.push_back("classical_limit.json");
    CsvTable t({"measure", "n", "sample", "alpha0_abs2", "distance"});
    for (const auto* rep : {&husimi, &position})
        for (const auto& row : rep->rows)
            for (std::size_t k = 0; k < row.distances.size(); ++k)
                t.row() << to_string(rep->measure) << row.n << static_cast<long>(k) << row.initial_abs2[k]
                        << row.distances[k];
    save(out, cfg.output_dir, "classical_limit_samples.csv", t);

    out.checks.push_back(check_true("husimi_median_decreasing", husimi.median_decreasing()));
    out.checks.push_back(check_true("position_median_above_half", position.min_median() > 0.5,
                                    "min median " + format_number(position.min_median())));
    out.summary = report;
    return out;
}

ExperimentOutput verify_experiment(const RunConfig& cfg, Parameters& p) {
    VerifyOptions o;
    o.seed = cfg.seed;
    const std::string fixture = p.text("trine_fixture", "");
    if (!fixture.empty()) o.trine_fixture = fixture;
    p.reject_unused();
    const auto suites = verify_all(o);
    ExperimentOutput out;
    write_file_atomic(cfg.output_dir / "verify_report.txt", format_verify_report(suites));
    out.files.push_back("verify_report.txt");
    for (const auto& s : suites)
        for (Check c : s.checks) {
            c.name = s.suite + "." + c.name;
            out.checks.push_back(std::move(c));
        }
    return out;
}

// ---------------------------------------------------------------------------
// Verification suites

SuiteResult hilbert_suite(std::uint64_t seed) {
    SuiteResult s{"hilbert", {}};
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal;
    const int d = 6;
    CMatrix a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = {normal(gen), normal(gen)};
    const HermitianOperator h(CMatrix((a + a.adjoint()) / 2.0));
    const Propagator prop(h);
    const CMatrix u = prop.unitary(0.7);
    s.checks.push_back(check_below("propagator_unitary", (u.adjoint() * u - CMatrix::Identity(d, d)).norm(), 1e-10));
    CVector v(d);
    for (int i = 0; i < d; ++i) v[i] = {normal(gen), normal(gen)};
    const PureState psi = PureState::normalized(v);
    double energy_drift = 0.0;
    for (double t : {0.5, 1.0, 5.0})
        energy_drift = std::max(energy_drift, std::abs(h.expectation(prop.evolve(psi, t)) - h.expectation(psi)));
    s.checks.push_back(check_below("energy_conserved", energy_drift, 1e-10));
    const auto p = born_probabilities(psi, MeasureSet::computational(d, std::vector<cplx>(d, 0.0)));
    double total = 0.0;
    for (double x : p) total += x;
    s.checks.push_back(check_below("born_sum", std::abs(total - 1.0), 1e-10));
    const ConstructedState coh = construct_state(CoherentSpec{cplx(2.0, 1.0)}, 64);
    s.checks.push_back(check_below("coherent_tail_mass", coh.tail_mass, tol::trunc));
    const CMatrix an = fock::annihilation(12);
    const CMatrix comm = an * an.adjoint() - an.adjoint() * an;
    s.checks.push_back(check_below("ccr_interior",
                                   (comm.topLeftCorner(11, 11) - CMatrix::Identity(11, 11)).cwiseAbs().maxCoeff(),
                                   1e-12));
    return s;
}

SuiteResult jump_suite(std::uint64_t seed) {
    SuiteResult s{"jump", {}};
    CMatrix h(2, 2);
    h << 0.0, 0.5, 0.5, 0.0;
    const JumpModel rabi{HermitianOperator(h), MeasureSet::computational(2, {1.0, -1.0}), PureState::basis(2, 0)};
    EnsembleOptions o;
    o.t_max = 3.0;
    o.dt = 0.01;
    o.count = 4000;
    o.seed = seed;
    o.record_every = 10;
    o.keep_trajectories = 0;
    const EnsembleResult r = simulate_ensemble(rabi, o);
    s.checks.push_back(master_check("rabi_master_equation", r.stats, integrate_master_equation(rabi, r.stats.times())));

    std::vector<PureState> path;
    const double step = 1e-4;
    const Propagator prop(rabi.hamiltonian);
    for (int k = 0; k <= 20; ++k) path.push_back(prop.evolve(rabi.initial, 0.3 + k * step));
    s.checks.push_back(
        check_below("current_matches_dP", master_residual(path, step, rabi.measure, rabi.hamiltonian), 1e-6));

    const GuidingEvolution g(rabi);
    const CurrentMatrix j = g.current(0.4);
    s.checks.push_back(check_below("current_antisymmetric", (j.dense() + j.dense().transpose()).cwiseAbs().maxCoeff(),
                                   1e-14));
    const RateMatrix t = bell_rates(j, g.probabilities(0.4));
    s.checks.push_back(check_true("rates_nonnegative", RMatrix(t.matrix()).minCoeff() >= 0.0));
    return s;
}

SuiteResult naimark_suite(const VerifyOptions& opt) {
    SuiteResult s{"naimark", {}};
    const TrineModel trine = build_trine_extension();
    std::optional<NaimarkExtension> ext;
    if (opt.trine_fixture) {
        try {
            std::ifstream in(*opt.trine_fixture);
            if (!in) throw Error("cannot open " + opt.trine_fixture->string());
            json j;
            in >> j;
            ext = extension_from_json(j);
        } catch (const std::exception& e) {
            s.checks.push_back(check_true("trine_fixture_loads", false, e.what()));
        }
    } else {
        ext = trine.extension;
    }
    if (ext) {
        const DilationReport rep = verify_extension(trine.pom, *ext, 200, opt.seed);
        s.checks.push_back(check_true("trine_projectors_valid", rep.projectors.ok,
                                      rep.projectors.ok ? "" : "fails " + rep.projectors.invariant));
        s.checks.push_back(check_below("trine_pro1", rep.pro1_residual, 1e-12));
        s.checks.push_back(check_below("trine_pro2", rep.pro2_residual, 1e-12));
        s.checks.push_back(check_below("trine_dilation", rep.max_deviation, 1e-10));
        if (rep.projectors.ok) {
            const int dim = ext->enlarged_dim();
            const JumpModel m{HermitianOperator::zero(dim), ext->projectors(), ext->lift(trine_state(1))};
            EnsembleOptions o;
            o.t_max = 0.5;
            o.dt = 0.1;
            o.count = 20000;
            o.seed = opt.seed;
            o.keep_trajectories = 0;
            const EnsembleResult r = simulate_ensemble(m, o);
            std::vector<double> born = born_probabilities(trine_state(1), trine.pom);
            born.push_back(0.0);
            double worst = 0.0;
            for (int k = 0; k < 4; ++k) {
                const double bound = 4.0 * std::sqrt(born[k] * (1.0 - born[k]) / o.count) + 1.0 / o.count;
                worst = std::max(worst, std::abs(r.stats.frequency(0, k) - born[k]) / bound);
            }
            s.checks.push_back(check_below("trine_frequencies", worst, 1.0, "|f - p| / (4 sigma + 1/count)"));
        }
    }
    const NaimarkExtension hus = build_husimi_extension(6);
    const DilationReport hr = verify_extension(induced_pom(hus), hus, 50, opt.seed);
    s.checks.push_back(check_true("husimi_extension_valid", hr.ok, hr.failure));
    return s;
}

SuiteResult bohm_suite() {
    SuiteResult s{"bohm", {}};
    const Grid1D g = Grid1D::with_spacing(-7.0, 7.0, 0.01);
    auto flat = [](double x) {
        const double a = std::abs(x);
        return cplx(a <= 1.0 ? 1.0 : std::exp(-(a - 1.0) * (a - 1.0) / 2.0));
    };
    const auto cubic = LatticeHamiltonian::cubic(g, 0.5);
    const ContinuumDiagnostics d = continuum_diagnostics(lattice_state(g, flat), cubic, g.nearest(0.3));
    s.checks.push_back(check_below("cubic_dispersion", std::abs(d.epsilon * d.dispersion_rate - 6.0) / 6.0, 0.01));
    s.checks.push_back(check_below("cubic_mean_rate", std::abs(d.mean_rate) / d.gross_rate, 1e-12));

    const OscillatorScenario fock{1.0, FockSpec{3}, OscillatorMeasure::PositionProjective, 32, 5.0, 1, 1};
    const auto field = bohm_field(fock);
    double vmax = 0.0;
    for (double x : {-2.1, -0.7, 0.3, 1.9}) vmax = std::max(vmax, std::abs(field->velocity(x, 0.8)));
    s.checks.push_back(check_below("number_state_velocity_zero", vmax, 1e-10));
    return s;
}

SuiteResult oscillator_suite(std::uint64_t seed) {
    SuiteResult s{"oscillator", {}};
    const std::vector<double> times = uniform_times(20.0, 200);
    OscillatorScenario num;
    num.initial = FockSpec{4};
    const cplx a0(0.9, -0.6);
    s.checks.push_back(check_below("husimi_number_closed_form",
                                   relative_deviation(integrate_husimi(num, a0, times),
                                                      closed_form_trajectory(num, a0, times)),
                                   ode_match_tol));
    OscillatorScenario coh;
    coh.initial = CoherentSpec{cplx(2.0, 1.0)};
    s.checks.push_back(check_below("husimi_coherent_closed_form",
                                   relative_deviation(integrate_husimi(coh, a0, times),
                                                      closed_form_trajectory(coh, a0, times)),
                                   ode_match_tol));
    coh.measure = OscillatorMeasure::PositionProjective;
    const PhaseTrajectory b = integrate_bohm(coh, 0.8, times);
    s.checks.push_back(check_below("bohm_coherent_closed_form",
                                   relative_deviation(b, closed_form_trajectory(coh, b.alpha.front(), times)),
                                   ode_match_tol));

    const int d = 16;
    const EnlargedOperators ops = enlarged_space_operators(d, d);
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal;
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
        CVector c = CVector::Zero(d);
        for (int m = 0; m < d / 2; ++m) c[m] = {normal(gen), normal(gen)};
        c.normalize();
        const cplx a(normal(gen), normal(gen));
        const cplx r = husimi_rhs(a, c, 1.0);
        worst = std::max(worst, std::abs(r - husimi_rhs_enlarged(a, c, 1.0, ops)) / std::max(1.0, std::abs(r)));
    }
    s.checks.push_back(check_below("rhs_matches_velocity_operators", worst, 1e-6));

    double id = 0.0;
    for (const cplx a : {cplx(0.3, -1.2), cplx(-2.0, 0.5), cplx(1.5, 1.5)}) {
        const CVector coh_amp = fock::coherent_amplitudes(a, 40) / std::sqrt(kPi);
        for (int m = 0; m < 8; ++m) {
            CVector e = CVector::Zero(40);
            e[m] = 1.0;
            id = std::max(id, std::abs(std::conj(husimi_amplitude(a.real(), a.imag(), e)) - coh_amp[m]));
        }
    }
    s.checks.push_back(check_below("vacuum_overlap_is_coherent_state", id, 1e-12));

    OscillatorScenario vac;
    const InitialSamples smp = sample_initial(vac, 4000, seed);
    double m2 = 0.0;
    for (const cplx a : smp.alpha) m2 += std::norm(a);
    m2 /= static_cast<double>(smp.alpha.size());
    // E|alpha|^2 = 1 and Var |alpha|^2 = 1 for the vacuum Husimi density.
    s.checks.push_back(check_below("vacuum_sampler_moment", std::abs(m2 - 1.0), 4.0 / std::sqrt(4000.0)));
    return s;
}

json manifest_json(const RunConfig* cfg, const json& resolved, const ExperimentOutput* out, const std::string& status,
                   const std::string& failure, double wall, const std::vector<std::string>& events) {
    json m;
    m["tool"] = "modalflow";
    m["version"] = MODALFLOW_VERSION;
    if (cfg) {
        json c = cfg->to_json();
        c["parameters"] = resolved;
        m["config"] = c;
    }
    m["status"] = status;
    m["wall_time_seconds"] = wall;
    m["outputs"] = out ? json(out->files) : json::array();
    json checks = json::array();
    if (out)
        for (const auto& c : out->checks) checks.push_back(c.to_json());
    m["checks"] = checks;
    m["all_checks_passed"] = out ? out->passed() : false;
    if (out) m["summary"] = out->summary;
    if (!failure.empty()) m["failure"] = failure;
    m["events"] = events;
    return m;
}

}  // namespace

// ---------------------------------------------------------------------------

json Check::to_json() const {
    json j = {{"name", name}, {"passed", passed}, {"value", value}, {"threshold", threshold}};
    if (!detail.empty()) j["detail"] = detail;
    return j;
}

Check check_below(std::string name, double value, double threshold, std::string detail) {
    return {std::move(name), value <= threshold, value, threshold, std::move(detail)};
}

Check check_true(std::string name, bool ok, std::string detail) {
    return {std::move(name), ok, ok ? 1.0 : 0.0, 1.0, std::move(detail)};
}

bool ExperimentOutput::passed() const {
    for (const auto& c : checks)
        if (!c.passed) return false;
    return true;
}

bool SuiteResult::passed() const {
    for (const auto& c : checks)
        if (!c.passed) return false;
    return true;
}

ExperimentOutput run_experiment(const RunConfig& cfg, Parameters& params) {
    fs::create_directories(cfg.output_dir);
    const std::string& e = cfg.experiment;
    if (e == "trine_static") return trine_static(cfg, params);
    if (e == "jump_generic") return jump_generic(cfg, params);
    if (e == "bohm_trajectory") return bohm_trajectory(cfg, params);
    if (e == "continuum_sweep") return continuum_sweep(cfg, params);
    if (e == "husimi_oscillator") return husimi_oscillator(cfg, params);
    if (e == "bohm_oscillator") return bohm_oscillator(cfg, params);
    if (e == "classical_limit") return classical_limit(cfg, params);
    if (e == "verify_all") return verify_experiment(cfg, params);
    throw ConfigError("experiment: unknown experiment '" + e + "'");
}

int run_command(const fs::path& config_path, const std::vector<std::string>& overrides, std::ostream& out,
                std::ostream& err) {
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
    std::optional<RunConfig> cfg;
    std::optional<Parameters> params;
    std::vector<std::string> events;
    auto write_manifest = [&](const ExperimentOutput* result, const std::string& status, const std::string& failure) {
        const fs::path dir = cfg ? cfg->output_dir : output_dir_hint(config_path, overrides);
        const json m = manifest_json(cfg ? &*cfg : nullptr, params ? params->resolved() : json::object(), result,
                                     status, failure, elapsed(), events);
        try {
            write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
        } catch (const std::exception& e) {
            err << "modalflow: cannot write manifest: " << e.what() << "\n";
        }
    };

    try {
        cfg = load_config(config_path, overrides);
        params.emplace(cfg->parameters);
        const ExperimentOutput result = run_experiment(*cfg, *params);
        events.insert(events.end(), result.events.begin(), result.events.end());
        const bool ok = result.passed();
        write_manifest(&result, ok ? "ok" : "failed", "");
        for (const auto& c : result.checks)
            out << (c.passed ? "[PASS] " : "[FAIL] ") << c.name << " value=" << format_number(c.value)
                << " threshold=" << format_number(c.threshold) << "\n";
        out << cfg->experiment << ": wrote " << result.files.size() << " file(s) to " << cfg->output_dir.string()
            << "\n";
        return ok ? kExitOk : kExitFailedChecks;
    } catch (const ConfigError& e) {
        err << "modalflow: config error: " << e.what() << "\n";
        events.push_back(std::string("config error: ") + e.what());
        write_manifest(nullptr, "config_error", e.what());
        return kExitConfig;
    } catch (const NodeError& e) {
        std::ostringstream s;
        s << "node at x=" << format_number(e.x()) << " t=" << format_number(e.time()) << " after "
          << e.partial_samples().size() << " samples";
        events.push_back(s.str());
        err << "modalflow: numeric error: " << e.what() << "\n";
        write_manifest(nullptr, "numeric_error", e.what());
        return kExitNumeric;
    } catch (const HusimiZeroError& e) {
        std::ostringstream s;
        s << "Husimi zero at alpha=" << format_number(e.alpha().real()) << "," << format_number(e.alpha().imag())
          << " t=" << format_number(e.time()) << " after " << e.partial_samples().size() << " samples";
        events.push_back(s.str());
        err << "modalflow: numeric error: " << e.what() << "\n";
        write_manifest(nullptr, "numeric_error", e.what());
        return kExitNumeric;
    } catch (const Error& e) {
        events.push_back(std::string("numeric error: ") + e.what());
        err << "modalflow: numeric error: " << e.what() << "\n";
        write_manifest(nullptr, "numeric_error", e.what());
        return kExitNumeric;
    } catch (const std::exception& e) {
        events.push_back(std::string("error: ") + e.what());
        err << "modalflow: error: " << e.what() << "\n";
        write_manifest(nullptr, "numeric_error", e.what());
        return kExitNumeric;
    }
}

std::vector<SuiteResult> verify_all(const VerifyOptions& options) {
    std::vector<SuiteResult> suites;
    auto guarded = [&](const std::string& name, auto&& run) {
        try {
            suites.push_back(run());
        } catch (const std::exception& e) {
            suites.push_back({name, {check_true("suite_completes", false, e.what())}});
        }
    };
    guarded("hilbert", [&] { return hilbert_suite(derive_seed(options.seed, 1)); });
    guarded("jump", [&] { return jump_suite(derive_seed(options.seed, 2)); });
    guarded("naimark", [&] {
        VerifyOptions o = options;
        o.seed = derive_seed(options.seed, 3);
        return naimark_suite(o);
    });
    guarded("bohm", [&] { return bohm_suite(); });
    guarded("oscillator", [&] { return oscillator_suite(derive_seed(options.seed, 5)); });
    return suites;
}

std::string format_verify_report(const std::vector<SuiteResult>& suites) {
    std::ostringstream s;
    bool all = true;
    for (const auto& suite : suites) {
        std::size_t passed = 0;
        for (const auto& c : suite.checks) passed += c.passed;
        all = all && suite.passed();
        s << "suite " << suite.suite << ": " << (suite.passed() ? "PASS" : "FAIL") << " (" << passed << "/"
          << suite.checks.size() << ")\n";
        for (const auto& c : suite.checks) {
            s << "  [" << (c.passed ? "PASS" : "FAIL") << "] " << c.name << " value=" << format_number(c.value)
              << " threshold=" << format_number(c.threshold);
            if (!c.detail.empty()) s << " (" << c.detail << ")";
            s << "\n";
        }
    }
    s << "overall: " << (all ? "PASS" : "FAIL") << "\n";
    return s.str();
}

void write_trine_fixture(const fs::path& path) {
    write_file_atomic(path, extension_to_json(build_trine_extension().extension).dump(2) + "\n");
}

}  // namespace modalflow
