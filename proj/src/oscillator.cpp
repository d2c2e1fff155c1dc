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

#include "modalflow/oscillator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "modalflow/rng.hpp"

namespace modalflow {

namespace {

constexpr double kPi = std::numbers::pi;

StateSpec as_state_spec(const OscillatorState& s) {
    return std::visit([](const auto& v) -> StateSpec { return v; }, s);
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

std::string to_string(OscillatorMeasure m) {
    switch (m) {
        case OscillatorMeasure::HusimiPOM:
            return "husimi";
        case OscillatorMeasure::PositionProjective:
            return "position";
        case OscillatorMeasure::Classical:
            return "classical";
    }
    return "unknown";
}

OscillatorMeasure parse_oscillator_measure(const std::string& name) {
    if (name == "husimi") return OscillatorMeasure::HusimiPOM;
    if (name == "position") return OscillatorMeasure::PositionProjective;
    if (name == "classical") return OscillatorMeasure::Classical;
    throw MeasureKindError("unknown oscillator measure '" + name + "' (expected husimi, position or classical)");
}

std::string to_string(TrajectorySource s) {
    switch (s) {
        case TrajectorySource::Numeric:
            return "numeric";
        case TrajectorySource::ClosedForm:
            return "closed_form";
        case TrajectorySource::Classical:
            return "classical";
    }
    return "unknown";
}

void OscillatorScenario::validate() const {
    if (!(omega > 0.0) || !std::isfinite(omega)) throw Error("oscillator: omega must be positive and finite");
    if (!(t_max >= 0.0)) throw Error("oscillator: t_max must be non-negative");
    if (truncation < 1) throw DimensionError("oscillator: truncation must be positive");
    (void)initial_state();
}

PureState OscillatorScenario::initial_state() const { return make_state(as_state_spec(initial), truncation); }

std::vector<double> uniform_times(double t_max, int intervals) {
    if (intervals < 1) throw DimensionError("uniform_times: need at least one interval");
    std::vector<double> t(intervals + 1);
    for (int i = 0; i <= intervals; ++i) t[i] = t_max * i / intervals;
    t.back() = t_max;
    return t;
}

CVector evolve_fock(const CVector& fock, double omega, double t) {
    CVector out(fock.size());
    for (Eigen::Index m = 0; m < fock.size(); ++m) out[m] = fock[m] * std::polar(1.0, -omega * t * m);
    return out;
}

// ---------------------------------------------------------------------------
// Series

cplx chi(cplx alpha, const CVector& fock) {
    const cplx a = std::conj(alpha);
    cplx w = 1.0;  // a^m / sqrt(m!)
    cplx num = 0.0, den = fock[0];
    double scale = std::abs(fock[0]);
    for (Eigen::Index m = 1; m < fock.size(); ++m) {
        const double root = std::sqrt(static_cast<double>(m));
        num += root * w * fock[m];
        w *= a / root;
        const cplx term = w * fock[m];
        den += term;
        scale += std::abs(term);
    }
    if (!(std::abs(den) > chi_relative_floor * scale)) {
        std::ostringstream msg;
        msg << "Husimi amplitude vanishes at alpha = " << alpha.real() << (alpha.imag() < 0 ? "" : "+") << alpha.imag()
            << "i";
        throw HusimiZeroError(msg.str(), alpha);
    }
    return num / den;
}

cplx husimi_rhs(cplx alpha, const CVector& fock, double omega) {
    const cplx i(0.0, 1.0);
    return -(i * omega / 2.0) * (alpha + chi(alpha, fock));
}

cplx husimi_amplitude(double x_plus, double y_minus, const CVector& fock) {
    const cplx a(x_plus, -y_minus);
    cplx w = 1.0, sum = fock[0];
    for (Eigen::Index m = 1; m < fock.size(); ++m) {
        w *= a / std::sqrt(static_cast<double>(m));
        sum += w * fock[m];
    }
    return std::exp(-(x_plus * x_plus + y_minus * y_minus) / 2.0) / std::sqrt(kPi) * sum;
}

// ---------------------------------------------------------------------------
// Closed forms

cplx closed_form(const OscillatorScenario& s, cplx alpha0, double t) {
    const double w = s.omega;
    const cplx rot = std::polar(1.0, -w * t);
    switch (s.measure) {
        case OscillatorMeasure::Classical:
            return alpha0 * rot;
        case OscillatorMeasure::HusimiPOM:
            if (const auto* f = std::get_if<FockSpec>(&s.initial)) {
                const double r2 = std::norm(alpha0);
                if (!(r2 > 0.0))
                    throw UnsupportedScenarioError("closed_form: number-state Husimi flow is undefined at alpha = 0");
                const double w_prime = w * (1.0 + f->n / r2) / 2.0;
                return alpha0 * std::polar(1.0, -w_prime * t);
            } else {
                const cplx beta = std::get<CoherentSpec>(s.initial).beta;
                return (alpha0 - beta) * std::polar(1.0, -w * t / 2.0) + beta * rot;
            }
        case OscillatorMeasure::PositionProjective:
            if (s.is_fock()) return alpha0;
            {
                const cplx beta = std::get<CoherentSpec>(s.initial).beta;
                return beta * rot + (alpha0 - beta);
            }
    }
    throw UnsupportedScenarioError("closed_form: unsupported scenario");
}

PhaseTrajectory closed_form_trajectory(const OscillatorScenario& s, cplx alpha0, const std::vector<double>& times) {
    PhaseTrajectory out;
    out.times = times;
    out.source = s.measure == OscillatorMeasure::Classical ? TrajectorySource::Classical : TrajectorySource::ClosedForm;
    out.alpha.reserve(times.size());
    for (double t : times) out.alpha.push_back(closed_form(s, alpha0, t));
    return out;
}

// ---------------------------------------------------------------------------
// Numeric flows

PhaseTrajectory integrate_husimi(const OscillatorScenario& s, cplx alpha0, const std::vector<double>& times,
                                 const OdeOptions& options) {
    const CVector c0 = s.initial_state().amplitudes();
    const bool number = s.is_fock();
    const double w = s.omega;
    auto rhs = [&](double t, cplx a) {
        if (number && std::abs(a) <= husimi_zero_guard) {
            std::ostringstream msg;
            msg << "number-state trajectory reached |alpha| = " << std::abs(a) << " <= " << husimi_zero_guard;
            throw HusimiZeroError(msg.str(), a, t);
        }
        return husimi_rhs(a, evolve_fock(c0, w, t), w);
    };
    PhaseTrajectory out;
    out.times = times;
    try {
        integrate_dopri<cplx>(rhs, times.empty() ? 0.0 : times.front(), alpha0, times, out.alpha, options);
    } catch (const HusimiZeroError& e) {
        const std::size_t reached = out.alpha.size();
        std::vector<double> ts(times.begin(), times.begin() + static_cast<long>(reached));
        throw HusimiZeroError(e.what(), e.alpha(), e.time(), std::move(ts), std::move(out.alpha));
    }
    return out;
}

std::shared_ptr<GuidedField> bohm_field(const OscillatorScenario& s) {
    const int d = s.truncation;
    const HermitianOperator h = s.omega * fock::number(d);
    return std::make_shared<GuidedField>(h, fock::position(d), s.initial_state(),
                                         std::make_shared<FockRepresentation>(d));
}

PhaseTrajectory integrate_bohm(const OscillatorScenario& s, double x0, const std::vector<double>& times,
                               const OdeOptions& options) {
    const auto field = bohm_field(s);
    const BohmTrajectory traj = integrate_trajectory(x0, field->provider(), times, options);
    PhaseTrajectory out;
    out.times = traj.t;
    out.alpha.reserve(traj.x.size());
    for (std::size_t k = 0; k < traj.x.size(); ++k) {
        const double y = field->momentum(traj.x[k], traj.t[k]);
        out.alpha.emplace_back(traj.x[k] / std::sqrt(2.0), y / std::sqrt(2.0));
    }
    return out;
}

double relative_deviation(const PhaseTrajectory& a, const PhaseTrajectory& b) {
    if (a.alpha.size() != b.alpha.size()) throw DimensionError("relative_deviation: trajectories differ in length");
    double dev = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < a.alpha.size(); ++k) {
        dev = std::max(dev, std::abs(a.alpha[k] - b.alpha[k]));
        scale = std::max(scale, std::abs(b.alpha[k]));
    }
    return scale > 0.0 ? dev / scale : dev;
}

double classical_distance(const PhaseTrajectory& t, double omega) {
    if (t.alpha.empty()) return 0.0;
    const cplx a0 = t.alpha.front();
    const double r0 = std::abs(a0);
    if (!(r0 > 0.0)) throw UnsupportedScenarioError("classical_distance: alpha(0) = 0 has no scale");
    double d = 0.0;
    for (std::size_t k = 0; k < t.alpha.size(); ++k)
        d = std::max(d, std::abs(t.alpha[k] - a0 * std::polar(1.0, -omega * (t.times[k] - t.times.front()))));
    return d / r0;
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

InitialSamples sample_husimi(const CVector& c, int count, std::uint64_t seed) {
    // Envelope: isotropic Gaussian at the Husimi mean <a>, slightly wider
    // than the Husimi spread <a a^dagger> - |<a>|^2.
    cplx mean = 0.0;
    double occupation = 0.0;
    for (Eigen::Index m = 0; m < c.size(); ++m) {
        occupation += m * std::norm(c[m]);
        if (m + 1 < c.size()) mean += std::conj(c[m]) * std::sqrt(m + 1.0) * c[m + 1];
    }
    const double var = 1.1 * std::max(0.5, (occupation + 1.0 - std::norm(mean)) / 2.0);
    const double sigma = std::sqrt(var);
    auto envelope = [&](cplx a) { return std::exp(-std::norm(a - mean) / (2.0 * var)) / (2.0 * kPi * var); };
    auto ratio = [&](cplx a) { return husimi_density(a, c) / envelope(a); };

    constexpr int kGrid = 160;
    const double half = 6.0 * sigma + 1.0;
    const double step = 2.0 * half / kGrid;
    double bound = 0.0;
    cplx best = mean;
    for (int i = 0; i <= kGrid; ++i)
        for (int j = 0; j <= kGrid; ++j) {
            const cplx a = mean + cplx(-half + i * step, -half + j * step);
            const double r = ratio(a);
            if (r > bound) bound = r, best = a;
        }
    constexpr int kFine = 40;
    const cplx centre = best;
    for (int i = 0; i <= kFine; ++i)
        for (int j = 0; j <= kFine; ++j) {
            const cplx a = centre + cplx((i - kFine / 2) * step / (kFine / 2), (j - kFine / 2) * step / (kFine / 2));
            bound = std::max(bound, ratio(a));
        }
    bound *= 1.1;
    if (!(1.0 / bound >= 0.01)) {
        std::ostringstream msg;
        msg << "Husimi envelope acceptance " << 1.0 / bound << " is below 1%";
        throw EnvelopeError(msg.str());
    }

    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, sigma);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    InitialSamples out;
    out.alpha.reserve(count);
    long proposals = 0;
    while (static_cast<int>(out.alpha.size()) < count) {
        const cplx a = mean + cplx(normal(gen), normal(gen));
        ++proposals;
        if (uniform(gen) * bound < ratio(a)) out.alpha.push_back(a);
        if (proposals >= 1000 && static_cast<double>(out.alpha.size()) < 0.01 * proposals) {
            std::ostringstream msg;
            msg << "Husimi envelope accepted " << out.alpha.size() << " of " << proposals << " proposals";
            throw EnvelopeError(msg.str());
        }
    }
    out.acceptance = proposals ? static_cast<double>(count) / proposals : 1.0;
    return out;
}

InitialSamples sample_position(const PureState& psi, int count, std::uint64_t seed) {
    const CVector& c = psi.amplitudes();
    const int d = psi.dim();
    int top = 0;
    for (int m = 0; m < d; ++m)
        if (std::norm(c[m]) > 1e-16) top = m;
    double centre = 0.0;
    {
        const HermitianOperator x = fock::position(d);
        centre = x.expectation(psi);
    }
    const double half = std::sqrt(2.0 * top + 1.0) + 8.0;
    constexpr int kPoints = 40001;
    const double lo = centre - half, step = 2.0 * half / (kPoints - 1);
    std::vector<double> xs(kPoints), cdf(kPoints, 0.0);
    double prev = 0.0;
    for (int i = 0; i < kPoints; ++i) {
        xs[i] = lo + i * step;
        const double p = std::norm(cplx(fock::hermite_functions(xs[i], d).cast<cplx>().transpose() * c));
        if (i > 0) cdf[i] = cdf[i - 1] + 0.5 * (p + prev) * step;
        prev = p;
    }
    const double total = cdf.back();
    for (double& v : cdf) v /= total;

    const FockRepresentation rep(d);
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    InitialSamples out;
    out.alpha.reserve(count);
    out.x.reserve(count);
    while (static_cast<int>(out.x.size()) < count) {
        const double u = uniform(gen);
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), 1, kPoints - 1);
        const double span = cdf[k] - cdf[k - 1];
        const double x = xs[k - 1] + (span > 0.0 ? (u - cdf[k - 1]) / span : 0.5) * step;
        try {
            const double y = momentum_at(c, rep, x);
            out.x.push_back(x);
            out.alpha.emplace_back(x / std::sqrt(2.0), y / std::sqrt(2.0));
        } catch (const NodeError&) {
            // A draw on a node of the density has probability zero; redraw.
        }
    }
    return out;
}

}  // namespace

InitialSamples sample_initial(const OscillatorScenario& s, int count, std::uint64_t seed) {
    if (count < 0) throw DimensionError("sample_initial: negative count");
    const PureState psi = s.initial_state();
    if (s.measure == OscillatorMeasure::PositionProjective) return sample_position(psi, count, seed);
    return sample_husimi(psi.amplitudes(), count, seed);
}

// ---------------------------------------------------------------------------
// Enlarged space

EnlargedOperators enlarged_space_operators(int uni_dim, int aux_dim) {
    if (uni_dim < 1 || aux_dim < 1) throw DimensionError("enlarged_space_operators: dimensions must be positive");
    const CMatrix a = kron(fock::annihilation(uni_dim), CMatrix::Identity(aux_dim, aux_dim));
    const CMatrix b = kron(CMatrix::Identity(uni_dim, uni_dim), fock::annihilation(aux_dim));
    const CMatrix ad = a.adjoint(), bd = b.adjoint();
    const cplx i(0.0, 1.0);
    EnlargedOperators ops;
    ops.uni_dim = uni_dim;
    ops.aux_dim = aux_dim;
    ops.x_plus = (a + ad + b + bd) / 2.0;
    ops.x_minus = (a + ad - b - bd) / 2.0;
    ops.y_plus = (-i * a + i * ad - i * b + i * bd) / 2.0;
    ops.y_minus = (-i * a + i * ad + i * b - i * bd) / 2.0;
    ops.number_uni = ad * a;
    return ops;
}

CVector phase_point_bra(double x_plus, double y_minus, int uni_dim, int aux_dim) {
    // |k, l>_ab = a^dagger^k b^dagger^l / sqrt(k! l!) |0> with
    // a^dagger = (c^dagger + d^dagger)/sqrt2, b^dagger = (c^dagger - d^dagger)/sqrt2,
    // expanded binomially into |p, q>_cd. Then <x+|p>_c = psi_p(x+) and
    // <y-|q>_d = (-i)^q psi_q(y-) in the momentum representation of d.
    const int top = uni_dim + aux_dim - 1;
    const RVector hx = fock::hermite_functions(x_plus, top);
    const RVector hy = fock::hermite_functions(y_minus, top);
    std::vector<cplx> mom(top);
    for (int q = 0; q < top; ++q) {
        static const cplx phases[4] = {1.0, cplx(0, -1), -1.0, cplx(0, 1)};
        mom[q] = phases[q % 4] * hy[q];
    }
    auto lf = [](int n) { return std::lgamma(n + 1.0); };
    CVector row = CVector::Zero(static_cast<Eigen::Index>(uni_dim) * aux_dim);
    for (int k = 0; k < uni_dim; ++k)
        for (int l = 0; l < aux_dim; ++l) {
            const int n = k + l;
            cplx sum = 0.0;
            for (int r = 0; r <= k; ++r)
                for (int s = 0; s <= l; ++s) {
                    const int p = r + s, q = n - p;
                    const double log_mag = lf(k) - lf(r) - lf(k - r) + lf(l) - lf(s) - lf(l - s) +
                                           0.5 * (lf(p) + lf(q) - lf(k) - lf(l)) - 0.5 * n * std::log(2.0);
                    const double sign = ((l - s) % 2) ? -1.0 : 1.0;
                    sum += sign * std::exp(log_mag) * hx[p] * mom[q];
                }
            row[static_cast<Eigen::Index>(k) * aux_dim + l] = sum;
        }
    return row;
}

cplx husimi_rhs_enlarged(cplx alpha, const CVector& fock, double omega, const EnlargedOperators& ops) {
    if (fock.size() != ops.uni_dim) throw DimensionError("husimi_rhs_enlarged: dimension mismatch");
    CVector aux = CVector::Zero(ops.aux_dim);
    aux[0] = 1.0;
    const CVector phi = kron(fock, aux);
    const cplx i(0.0, 1.0);
    const CMatrix h = omega * ops.number_uni;
    const CVector h_phi = h * phi;
    const CVector v_plus = -i * (ops.x_plus * h_phi - h * (ops.x_plus * phi));
    const CVector v_minus = -i * (ops.y_minus * h_phi - h * (ops.y_minus * phi));
    const CVector row = phase_point_bra(alpha.real(), alpha.imag(), ops.uni_dim, ops.aux_dim);
    const cplx amp = row.transpose() * phi;
    const double density = std::norm(amp);
    if (!(density > 0.0)) throw HusimiZeroError("husimi_rhs_enlarged: zero amplitude", alpha);
    const cplx bp = row.transpose() * v_plus;
    const cplx bm = row.transpose() * v_minus;
    return {(std::conj(amp) * bp).real() / density, (std::conj(amp) * bm).real() / density};
}

// ---------------------------------------------------------------------------
// Classical limit

bool ClassicalLimitReport::median_decreasing() const {
    for (std::size_t k = 1; k < rows.size(); ++k)
        if (!(rows[k].median < rows[k - 1].median)) return false;
    return true;
}

double ClassicalLimitReport::min_median() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& r : rows) m = std::min(m, r.median);
    return m;
}

json ClassicalLimitReport::to_json() const {
    json rows_json = json::array();
    for (const auto& r : rows)
        rows_json.push_back({{"n_or_beta", r.n},
                             {"median_distance", r.median},
                             {"quartiles", {r.lower_quartile, r.upper_quartile}},
                             {"samples", r.distances.size()}});
    return {{"scenario", to_string(measure) + "_fock"},
            {"omega", omega},
            {"rows", rows_json},
            {"median_decreasing", median_decreasing()},
            {"min_median", min_median()}};
}

ClassicalLimitReport classical_limit_report(OscillatorMeasure measure, const std::vector<int>& ns, double omega,
                                            int samples, std::uint64_t seed) {
    ClassicalLimitReport report;
    report.measure = measure;
    report.omega = omega;
    const std::vector<double> times = uniform_times(2.0 * kPi / omega, 400);
    for (int n : ns) {
        OscillatorScenario s;
        s.omega = omega;
        s.initial = FockSpec{n};
        s.measure = measure;
        s.truncation = n + 16;
        s.t_max = times.back();
        s.samples = samples;
        s.seed = derive_seed(seed, static_cast<std::uint64_t>(n));
        s.validate();
        const InitialSamples init = sample_initial(s, samples, s.seed);
        ClassicalLimitRow row;
        row.n = n;
        row.distances.reserve(samples);
        for (int k = 0; k < samples; ++k) {
            PhaseTrajectory traj;
            if (measure == OscillatorMeasure::PositionProjective)
                traj = integrate_bohm(s, init.x[k], times);
            else if (measure == OscillatorMeasure::HusimiPOM)
                traj = integrate_husimi(s, init.alpha[k], times);
            else
                traj = closed_form_trajectory(s, init.alpha[k], times);
            row.distances.push_back(classical_distance(traj, omega));
            row.initial_abs2.push_back(std::norm(init.alpha[k]));
        }
        row.median = quantile(row.distances, 0.5);
        row.lower_quartile = quantile(row.distances, 0.25);
        row.upper_quartile = quantile(row.distances, 0.75);
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace modalflow
