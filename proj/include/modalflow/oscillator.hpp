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

// The harmonic oscillator H = w a^dagger a under the Husimi POM (phase-space
// flow on the enlarged space) and the position measure (Bohmian flow), with
// closed-form solutions and the classical-limit comparison.

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "modalflow/bohm.hpp"
#include "modalflow/hilbert.hpp"
#include "modalflow/ode.hpp"
#include "modalflow/serialization.hpp"

namespace modalflow {

inline constexpr double ode_match_tol = 1e-6;
/// chi throws when |denominator| < chi_relative_floor * sum of |terms|.
inline constexpr double chi_relative_floor = 1e-12;
/// Smallest |alpha| admitted on number-state Husimi trajectories.
inline constexpr double husimi_zero_guard = 1e-8;

enum class OscillatorMeasure { HusimiPOM, PositionProjective, Classical };

std::string to_string(OscillatorMeasure m);
/// Accepts "husimi", "position", "classical". Throws MeasureKindError.
OscillatorMeasure parse_oscillator_measure(const std::string& name);

using OscillatorState = std::variant<FockSpec, CoherentSpec>;

struct OscillatorScenario {
    double omega = 1.0;
    OscillatorState initial = FockSpec{0};
    OscillatorMeasure measure = OscillatorMeasure::HusimiPOM;
    int truncation = 64;
    double t_max = 20.0;
    int samples = 200;
    std::uint64_t seed = 1;

    bool is_fock() const { return std::holds_alternative<FockSpec>(initial); }
    /// Throws on omega <= 0, t_max < 0 or a truncation too small for the state.
    void validate() const;
    /// Fock coefficients of Psi(0); TruncationError as in construct_state.
    PureState initial_state() const;
};

enum class TrajectorySource { Numeric, ClosedForm, Classical };
std::string to_string(TrajectorySource s);

struct PhaseTrajectory {
    std::vector<double> times;
    std::vector<cplx> alpha;
    TrajectorySource source = TrajectorySource::Numeric;
};

/// n + 1 equally spaced times on [0, t_max].
std::vector<double> uniform_times(double t_max, int intervals);

/// Fock coefficients of exp(-i w a^dagger a t) Psi.
CVector evolve_fock(const CVector& fock, double omega, double t);

/// chi(alpha) = sum_m m a*^{m-1} c_m / sqrt(m!) / sum_m a*^m c_m / sqrt(m!),
/// a* = x+ - i y-. Throws HusimiZeroError at a numerical zero of the
/// denominator.
cplx chi(cplx alpha, const CVector& fock);

/// d alpha/dt = -(i w/2)(alpha + chi(alpha)).
cplx husimi_rhs(cplx alpha, const CVector& fock, double omega);

/// <x+, y-|Psi (x) 0> = exp(-|alpha|^2/2)/sqrt(pi) sum_m a*^m c_m / sqrt(m!).
cplx husimi_amplitude(double x_plus, double y_minus, const CVector& fock);
inline double husimi_density(cplx alpha, const CVector& fock) {
    return std::norm(husimi_amplitude(alpha.real(), alpha.imag(), fock));
}

/// Closed-form alpha(t). Throws UnsupportedScenarioError for a Husimi number
/// state started at alpha = 0.
cplx closed_form(const OscillatorScenario& s, cplx alpha0, double t);
PhaseTrajectory closed_form_trajectory(const OscillatorScenario& s, cplx alpha0, const std::vector<double>& times);

/// Numeric Husimi flow. HusimiZeroError carries the partial trajectory.
PhaseTrajectory integrate_husimi(const OscillatorScenario& s, cplx alpha0, const std::vector<double>& times,
                                 const OdeOptions& options = {});

/// Bohmian position field of the scenario's guiding state.
std::shared_ptr<GuidedField> bohm_field(const OscillatorScenario& s);

/// Numeric Bohmian flow from x0, reported as alpha = (x + i y(x, t))/sqrt2.
PhaseTrajectory integrate_bohm(const OscillatorScenario& s, double x0, const std::vector<double>& times,
                               const OdeOptions& options = {});

/// max_t |a(t) - b(t)| / max_t |b(t)| on a common time grid.
double relative_deviation(const PhaseTrajectory& a, const PhaseTrajectory& b);

/// max_t |alpha(t) - alpha(0) e^{-iwt}| / |alpha(0)|.
double classical_distance(const PhaseTrajectory& t, double omega);

struct InitialSamples {
    std::vector<cplx> alpha;
    /// Position draws (PositionProjective only).
    std::vector<double> x;
    /// Accepted fraction of the rejection sampler (1 for inverse CDF).
    double acceptance = 1.0;
};

/// Husimi and Classical: rejection sampling of |<x+,y-|Phi(0)>|^2 against a
/// Gaussian envelope; EnvelopeError below 1% acceptance. Position: inverse
/// CDF of |<x|Psi(0)>|^2 on a fine grid, with alpha = (x + i y(x))/sqrt2.
InitialSamples sample_initial(const OscillatorScenario& s, int count, std::uint64_t seed);

/// Operators on uni (x) aux Fock spaces (row-major over (k, l)):
/// x+- = (a + a^dagger +- (b + b^dagger))/2, y+- = (-ia + ia^dagger +- (-ib + ib^dagger))/2,
/// and N_a (x) 1.
struct EnlargedOperators {
    int uni_dim = 0;
    int aux_dim = 0;
    CMatrix x_plus, x_minus, y_plus, y_minus;
    CMatrix number_uni;
};
EnlargedOperators enlarged_space_operators(int uni_dim, int aux_dim);

/// Row <x+, y-|k, l> built from the c = (a+b)/sqrt2, d = (a-b)/sqrt2 modes.
CVector phase_point_bra(double x_plus, double y_minus, int uni_dim, int aux_dim);

/// d alpha/dt from the velocity operators -i[x+, H], -i[y-, H] applied on
/// the enlarged space. Independent of chi; used to cross-check husimi_rhs.
cplx husimi_rhs_enlarged(cplx alpha, const CVector& fock, double omega, const EnlargedOperators& ops);

struct ClassicalLimitRow {
    int n = 0;
    double median = 0.0;
    double lower_quartile = 0.0;
    double upper_quartile = 0.0;
    std::vector<double> distances;
    /// |alpha(0)|^2 of every sampled initial condition.
    std::vector<double> initial_abs2;
};

struct ClassicalLimitReport {
    OscillatorMeasure measure = OscillatorMeasure::HusimiPOM;
    double omega = 1.0;
    std::vector<ClassicalLimitRow> rows;

    bool median_decreasing() const;
    double min_median() const;
    json to_json() const;
};

/// D(n) for number states |n>, each from `samples` initial conditions drawn
/// from the scenario density and integrated over one period 2 pi / w.
ClassicalLimitReport classical_limit_report(OscillatorMeasure measure, const std::vector<int>& ns, double omega,
                                            int samples, std::uint64_t seed);

}  // namespace modalflow
