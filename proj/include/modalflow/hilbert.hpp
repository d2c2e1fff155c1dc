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

// Finite-dimensional Hilbert-space core: states, Hermitian operators,
// measures (projective and POM), tensor products, oscillator state
// constructors and time-independent Schrodinger propagation (hbar = 1).

#pragma once

#include <complex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "modalflow/errors.hpp"

namespace modalflow {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

namespace tol {
inline constexpr double norm = 1e-10;
inline constexpr double herm = 1e-10;
inline constexpr double psd = 1e-9;
inline constexpr double completeness = 1e-9;
inline constexpr double proj = 1e-9;
inline constexpr double trunc = 1e-8;
}  // namespace tol

/// Amplitude vector without the normalization invariant.
class RawVector {
   public:
    RawVector() = default;
    explicit RawVector(CVector amplitudes) : amplitudes_(std::move(amplitudes)) {}

    int dim() const { return static_cast<int>(amplitudes_.size()); }
    const CVector& amplitudes() const { return amplitudes_; }
    double norm() const { return amplitudes_.norm(); }

   private:
    CVector amplitudes_;
};

/// Normalized state vector. The squared norm is checked against tol::norm on
/// construction; use normalized() for vectors that still need rescaling.
class PureState {
   public:
    explicit PureState(CVector amplitudes, std::string label = {});

    static PureState normalized(const CVector& amplitudes, std::string label = {});
    static PureState basis(int dim, int index, std::string label = {});

    int dim() const { return static_cast<int>(amplitudes_.size()); }
    const CVector& amplitudes() const { return amplitudes_; }
    cplx operator[](int i) const { return amplitudes_[i]; }
    const std::string& label() const { return label_; }

    PureState with_global_phase(double phase) const;
    RawVector raw() const { return RawVector(amplitudes_); }

   private:
    CVector amplitudes_;
    std::string label_;
};

/// Dense Hermitian matrix. Hermiticity is checked on construction with the
/// tolerance tol::herm scaled by max(1, largest |entry|).
class HermitianOperator {
   public:
    explicit HermitianOperator(CMatrix entries);

    static HermitianOperator zero(int dim);
    static HermitianOperator identity(int dim);

    int dim() const { return static_cast<int>(entries_.rows()); }
    const CMatrix& matrix() const { return entries_; }
    bool is_zero() const;
    bool is_diagonal() const;

    double expectation(const PureState& state) const;

    friend HermitianOperator operator+(const HermitianOperator& a, const HermitianOperator& b);
    friend HermitianOperator operator-(const HermitianOperator& a, const HermitianOperator& b);
    friend HermitianOperator operator*(double s, const HermitianOperator& a);

   private:
    struct Unchecked {};
    HermitianOperator(CMatrix entries, Unchecked) : entries_(std::move(entries)) {}

    CMatrix entries_;
};

/// Throws HermiticityError unless m is Hermitian within the scaled tolerance.
void require_hermitian(const CMatrix& m, const char* what);

enum class MeasureKind { Projective, POM };

const char* to_string(MeasureKind kind);

/// Orthonormal basis resolution of a projective measure: column k of `unitary`
/// belongs to outcome `column_outcome[k]`.
struct ProjectiveBasis {
    CMatrix unitary;
    std::vector<int> column_outcome;
};

/// A projective measure or POM with outcome values z_n and an optional
/// generator R driving d_t pi_n = -i[R, pi_n].
///
/// Elements are stored densely, or (for projective measures) as an
/// orthonormal basis with an outcome label per column. The basis form keeps
/// lattice-sized measures at O(dim^2) memory and allows empty outcomes
/// (e.g. a zero completion projector).
class MeasureSet {
   public:
    static MeasureSet from_elements(MeasureKind kind, std::vector<CMatrix> elements,
                                    std::vector<cplx> values,
                                    std::optional<HermitianOperator> generator = std::nullopt);
    static MeasureSet from_basis(CMatrix unitary, std::vector<int> column_outcome,
                                 int outcome_count, std::vector<cplx> values,
                                 std::optional<HermitianOperator> generator = std::nullopt);
    /// {|k><k|} with values z_k.
    static MeasureSet computational(int dim, std::vector<cplx> values);

    MeasureKind kind() const { return kind_; }
    int size() const { return outcome_count_; }
    int dim() const { return dim_; }
    const std::vector<cplx>& values() const { return values_; }
    const std::optional<HermitianOperator>& generator() const { return generator_; }

    bool has_basis() const { return basis_.has_value(); }
    /// Throws MeasureKindError if the measure is not projective or its
    /// elements do not resolve into an orthonormal basis.
    const ProjectiveBasis& projective_basis() const;

    CMatrix element(int n) const;
    std::vector<CMatrix> elements() const;

    MeasureSet with_generator(std::optional<HermitianOperator> generator) const;
    /// Projectors conjugated by a unitary: pi_n -> U pi_n U^dagger.
    MeasureSet rotated(const CMatrix& unitary) const;

   private:
    MeasureSet() = default;

    MeasureKind kind_ = MeasureKind::POM;
    int dim_ = 0;
    int outcome_count_ = 0;
    std::vector<CMatrix> elements_;
    std::optional<ProjectiveBasis> basis_;
    bool elements_dense_ = true;
    std::vector<cplx> values_;
    std::optional<HermitianOperator> generator_;
};

struct MeasureReport {
    bool ok = true;
    /// Name of the first violated invariant: "hermiticity", "psd",
    /// "completeness", "idempotence", "orthogonality", "unitarity".
    std::string invariant;
    int index = -1;
    int other = -1;
    double magnitude = 0.0;
    /// Whether the elements are idempotent and mutually orthogonal.
    bool projective = false;
};

/// Checks every MeasureSet invariant; the report names the first violation.
MeasureReport validate_measure(const MeasureSet& m);

/// p_n = <Psi|E_n|Psi>, clamped to [0, 1].
std::vector<double> born_probabilities(const PureState& state, const MeasureSet& m);

/// Eigendecomposition propagator exp(-iHt) for a time-independent H.
class Propagator {
   public:
    explicit Propagator(const HermitianOperator& h);

    int dim() const { return static_cast<int>(eigenvalues_.size()); }
    const RVector& eigenvalues() const { return eigenvalues_; }
    const CMatrix& eigenvectors() const { return eigenvectors_; }
    bool diagonal() const { return diagonal_; }

    /// Coefficients of a vector in the eigenbasis.
    CVector to_eigenbasis(const CVector& v) const;
    /// exp(-iHt) applied to a vector given by its eigenbasis coefficients.
    CVector from_eigenbasis(const CVector& coefficients, double t) const;

    CVector apply(const CVector& v, double t) const;
    PureState evolve(const PureState& state, double t) const;
    CMatrix unitary(double t) const;

   private:
    RVector eigenvalues_;
    CMatrix eigenvectors_;
    bool diagonal_ = false;
};

PureState evolve_schrodinger(const PureState& state, const HermitianOperator& h, double t);

/// Kronecker products with index convention (first (x) second), row-major over
/// (first index, second index).
CVector kron(const CVector& a, const CVector& b);
CMatrix kron(const CMatrix& a, const CMatrix& b);
PureState tensor(const PureState& a, const PureState& b);
HermitianOperator tensor(const HermitianOperator& a, const HermitianOperator& b);

namespace fock {

CMatrix annihilation(int dim);
CMatrix creation(int dim);
HermitianOperator number(int dim);
/// X = (a + a^dagger)/sqrt2.
HermitianOperator position(int dim);
/// Y = (-ia + ia^dagger)/sqrt2.
HermitianOperator momentum(int dim);

/// Oscillator eigenfunctions psi_0..psi_{dim-1} at x.
RVector hermite_functions(double x, int dim);
/// d/dx psi_n(x) for n < dim, from psi'_n = sqrt(n/2) psi_{n-1} - sqrt((n+1)/2) psi_{n+1}.
RVector hermite_function_derivatives(double x, int dim);

/// Untruncated coherent amplitudes e^{-|b|^2/2} b^n / sqrt(n!) for n < dim.
CVector coherent_amplitudes(cplx beta, int dim);

}  // namespace fock

struct FockSpec {
    int n = 0;
};
struct CoherentSpec {
    cplx beta;
};
/// Truncated position eigenstate <n|x> (Hermite functions), renormalized.
struct PositionSampleSpec {
    double x = 0.0;
};
using StateSpec = std::variant<FockSpec, CoherentSpec, PositionSampleSpec>;

struct ConstructedState {
    PureState state;
    /// Squared norm lost to truncation before renormalization.
    double tail_mass = 0.0;
};

/// Builds the state in a Fock space truncated at `dim` levels. Coherent states
/// require |b|^2 + 6|b| < dim and a tail mass below tol::trunc; otherwise
/// TruncationError. Position samples are non-normalizable before truncation,
/// so only the renormalized truncated vector is returned.
ConstructedState construct_state(const StateSpec& spec, int dim);
PureState make_state(const StateSpec& spec, int dim);

}  // namespace modalflow
