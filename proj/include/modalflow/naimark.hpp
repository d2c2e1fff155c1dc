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

// Naimark extensions: projective measures on an enlarged space whose
// statistics on lifted states reproduce a POM.

#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "modalflow/hilbert.hpp"
#include "modalflow/jump.hpp"
#include "modalflow/serialization.hpp"

namespace modalflow {

inline constexpr double dilation_tol = 1e-9;

/// Value carried by the completion projector.
inline cplx completion_value() { return {std::numeric_limits<double>::quiet_NaN(), 0.0}; }

/// Projectors Pi_1..Pi_{N+1} on an enlarged space K with an auxiliary state
/// |phi>. The enlarged basis is related to the product basis of uni (x) aux
/// by `frame` (K x (uni*aux), a partial isometry; identity for plain tensor
/// extensions). Lifting maps Psi to frame (Psi (x) phi).
class NaimarkExtension {
   public:
    NaimarkExtension(int uni_dim, int aux_dim, PureState aux_state, MeasureSet projectors, CMatrix frame = {});

    int uni_dim() const { return uni_dim_; }
    int aux_dim() const { return aux_dim_; }
    int enlarged_dim() const { return projectors_.dim(); }
    /// N, excluding the completion projector.
    int outcome_count() const { return projectors_.size() - 1; }
    const PureState& aux_state() const { return aux_state_; }
    const MeasureSet& projectors() const { return projectors_; }
    const CMatrix& frame() const { return frame_; }
    /// Isometry uni -> K: V = frame (1 (x) |phi>).
    const CMatrix& embedding() const { return embedding_; }

    PureState lift(const PureState& psi) const;
    /// frame (H_uni (x) 1_aux) frame^dagger.
    HermitianOperator lift_operator(const HermitianOperator& h_uni) const;

    NaimarkExtension with_projectors(MeasureSet projectors) const;

   private:
    int uni_dim_;
    int aux_dim_;
    PureState aux_state_;
    MeasureSet projectors_;
    CMatrix frame_;
    CMatrix embedding_;
};

/// |z_n> = (z_n|1> + z_n^*|2>)/sqrt2, z_n = exp(i 2 pi n / 3), n = 1..3.
/// |1> and |2> are basis indices 0 and 1.
PureState trine_state(int n);

struct TrineModel {
    std::vector<PureState> states;
    MeasureSet pom;
    NaimarkExtension extension;
};

/// Trine POM F_n = (2/3)|z_n><z_n| with its four-projector extension on
/// spin (x) aux, |phi> = aux index 0 and |phi'> = aux index 1.
TrineModel build_trine_extension();

/// The trine block with the sign pattern exactly as printed, whose Pi_1 has
/// negative cross terms. Kept as a fixture: it fails completeness.
std::vector<CMatrix> trine_printed_projectors();

/// aux_dim = 1 extension Pi_n = pi_n (x) 1 of a projective measure, with an
/// empty completion projector.
NaimarkExtension trivial_extension(const MeasureSet& projective);

/// Discretized Husimi extension on D levels per mode. The enlarged modes are
/// c = (a + b)/sqrt2 and d = (a - b)/sqrt2, so x+ = X_c and y- = Y_d; the
/// projectors are products of the truncated X_c and Y_d eigenbases with
/// values x_i + i y_j, and |phi> is the vacuum of b. The completion
/// projector is empty. lift_operator is exact for Hamiltonians that are
/// diagonal in the Fock basis.
NaimarkExtension build_husimi_extension(int levels);

/// Effects F_n = V^dagger Pi_n V induced on uni for n <= N.
MeasureSet induced_pom(const NaimarkExtension& ext);

/// Throws DimensionError unless psi.dim() == ext.uni_dim().
PureState lift_guiding_state(const PureState& psi, const NaimarkExtension& ext);

struct DilationReport {
    bool ok = true;
    int trials = 0;
    double max_deviation = 0.0;
    int worst_outcome = -1;
    /// max |sum Pi_n - 1|.
    double pro1_residual = 0.0;
    /// max |Pi_n Pi_m - delta_nm Pi_n|.
    double pro2_residual = 0.0;
    /// Largest P_{N+1} over the lifted trial states.
    double completion_mass = 0.0;
    MeasureReport projectors;
    std::string failure;
};

/// Compares <Psi|F_n|Psi> with <Phi|Pi_n|Phi> over Haar-random states.
/// Failures are reported, not thrown.
DilationReport verify_extension(const MeasureSet& pom, const NaimarkExtension& ext, int trials, std::uint64_t seed,
                                double tolerance = dilation_tol);

/// Current of the lifted dynamics with H_uni (x) 1_aux - R'.
CurrentMatrix lifted_current(const PureState& phi, const NaimarkExtension& ext, const HermitianOperator& h_uni,
                             const std::optional<HermitianOperator>& r_prime = std::nullopt);

/// Fixture JSON: {uni_dim, aux_dim, aux_state, projectors: [matrix...],
/// values: [[re, im]...]} with dense projectors and N values.
json extension_to_json(const NaimarkExtension& ext);
NaimarkExtension extension_from_json(const json& j);

}  // namespace modalflow
