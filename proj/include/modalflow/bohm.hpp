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

// Continuum modal dynamics: velocity operators and fields, Bohmian
// trajectories, and lattice discretizations with their continuum
// diagnostics.

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "modalflow/hilbert.hpp"
#include "modalflow/jump.hpp"
#include "modalflow/ode.hpp"

namespace modalflow {

inline constexpr double density_floor = 1e-12;
inline constexpr double ode_tol = 1e-9;

class Grid1D {
   public:
    Grid1D(double x_min, double x_max, int points);
    /// Grid of spacing close to `spacing` covering [x_min, x_max].
    static Grid1D with_spacing(double x_min, double x_max, double spacing);

    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    int points() const { return points_; }
    double spacing() const { return (x_max_ - x_min_) / (points_ - 1); }
    double x(int i) const { return x_min_ + i * spacing(); }
    /// Index of the grid point nearest to x.
    int nearest(double x) const;

   private:
    double x_min_, x_max_;
    int points_;
};

/// v = -i[X, H] = -i(XH - HX).
CMatrix velocity_operator(const HermitianOperator& x, const HermitianOperator& h);

/// Position representation of a finite basis: <x|Psi> = bra(x) . Psi.
class PositionRepresentation {
   public:
    virtual ~PositionRepresentation() = default;
    virtual int dim() const = 0;
    /// Row <x|k> for every basis state k.
    virtual CVector bra(double x) const = 0;
    /// d/dx <x|k>.
    virtual CVector bra_derivative(double x) const = 0;

    cplx amplitude(const CVector& psi, double x) const { return bra(x).transpose() * psi; }
};

/// Oscillator Fock basis, <x|n> = psi_n(x).
class FockRepresentation final : public PositionRepresentation {
   public:
    explicit FockRepresentation(int dim) : dim_(dim) {}
    int dim() const override { return dim_; }
    CVector bra(double x) const override;
    CVector bra_derivative(double x) const override;

   private:
    int dim_;
};

/// Lattice sites |eps n> with <x_n|m> = delta_nm / sqrt(eps); linear
/// interpolation between sites, central differences for the derivative.
class LatticeRepresentation final : public PositionRepresentation {
   public:
    explicit LatticeRepresentation(Grid1D grid) : grid_(grid) {}
    int dim() const override { return grid_.points(); }
    CVector bra(double x) const override;
    CVector bra_derivative(double x) const override;
    const Grid1D& grid() const { return grid_; }

   private:
    Grid1D grid_;
};

struct VelocityField {
    std::vector<double> x;
    std::vector<double> v;
};

/// v(x) = Re[<Psi|x><x|v Psi>] / |<x|Psi>|^2 at one point, given v Psi.
/// Throws NodeError where the density is below density_floor.
double velocity_at(const CVector& psi, const CVector& v_psi, const PositionRepresentation& rep, double x);

VelocityField velocity_field(const PureState& psi, const PositionRepresentation& rep, const CMatrix& v,
                             const std::vector<double>& xs);

/// y(x) = Im[<Psi|x> d_x <x|Psi>] / |<x|Psi>|^2.
double momentum_field(const PureState& psi, const PositionRepresentation& rep, double x);
double momentum_at(const CVector& psi, const PositionRepresentation& rep, double x);

using FieldProvider = std::function<double(double x, double t)>;

struct BohmTrajectory {
    std::vector<double> t;
    std::vector<double> x;
};

/// Adaptive Dormand-Prince integration of dx/dt = v(x, t), sampled at
/// `times`. A NodeError from the field is rethrown carrying the samples
/// reached so far.
BohmTrajectory integrate_trajectory(double x0, const FieldProvider& field, const std::vector<double>& times,
                                    const OdeOptions& options = {});

/// Time-dependent field of a guiding state evolving under a fixed H:
/// v(x, t) from v = -i[X, H] applied to Psi(t) = exp(-iHt) Psi(0).
class GuidedField {
   public:
    GuidedField(const HermitianOperator& h, const HermitianOperator& x_op, const PureState& initial,
                std::shared_ptr<const PositionRepresentation> rep);

    CVector state(double t) const { return prop_.apply(psi0_, t); }
    double velocity(double x, double t) const;
    double momentum(double x, double t) const;
    const CMatrix& velocity_operator() const { return v_; }
    FieldProvider provider() const;

   private:
    Propagator prop_;
    CVector psi0_;
    CMatrix v_;
    // v expressed in the eigenbasis of H, so v Psi(t) needs one phase pass.
    CMatrix v_eig_;
    CVector d0_;
    std::shared_ptr<const PositionRepresentation> rep_;
};

enum class Discretization { Quadratic, Cubic };

/// Lattice Hamiltonians on the site basis |eps n>:
///   Quadratic: -(delta_{n,m+1} + delta_{n,m-1} - 2 delta_nm) / (2 M eps^2) + V(x_n) delta_nm
///   Cubic:     kappa/(2 eps^3) (i delta_{n,m+3} - i delta_{n,m-3} - 3i delta_{n,m+1} + 3i delta_{n,m-1})
///              + V(x_n) delta_nm
class LatticeHamiltonian {
   public:
    static LatticeHamiltonian quadratic(const Grid1D& grid, double mass, const std::function<double(double)>& v = {});
    static LatticeHamiltonian cubic(const Grid1D& grid, double kappa, const std::function<double(double)>& v = {});

    Discretization kind() const { return kind_; }
    const Grid1D& grid() const { return grid_; }
    const SparseC& matrix() const { return h_; }
    int bandwidth() const { return kind_ == Discretization::Quadratic ? 1 : 3; }
    HermitianOperator dense() const { return HermitianOperator(CMatrix(h_)); }
    /// Diagonal position operator x_n.
    HermitianOperator position() const;

   private:
    LatticeHamiltonian(Discretization kind, Grid1D grid, SparseC h) : kind_(kind), grid_(grid), h_(std::move(h)) {}
    Discretization kind_;
    Grid1D grid_;
    SparseC h_;
};

/// Lattice amplitudes sqrt(eps) f(x_n), normalized. Throws TruncationError
/// when either boundary site carries probability >= 1e-10.
PureState lattice_state(const Grid1D& grid, const std::function<cplx(double)>& f);

/// Antisymmetric current J_nm = 2 Im[psi_n^* H_nm psi_m].
CurrentMatrix lattice_current(const PureState& psi, const LatticeHamiltonian& h);

/// {|eps n><eps n|} with values x_n.
MeasureSet lattice_measure(const Grid1D& grid);

struct ContinuumDiagnostics {
    double epsilon = 0.0;
    /// E[dx]/dt = sum_m (x_m - x_n) T_mn.
    double mean_rate = 0.0;
    /// E[dx^2]/dt = sum_m (x_m - x_n)^2 T_mn.
    double dispersion_rate = 0.0;
    /// sum_m |x_m - x_n| T_mn, the scale against which mean_rate cancels.
    double gross_rate = 0.0;
};

/// Exact moments of the Bell rates out of `probe`. Throws StarvedSourceError
/// if current leaves the probe while its probability is below p_floor.
ContinuumDiagnostics continuum_diagnostics(const PureState& psi, const LatticeHamiltonian& h, int probe);

}  // namespace modalflow
