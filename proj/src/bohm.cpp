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

#include "modalflow/bohm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace modalflow {

// ---------------------------------------------------------------------------
// Grid

Grid1D::Grid1D(double x_min, double x_max, int points) : x_min_(x_min), x_max_(x_max), points_(points) {
    if (points_ < 2 || !(x_max_ > x_min_)) throw DimensionError("Grid1D: need x_max > x_min and at least two points");
}

Grid1D Grid1D::with_spacing(double x_min, double x_max, double spacing) {
    if (!(spacing > 0.0)) throw DimensionError("Grid1D: spacing must be positive");
    const int intervals = std::max(1, static_cast<int>(std::lround((x_max - x_min) / spacing)));
    const double half = 0.5 * intervals * spacing;
    const double mid = 0.5 * (x_min + x_max);
    return Grid1D(mid - half, mid + half, intervals + 1);
}

int Grid1D::nearest(double x) const {
    const long i = std::lround((x - x_min_) / spacing());
    return static_cast<int>(std::clamp<long>(i, 0, points_ - 1));
}

// ---------------------------------------------------------------------------
// Velocity operator and fields

CMatrix velocity_operator(const HermitianOperator& x, const HermitianOperator& h) {
    if (x.dim() != h.dim()) throw DimensionError("velocity_operator: dimension mismatch");
    const cplx i(0.0, 1.0);
    return -i * (x.matrix() * h.matrix() - h.matrix() * x.matrix());
}

CVector FockRepresentation::bra(double x) const { return fock::hermite_functions(x, dim_).cast<cplx>(); }

CVector FockRepresentation::bra_derivative(double x) const {
    return fock::hermite_function_derivatives(x, dim_).cast<cplx>();
}

CVector LatticeRepresentation::bra(double x) const {
    const double eps = grid_.spacing();
    const double s = (x - grid_.x_min()) / eps;
    CVector row = CVector::Zero(grid_.points());
    if (s < 0.0 || s > grid_.points() - 1) return row;
    const int i = std::min(static_cast<int>(std::floor(s)), grid_.points() - 2);
    const double w = s - i;
    row[i] = (1.0 - w) / std::sqrt(eps);
    row[i + 1] += w / std::sqrt(eps);
    return row;
}

CVector LatticeRepresentation::bra_derivative(double x) const {
    const double eps = grid_.spacing();
    const double s = (x - grid_.x_min()) / eps;
    const int n = grid_.points();
    CVector row = CVector::Zero(n);
    if (s < 1.0 || s > n - 2) return row;
    const int i = std::min(static_cast<int>(std::floor(s)), n - 3);
    const double w = s - i;
    const double c = 1.0 / (2.0 * eps * std::sqrt(eps));
    // Central differences at sites i and i + 1, interpolated.
    row[i + 1] += (1.0 - w) * c;
    row[i - 1] -= (1.0 - w) * c;
    row[i + 2] += w * c;
    row[i] -= w * c;
    return row;
}

namespace {

[[noreturn]] void throw_node(double x, double density) {
    std::ostringstream msg;
    msg << "density " << density << " below density_floor at x = " << x;
    throw NodeError(msg.str(), x);
}

}  // namespace

double velocity_at(const CVector& psi, const CVector& v_psi, const PositionRepresentation& rep, double x) {
    const CVector row = rep.bra(x);
    const cplx a = row.transpose() * psi;
    const double density = std::norm(a);
    if (!(density >= density_floor)) throw_node(x, density);
    const cplx b = row.transpose() * v_psi;
    return (std::conj(a) * b).real() / density;
}

VelocityField velocity_field(const PureState& psi, const PositionRepresentation& rep, const CMatrix& v,
                             const std::vector<double>& xs) {
    if (psi.dim() != rep.dim() || v.rows() != psi.dim()) throw DimensionError("velocity_field: dimension mismatch");
    const CVector v_psi = v * psi.amplitudes();
    VelocityField field;
    field.x = xs;
    field.v.reserve(xs.size());
    for (double x : xs) field.v.push_back(velocity_at(psi.amplitudes(), v_psi, rep, x));
    return field;
}

double momentum_at(const CVector& psi, const PositionRepresentation& rep, double x) {
    const cplx a = rep.bra(x).transpose() * psi;
    const double density = std::norm(a);
    if (!(density >= density_floor)) throw_node(x, density);
    const cplx da = rep.bra_derivative(x).transpose() * psi;
    return (std::conj(a) * da).imag() / density;
}

double momentum_field(const PureState& psi, const PositionRepresentation& rep, double x) {
    if (psi.dim() != rep.dim()) throw DimensionError("momentum_field: dimension mismatch");
    return momentum_at(psi.amplitudes(), rep, x);
}

// ---------------------------------------------------------------------------
// Trajectories

BohmTrajectory integrate_trajectory(double x0, const FieldProvider& field, const std::vector<double>& times,
                                    const OdeOptions& options) {
    BohmTrajectory out;
    out.t = times;
    std::vector<double> xs;
    xs.reserve(times.size());
    try {
        integrate_dopri<double>([&](double t, double x) { return field(x, t); }, times.empty() ? 0.0 : times.front(),
                                x0, times, xs, options);
    } catch (const NodeError& e) {
        std::vector<double> reached(times.begin(), times.begin() + static_cast<long>(xs.size()));
        std::ostringstream msg;
        msg << "trajectory from x0 = " << x0 << " reached a node: " << e.what();
        throw NodeError(msg.str(), e.x(), xs.size() < times.size() ? times[xs.size()] : times.back(),
                        std::move(reached), std::move(xs));
    }
    out.x = std::move(xs);
    return out;
}

GuidedField::GuidedField(const HermitianOperator& h, const HermitianOperator& x_op, const PureState& initial,
                         std::shared_ptr<const PositionRepresentation> rep)
    : prop_(h), psi0_(initial.amplitudes()), v_(modalflow::velocity_operator(x_op, h)), rep_(std::move(rep)) {
    if (initial.dim() != h.dim() || !rep_ || rep_->dim() != h.dim())
        throw DimensionError("GuidedField: dimension mismatch");
    v_eig_ = prop_.diagonal() ? v_ : CMatrix(v_ * prop_.eigenvectors());
    d0_ = prop_.to_eigenbasis(psi0_);
}

double GuidedField::velocity(double x, double t) const {
    CVector phased(d0_.size());
    for (Eigen::Index k = 0; k < d0_.size(); ++k) phased[k] = d0_[k] * std::polar(1.0, -prop_.eigenvalues()[k] * t);
    const CVector psi = prop_.diagonal() ? phased : CVector(prop_.eigenvectors() * phased);
    const CVector v_psi = v_eig_ * phased;
    return velocity_at(psi, v_psi, *rep_, x);
}

double GuidedField::momentum(double x, double t) const { return momentum_at(state(t), *rep_, x); }

FieldProvider GuidedField::provider() const {
    return [this](double x, double t) { return velocity(x, t); };
}

// ---------------------------------------------------------------------------
// Lattice

LatticeHamiltonian LatticeHamiltonian::quadratic(const Grid1D& grid, double mass, const std::function<double(double)>& v) {
    if (!(mass > 0.0)) throw Error("LatticeHamiltonian: mass must be positive");
    const int n = grid.points();
    const double eps = grid.spacing();
    const double hop = 1.0 / (2.0 * mass * eps * eps);
    std::vector<Eigen::Triplet<cplx>> t;
    t.reserve(3 * n);
    for (int i = 0; i < n; ++i) {
        t.emplace_back(i, i, 2.0 * hop + (v ? v(grid.x(i)) : 0.0));
        if (i + 1 < n) {
            t.emplace_back(i, i + 1, -hop);
            t.emplace_back(i + 1, i, -hop);
        }
    }
    SparseC h(n, n);
    h.setFromTriplets(t.begin(), t.end());
    return LatticeHamiltonian(Discretization::Quadratic, grid, std::move(h));
}

LatticeHamiltonian LatticeHamiltonian::cubic(const Grid1D& grid, double kappa, const std::function<double(double)>& v) {
    const int n = grid.points();
    const double eps = grid.spacing();
    const double c = kappa / (2.0 * eps * eps * eps);
    const cplx i1(0.0, 1.0);
    std::vector<Eigen::Triplet<cplx>> t;
    t.reserve(5 * n);
    for (int r = 0; r < n; ++r) {
        if (v) t.emplace_back(r, r, v(grid.x(r)));
        // <n|H|m> with n = m + 3, m - 3, m + 1, m - 1.
        if (r - 3 >= 0) t.emplace_back(r, r - 3, c * i1);
        if (r + 3 < n) t.emplace_back(r, r + 3, -c * i1);
        if (r - 1 >= 0) t.emplace_back(r, r - 1, -3.0 * c * i1);
        if (r + 1 < n) t.emplace_back(r, r + 1, 3.0 * c * i1);
    }
    SparseC h(n, n);
    h.setFromTriplets(t.begin(), t.end());
    return LatticeHamiltonian(Discretization::Cubic, grid, std::move(h));
}

HermitianOperator LatticeHamiltonian::position() const {
    CMatrix x = CMatrix::Zero(grid_.points(), grid_.points());
    for (int i = 0; i < grid_.points(); ++i) x(i, i) = grid_.x(i);
    return HermitianOperator(std::move(x));
}

PureState lattice_state(const Grid1D& grid, const std::function<cplx(double)>& f) {
    const int n = grid.points();
    CVector psi(n);
    const double root = std::sqrt(grid.spacing());
    for (int i = 0; i < n; ++i) psi[i] = root * f(grid.x(i));
    const double norm2 = psi.squaredNorm();
    if (!(norm2 > 0.0)) throw NormalizationError("lattice_state: zero wavefunction");
    const double edge = std::max(std::norm(psi[0]), std::norm(psi[n - 1])) / norm2;
    if (edge >= 1e-10) {
        std::ostringstream msg;
        msg << "lattice_state: boundary probability " << edge << " is not negligible on [" << grid.x_min() << ", "
            << grid.x_max() << "]";
        throw TruncationError(msg.str());
    }
    return PureState::normalized(psi);
}

CurrentMatrix lattice_current(const PureState& psi, const LatticeHamiltonian& h) {
    const int n = h.grid().points();
    if (psi.dim() != n) throw DimensionError("lattice_current: dimension mismatch");
    std::vector<int> outcome(n);
    for (int i = 0; i < n; ++i) outcome[i] = i;
    return current_from_coefficients(psi.amplitudes(), h.matrix(), outcome, n);
}

MeasureSet lattice_measure(const Grid1D& grid) {
    std::vector<cplx> values(grid.points());
    for (int i = 0; i < grid.points(); ++i) values[i] = grid.x(i);
    return MeasureSet::computational(grid.points(), std::move(values));
}

ContinuumDiagnostics continuum_diagnostics(const PureState& psi, const LatticeHamiltonian& h, int probe) {
    const Grid1D& grid = h.grid();
    const int n = grid.points();
    if (psi.dim() != n) throw DimensionError("continuum_diagnostics: dimension mismatch");
    if (probe < 0 || probe >= n) throw DimensionError("continuum_diagnostics: probe outside the lattice");

    const CVector& c = psi.amplitudes();
    const double p = std::norm(c[probe]);
    ContinuumDiagnostics d;
    d.epsilon = grid.spacing();
    // Column `probe` of H couples the probe to its neighbours m.
    for (SparseC::InnerIterator it(h.matrix(), probe); it; ++it) {
        const int m = static_cast<int>(it.row());
        if (m == probe) continue;
        // J_{m,probe} > 0 is flow out of the probe into m.
        const double j = 2.0 * (std::conj(c[m]) * it.value() * c[probe]).imag();
        if (j <= 0.0) continue;
        if (p < p_floor) {
            std::ostringstream msg;
            msg << "continuum_diagnostics: current leaves probe site " << probe << " with probability " << p;
            throw StarvedSourceError(msg.str(), probe, m);
        }
        const double rate = j / p;
        const double dx = grid.x(m) - grid.x(probe);
        d.mean_rate += dx * rate;
        d.dispersion_rate += dx * dx * rate;
        d.gross_rate += std::abs(dx) * rate;
    }
    return d;
}

}  // namespace modalflow
