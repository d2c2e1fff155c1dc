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

#include "modalflow/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <type_traits>

namespace modalflow {

namespace {

double max_abs(const CMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

std::string format_cplx(cplx z) {
    std::ostringstream out;
    out << z.real() << (z.imag() < 0 ? "-" : "+") << std::abs(z.imag()) << "i";
    return out.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// PureState

PureState::PureState(CVector amplitudes, std::string label)
    : amplitudes_(std::move(amplitudes)), label_(std::move(label)) {
    if (amplitudes_.size() == 0) throw DimensionError("PureState: empty amplitude vector");
    const double n2 = amplitudes_.squaredNorm();
    if (!(std::abs(n2 - 1.0) <= tol::norm)) {
        std::ostringstream msg;
        msg << "PureState: squared norm " << n2 << " differs from 1 by more than " << tol::norm;
        throw NormalizationError(msg.str());
    }
}

PureState PureState::normalized(const CVector& amplitudes, std::string label) {
    const double n = amplitudes.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw NormalizationError("PureState: cannot normalize a zero vector");
    return PureState(amplitudes / n, std::move(label));
}

PureState PureState::basis(int dim, int index, std::string label) {
    if (dim <= 0 || index < 0 || index >= dim) throw DimensionError("PureState::basis: index out of range");
    CVector v = CVector::Zero(dim);
    v[index] = 1.0;
    return PureState(std::move(v), std::move(label));
}

PureState PureState::with_global_phase(double phase) const {
    return PureState(amplitudes_ * std::polar(1.0, phase), label_);
}

// ---------------------------------------------------------------------------
// HermitianOperator

void require_hermitian(const CMatrix& m, const char* what) {
    if (m.rows() != m.cols()) throw DimensionError(std::string(what) + ": matrix is not square");
    const double scale = std::max(1.0, max_abs(m));
    const double dev = max_abs(m - m.adjoint());
    if (!(dev <= tol::herm * scale)) {
        std::ostringstream msg;
        msg << what << ": deviation from Hermiticity " << dev << " exceeds " << tol::herm * scale;
        throw HermiticityError(msg.str());
    }
}

HermitianOperator::HermitianOperator(CMatrix entries) : entries_(std::move(entries)) {
    require_hermitian(entries_, "HermitianOperator");
}

HermitianOperator HermitianOperator::zero(int dim) { return {CMatrix::Zero(dim, dim), Unchecked{}}; }

HermitianOperator HermitianOperator::identity(int dim) {
    return {CMatrix::Identity(dim, dim), Unchecked{}};
}

bool HermitianOperator::is_zero() const { return entries_.isZero(0.0); }

bool HermitianOperator::is_diagonal() const {
    for (Eigen::Index j = 0; j < entries_.cols(); ++j)
        for (Eigen::Index i = 0; i < entries_.rows(); ++i)
            if (i != j && entries_(i, j) != cplx(0.0)) return false;
    return true;
}

double HermitianOperator::expectation(const PureState& state) const {
    if (state.dim() != dim()) throw DimensionError("expectation: dimension mismatch");
    return state.amplitudes().dot(entries_ * state.amplitudes()).real();
}

HermitianOperator operator+(const HermitianOperator& a, const HermitianOperator& b) {
    if (a.dim() != b.dim()) throw DimensionError("HermitianOperator +: dimension mismatch");
    return {a.entries_ + b.entries_, HermitianOperator::Unchecked{}};
}

HermitianOperator operator-(const HermitianOperator& a, const HermitianOperator& b) {
    if (a.dim() != b.dim()) throw DimensionError("HermitianOperator -: dimension mismatch");
    return {a.entries_ - b.entries_, HermitianOperator::Unchecked{}};
}

HermitianOperator operator*(double s, const HermitianOperator& a) {
    return {s * a.entries_, HermitianOperator::Unchecked{}};
}

// ---------------------------------------------------------------------------
// MeasureSet

const char* to_string(MeasureKind kind) { return kind == MeasureKind::Projective ? "projective" : "pom"; }

namespace {

// Eigenvectors with eigenvalue above 1/2 of each element. Succeeds only when
// they rebuild every element and form an orthonormal basis.
std::optional<ProjectiveBasis> resolve_basis(const std::vector<CMatrix>& elements, int dim) {
    ProjectiveBasis basis;
    basis.unitary.resize(dim, dim);
    int col = 0;
    for (int n = 0; n < static_cast<int>(elements.size()); ++n) {
        const CMatrix herm = 0.5 * (elements[n] + elements[n].adjoint());
        Eigen::SelfAdjointEigenSolver<CMatrix> es(herm);
        if (es.info() != Eigen::Success) return std::nullopt;
        CMatrix rebuilt = CMatrix::Zero(dim, dim);
        for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
            if (es.eigenvalues()[k] > 0.5) {
                if (col >= dim) return std::nullopt;
                basis.unitary.col(col++) = es.eigenvectors().col(k);
                basis.column_outcome.push_back(n);
                rebuilt.noalias() += es.eigenvectors().col(k) * es.eigenvectors().col(k).adjoint();
            }
        }
        if (max_abs(rebuilt - elements[n]) > tol::proj) return std::nullopt;
    }
    if (col != dim) return std::nullopt;
    if (max_abs(basis.unitary.adjoint() * basis.unitary - CMatrix::Identity(dim, dim)) > tol::proj) return std::nullopt;
    return basis;
}

}  // namespace

MeasureSet MeasureSet::from_elements(MeasureKind kind, std::vector<CMatrix> elements,
                                     std::vector<cplx> values,
                                     std::optional<HermitianOperator> generator) {
    if (elements.empty()) throw DimensionError("MeasureSet: no elements");
    const Eigen::Index dim = elements.front().rows();
    for (size_t n = 0; n < elements.size(); ++n) {
        if (elements[n].rows() != dim || elements[n].cols() != dim) {
            std::ostringstream msg;
            msg << "MeasureSet: element " << n << " is " << elements[n].rows() << "x" << elements[n].cols()
                << ", expected " << dim << "x" << dim;
            throw DimensionError(msg.str());
        }
    }
    if (values.size() != elements.size()) throw DimensionError("MeasureSet: values and elements differ in count");
    if (generator && generator->dim() != dim) throw DimensionError("MeasureSet: generator dimension mismatch");

    MeasureSet m;
    m.kind_ = kind;
    m.dim_ = static_cast<int>(dim);
    m.outcome_count_ = static_cast<int>(elements.size());
    m.values_ = std::move(values);
    m.generator_ = std::move(generator);
    if (kind == MeasureKind::Projective) m.basis_ = resolve_basis(elements, m.dim_);
    m.elements_ = std::move(elements);
    m.elements_dense_ = true;
    return m;
}

MeasureSet MeasureSet::from_basis(CMatrix unitary, std::vector<int> column_outcome, int outcome_count,
                                  std::vector<cplx> values, std::optional<HermitianOperator> generator) {
    if (unitary.rows() != unitary.cols() || unitary.rows() == 0)
        throw DimensionError("MeasureSet::from_basis: basis matrix must be square and non-empty");
    if (static_cast<Eigen::Index>(column_outcome.size()) != unitary.cols())
        throw DimensionError("MeasureSet::from_basis: one outcome label per column required");
    for (int o : column_outcome)
        if (o < 0 || o >= outcome_count) throw DimensionError("MeasureSet::from_basis: outcome label out of range");
    if (static_cast<int>(values.size()) != outcome_count)
        throw DimensionError("MeasureSet::from_basis: values and outcomes differ in count");
    if (generator && generator->dim() != unitary.rows())
        throw DimensionError("MeasureSet: generator dimension mismatch");

    MeasureSet m;
    m.kind_ = MeasureKind::Projective;
    m.dim_ = static_cast<int>(unitary.rows());
    m.outcome_count_ = outcome_count;
    m.values_ = std::move(values);
    m.generator_ = std::move(generator);
    m.basis_ = ProjectiveBasis{std::move(unitary), std::move(column_outcome)};
    m.elements_dense_ = false;
    return m;
}

MeasureSet MeasureSet::computational(int dim, std::vector<cplx> values) {
    std::vector<int> labels(dim);
    for (int k = 0; k < dim; ++k) labels[k] = k;
    return from_basis(CMatrix::Identity(dim, dim), std::move(labels), dim, std::move(values));
}

const ProjectiveBasis& MeasureSet::projective_basis() const {
    if (kind_ != MeasureKind::Projective) throw MeasureKindError("measure is a POM, a projective measure is required");
    if (!basis_) throw MeasureKindError("projective measure elements do not resolve into an orthonormal basis");
    return *basis_;
}

CMatrix MeasureSet::element(int n) const {
    if (n < 0 || n >= outcome_count_) throw DimensionError("MeasureSet::element: index out of range");
    if (elements_dense_) return elements_[n];
    CMatrix e = CMatrix::Zero(dim_, dim_);
    for (int k = 0; k < dim_; ++k) {
        if (basis_->column_outcome[k] == n) e.noalias() += basis_->unitary.col(k) * basis_->unitary.col(k).adjoint();
    }
    return e;
}

std::vector<CMatrix> MeasureSet::elements() const {
    if (elements_dense_) return elements_;
    std::vector<CMatrix> out;
    out.reserve(outcome_count_);
    for (int n = 0; n < outcome_count_; ++n) out.push_back(element(n));
    return out;
}

MeasureSet MeasureSet::with_generator(std::optional<HermitianOperator> generator) const {
    if (generator && generator->dim() != dim_) throw DimensionError("MeasureSet: generator dimension mismatch");
    MeasureSet m = *this;
    m.generator_ = std::move(generator);
    return m;
}

MeasureSet MeasureSet::rotated(const CMatrix& u) const {
    if (u.rows() != dim_ || u.cols() != dim_) throw DimensionError("MeasureSet::rotated: dimension mismatch");
    MeasureSet m = *this;
    if (m.elements_dense_) {
        for (auto& e : m.elements_) e = u * e * u.adjoint();
    }
    if (m.basis_) m.basis_->unitary = u * m.basis_->unitary;
    return m;
}

MeasureReport validate_measure(const MeasureSet& m) {
    MeasureReport report;
    auto fail = [&](const char* invariant, int index, int other, double magnitude) {
        report.ok = false;
        report.invariant = invariant;
        report.index = index;
        report.other = other;
        report.magnitude = magnitude;
        return report;
    };

    const int dim = m.dim();
    if (m.has_basis() && m.kind() == MeasureKind::Projective) {
        // Orthonormal columns make every element Hermitian, idempotent,
        // mutually orthogonal and complete.
        const auto& b = m.projective_basis();
        const double dev = max_abs(b.unitary.adjoint() * b.unitary - CMatrix::Identity(dim, dim));
        report.projective = dev <= tol::proj;
        if (!report.projective) return fail("unitarity", -1, -1, dev);
        return report;
    }

    const auto elements = m.elements();
    const int count = static_cast<int>(elements.size());
    for (int n = 0; n < count; ++n) {
        const double herm_dev = max_abs(elements[n] - elements[n].adjoint());
        if (herm_dev > tol::herm * std::max(1.0, max_abs(elements[n]))) return fail("hermiticity", n, -1, herm_dev);
        Eigen::SelfAdjointEigenSolver<CMatrix> es(elements[n], Eigen::EigenvaluesOnly);
        const double lowest = es.eigenvalues().minCoeff();
        if (lowest < -tol::psd) return fail("psd", n, -1, -lowest);
    }

    CMatrix sum = CMatrix::Zero(dim, dim);
    for (const auto& e : elements) sum += e;
    const double completeness = max_abs(sum - CMatrix::Identity(dim, dim));

    bool idempotent = true;
    int first_bad_idem = -1;
    double idem_dev = 0.0;
    for (int n = 0; n < count; ++n) {
        const double dev = max_abs(elements[n] * elements[n] - elements[n]);
        if (dev > tol::proj && idempotent) {
            idempotent = false;
            first_bad_idem = n;
            idem_dev = dev;
        }
    }
    bool orthogonal = true;
    int bad_n = -1, bad_m = -1;
    double orth_dev = 0.0;
    for (int n = 0; n < count && orthogonal; ++n) {
        for (int k = n + 1; k < count; ++k) {
            const double dev = max_abs(elements[n] * elements[k]);
            if (dev > tol::proj) {
                orthogonal = false;
                bad_n = n;
                bad_m = k;
                orth_dev = dev;
                break;
            }
        }
    }
    report.projective = idempotent && orthogonal;

    if (completeness > tol::completeness) return fail("completeness", -1, -1, completeness);
    if (m.kind() == MeasureKind::Projective) {
        if (!idempotent) return fail("idempotence", first_bad_idem, -1, idem_dev);
        if (!orthogonal) return fail("orthogonality", bad_n, bad_m, orth_dev);
    }
    return report;
}

std::vector<double> born_probabilities(const PureState& state, const MeasureSet& m) {
    if (state.dim() != m.dim()) {
        std::ostringstream msg;
        msg << "born_probabilities: state dimension " << state.dim() << " vs measure dimension " << m.dim();
        throw DimensionError(msg.str());
    }
    std::vector<double> p(m.size(), 0.0);
    if (m.has_basis() && m.kind() == MeasureKind::Projective) {
        const auto& b = m.projective_basis();
        const CVector c = b.unitary.adjoint() * state.amplitudes();
        for (int k = 0; k < m.dim(); ++k) p[b.column_outcome[k]] += std::norm(c[k]);
    } else {
        for (int n = 0; n < m.size(); ++n) p[n] = state.amplitudes().dot(m.element(n) * state.amplitudes()).real();
    }
    for (double& v : p) v = std::clamp(v, 0.0, 1.0);
    return p;
}

// ---------------------------------------------------------------------------
// Propagator

Propagator::Propagator(const HermitianOperator& h) {
    const int n = h.dim();
    if (h.is_diagonal()) {
        diagonal_ = true;
        eigenvalues_ = h.matrix().diagonal().real();
        eigenvectors_ = CMatrix::Identity(n, n);
        return;
    }
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h.matrix());
    if (es.info() != Eigen::Success) throw Error("Propagator: eigendecomposition failed");
    eigenvalues_ = es.eigenvalues();
    eigenvectors_ = es.eigenvectors();
}

CVector Propagator::to_eigenbasis(const CVector& v) const {
    if (v.size() != dim()) throw DimensionError("Propagator: dimension mismatch");
    if (diagonal_) return v;
    return eigenvectors_.adjoint() * v;
}

CVector Propagator::from_eigenbasis(const CVector& coefficients, double t) const {
    CVector phased(coefficients.size());
    for (Eigen::Index k = 0; k < coefficients.size(); ++k)
        phased[k] = coefficients[k] * std::polar(1.0, -eigenvalues_[k] * t);
    if (diagonal_) return phased;
    return eigenvectors_ * phased;
}

CVector Propagator::apply(const CVector& v, double t) const { return from_eigenbasis(to_eigenbasis(v), t); }

PureState Propagator::evolve(const PureState& state, double t) const {
    // Renormalize away rounding so the result always satisfies tol::norm.
    return PureState::normalized(apply(state.amplitudes(), t), state.label());
}

CMatrix Propagator::unitary(double t) const {
    CVector phases(dim());
    for (int k = 0; k < dim(); ++k) phases[k] = std::polar(1.0, -eigenvalues_[k] * t);
    return eigenvectors_ * phases.asDiagonal() * eigenvectors_.adjoint();
}

PureState evolve_schrodinger(const PureState& state, const HermitianOperator& h, double t) {
    if (state.dim() != h.dim()) throw DimensionError("evolve_schrodinger: dimension mismatch");
    if (h.is_zero()) return state;
    return Propagator(h).evolve(state, t);
}

// ---------------------------------------------------------------------------
// Tensor products

CVector kron(const CVector& a, const CVector& b) {
    CVector out(a.size() * b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a[i] * b;
    return out;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

PureState tensor(const PureState& a, const PureState& b) {
    std::string label;
    if (!a.label().empty() || !b.label().empty()) label = a.label() + "(x)" + b.label();
    return PureState::normalized(kron(a.amplitudes(), b.amplitudes()), std::move(label));
}

HermitianOperator tensor(const HermitianOperator& a, const HermitianOperator& b) {
    return HermitianOperator(kron(a.matrix(), b.matrix()));
}

// ---------------------------------------------------------------------------
// Fock-space helpers

namespace fock {

CMatrix annihilation(int dim) {
    CMatrix a = CMatrix::Zero(dim, dim);
    for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

CMatrix creation(int dim) { return annihilation(dim).adjoint(); }

HermitianOperator number(int dim) {
    CMatrix n = CMatrix::Zero(dim, dim);
    for (int k = 0; k < dim; ++k) n(k, k) = static_cast<double>(k);
    return HermitianOperator(std::move(n));
}

HermitianOperator position(int dim) {
    const CMatrix a = annihilation(dim);
    return HermitianOperator((a + a.adjoint()) / std::numbers::sqrt2);
}

HermitianOperator momentum(int dim) {
    const CMatrix a = annihilation(dim);
    const cplx i(0.0, 1.0);
    return HermitianOperator((-i * a + i * a.adjoint()) / std::numbers::sqrt2);
}

RVector hermite_functions(double x, int dim) {
    RVector psi = RVector::Zero(dim);
    if (dim == 0) return psi;
    psi[0] = std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * x * x);
    if (dim > 1) psi[1] = std::numbers::sqrt2 * x * psi[0];
    for (int n = 1; n + 1 < dim; ++n) {
        const double nd = n;
        psi[n + 1] = std::sqrt(2.0 / (nd + 1.0)) * x * psi[n] - std::sqrt(nd / (nd + 1.0)) * psi[n - 1];
    }
    return psi;
}

RVector hermite_function_derivatives(double x, int dim) {
    const RVector psi = hermite_functions(x, dim + 1);
    RVector d(dim);
    for (int n = 0; n < dim; ++n) {
        const double nd = n;
        d[n] = -std::sqrt((nd + 1.0) / 2.0) * psi[n + 1];
        if (n > 0) d[n] += std::sqrt(nd / 2.0) * psi[n - 1];
    }
    return d;
}

CVector coherent_amplitudes(cplx beta, int dim) {
    CVector c(dim);
    if (dim == 0) return c;
    c[0] = std::exp(-0.5 * std::norm(beta));
    for (int n = 1; n < dim; ++n) c[n] = c[n - 1] * beta / std::sqrt(static_cast<double>(n));
    return c;
}

}  // namespace fock

ConstructedState construct_state(const StateSpec& spec, int dim) {
    if (dim <= 0) throw TruncationError("construct_state: truncation dimension must be positive");
    return std::visit(
        [dim](const auto& s) -> ConstructedState {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, FockSpec>) {
                if (s.n < 0 || s.n >= dim) {
                    std::ostringstream msg;
                    msg << "fock(" << s.n << ") does not fit in truncation " << dim;
                    throw TruncationError(msg.str());
                }
                return {PureState::basis(dim, s.n, "fock(" + std::to_string(s.n) + ")"), 0.0};
            } else if constexpr (std::is_same_v<T, CoherentSpec>) {
                const double mod = std::abs(s.beta);
                if (!(mod * mod + 6.0 * mod < dim)) {
                    std::ostringstream msg;
                    msg << "coherent(" << format_cplx(s.beta) << ") needs |beta|^2 + 6|beta| < " << dim;
                    throw TruncationError(msg.str());
                }
                const CVector c = fock::coherent_amplitudes(s.beta, dim);
                const double tail = std::max(0.0, 1.0 - c.squaredNorm());
                if (tail > tol::trunc) {
                    std::ostringstream msg;
                    msg << "coherent(" << format_cplx(s.beta) << ") loses " << tail << " of its norm at truncation "
                        << dim;
                    throw TruncationError(msg.str());
                }
                return {PureState::normalized(c, "coherent(" + format_cplx(s.beta) + ")"), tail};
            } else {
                const RVector psi = fock::hermite_functions(s.x, dim);
                std::ostringstream label;
                label << "position(" << s.x << ")";
                // A position eigenstate has no finite norm to lose; the tail
                // is reported as NaN.
                return {PureState::normalized(psi.cast<cplx>(), label.str()),
                        std::numeric_limits<double>::quiet_NaN()};
            }
        },
        spec);
}

PureState make_state(const StateSpec& spec, int dim) { return construct_state(spec, dim).state; }

}  // namespace modalflow
