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

#include "modalflow/naimark.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace modalflow {

namespace {

double max_abs(const CMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

CMatrix outer(const CVector& a, const CVector& b) { return a * b.adjoint(); }

CVector unit(int dim, int k) {
    CVector v = CVector::Zero(dim);
    v[k] = 1.0;
    return v;
}

// Unclamped <v|E_n|v> for every outcome.
std::vector<double> raw_probabilities(const CVector& v, const MeasureSet& m) {
    std::vector<double> p(m.size(), 0.0);
    if (m.kind() == MeasureKind::Projective && m.has_basis()) {
        const auto& b = m.projective_basis();
        const CVector c = b.unitary.adjoint() * v;
        for (Eigen::Index k = 0; k < c.size(); ++k) p[b.column_outcome[k]] += std::norm(c[k]);
        return p;
    }
    for (int n = 0; n < m.size(); ++n) p[n] = v.dot(m.element(n) * v).real();
    return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// NaimarkExtension

NaimarkExtension::NaimarkExtension(int uni_dim, int aux_dim, PureState aux_state, MeasureSet projectors,
                                   CMatrix frame)
    : uni_dim_(uni_dim),
      aux_dim_(aux_dim),
      aux_state_(std::move(aux_state)),
      projectors_(std::move(projectors)),
      frame_(std::move(frame)) {
    if (uni_dim_ <= 0 || aux_dim_ <= 0) throw DimensionError("NaimarkExtension: dimensions must be positive");
    if (aux_state_.dim() != aux_dim_) throw DimensionError("NaimarkExtension: aux state dimension mismatch");
    if (projectors_.kind() != MeasureKind::Projective)
        throw MeasureKindError("NaimarkExtension: projectors must form a projective measure");
    if (projectors_.size() < 2) throw DimensionError("NaimarkExtension: need at least one outcome plus completion");
    const int product = uni_dim_ * aux_dim_;
    if (frame_.size() == 0) frame_ = CMatrix::Identity(product, product);
    if (frame_.cols() != product || frame_.rows() != projectors_.dim())
        throw DimensionError("NaimarkExtension: frame does not map uni (x) aux into the projector space");
    embedding_.resize(frame_.rows(), uni_dim_);
    for (int u = 0; u < uni_dim_; ++u) embedding_.col(u) = frame_.middleCols(u * aux_dim_, aux_dim_) * aux_state_.amplitudes();
}

PureState NaimarkExtension::lift(const PureState& psi) const {
    if (psi.dim() != uni_dim_) {
        std::ostringstream msg;
        msg << "lift_guiding_state: state dimension " << psi.dim() << " vs uni dimension " << uni_dim_;
        throw DimensionError(msg.str());
    }
    return PureState::normalized(embedding_ * psi.amplitudes(), psi.label());
}

HermitianOperator NaimarkExtension::lift_operator(const HermitianOperator& h_uni) const {
    if (h_uni.dim() != uni_dim_) throw DimensionError("lift_operator: dimension mismatch");
    const CMatrix product = kron(h_uni.matrix(), CMatrix::Identity(aux_dim_, aux_dim_));
    const CMatrix lifted = frame_ * product * frame_.adjoint();
    return HermitianOperator(0.5 * (lifted + lifted.adjoint()));
}

NaimarkExtension NaimarkExtension::with_projectors(MeasureSet projectors) const {
    return NaimarkExtension(uni_dim_, aux_dim_, aux_state_, std::move(projectors), frame_);
}

PureState lift_guiding_state(const PureState& psi, const NaimarkExtension& ext) { return ext.lift(psi); }

// ---------------------------------------------------------------------------
// Trine

PureState trine_state(int n) {
    if (n < 1 || n > 3) throw DimensionError("trine_state: n must be 1, 2 or 3");
    const cplx z = std::polar(1.0, 2.0 * std::numbers::pi * n / 3.0);
    CVector v(2);
    v << z / std::numbers::sqrt2, std::conj(z) / std::numbers::sqrt2;
    return PureState::normalized(v, "z" + std::to_string(n));
}

namespace {

struct TrineParts {
    std::vector<CVector> z;
    CVector phi, phi_p;
};

TrineParts trine_parts() {
    TrineParts t;
    for (int n = 1; n <= 3; ++n) t.z.push_back(trine_state(n).amplitudes());
    t.phi = unit(2, 0);
    t.phi_p = unit(2, 1);
    return t;
}

std::vector<cplx> trine_values() {
    std::vector<cplx> v;
    for (int n = 1; n <= 3; ++n) v.push_back(std::polar(1.0, 2.0 * std::numbers::pi * n / 3.0));
    return v;
}

}  // namespace

TrineModel build_trine_extension() {
    const TrineParts t = trine_parts();
    const double r2 = std::numbers::sqrt2 / 3.0;
    const CVector& z2 = t.z[1];
    std::vector<CMatrix> pi;
    std::vector<CMatrix> effects;
    for (int n = 0; n < 3; ++n) {
        const CMatrix f = (2.0 / 3.0) * outer(t.z[n], t.z[n]);
        effects.push_back(f);
        pi.push_back(kron(f, outer(t.phi, t.phi)) + r2 * kron(outer(t.z[n], z2), outer(t.phi, t.phi_p)) +
                     r2 * kron(outer(z2, t.z[n]), outer(t.phi_p, t.phi)) +
                     (1.0 / 3.0) * kron(outer(z2, z2), outer(t.phi_p, t.phi_p)));
    }
    pi.push_back(kron(CMatrix::Identity(2, 2), outer(t.phi_p, t.phi_p)) - kron(outer(z2, z2), outer(t.phi_p, t.phi_p)));

    auto values = trine_values();
    MeasureSet pom = MeasureSet::from_elements(MeasureKind::POM, effects, values);
    values.push_back(completion_value());
    MeasureSet projectors = MeasureSet::from_elements(MeasureKind::Projective, std::move(pi), std::move(values));

    std::vector<PureState> states;
    for (int n = 1; n <= 3; ++n) states.push_back(trine_state(n));
    return TrineModel{std::move(states), std::move(pom),
                      NaimarkExtension(2, 2, PureState::basis(2, 0, "phi"), std::move(projectors))};
}

std::vector<CMatrix> trine_printed_projectors() {
    const TrineParts t = trine_parts();
    const double r2 = std::numbers::sqrt2 / 3.0;
    const CVector &z1 = t.z[0], &z2 = t.z[1], &z3 = t.z[2];
    const CMatrix pp = outer(t.phi, t.phi), ppp = outer(t.phi, t.phi_p), pphi = outer(t.phi_p, t.phi),
                  pp2 = outer(t.phi_p, t.phi_p);
    const CMatrix tail = (1.0 / 3.0) * kron(outer(z2, z2), pp2);
    std::vector<CMatrix> pi;
    pi.push_back(kron((2.0 / 3.0) * outer(z1, z1), pp) - r2 * kron(outer(z1, z2), ppp) - r2 * kron(outer(z2, z1), pphi) + tail);
    pi.push_back(kron((2.0 / 3.0) * outer(z2, z2), pp) + r2 * kron(outer(z2, z2), ppp) + r2 * kron(outer(z2, z2), pphi) + tail);
    pi.push_back(kron((2.0 / 3.0) * outer(z3, z3), pp) + r2 * kron(outer(z3, z2), ppp) + r2 * kron(outer(z2, z3), pphi) + tail);
    pi.push_back(kron(CMatrix::Identity(2, 2), pp2) - kron(outer(z2, z2), pp2));
    return pi;
}

NaimarkExtension trivial_extension(const MeasureSet& projective) {
    const auto& basis = projective.projective_basis();
    auto values = projective.values();
    values.push_back(completion_value());
    MeasureSet lifted = MeasureSet::from_basis(basis.unitary, basis.column_outcome, projective.size() + 1,
                                               std::move(values), projective.generator());
    return NaimarkExtension(projective.dim(), 1, PureState::basis(1, 0), std::move(lifted));
}

// ---------------------------------------------------------------------------
// Husimi

NaimarkExtension build_husimi_extension(int levels) {
    const int d = levels;
    if (d < 2) throw TruncationError("build_husimi_extension: need at least two levels per mode");
    if (d > 80) throw TruncationError("build_husimi_extension: more than 80 levels per mode is not supported");

    Eigen::SelfAdjointEigenSolver<CMatrix> ex(fock::position(d).matrix());
    Eigen::SelfAdjointEigenSolver<CMatrix> ey(fock::momentum(d).matrix());
    const CMatrix u = kron(CMatrix(ex.eigenvectors()), CMatrix(ey.eigenvectors()));
    std::vector<int> labels(d * d);
    std::vector<cplx> values(d * d + 1);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            labels[i * d + j] = i * d + j;
            values[i * d + j] = cplx(ex.eigenvalues()[i], ey.eigenvalues()[j]);
        }
    }
    values[d * d] = completion_value();
    MeasureSet projectors = MeasureSet::from_basis(u, std::move(labels), d * d + 1, std::move(values));

    // Beam splitter |p>_a |q>_b -> sum_j B_j |j>_c |p+q-j>_d on total <= d-1.
    std::vector<double> fact(2 * d + 1, 1.0);
    for (int k = 1; k <= 2 * d; ++k) fact[k] = fact[k - 1] * k;
    auto binom = [&](int n, int k) { return fact[n] / (fact[k] * fact[n - k]); };
    CMatrix frame = CMatrix::Zero(d * d, d * d);
    for (int p = 0; p < d; ++p) {
        for (int q = 0; p + q < d; ++q) {
            const int total = p + q;
            const double norm = std::pow(2.0, -0.5 * total) / std::sqrt(fact[p] * fact[q]);
            for (int r = 0; r <= p; ++r) {
                for (int s = 0; s <= q; ++s) {
                    const int j = r + s;
                    const double sign = ((q - s) % 2) ? -1.0 : 1.0;
                    frame(j * d + (total - j), p * d + q) +=
                        sign * binom(p, r) * binom(q, s) * std::sqrt(fact[j] * fact[total - j]) * norm;
                }
            }
        }
    }
    return NaimarkExtension(d, d, PureState::basis(d, 0, "vacuum"), std::move(projectors), std::move(frame));
}

// ---------------------------------------------------------------------------
// Verification

MeasureSet induced_pom(const NaimarkExtension& ext) {
    const MeasureSet& pi = ext.projectors();
    const int n_out = ext.outcome_count();
    const int dim = ext.uni_dim();
    std::vector<CMatrix> effects(n_out, CMatrix::Zero(dim, dim));
    const CMatrix& v = ext.embedding();
    if (pi.has_basis()) {
        const auto& b = pi.projective_basis();
        const CMatrix w = v.adjoint() * b.unitary;
        for (Eigen::Index k = 0; k < w.cols(); ++k) {
            const int n = b.column_outcome[k];
            if (n < n_out) effects[n].noalias() += w.col(k) * w.col(k).adjoint();
        }
    } else {
        for (int n = 0; n < n_out; ++n) effects[n] = v.adjoint() * pi.element(n) * v;
    }
    std::vector<cplx> values(pi.values().begin(), pi.values().begin() + n_out);
    return MeasureSet::from_elements(MeasureKind::POM, std::move(effects), std::move(values));
}

DilationReport verify_extension(const MeasureSet& pom, const NaimarkExtension& ext, int trials, std::uint64_t seed,
                                double tolerance) {
    if (pom.size() != ext.outcome_count()) {
        std::ostringstream msg;
        msg << "verify_extension: POM has " << pom.size() << " outcomes, extension has " << ext.outcome_count();
        throw DimensionError(msg.str());
    }
    if (pom.dim() != ext.uni_dim()) throw DimensionError("verify_extension: POM dimension mismatch");

    DilationReport report;
    report.trials = trials;
    const MeasureSet& pi = ext.projectors();
    report.projectors = validate_measure(pi);

    const int dim = pi.dim();
    if (pi.has_basis()) {
        const auto& b = pi.projective_basis();
        const double dev = max_abs(b.unitary.adjoint() * b.unitary - CMatrix::Identity(dim, dim));
        report.pro1_residual = dev;
        report.pro2_residual = dev;
    } else {
        const auto elements = pi.elements();
        CMatrix sum = CMatrix::Zero(dim, dim);
        for (const auto& e : elements) sum += e;
        report.pro1_residual = max_abs(sum - CMatrix::Identity(dim, dim));
        for (size_t n = 0; n < elements.size(); ++n)
            for (size_t m = n; m < elements.size(); ++m) {
                CMatrix prod = elements[n] * elements[m];
                if (n == m) prod -= elements[n];
                report.pro2_residual = std::max(report.pro2_residual, max_abs(prod));
            }
    }

    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal;
    const int n_out = pom.size();
    for (int trial = 0; trial < trials; ++trial) {
        CVector v(pom.dim());
        for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = cplx(normal(gen), normal(gen));
        v /= v.norm();
        const auto p_pom = raw_probabilities(v, pom);
        const auto p_lift = raw_probabilities(ext.embedding() * v, pi);
        for (int n = 0; n < n_out; ++n) {
            const double dev = std::abs(p_pom[n] - p_lift[n]);
            if (dev > report.max_deviation) {
                report.max_deviation = dev;
                report.worst_outcome = n;
            }
        }
        report.completion_mass = std::max(report.completion_mass, std::abs(p_lift[n_out]));
    }

    std::ostringstream why;
    if (!report.projectors.ok)
        why << "projectors violate " << report.projectors.invariant << " (index " << report.projectors.index
            << ", magnitude " << report.projectors.magnitude << ")";
    else if (report.pro1_residual > tol::completeness)
        why << "completeness residual " << report.pro1_residual;
    else if (report.pro2_residual > tol::proj)
        why << "orthogonality residual " << report.pro2_residual;
    else if (report.max_deviation >= tolerance)
        why << "dilation deviation " << report.max_deviation << " at outcome " << report.worst_outcome;
    else if (report.completion_mass > 1e-12)
        why << "completion projector carries probability " << report.completion_mass;
    report.failure = why.str();
    report.ok = report.failure.empty();
    return report;
}

CurrentMatrix lifted_current(const PureState& phi, const NaimarkExtension& ext, const HermitianOperator& h_uni,
                             const std::optional<HermitianOperator>& r_prime) {
    return probability_current(phi, ext.projectors(), ext.lift_operator(h_uni), r_prime);
}

// ---------------------------------------------------------------------------
// Fixtures

json extension_to_json(const NaimarkExtension& ext) {
    json j;
    j["uni_dim"] = ext.uni_dim();
    j["aux_dim"] = ext.aux_dim();
    j["aux_state"] = vector_to_json(ext.aux_state().amplitudes());
    json projectors = json::array();
    for (const auto& e : ext.projectors().elements()) projectors.push_back(matrix_to_json(e));
    j["projectors"] = std::move(projectors);
    const auto& values = ext.projectors().values();
    j["values"] = vector_to_json(Eigen::Map<const CVector>(values.data(), ext.outcome_count()));
    const int product = ext.uni_dim() * ext.aux_dim();
    if (ext.frame().rows() != product || !ext.frame().isIdentity(0.0)) j["frame"] = matrix_to_json(ext.frame());
    return j;
}

NaimarkExtension extension_from_json(const json& j) {
    try {
        const int uni = j.at("uni_dim").get<int>();
        const int aux = j.at("aux_dim").get<int>();
        PureState phi = PureState::normalized(vector_from_json(j.at("aux_state")));
        std::vector<CMatrix> elements;
        for (const auto& e : j.at("projectors")) elements.push_back(matrix_from_json(e));
        const CVector vals = vector_from_json(j.at("values"));
        std::vector<cplx> values(vals.data(), vals.data() + vals.size());
        values.push_back(completion_value());
        if (values.size() != elements.size())
            throw DimensionError("extension fixture: expected one value per projector except the completion");
        CMatrix frame;
        if (j.contains("frame")) frame = matrix_from_json(j.at("frame"));
        return NaimarkExtension(uni, aux, std::move(phi),
                                MeasureSet::from_elements(MeasureKind::Projective, std::move(elements), std::move(values)),
                                std::move(frame));
    } catch (const json::exception& e) {
        throw DimensionError(std::string("extension fixture: ") + e.what());
    }
}

}  // namespace modalflow
