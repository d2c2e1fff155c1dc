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


#include <doctest.h>

#include "modalflow/naimark.hpp"
#include "test_util.hpp"

using namespace modalflow;
using testing::max_abs;

namespace {

CMatrix sum_of(const std::vector<CMatrix>& e) {
    CMatrix s = CMatrix::Zero(e.front().rows(), e.front().cols());
    for (const auto& m : e) s += m;
    return s;
}

}  // namespace

TEST_SUITE("naimark") {
    TEST_CASE("trine projectors are complete and orthogonal") {
        const TrineModel t = build_trine_extension();
        const auto pi = t.extension.projectors().elements();
        REQUIRE(pi.size() == 4);
        CHECK(max_abs(sum_of(pi) - CMatrix::Identity(4, 4)) < 1e-12);
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) {
                const CMatrix expect = a == b ? pi[a] : CMatrix::Zero(4, 4);
                CHECK(max_abs(pi[a] * pi[b] - expect) < 1e-12);
            }
        CHECK(std::isnan(t.extension.projectors().values()[3].real()));
    }

    TEST_CASE("the printed trine block fails completeness") {
        const auto printed = trine_printed_projectors();
        CHECK(max_abs(sum_of(printed) - CMatrix::Identity(4, 4)) > 0.1);
        const MeasureReport r = validate_measure(
            MeasureSet::from_elements(MeasureKind::POM, printed, std::vector<cplx>(printed.size(), 0.0)));
        CHECK_FALSE(r.ok);
    }

    TEST_CASE("lifted trine probabilities") {
        const TrineModel t = build_trine_extension();
        const auto p = born_probabilities(t.extension.lift(trine_state(1)), t.extension.projectors());
        CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-13));
        CHECK(p[1] == doctest::Approx(1.0 / 6.0).epsilon(1e-13));
        CHECK(p[2] == doctest::Approx(1.0 / 6.0).epsilon(1e-13));
        CHECK(std::abs(p[3]) < 1e-12);
    }

    TEST_CASE("lifted probabilities equal POM probabilities pointwise") {
        const TrineModel t = build_trine_extension();
        std::mt19937_64 gen(14);
        for (int k = 0; k < 200; ++k) {
            const PureState psi = testing::random_state(gen, 2);
            const auto a = born_probabilities(psi, t.pom);
            const auto b = born_probabilities(t.extension.lift(psi), t.extension.projectors());
            for (int n = 0; n < 3; ++n) CHECK(std::abs(a[n] - b[n]) < 1e-12);
            CHECK(std::abs(b[3]) < 1e-12);
        }
    }

    TEST_CASE("lift_guiding_state") {
        const TrineModel t = build_trine_extension();
        const PureState phi = lift_guiding_state(trine_state(1), t.extension);
        CHECK(phi.dim() == 4);
        CHECK(phi.amplitudes().norm() == doctest::Approx(1.0).epsilon(1e-14));
        CHECK((t.extension.projectors().element(3) * phi.amplitudes()).norm() < 1e-12);
        const PureState rotated = lift_guiding_state(trine_state(1).with_global_phase(0.8), t.extension);
        CHECK((rotated.amplitudes() - std::polar(1.0, 0.8) * phi.amplitudes()).norm() < 1e-14);
        // Product form |Psi> (x) |phi> with |phi> = aux index 0.
        CHECK((phi.amplitudes() - kron(trine_state(1).amplitudes(), PureState::basis(2, 0).amplitudes())).norm() <
              1e-14);
        CHECK_THROWS_AS(lift_guiding_state(PureState::basis(3, 0), t.extension), DimensionError);
    }

    TEST_CASE("trine dilation over a thousand random states") {
        const TrineModel t = build_trine_extension();
        const DilationReport r = verify_extension(t.pom, t.extension, 1000, 7);
        CHECK(r.ok);
        CHECK(r.trials == 1000);
        CHECK(r.max_deviation < 1e-10);
        CHECK(r.pro1_residual < 1e-12);
        CHECK(r.pro2_residual < 1e-12);
        CHECK(r.completion_mass < 1e-12);
    }

    TEST_CASE("trivial extension of a projective measure") {
        std::mt19937_64 gen(2);
        const MeasureSet m = MeasureSet::from_basis(testing::random_unitary(gen, 3), {0, 1, 1}, 2, {0.0, 1.0});
        const NaimarkExtension ext = trivial_extension(m);
        CHECK(ext.aux_dim() == 1);
        const MeasureSet as_pom =
            MeasureSet::from_elements(MeasureKind::POM, m.elements(), m.values());
        const DilationReport r = verify_extension(as_pom, ext, 200, 1);
        CHECK(r.ok);
        CHECK(r.max_deviation < 1e-14);
    }

    TEST_CASE("a corrupted projector is flagged") {
        const TrineModel t = build_trine_extension();
        auto el = t.extension.projectors().elements();
        el[0] *= 1.01;
        const NaimarkExtension bad = t.extension.with_projectors(
            MeasureSet::from_elements(MeasureKind::Projective, el, t.extension.projectors().values()));
        const DilationReport r = verify_extension(t.pom, bad, 1000, 7);
        CHECK_FALSE(r.ok);
        CHECK(r.max_deviation > 1e-3);
        CHECK_FALSE(r.failure.empty());
    }

    TEST_CASE("lifted currents") {
        const TrineModel t = build_trine_extension();
        const PureState phi = t.extension.lift(trine_state(2));
        CHECK(lifted_current(phi, t.extension, HermitianOperator::zero(2)).max_abs() == 0.0);

        const MeasureSet z = MeasureSet::computational(3, {0.0, 1.0, 2.0});
        const NaimarkExtension triv = trivial_extension(z);
        CMatrix h = CMatrix::Zero(3, 3);
        h.diagonal() << 0.2, 1.0, -0.4;
        std::mt19937_64 gen(3);
        CHECK(lifted_current(triv.lift(testing::random_state(gen, 3)), triv, HermitianOperator(h)).max_abs() < 1e-15);
    }

    TEST_CASE("husimi extension is a valid dilation") {
        const int d = 6;
        const NaimarkExtension ext = build_husimi_extension(d);
        CHECK(ext.outcome_count() == d * d);
        const MeasureSet pom = induced_pom(ext);
        CHECK(validate_measure(pom).ok);
        const DilationReport r = verify_extension(pom, ext, 1000, 4);
        CHECK(r.ok);
        CHECK(r.max_deviation < dilation_tol);
        CHECK(r.pro1_residual < tol::completeness);
        CHECK(r.pro2_residual < tol::proj);
        const CMatrix v = ext.embedding();
        CHECK(max_abs(v.adjoint() * v - CMatrix::Identity(d, d)) < 1e-12);
        // Outcome values are the phase-space points x+ + i y-, all finite.
        for (int n = 0; n < ext.outcome_count(); ++n) CHECK(std::isfinite(ext.projectors().values()[n].real()));
    }

    TEST_CASE("husimi extension current matches dP/dt of the lifted oscillator") {
        const int d = 6;
        const double omega = 1.0;
        const NaimarkExtension ext = build_husimi_extension(d);
        const HermitianOperator h = ext.lift_operator(omega * fock::number(d));
        // lift_operator is exact for number-diagonal Hamiltonians.
        const PureState psi = make_state(FockSpec{2}, d);
        CHECK((h.matrix() * ext.lift(psi).amplitudes() - 2.0 * omega * ext.lift(psi).amplitudes()).norm() < 1e-12);

        CVector c = CVector::Zero(d);
        c[0] = 0.6;
        c[1] = cplx(0.0, 0.5);
        c[2] = 0.3;
        const PureState phi = ext.lift(PureState::normalized(c));
        std::vector<PureState> path;
        const double dt = 1e-4;
        const Propagator prop(h);
        for (int k = 0; k < 7; ++k) path.push_back(prop.evolve(phi, 0.3 + k * dt));
        CHECK(master_residual(path, dt, ext.projectors(), h) < 1e-6);
        const CurrentMatrix j = lifted_current(phi, ext, omega * fock::number(d));
        CHECK(std::abs(j.row_sums().sum()) < 1e-12);
    }

    TEST_CASE("extension fixtures round trip") {
        const TrineModel t = build_trine_extension();
        const NaimarkExtension back = extension_from_json(json::parse(extension_to_json(t.extension).dump()));
        CHECK(back.uni_dim() == 2);
        CHECK(back.aux_dim() == 2);
        for (int n = 0; n < 4; ++n)
            CHECK(max_abs(back.projectors().element(n) - t.extension.projectors().element(n)) < 1e-15);
        CHECK(verify_extension(t.pom, back, 100, 1).ok);

        json broken = extension_to_json(t.extension);
        broken["values"].erase(0);
        CHECK_THROWS_AS(extension_from_json(broken), DimensionError);
    }
}
