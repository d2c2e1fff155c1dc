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

#include <cstdlib>
#include <numbers>

#include "modalflow/bohm.hpp"
#include "modalflow/jump.hpp"
#include "modalflow/naimark.hpp"
#include "test_util.hpp"

using namespace modalflow;
using testing::max_abs;

namespace {

CMatrix sigma_x() {
    CMatrix m(2, 2);
    m << 0.0, 1.0, 1.0, 0.0;
    return m;
}

CMatrix sigma_z() {
    CMatrix m(2, 2);
    m << 1.0, 0.0, 0.0, -1.0;
    return m;
}

PureState two_level(cplx a, cplx b) {
    CVector v(2);
    v << a, b;
    return PureState::normalized(v);
}

JumpModel rabi_model() {
    return {HermitianOperator(sigma_x()), MeasureSet::computational(2, {0.0, 1.0}), PureState::basis(2, 0)};
}

}  // namespace

TEST_SUITE("jump") {
    TEST_CASE("current vanishes for a hamiltonian diagonal in the measure basis") {
        std::mt19937_64 gen(1);
        CMatrix h = CMatrix::Zero(4, 4);
        h.diagonal() << 0.3, -1.0, 2.0, 0.5;
        const CurrentMatrix j = probability_current(testing::random_state(gen, 4),
                                                    MeasureSet::computational(4, {0.0, 1.0, 2.0, 3.0}),
                                                    HermitianOperator(h));
        CHECK(j.max_abs() == 0.0);
    }

    TEST_CASE("two-level current by hand") {
        const MeasureSet z = MeasureSet::computational(2, {0.0, 1.0});
        const HermitianOperator h(sigma_x());
        CHECK(std::abs(probability_current(two_level(1.0, 1.0), z, h)(0, 1)) < 1e-15);
        // 2 Im[conj(c0) c1] with c0 = 1/sqrt2, c1 = i/sqrt2.
        const CurrentMatrix j = probability_current(two_level(1.0, cplx(0.0, 1.0)), z, h);
        CHECK(j(0, 1) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(j(1, 0) == doctest::Approx(-1.0).epsilon(1e-14));
        // The sign agrees with the finite-difference derivative of P_0.
        const Propagator prop(h);
        const double dt = 1e-6;
        const double dp0 = (std::norm(prop.evolve(two_level(1.0, cplx(0.0, 1.0)), dt)[0]) -
                            std::norm(prop.evolve(two_level(1.0, cplx(0.0, 1.0)), -dt)[0])) /
                           (2 * dt);
        CHECK(dp0 == doctest::Approx(j(0, 1)).epsilon(1e-8));
    }

    TEST_CASE("current is antisymmetric and its row sums give dP/dt") {
        std::mt19937_64 gen(4);
        for (int k = 0; k < 25; ++k) {
            const int dim = 3 + k % 4;
            std::vector<int> labels(dim);
            for (int i = 0; i < dim; ++i) labels[i] = i % 3;
            const MeasureSet m =
                MeasureSet::from_basis(testing::random_unitary(gen, dim), labels, 3, {0.0, 1.0, 2.0});
            const HermitianOperator h = testing::random_hermitian(gen, dim);
            const PureState psi = testing::random_state(gen, dim);
            const CurrentMatrix j = probability_current(psi, m, h);
            const RMatrix d = j.dense();
            CHECK((d + d.transpose()).cwiseAbs().maxCoeff() == 0.0);
            const RVector rows = j.row_sums();
            CHECK(std::abs(rows.sum()) < 1e-12);

            const Propagator prop(h);
            const double dt = 1e-5;
            const auto pp = born_probabilities(prop.evolve(psi, dt), m);
            const auto pm = born_probabilities(prop.evolve(psi, -dt), m);
            for (int n = 0; n < 3; ++n) CHECK(std::abs((pp[n] - pm[n]) / (2 * dt) - rows[n]) < 1e-7);
        }
    }

    TEST_CASE("probability current rejects POMs") {
        const TrineModel t = build_trine_extension();
        CHECK_THROWS_AS(probability_current(trine_state(1), t.pom, HermitianOperator::zero(2)), MeasureKindError);
    }

    TEST_CASE("bell rates by direct substitution") {
        CHECK(RMatrix(bell_rates(CurrentMatrix(3), {0.2, 0.3, 0.5}).matrix()).cwiseAbs().maxCoeff() == 0.0);

        RMatrix j = RMatrix::Zero(2, 2);
        j(0, 1) = -0.2;
        j(1, 0) = 0.2;
        const RateMatrix a = bell_rates(CurrentMatrix::from_dense(j), {0.5, 0.5});
        CHECK(a(0, 1) == 0.0);
        CHECK(a(1, 0) == doctest::Approx(0.4));

        j(0, 1) = 0.3;
        j(1, 0) = -0.3;
        const RateMatrix b = bell_rates(CurrentMatrix::from_dense(j), {0.4, 0.6});
        CHECK(b(0, 1) == doctest::Approx(0.5));
        CHECK(b(1, 0) == 0.0);
        CHECK(b.out_rates()[1] == doctest::Approx(0.5));
    }

    TEST_CASE("current out of an empty outcome is starved") {
        RMatrix j = RMatrix::Zero(2, 2);
        j(0, 1) = 0.1;
        j(1, 0) = -0.1;
        const CurrentMatrix c = CurrentMatrix::from_dense(j);
        CHECK_THROWS_AS(bell_rates(c, {1.0, 0.0}), StarvedSourceError);
        try {
            bell_rates(c, {1.0, 0.0});
        } catch (const StarvedSourceError& e) {
            CHECK(e.source() == 1);
            CHECK(e.target() == 0);
        }
        int starved = 0;
        const RateMatrix t = bell_rates(c, {1.0, 0.0}, Starvation::Skip, &starved);
        CHECK(starved == 1);
        CHECK(t(0, 1) == 0.0);
        CHECK_THROWS(CurrentMatrix::from_dense(RMatrix::Ones(2, 2)));
    }

    TEST_CASE("bell rates are nonnegative and exclusive") {
        std::mt19937_64 gen(9);
        for (int k = 0; k < 30; ++k) {
            const int dim = 5;
            const MeasureSet m = MeasureSet::from_basis(testing::random_unitary(gen, dim), {0, 1, 2, 3, 4}, 5,
                                                        {0.0, 1.0, 2.0, 3.0, 4.0});
            const PureState psi = testing::random_state(gen, dim);
            const RMatrix t = bell_rates(probability_current(psi, m, testing::random_hermitian(gen, dim)),
                                         born_probabilities(psi, m))
                                  .dense();
            CHECK(t.minCoeff() >= 0.0);
            CHECK(t.cwiseProduct(t.transpose()).cwiseAbs().maxCoeff() == 0.0);
        }
    }

    TEST_CASE("binomial sigma equivalents match exact tails") {
        CHECK(binomial_sigma_equivalent(70, 100, 0.5) == doctest::Approx(3.948929709457052).epsilon(1e-9));
        CHECK(binomial_sigma_equivalent(3, 10000, 1e-5) == doctest::Approx(3.6074507694958684).epsilon(1e-9));
        CHECK(binomial_sigma_equivalent(30, 1000, 0.05) == doctest::Approx(3.016853066209625).epsilon(1e-9));
        CHECK(binomial_sigma_equivalent(50, 100, 0.5) == 0.0);
        CHECK(binomial_sigma_equivalent(0, 100, 0.0) == 0.0);
        CHECK(std::isinf(binomial_sigma_equivalent(1, 100, 0.0)));
    }

    TEST_CASE("master residual") {
        const MeasureSet z = MeasureSet::computational(2, {0.0, 1.0});
        CMatrix diag = CMatrix::Zero(2, 2);
        diag(0, 0) = 1.0;
        std::vector<PureState> path;
        const HermitianOperator hd(diag);
        for (int k = 0; k < 5; ++k) path.push_back(evolve_schrodinger(two_level(1.0, 2.0), hd, 0.1 * k));
        CHECK(master_residual(path, 0.1, z, hd) < 1e-10);

        const HermitianOperator h(sigma_x());
        auto residual = [&](double dt) {
            std::vector<PureState> p;
            for (int k = 0; k * dt <= 0.4 + 1e-12; ++k) p.push_back(evolve_schrodinger(PureState::basis(2, 0), h, 0.2 + k * dt));
            return master_residual(p, dt, z, h);
        };
        const double r1 = residual(0.01), r2 = residual(0.005);
        CHECK(r1 / r2 == doctest::Approx(4.0).epsilon(0.05));
    }

    TEST_CASE("master residual on the oscillator position lattice") {
        const double omega = 1.0;
        const Grid1D g = Grid1D::with_spacing(-7.0, 7.0, 0.1);
        const auto lh = LatticeHamiltonian::quadratic(g, 1.0 / omega, [](double x) { return x * x / 2.0; });
        const PureState psi = lattice_state(g, [](double x) {
            return std::exp(-(x - 1.0) * (x - 1.0) / 2.0) * std::polar(1.0, 0.5 * x);
        });
        const HermitianOperator h = lh.dense();
        const Propagator prop(h);
        const double dt = 1e-4 / omega;
        std::vector<PureState> path;
        for (int k = 0; k < 11; ++k) path.push_back(prop.evolve(psi, 0.4 + k * dt));
        CHECK(master_residual(path, dt, lattice_measure(g), h) < 1e-6);
    }

    TEST_CASE("measure generator") {
        const MeasureSet z = MeasureSet::computational(2, {0.0, 1.0});
        const MeasureSet same = measure_generator(z, HermitianOperator::zero(2), 0.3);
        for (int n = 0; n < 2; ++n) CHECK(max_abs(same.element(n) - z.element(n)) < 1e-15);

        CVector px(2), mx(2);
        px << 1.0, 1.0;
        mx << 1.0, -1.0;
        px /= std::sqrt(2.0);
        mx /= std::sqrt(2.0);
        const MeasureSet xm = MeasureSet::from_elements(MeasureKind::Projective,
                                                        {px * px.adjoint(), mx * mx.adjoint()}, {1.0, -1.0});
        const MeasureSet swapped =
            measure_generator(xm, HermitianOperator(CMatrix(sigma_z() / 2.0)), std::numbers::pi);
        CHECK(max_abs(swapped.element(0) - xm.element(1)) < 1e-12);
        CHECK(max_abs(swapped.element(1) - xm.element(0)) < 1e-12);
        CHECK(validate_measure(swapped).ok);

        std::mt19937_64 gen(6);
        const HermitianOperator h = testing::random_hermitian(gen, 2);
        const MeasureSet co = measure_generator(xm, h, 0.7).with_generator(h);
        const CurrentMatrix j = probability_current(testing::random_state(gen, 2), co, h);
        CHECK(j.max_abs() < 1e-14);
    }

    TEST_CASE("trine statics: zero rates keep every trajectory constant") {
        const TrineModel t = build_trine_extension();
        const JumpModel m{HermitianOperator::zero(4), t.extension.projectors(), t.extension.lift(trine_state(1))};
        EnsembleOptions o;
        o.t_max = 1.0;
        o.dt = 0.1;
        o.count = 20000;
        o.seed = 3;
        o.keep_trajectories = 50;
        const EnsembleResult r = simulate_ensemble(m, o);
        CHECK(r.stats.diagnostics.jumps == 0);
        for (const auto& tr : r.trajectories) CHECK(tr.indices.size() == 1);
        const double expect[] = {2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 0.0};
        for (std::size_t k = 0; k < r.stats.times().size(); ++k)
            for (int n = 0; n < 4; ++n) {
                CHECK(r.stats.frequency(static_cast<int>(k), n) == r.stats.frequency(0, n));
                CHECK(std::abs(r.stats.frequency(0, n) - expect[n]) <=
                      4.0 * std::sqrt(expect[n] * (1 - expect[n]) / o.count));
            }
        CHECK(r.stats.occupation(0, 3) == 0);
    }

    TEST_CASE("eigenstates never jump") {
        CMatrix h = CMatrix::Zero(3, 3);
        h.diagonal() << 1.0, 2.0, 3.0;
        const JumpModel m{HermitianOperator(h), MeasureSet::computational(3, {0.0, 1.0, 2.0}),
                          PureState::basis(3, 1)};
        EnsembleOptions o;
        o.count = 500;
        const EnsembleResult r = simulate_ensemble(m, o);
        CHECK(r.stats.diagnostics.jumps == 0);
        CHECK(r.stats.occupation(static_cast<int>(r.stats.times().size()) - 1, 1) == 500);
    }

    TEST_CASE("Rabi occupations track sin^2 t") {
        const JumpModel m = rabi_model();
        for (JumpScheme scheme : {JumpScheme::Exponential, JumpScheme::Bernoulli}) {
            EnsembleOptions o;
            o.t_max = 3.0;
            o.dt = 0.005;
            o.count = 20000;
            o.seed = 17;
            o.record_every = 20;
            o.scheme = scheme;
            const EnsembleResult r = simulate_ensemble(m, o);
            RMatrix ref(r.stats.times().size(), 2);
            for (std::size_t k = 0; k < r.stats.times().size(); ++k) {
                const double s = std::sin(r.stats.times()[k]);
                ref(k, 1) = s * s;
                ref(k, 0) = 1.0 - s * s;
            }
            const MasterCheck c = check_against_master(r.stats, ref);
            CHECK(c.worst_ratio <= 1.0);
            const RMatrix tr = integrate_master_equation(m, r.stats.times());
            CHECK((tr - ref).cwiseAbs().maxCoeff() < 1e-4);
            for (std::size_t k = 0; k < r.stats.times().size(); ++k)
                CHECK(r.stats.occupation(static_cast<int>(k), 0) + r.stats.occupation(static_cast<int>(k), 1) ==
                      o.count);
        }
    }

    TEST_CASE("ensembles are reproducible and independent of the worker count") {
        const JumpModel m = rabi_model();
        EnsembleOptions o;
        o.t_max = 2.0;
        o.dt = 0.01;
        o.count = 3000;
        o.seed = 99;
        o.keep_trajectories = 10;
        o.threads = 1;
        const EnsembleResult a = simulate_ensemble(m, o);
        o.threads = 3;
        const EnsembleResult b = simulate_ensemble(m, o);
        CHECK(a.stats.counts() == b.stats.counts());
        REQUIRE(a.trajectories.size() == b.trajectories.size());
        for (std::size_t i = 0; i < a.trajectories.size(); ++i) {
            CHECK(a.trajectories[i].indices == b.trajectories[i].indices);
            CHECK(a.trajectories[i].times == b.trajectories[i].times);
            for (std::size_t k = 1; k < a.trajectories[i].times.size(); ++k)
                CHECK(a.trajectories[i].times[k] > a.trajectories[i].times[k - 1]);
        }
        o.seed = 100;
        CHECK(simulate_ensemble(m, o).stats.counts() != a.stats.counts());
    }

    TEST_CASE("coarse steps are refined, and rejected beyond the refinement cap") {
        CMatrix h(2, 2);
        h << 0.0, 5.0, 5.0, 0.0;
        const JumpModel m{HermitianOperator(h), MeasureSet::computational(2, {0.0, 1.0}), PureState::basis(2, 0)};
        EnsembleOptions o;
        o.t_max = 0.2;
        o.dt = 0.1;
        o.count = 200;
        const EnsembleResult r = simulate_ensemble(m, o);
        CHECK(r.stats.diagnostics.refinements > 0);
        o.max_refinement_depth = 1;
        CHECK_THROWS_AS(simulate_ensemble(m, o), StepSizeError);
    }

    TEST_CASE("worker count honours MODALFLOW_THREADS") {
        setenv("MODALFLOW_THREADS", "2", 1);
        CHECK(worker_count(8) == 2);
        CHECK(worker_count(1) == 1);
        unsetenv("MODALFLOW_THREADS");
        CHECK(worker_count(5) == 5);
    }
}
