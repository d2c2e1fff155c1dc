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

#include <numbers>

#include "modalflow/oscillator.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace modalflow;
using testing::max_abs;

namespace {

CVector fock_vector(int n, int d) { return make_state(FockSpec{n}, d).amplitudes(); }

OscillatorScenario scenario(OscillatorState initial, OscillatorMeasure m = OscillatorMeasure::HusimiPOM,
                            double omega = 1.0) {
    OscillatorScenario s;
    s.omega = omega;
    s.initial = initial;
    s.measure = m;
    return s;
}

/// P(|alpha|^2 <= r) for Gamma(n + 1, 1).
double gamma_cdf(int n, double r) {
    double term = 1.0, sum = 1.0;
    for (int k = 1; k <= n; ++k) {
        term *= r / k;
        sum += term;
    }
    return 1.0 - std::exp(-r) * sum;
}

std::vector<double> grid_times(double t_max, int n) { return uniform_times(t_max, n); }

}  // namespace

TEST_SUITE("oscillator") {
    TEST_CASE("measure names round trip") {
        for (auto m : {OscillatorMeasure::HusimiPOM, OscillatorMeasure::PositionProjective,
                       OscillatorMeasure::Classical})
            CHECK(parse_oscillator_measure(to_string(m)) == m);
        CHECK_THROWS_AS(parse_oscillator_measure("wigner"), MeasureKindError);
    }

    TEST_CASE("chi of simple states") {
        const cplx a(0.7, -1.1);
        CHECK(std::abs(chi(a, fock_vector(3, 16)) - 3.0 / std::conj(a)) < 1e-12);
        CHECK(std::abs(chi(a, fock_vector(3, 16)) - 3.0 * a / std::norm(a)) < 1e-12);
        CHECK(chi(a, fock_vector(0, 16)) == cplx(0.0));

        const double omega = 1.2, t = 0.8;
        const cplx beta(1.0, 0.4);
        const CVector ct = evolve_fock(make_state(CoherentSpec{beta}, 48).amplitudes(), omega, t);
        CHECK(std::abs(chi(a, ct) - beta * std::polar(1.0, -omega * t)) < 1e-10);
        CHECK_THROWS_AS(chi(0.0, fock_vector(2, 16)), HusimiZeroError);
    }

    TEST_CASE("husimi drift at special points") {
        const double omega = 0.9;
        const int n = 4;
        const cplx a = std::polar(std::sqrt(double(n)), 0.6);
        CHECK(std::abs(husimi_rhs(a, fock_vector(n, 16), omega) - cplx(0.0, -omega) * a) < 1e-12);
        CHECK(std::abs(husimi_rhs(a, fock_vector(0, 16), omega) - cplx(0.0, -omega / 2.0) * a) < 1e-14);
        const cplx beta(1.5, -0.5);
        CHECK(std::abs(husimi_rhs(beta, make_state(CoherentSpec{beta}, 48).amplitudes(), omega) -
                       cplx(0.0, -omega) * beta) < 1e-10);
    }

    TEST_CASE("closed forms") {
        const double omega = 1.3;
        const int n = 4;
        const cplx a0(0.8, 0.9);
        const auto s = scenario(FockSpec{n}, OscillatorMeasure::HusimiPOM, omega);
        const double wp = omega * (1.0 + n / std::norm(a0)) / 2.0;
        CHECK(std::abs(closed_form(s, a0, 2.0 * std::numbers::pi / wp) - a0) < 1e-12);
        CHECK_THROWS_AS(closed_form(s, 0.0, 1.0), UnsupportedScenarioError);

        const cplx beta(2.0, 1.0);
        const auto c = scenario(CoherentSpec{beta}, OscillatorMeasure::HusimiPOM, omega);
        CHECK(std::abs(closed_form(c, beta, 0.7) - beta * std::polar(1.0, -omega * 0.7)) < 1e-14);

        const auto p = scenario(FockSpec{3}, OscillatorMeasure::PositionProjective, omega);
        CHECK(closed_form(p, cplx(0.4, 0.0), 5.0) == cplx(0.4, 0.0));
        const auto pc = scenario(CoherentSpec{beta}, OscillatorMeasure::PositionProjective, omega);
        CHECK(std::abs(closed_form(pc, a0, 0.9) - (beta * std::polar(1.0, -omega * 0.9) + a0 - beta)) < 1e-14);
        const auto cl = scenario(FockSpec{3}, OscillatorMeasure::Classical, omega);
        CHECK(std::abs(closed_form(cl, a0, 0.9) - a0 * std::polar(1.0, -omega * 0.9)) < 1e-14);
    }

    TEST_CASE("numeric husimi flow matches the closed forms") {
        const auto times = grid_times(20.0, 400);
        const auto f1 = scenario(FockSpec{1});
        CHECK(relative_deviation(integrate_husimi(f1, 1.0, times), closed_form_trajectory(f1, 1.0, times)) < 1e-6);
        const auto c2 = scenario(CoherentSpec{2.0});
        CHECK(relative_deviation(integrate_husimi(c2, 2.3, times), closed_form_trajectory(c2, 2.3, times)) < 1e-6);
        const auto vac = scenario(FockSpec{0});
        const PhaseTrajectory v = integrate_husimi(vac, 1.0, times);
        double worst = 0.0;
        for (std::size_t k = 0; k < times.size(); ++k)
            worst = std::max(worst, std::abs(v.alpha[k] - std::polar(1.0, -times[k] / 2.0)));
        CHECK(worst < 1e-8);
        CHECK(v.source == TrajectorySource::Numeric);
    }

    TEST_CASE("number-state husimi flow refuses the origin") {
        const auto times = grid_times(1.0, 10);
        CHECK_THROWS_AS(integrate_husimi(scenario(FockSpec{2}), 1e-9, times), HusimiZeroError);
        try {
            integrate_husimi(scenario(FockSpec{2}), 1e-9, times);
        } catch (const HusimiZeroError& e) {
            CHECK(std::abs(e.alpha()) <= husimi_zero_guard);
        }
    }

    TEST_CASE("numeric bohm flow") {
        const auto times = grid_times(20.0, 200);
        const auto f = scenario(FockSpec{3}, OscillatorMeasure::PositionProjective);
        const PhaseTrajectory tf = integrate_bohm(f, 0.4, times);
        for (const cplx a : tf.alpha) CHECK(std::abs(a - cplx(0.4 / std::sqrt(2.0), 0.0)) < 1e-10);
        const auto c = scenario(CoherentSpec{cplx(1.0, -0.5)}, OscillatorMeasure::PositionProjective);
        const PhaseTrajectory tc = integrate_bohm(c, -0.2, times);
        CHECK(relative_deviation(tc, closed_form_trajectory(c, tc.alpha.front(), times)) < 1e-6);
        CHECK_THROWS_AS(integrate_bohm(scenario(FockSpec{1}, OscillatorMeasure::PositionProjective), 0.0, times),
                        NodeError);
    }

    TEST_CASE("distances") {
        const auto times = grid_times(2.0 * std::numbers::pi, 200);
        const int n = 9;
        const auto h = scenario(FockSpec{n});
        CHECK(classical_distance(closed_form_trajectory(h, std::polar(3.0, 0.3), times), 1.0) < 1e-12);
        const auto p = scenario(FockSpec{n}, OscillatorMeasure::PositionProjective);
        CHECK(classical_distance(closed_form_trajectory(p, 1.5, times), 1.0) == doctest::Approx(2.0).epsilon(1e-3));
        const cplx beta(1.0, 1.0);
        const auto c = scenario(CoherentSpec{beta});
        CHECK(classical_distance(closed_form_trajectory(c, beta, times), 1.0) < 1e-14);

        PhaseTrajectory a{{0.0, 1.0}, {1.0, 2.0}}, b{{0.0, 1.0}, {1.0, 4.0}};
        CHECK(relative_deviation(a, b) == doctest::Approx(0.5));
    }

    TEST_CASE("husimi amplitude") {
        CHECK(std::abs(husimi_amplitude(0.0, 0.0, fock_vector(0, 8)) - 1.0 / std::sqrt(std::numbers::pi)) < 1e-15);

        const int d = 12;
        std::mt19937_64 gen(31);
        CVector c = CVector::Zero(d);
        c.head(6) = testing::random_vector(gen, 6);
        c.normalize();
        const double radius = std::sqrt(64.0);
        double total = 0.0;
        for (auto [r, wr] : oracle::gauss_legendre(120, 0.0, radius)) {
            const int nth = 128;
            for (int k = 0; k < nth; ++k) {
                const cplx a = std::polar(r, 2.0 * oracle::pi * k / nth);
                total += wr * r * (2.0 * oracle::pi / nth) * husimi_density(a, c);
            }
        }
        CHECK(std::abs(total - 1.0) < 1e-6);
    }

    TEST_CASE("husimi amplitude matches the phase-point overlap integral") {
        std::mt19937_64 gen(77);
        std::uniform_real_distribution<double> u(-2.0, 2.0);
        double worst = 0.0;
        for (int k = 0; k < 20; ++k) {
            const int support = 1 + k % 6;
            CVector c = CVector::Zero(16);
            c.head(support) = testing::random_vector(gen, support);
            c.normalize();
            std::vector<cplx> coeffs(c.data(), c.data() + support);
            const double xp = u(gen), ym = u(gen);
            worst = std::max(worst, std::abs(husimi_amplitude(xp, ym, c) - oracle::phase_point_overlap(xp, ym, coeffs)));
        }
        CHECK(worst < 1e-8);
    }

    TEST_CASE("phase-point bra restricted to the aux vacuum is a coherent state") {
        const int d = 24;
        double worst = 0.0;
        for (cplx a : {cplx(0.3, -1.2), cplx(-2.0, 0.5), cplx(1.5, 1.5), cplx(0.0, 0.0)}) {
            const CVector bra = phase_point_bra(a.real(), a.imag(), d, d);
            for (int m = 0; m < 10; ++m)
                worst = std::max(worst, std::abs(std::conj(bra[m * d]) -
                                                  oracle::coherent_amplitude(a, m) / std::sqrt(oracle::pi)));
        }
        CHECK(worst < 1e-10);
    }

    TEST_CASE("enlarged space operators") {
        const int d = 14;
        const EnlargedOperators ops = enlarged_space_operators(d, d);
        const int low = 6;
        // Low-excitation block: product states |k, l> with k, l < low.
        std::vector<int> idx;
        for (int k = 0; k < low; ++k)
            for (int l = 0; l < low; ++l) idx.push_back(k * d + l);
        auto block = [&](const CMatrix& m) {
            CMatrix b(idx.size(), idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (std::size_t j = 0; j < idx.size(); ++j) b(i, j) = m(idx[i], idx[j]);
            return b;
        };
        auto comm = [](const CMatrix& a, const CMatrix& b) { return CMatrix(a * b - b * a); };
        const CMatrix id = CMatrix::Identity(idx.size(), idx.size());
        const cplx i(0.0, 1.0);
        CHECK(max_abs(block(comm(ops.x_plus, ops.y_plus)) - i * id) < 1e-10);
        CHECK(max_abs(block(comm(ops.x_minus, ops.y_minus)) - i * id) < 1e-10);
        CHECK(max_abs(block(comm(ops.x_plus, ops.y_minus))) < 1e-10);
        CHECK(max_abs(block(comm(ops.x_minus, ops.y_plus))) < 1e-10);

        // a^dagger a = ((x+ + x-)^2 + (y+ + y-)^2)/4 - 1/2.
        const CMatrix xs = ops.x_plus + ops.x_minus, ys = ops.y_plus + ops.y_minus;
        const CMatrix rebuilt = (xs * xs + ys * ys) / 4.0 - 0.5 * CMatrix::Identity(d * d, d * d);
        CHECK(max_abs(block(rebuilt - ops.number_uni)) < 1e-10);

        std::mt19937_64 gen(8);
        CVector c = CVector::Zero(d);
        c.head(5) = testing::random_vector(gen, 5);
        c.normalize();
        const CVector phi = kron(c, fock_vector(0, d));
        const double xu = fock::position(d).expectation(PureState(c));
        const CMatrix xu2 = fock::position(d).matrix() * fock::position(d).matrix();
        const double xx = (c.adjoint() * xu2 * c).value().real();
        CHECK(std::abs((phi.adjoint() * ops.x_plus * phi).value().real() - xu / std::sqrt(2.0)) < 1e-12);
        CHECK(std::abs((phi.adjoint() * ops.x_plus * ops.x_plus * phi).value().real() - (xx / 2.0 + 0.25)) < 1e-12);
    }

    TEST_CASE("husimi drift equals the velocity-operator pipeline") {
        const int d = 24;
        const EnlargedOperators ops = enlarged_space_operators(d, d);
        std::mt19937_64 gen(19);
        std::normal_distribution<double> g;
        double worst = 0.0;
        for (int k = 0; k < 100; ++k) {
            CVector c = CVector::Zero(d);
            c.head(d / 2) = testing::random_vector(gen, d / 2);
            c.normalize();
            const cplx a(g(gen), g(gen));
            const double omega = 0.5 + k % 3;
            const cplx r = husimi_rhs(a, c, omega);
            worst = std::max(worst, std::abs(r - husimi_rhs_enlarged(a, c, omega, ops)) / std::max(1.0, std::abs(r)));
        }
        CHECK(worst < 1e-6);
    }

    TEST_CASE("guiding state conserves energy") {
        const CVector c0 = make_state(CoherentSpec{cplx(1.5, 0.5)}, 48).amplitudes();
        auto energy = [](const CVector& c) {
            double e = 0.0;
            for (Eigen::Index m = 0; m < c.size(); ++m) e += m * std::norm(c[m]);
            return e;
        };
        for (double t : {0.3, 4.0, 19.0}) CHECK(std::abs(energy(evolve_fock(c0, 1.1, t)) - energy(c0)) < 1e-10);
    }

    TEST_CASE("number-state husimi samples follow the radial density") {
        const int n = 3, count = 200000;
        const InitialSamples s = sample_initial(scenario(FockSpec{n}), count, 5);
        REQUIRE(s.alpha.size() == static_cast<std::size_t>(count));
        CHECK(s.acceptance > 0.01);
        double mean = 0.0;
        const int bins = 16;
        const double width = 0.75;
        std::vector<int> hist(bins, 0);
        for (const cplx a : s.alpha) {
            const double r = std::norm(a);
            mean += r;
            const int b = static_cast<int>(r / width);
            if (b < bins) ++hist[b];
        }
        mean /= count;
        CHECK(std::abs(mean - (n + 1)) < 4.0 * std::sqrt((n + 1.0) / count));
        int mode = 0;
        for (int b = 0; b < bins; ++b) {
            const double p = gamma_cdf(n, (b + 1) * width) - gamma_cdf(n, b * width);
            CHECK(std::abs(hist[b] / double(count) - p) < 4.0 * std::sqrt(p * (1 - p) / count) + 1.0 / count);
            if (hist[b] > hist[mode]) mode = b;
        }
        CHECK(std::abs((mode + 0.5) * width - n) <= width);
        CHECK(oracle::husimi_number_density(n, s.alpha[0]) == doctest::Approx(husimi_density(s.alpha[0], fock_vector(n, 64))));
    }

    TEST_CASE("vacuum husimi samples are complex gaussian") {
        const int count = 100000;
        const InitialSamples s = sample_initial(scenario(FockSpec{0}), count, 8);
        double mx = 0, my = 0, vx = 0, vy = 0;
        for (const cplx a : s.alpha) mx += a.real(), my += a.imag();
        mx /= count, my /= count;
        for (const cplx a : s.alpha) vx += std::pow(a.real() - mx, 2), vy += std::pow(a.imag() - my, 2);
        vx /= count, vy /= count;
        const double sm = 4.0 * std::sqrt(0.5 / count), sv = 4.0 * 0.5 * std::sqrt(2.0 / count);
        CHECK(std::abs(mx) < sm);
        CHECK(std::abs(my) < sm);
        CHECK(std::abs(vx - 0.5) < sv);
        CHECK(std::abs(vy - 0.5) < sv);
    }

    TEST_CASE("coherent position samples") {
        const cplx beta(1.2, -0.7);
        const int count = 100000;
        const auto sc = scenario(CoherentSpec{beta}, OscillatorMeasure::PositionProjective);
        const InitialSamples s = sample_initial(sc, count, 2);
        const auto [mu, var] = oracle::coherent_position_moments(beta);
        double m = 0, v = 0;
        for (double x : s.x) m += x;
        m /= count;
        for (double x : s.x) v += (x - m) * (x - m);
        v /= count;
        CHECK(std::abs(m - mu) < 4.0 * std::sqrt(var / count));
        CHECK(std::abs(v - var) < 4.0 * var * std::sqrt(2.0 / count));
        // alpha carries the local momentum sqrt2 Im beta.
        CHECK(s.alpha[0].imag() == doctest::Approx(beta.imag()).epsilon(1e-8));
        const InitialSamples again = sample_initial(sc, 100, 2);
        CHECK(std::equal(again.x.begin(), again.x.end(), s.x.begin()));
    }

    TEST_CASE("husimi density is transported by the flow") {
        const cplx beta(1.0, 0.5);
        const double omega = 1.0, t = 1.5;
        const int count = 10000;
        const auto sc = scenario(CoherentSpec{beta}, OscillatorMeasure::HusimiPOM, omega);
        const InitialSamples s = sample_initial(sc, count, 13);
        const std::vector<double> times{0.0, t};
        double mx = 0, my = 0, vx = 0, vy = 0;
        std::vector<cplx> end;
        for (const cplx a0 : s.alpha) end.push_back(integrate_husimi(sc, a0, times).alpha.back());
        for (const cplx a : end) mx += a.real(), my += a.imag();
        mx /= count, my /= count;
        for (const cplx a : end) vx += std::pow(a.real() - mx, 2), vy += std::pow(a.imag() - my, 2);
        vx /= count, vy /= count;
        // Q of |beta e^{-i w t}> has mean beta e^{-i w t} and variance 1/2 per quadrature.
        const cplx centre = beta * std::polar(1.0, -omega * t);
        const double sm = 4.0 * std::sqrt(0.5 / count), sv = 4.0 * 0.5 * std::sqrt(2.0 / count);
        CHECK(std::abs(mx - centre.real()) < sm);
        CHECK(std::abs(my - centre.imag()) < sm);
        CHECK(std::abs(vx - 0.5) < sv);
        CHECK(std::abs(vy - 0.5) < sv);
    }

    TEST_CASE("classical limit report") {
        const ClassicalLimitReport h = classical_limit_report(OscillatorMeasure::HusimiPOM, {1, 4, 16}, 1.0, 40, 3);
        REQUIRE(h.rows.size() == 3);
        CHECK(h.median_decreasing());
        for (const auto& r : h.rows) {
            CHECK(r.distances.size() == 40);
            CHECK(r.initial_abs2.size() == 40);
            CHECK(r.lower_quartile <= r.median);
            CHECK(r.median <= r.upper_quartile);
        }
        const ClassicalLimitReport p =
            classical_limit_report(OscillatorMeasure::PositionProjective, {1, 4}, 1.0, 40, 3);
        CHECK(p.min_median() > 0.5);
        const json j = h.to_json();
        CHECK(j["scenario"] == "husimi_fock");
        CHECK(j["rows"][0].contains("median_distance"));
        CHECK(j["rows"][0]["quartiles"].size() == 2);
        CHECK(j["rows"][1]["n_or_beta"] == 4);
    }
}
