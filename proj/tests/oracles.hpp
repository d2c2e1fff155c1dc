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


// Reference values computed without the library's series and stencils:
// closed-form wavefunctions, direct quadrature and Gauss-Legendre rules.

#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <utility>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;
inline constexpr double pi = std::numbers::pi;

/// Normalized Hermite function from the physicists' polynomial.
inline double hermite_function(int n, double x) {
    const double norm = std::sqrt(std::ldexp(std::tgamma(n + 1.0), n) * std::sqrt(pi));
    return std::hermite(static_cast<unsigned>(n), x) * std::exp(-x * x / 2.0) / norm;
}

/// Psi(x) = sum_m c_m psi_m(x).
inline cplx wavefunction(const std::vector<cplx>& c, double x) {
    cplx s = 0.0;
    for (std::size_t m = 0; m < c.size(); ++m) s += c[m] * hermite_function(static_cast<int>(m), x);
    return s;
}

/// e^{-|b|^2/2} b^m / sqrt(m!).
inline cplx coherent_amplitude(cplx b, int m) {
    return std::exp(-std::norm(b) / 2.0) * std::pow(b, m) / std::sqrt(std::tgamma(m + 1.0));
}

/// <x+, y-|Psi (x) 0>: the x_c = x+ slice of Psi(x_a) phi_0(x_b) projected on
/// exp(i y- x_d)/sqrt(2 pi), with x_a = (x_c + x_d)/sqrt2, x_b = (x_c - x_d)/sqrt2.
inline cplx phase_point_overlap(double xp, double ym, const std::vector<cplx>& c, double half_width = 14.0,
                                int points = 4001) {
    const double h = 2.0 * half_width / (points - 1);
    cplx s = 0.0;
    for (int k = 0; k < points; ++k) {
        const double xd = -half_width + k * h;
        const double xa = (xp + xd) / std::numbers::sqrt2, xb = (xp - xd) / std::numbers::sqrt2;
        const double w = (k == 0 || k == points - 1) ? 0.5 : 1.0;
        s += w * std::polar(1.0, -ym * xd) * wavefunction(c, xa) * hermite_function(0, xb);
    }
    return s * h / std::sqrt(2.0 * pi);
}

/// Gauss-Legendre nodes and weights on [a, b] by Newton iteration.
inline std::vector<std::pair<double, double>> gauss_legendre(int n, double a, double b) {
    std::vector<std::pair<double, double>> rule;
    for (int i = 1; i <= n; ++i) {
        double z = std::cos(pi * (i - 0.25) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        rule.emplace_back((a + b) / 2.0 + (b - a) / 2.0 * z, w * (b - a) / 2.0);
    }
    return rule;
}

/// Husimi density of |n>: |alpha|^{2n} e^{-|alpha|^2} / (pi n!).
inline double husimi_number_density(int n, cplx a) {
    return std::pow(std::norm(a), n) * std::exp(-std::norm(a)) / (pi * std::tgamma(n + 1.0));
}

/// Mean and variance of x for |<x|beta>|^2.
inline std::pair<double, double> coherent_position_moments(cplx beta) { return {std::sqrt(2.0) * beta.real(), 0.5}; }

}  // namespace oracle
