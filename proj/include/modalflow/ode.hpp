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

// Adaptive Dormand-Prince 5(4) integrator for scalar real or complex ODEs,
// with the fourth-order continuous extension for output between steps.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "modalflow/errors.hpp"

namespace modalflow {

struct OdeOptions {
    double rtol = 1e-11;
    double atol = 1e-11;
    /// Initial step; 0 picks one from the tolerances.
    double h0 = 0.0;
    double h_max = 0.0;
    double h_min = 1e-13;
    long max_steps = 5'000'000;
    /// Steps are shrunk to this length (relative to max(1, |t|)) before a
    /// TrajectoryStop raised by the right-hand side is propagated.
    double stop_resolution = 1e-6;
};

struct OdeStats {
    long accepted = 0;
    long rejected = 0;
    long evaluations = 0;
};

namespace detail {

inline double magnitude(double v) { return std::abs(v); }
inline double magnitude(std::complex<double> v) { return std::abs(v); }

}  // namespace detail

/// Integrates dy/dt = f(t, y) from (t0, y0) and samples y at increasing
/// `times` (all >= t0). Samples are appended to `out` as they become
/// available, so an exception thrown by f leaves the samples reached so
/// far in `out`.
template <typename Y, typename F>
OdeStats integrate_dopri(F&& f, double t0, Y y0, const std::vector<double>& times, std::vector<Y>& out,
                         const OdeOptions& opt = {}) {
    // Dormand-Prince coefficients.
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                     a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                     e6 = 22.0 / 525, e7 = -1.0 / 40;
    constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                     d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                     d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

    OdeStats stats;
    size_t next = 0;
    while (next < times.size() && times[next] <= t0) {
        out.push_back(y0);
        ++next;
    }
    if (next == times.size()) return stats;

    const double t_end = times.back();
    double t = t0;
    Y y = y0;
    Y k1 = f(t, y);
    ++stats.evaluations;

    double h = opt.h0;
    if (h <= 0.0) {
        // Hairer-Norsett-Wanner starting step.
        const double scale = opt.atol + opt.rtol * detail::magnitude(y);
        const double n0 = detail::magnitude(y) / scale;
        const double n1 = detail::magnitude(k1) / scale;
        double h0 = (n0 < 1e-5 || n1 < 1e-5) ? 1e-6 : 0.01 * n0 / n1;
        h0 = std::min(h0, t_end - t);
        const Y k_probe = f(t + h0, y + h0 * k1);
        ++stats.evaluations;
        const double n2 = detail::magnitude(k_probe - k1) / scale / h0;
        const double dm = std::max(n1, n2);
        const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
        h = std::min({100.0 * h0, h1, t_end - t});
    }
    const double h_max = opt.h_max > 0.0 ? opt.h_max : (t_end - t0);

    while (next < times.size()) {
        if (stats.accepted + stats.rejected > opt.max_steps)
            throw StepSizeError("integrate_dopri: step budget exhausted");
        h = std::min({h, h_max, t_end - t});
        if (h < opt.h_min * std::max(1.0, std::abs(t))) throw StepSizeError("integrate_dopri: step size underflow");

        const double t_new = (t + h >= t_end - 1e-15 * std::max(1.0, std::abs(t_end))) ? t_end : t + h;
        Y k2, k3, k4, k5, k6, y_new, k7;
        try {
            k2 = f(t + c2 * h, y + h * (a21 * k1));
            k3 = f(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
            k4 = f(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
            k5 = f(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
            k6 = f(t_new, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
            y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            k7 = f(t_new, y_new);
        } catch (const TrajectoryStop&) {
            // A trial stage left the field's domain: shrink until the stop is
            // localized in time.
            if (h <= opt.stop_resolution * std::max(1.0, std::abs(t))) throw;
            ++stats.rejected;
            h *= 0.25;
            continue;
        }
        stats.evaluations += 6;

        const Y err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const double scale =
            opt.atol + opt.rtol * std::max(detail::magnitude(y), detail::magnitude(y_new));
        const double ratio = detail::magnitude(err) / scale;

        if (ratio <= 1.0) {
            ++stats.accepted;
            if (next < times.size() && times[next] <= t_new) {
                // Fourth-order continuous extension of Dormand-Prince.
                const Y ydiff = y_new - y;
                const Y bspl = h * k1 - ydiff;
                const Y r4 = ydiff - h * k7 - bspl;
                const Y r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
                while (next < times.size() && times[next] <= t_new) {
                    if (times[next] == t_new) {
                        out.push_back(y_new);
                    } else {
                        const double th = (times[next] - t) / h;
                        const double th1 = 1.0 - th;
                        out.push_back(y + th * (ydiff + th1 * (bspl + th * (r4 + th1 * r5))));
                    }
                    ++next;
                }
            }
            t = t_new;
            y = y_new;
            k1 = k7;
            const double grow = ratio > 0.0 ? 0.9 * std::pow(ratio, -0.2) : 5.0;
            h *= std::clamp(grow, 0.2, 5.0);
        } else {
            ++stats.rejected;
            h *= std::max(0.2, 0.9 * std::pow(ratio, -0.2));
        }
    }
    return stats;
}

}  // namespace modalflow
