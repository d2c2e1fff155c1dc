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

#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace modalflow {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
   public:
    using Error::Error;
};

class HermiticityError : public Error {
   public:
    using Error::Error;
};

class NormalizationError : public Error {
   public:
    using Error::Error;
};

class TruncationError : public Error {
   public:
    using Error::Error;
};

class MeasureKindError : public Error {
   public:
    using Error::Error;
};

/// A nonzero current leaves an outcome whose probability is below p_floor.
class StarvedSourceError : public Error {
   public:
    StarvedSourceError(const std::string& what, int source, int target)
        : Error(what), source_(source), target_(target) {}
    int source() const { return source_; }
    int target() const { return target_; }

   private:
    int source_;
    int target_;
};

class StepSizeError : public Error {
   public:
    using Error::Error;
};

class UnsupportedScenarioError : public Error {
   public:
    using Error::Error;
};

class EnvelopeError : public Error {
   public:
    using Error::Error;
};

/// A right-hand side left its domain; integrators localize and rethrow.
class TrajectoryStop : public Error {
   public:
    using Error::Error;
};

/// Raised when an integration reaches a zero of the guiding amplitude.
/// Carries the trajectory accepted up to that point.
template <typename Sample>
class TrajectoryInterrupted : public TrajectoryStop {
   public:
    TrajectoryInterrupted(const std::string& what, double location_re, double location_im,
                          double time, std::vector<double> times, std::vector<Sample> samples)
        : TrajectoryStop(what),
          location_(location_re, location_im),
          time_(time),
          times_(std::move(times)),
          samples_(std::move(samples)) {}

    std::complex<double> location() const { return location_; }
    double time() const { return time_; }
    const std::vector<double>& partial_times() const { return times_; }
    const std::vector<Sample>& partial_samples() const { return samples_; }

   private:
    std::complex<double> location_;
    double time_;
    std::vector<double> times_;
    std::vector<Sample> samples_;
};

/// Density below density_floor at a position-representation point.
class NodeError : public TrajectoryInterrupted<double> {
   public:
    NodeError(const std::string& what, double x, double time = 0.0,
              std::vector<double> times = {}, std::vector<double> xs = {})
        : TrajectoryInterrupted<double>(what, x, 0.0, time, std::move(times), std::move(xs)) {}
    double x() const { return location().real(); }
};

/// Husimi amplitude vanishes (numerically) at a phase-space point.
class HusimiZeroError : public TrajectoryInterrupted<std::complex<double>> {
   public:
    HusimiZeroError(const std::string& what, std::complex<double> alpha, double time = 0.0,
                    std::vector<double> times = {}, std::vector<std::complex<double>> alphas = {})
        : TrajectoryInterrupted<std::complex<double>>(what, alpha.real(), alpha.imag(), time,
                                                      std::move(times), std::move(alphas)) {}
    std::complex<double> alpha() const { return location(); }
};

}  // namespace modalflow
