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

// Bell jump process for projective measures: probability currents, rates,
// master-equation checks and Monte Carlo ensembles.

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Sparse>

#include "modalflow/hilbert.hpp"

namespace modalflow {

inline constexpr double p_floor = 1e-12;

using SparseR = Eigen::SparseMatrix<double>;
using SparseC = Eigen::SparseMatrix<cplx>;

/// Antisymmetric current J_nm: probability per unit time flowing into n
/// from m. Stored sparse; the lower triangle is the exact negation of the
/// upper one.
class CurrentMatrix {
   public:
    CurrentMatrix() = default;
    explicit CurrentMatrix(int size);

    /// Entries (n, m, J_nm) with n < m.
    static CurrentMatrix from_upper(int size, const std::vector<Eigen::Triplet<double>>& upper);
    /// Throws Error unless j is antisymmetric within 1e-12.
    static CurrentMatrix from_dense(const RMatrix& j);

    int size() const { return static_cast<int>(j_.rows()); }
    double operator()(int n, int m) const { return j_.coeff(n, m); }
    const SparseR& matrix() const { return j_; }
    RMatrix dense() const { return RMatrix(j_); }
    /// sum_m J_nm = d_t P_n.
    RVector row_sums() const;
    double max_abs() const;

   private:
    SparseR j_;
};

/// T(n, m) is the rate of jumps m -> n. Diagonal unused.
class RateMatrix {
   public:
    RateMatrix() = default;
    explicit RateMatrix(SparseR t) : t_(std::move(t)) {}

    int size() const { return static_cast<int>(t_.rows()); }
    double operator()(int n, int m) const { return t_.coeff(n, m); }
    const SparseR& matrix() const { return t_; }
    RMatrix dense() const { return RMatrix(t_); }
    /// Total rate of leaving each outcome (column sums).
    RVector out_rates() const;

   private:
    SparseR t_;
};

/// J_nm = 2 Im <Psi|pi_n (H - R) pi_m|Psi>. R defaults to the measure's
/// generator when present. Throws MeasureKindError for POMs.
CurrentMatrix probability_current(const PureState& state, const MeasureSet& m, const HermitianOperator& h,
                                  const std::optional<HermitianOperator>& r = std::nullopt);

/// Current from basis coefficients c_k (outcome labels per basis vector) and
/// the Hamiltonian G in the same basis.
CurrentMatrix current_from_coefficients(const CVector& c, const SparseC& g, const std::vector<int>& outcome,
                                        int outcome_count);

enum class Starvation {
    /// Throw StarvedSourceError.
    Throw,
    /// Leave the pair's rates at zero and count it.
    Skip,
};

/// Bell's solution: J_nm < 0 gives T_mn = -J_nm / P_n, J_nm > 0 gives
/// T_nm = J_nm / P_m. A nonzero current out of an outcome with P below
/// p_floor is starved.
RateMatrix bell_rates(const CurrentMatrix& j, const std::vector<double>& p, Starvation policy = Starvation::Throw,
                      int* starved_pairs = nullptr);

/// pi_n -> U pi_n U^dagger with U = exp(-i R dt).
MeasureSet measure_generator(const MeasureSet& m, const HermitianOperator& r, double dt);

/// max_n |d_t P_n - sum_m J_nm| over interior points of a uniformly spaced
/// state path, with centered differences for d_t P_n. When R is given the
/// measure at sample k is the generator-advanced measure at k * dt.
double master_residual(const std::vector<PureState>& path, double dt, const MeasureSet& m,
                       const HermitianOperator& h, const std::optional<HermitianOperator>& r = std::nullopt);

struct JumpModel {
    HermitianOperator hamiltonian;
    /// Projective measure; its generator (if any) rotates the projectors.
    MeasureSet measure;
    PureState initial;
};

/// Guiding state and measure along the exact Schrodinger evolution.
class GuidingEvolution {
   public:
    explicit GuidingEvolution(const JumpModel& model);

    int outcome_count() const { return outcome_count_; }
    /// Coefficients of Psi(t) in the measure basis at time t.
    CVector coefficients(double t) const;
    std::vector<double> probabilities(double t) const;
    CurrentMatrix current(double t) const;

    /// Current on the fixed outcome-pair list in one allocation-free pass.
    /// `pair_current[q]` is J for pairs()[q] = (n, m), n < m.
    void evaluate(double t, std::vector<double>& probabilities, std::vector<double>& pair_current) const;
    const std::vector<std::pair<int, int>>& pairs() const { return pairs_; }

   private:
    struct Link {
        int k, l, pair;
        cplx g;
        bool flipped;
    };
    void build_links(const CMatrix& g);

    std::vector<int> outcome_;
    int outcome_count_ = 0;
    int dim_ = 0;
    // Static frame: c(t) = W exp(-i Lambda t) d0.
    bool rotating_ = false;
    RVector eigenvalues_;
    CMatrix w_;
    CVector d0_;
    std::vector<Link> links_;
    std::vector<std::pair<int, int>> pairs_;
    // Rotating frame.
    std::optional<Propagator> h_prop_;
    std::optional<Propagator> r_prop_;
    CMatrix basis0_;
    CMatrix h_minus_r_;
    CVector psi0_;
};

/// Occupied outcome history of one trajectory: the initial outcome at t = 0
/// followed by every jump.
struct JumpTrajectory {
    std::uint64_t seed = 0;
    std::vector<double> times;
    std::vector<int> indices;
    std::vector<cplx> values;
};

enum class JumpScheme {
    /// One Bernoulli trial with probability T_out h per step.
    Bernoulli,
    /// Exact jumps of the chain with rates frozen at the step midpoint.
    Exponential,
};

struct EnsembleOptions {
    double t_max = 1.0;
    double dt = 0.01;
    long count = 1000;
    std::uint64_t seed = 0;
    /// Occupation is recorded every `record_every` steps.
    int record_every = 1;
    /// Number of full trajectories returned (lowest ids).
    int keep_trajectories = 4;
    /// Start every trajectory in this outcome instead of sampling Born.
    std::optional<int> initial_index;
    JumpScheme scheme = JumpScheme::Exponential;
    /// Steps are halved while h * (largest occupied out-rate) >= max_rate_step.
    double max_rate_step = 0.1;
    int max_refinement_depth = 40;
    /// 0 picks MODALFLOW_THREADS or the hardware concurrency.
    int threads = 0;
};

struct EnsembleDiagnostics {
    long jumps = 0;
    /// Jumps forced out of occupied outcomes whose probability fell below
    /// p_floor while current still flowed out.
    long forced_jumps = 0;
    long starved_events = 0;
    long refinements = 0;
    int max_depth = 0;
};

class EnsembleStats {
   public:
    EnsembleStats() = default;
    EnsembleStats(std::vector<double> times, int outcome_count, long count);

    const std::vector<double>& times() const { return times_; }
    int outcome_count() const { return outcome_count_; }
    long count() const { return count_; }

    long occupation(int k, int n) const { return counts_(k, n); }
    double frequency(int k, int n) const { return static_cast<double>(counts_(k, n)) / count_; }
    /// 4 sigma binomial half-width of the empirical frequency.
    double halfwidth(int k, int n) const;
    /// Ensemble mean of Re z and Im z at sample k.
    cplx mean_value(int k, const std::vector<cplx>& values) const;

    const Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic>& counts() const { return counts_; }
    Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic>& counts() { return counts_; }
    EnsembleDiagnostics diagnostics;

   private:
    std::vector<double> times_;
    int outcome_count_ = 0;
    long count_ = 0;
    Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic> counts_;
};

struct EnsembleResult {
    EnsembleStats stats;
    std::vector<JumpTrajectory> trajectories;
};

EnsembleResult simulate_ensemble(const JumpModel& model, const EnsembleOptions& options);

/// Reference occupation P_n(t_k) of the master equation dP/dt = A(t) P with
/// Bell rates derived from the Born probabilities, integrated by TR-BDF2 on
/// a step of at most `h_max`. Rows are times, columns outcomes.
RMatrix integrate_master_equation(const JumpModel& model, const std::vector<double>& times, double h_max = 1e-3);

struct MasterCheck {
    bool ok = true;
    int worst_time = -1;
    int worst_outcome = -1;
    /// Largest sigma-equivalent deviation over 4; ok iff <= 1.
    double worst_ratio = 0.0;
};

/// Normal deviate z whose one-sided tail Phi(-z) equals the exact binomial
/// tail of observing k of n at probability p, on the side k falls.
double binomial_sigma_equivalent(long k, long n, double p);

/// Compares ensemble frequencies with reference probabilities (same time
/// grid) at the exact binomial equivalent of a 4 sigma confidence bound.
MasterCheck check_against_master(const EnsembleStats& stats, const RMatrix& reference);

int worker_count(int requested);

}  // namespace modalflow
