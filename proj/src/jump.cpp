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

#include "modalflow/jump.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>

#include <Eigen/SparseLU>

#include "modalflow/rng.hpp"

namespace modalflow {

// ---------------------------------------------------------------------------
// CurrentMatrix / RateMatrix

CurrentMatrix::CurrentMatrix(int size) : j_(size, size) {}

CurrentMatrix CurrentMatrix::from_upper(int size, const std::vector<Eigen::Triplet<double>>& upper) {
    std::vector<Eigen::Triplet<double>> all;
    all.reserve(2 * upper.size());
    for (const auto& t : upper) {
        if (t.row() >= t.col()) throw DimensionError("CurrentMatrix::from_upper: entries must satisfy n < m");
        all.emplace_back(t.row(), t.col(), t.value());
    }
    CurrentMatrix c(size);
    SparseR up(size, size);
    up.setFromTriplets(all.begin(), all.end());
    // Negating the summed upper triangle keeps the antisymmetry exact.
    c.j_ = SparseR(up - SparseR(up.transpose()));
    c.j_.prune(0.0);
    return c;
}

CurrentMatrix CurrentMatrix::from_dense(const RMatrix& j) {
    if (j.rows() != j.cols()) throw DimensionError("CurrentMatrix: matrix is not square");
    const double dev = j.size() ? (j + j.transpose()).cwiseAbs().maxCoeff() : 0.0;
    if (dev > 1e-12) {
        std::ostringstream msg;
        msg << "CurrentMatrix: not antisymmetric (max |J + J^T| = " << dev << ")";
        throw Error(msg.str());
    }
    std::vector<Eigen::Triplet<double>> upper;
    for (Eigen::Index m = 0; m < j.cols(); ++m)
        for (Eigen::Index n = 0; n < m; ++n)
            if (j(n, m) != 0.0) upper.emplace_back(n, m, j(n, m));
    return from_upper(static_cast<int>(j.rows()), upper);
}

RVector CurrentMatrix::row_sums() const {
    RVector s = RVector::Zero(size());
    for (int k = 0; k < j_.outerSize(); ++k)
        for (SparseR::InnerIterator it(j_, k); it; ++it) s[it.row()] += it.value();
    return s;
}

double CurrentMatrix::max_abs() const {
    double m = 0.0;
    for (int k = 0; k < j_.outerSize(); ++k)
        for (SparseR::InnerIterator it(j_, k); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
}

RVector RateMatrix::out_rates() const {
    RVector s = RVector::Zero(size());
    for (int k = 0; k < t_.outerSize(); ++k)
        for (SparseR::InnerIterator it(t_, k); it; ++it)
            if (it.row() != it.col()) s[it.col()] += it.value();
    return s;
}

// ---------------------------------------------------------------------------
// Currents and rates

CurrentMatrix current_from_coefficients(const CVector& c, const SparseC& g, const std::vector<int>& outcome,
                                        int outcome_count) {
    if (g.rows() != c.size() || g.cols() != c.size() || static_cast<Eigen::Index>(outcome.size()) != c.size())
        throw DimensionError("current_from_coefficients: dimension mismatch");
    std::vector<Eigen::Triplet<double>> upper;
    for (int l = 0; l < g.outerSize(); ++l) {
        for (SparseC::InnerIterator it(g, l); it; ++it) {
            const int k = static_cast<int>(it.row());
            if (k >= l) continue;
            const int a = outcome[k], b = outcome[l];
            if (a == b) continue;
            const double v = 2.0 * (std::conj(c[k]) * it.value() * c[l]).imag();
            if (a < b)
                upper.emplace_back(a, b, v);
            else
                upper.emplace_back(b, a, -v);
        }
    }
    return CurrentMatrix::from_upper(outcome_count, upper);
}

namespace {

bool is_identity(const CMatrix& u) {
    for (Eigen::Index j = 0; j < u.cols(); ++j)
        for (Eigen::Index i = 0; i < u.rows(); ++i)
            if (u(i, j) != (i == j ? cplx(1.0) : cplx(0.0))) return false;
    return true;
}

SparseC sparse_hermitian(const CMatrix& g) {
    const double scale = g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
    // Rounding noise from basis changes is dropped.
    return g.sparseView(cplx(1.0), 1e-15 * std::max(scale, 1e-300));
}

}  // namespace

CurrentMatrix probability_current(const PureState& state, const MeasureSet& m, const HermitianOperator& h,
                                  const std::optional<HermitianOperator>& r) {
    if (m.kind() != MeasureKind::Projective)
        throw MeasureKindError("probability_current: the measure must be projective");
    if (state.dim() != m.dim() || h.dim() != m.dim())
        throw DimensionError("probability_current: dimension mismatch");
    const auto& gen = r ? r : m.generator();
    if (gen && gen->dim() != m.dim()) throw DimensionError("probability_current: generator dimension mismatch");
    const ProjectiveBasis& basis = m.projective_basis();

    CMatrix op = h.matrix();
    if (gen) op -= gen->matrix();
    if (is_identity(basis.unitary))
        return current_from_coefficients(state.amplitudes(), sparse_hermitian(op), basis.column_outcome, m.size());
    const CVector c = basis.unitary.adjoint() * state.amplitudes();
    const CMatrix g = basis.unitary.adjoint() * op * basis.unitary;
    return current_from_coefficients(c, sparse_hermitian(g), basis.column_outcome, m.size());
}

RateMatrix bell_rates(const CurrentMatrix& j, const std::vector<double>& p, Starvation policy, int* starved_pairs) {
    const int n_out = j.size();
    if (static_cast<int>(p.size()) != n_out) throw DimensionError("bell_rates: probability vector size mismatch");
    for (double v : p)
        if (!(v >= 0.0)) throw Error("bell_rates: probabilities must be non-negative");
    std::vector<Eigen::Triplet<double>> t;
    int starved = 0;
    const SparseR& jm = j.matrix();
    for (int m = 0; m < jm.outerSize(); ++m) {
        for (SparseR::InnerIterator it(jm, m); it; ++it) {
            const int n = static_cast<int>(it.row());
            if (n >= m) continue;
            const double jnm = it.value();
            if (jnm == 0.0) continue;
            // Flow leaves `source` for `target`.
            const int source = jnm < 0 ? n : m;
            const int target = jnm < 0 ? m : n;
            if (p[source] < p_floor) {
                if (policy == Starvation::Throw) {
                    std::ostringstream msg;
                    msg << "bell_rates: current " << std::abs(jnm) << " leaves outcome " << source
                        << " whose probability " << p[source] << " is below p_floor";
                    throw StarvedSourceError(msg.str(), source, target);
                }
                ++starved;
                continue;
            }
            t.emplace_back(target, source, std::abs(jnm) / p[source]);
        }
    }
    if (starved_pairs) *starved_pairs = starved;
    SparseR tm(n_out, n_out);
    tm.setFromTriplets(t.begin(), t.end());
    return RateMatrix(std::move(tm));
}

MeasureSet measure_generator(const MeasureSet& m, const HermitianOperator& r, double dt) {
    if (r.dim() != m.dim()) throw DimensionError("measure_generator: dimension mismatch");
    if (r.is_zero()) return m;
    return m.rotated(Propagator(r).unitary(dt));
}

double master_residual(const std::vector<PureState>& path, double dt, const MeasureSet& m,
                       const HermitianOperator& h, const std::optional<HermitianOperator>& r) {
    if (path.size() < 3) throw DimensionError("master_residual: need at least three samples");
    const auto& gen = r ? r : m.generator();
    std::optional<Propagator> rp;
    if (gen && !gen->is_zero()) rp.emplace(*gen);
    auto measure_at = [&](size_t k) { return rp ? m.rotated(rp->unitary(dt * k)) : m; };

    double worst = 0.0;
    for (size_t k = 1; k + 1 < path.size(); ++k) {
        const auto p_prev = born_probabilities(path[k - 1], measure_at(k - 1));
        const auto p_next = born_probabilities(path[k + 1], measure_at(k + 1));
        const RVector sums = probability_current(path[k], measure_at(k), h, gen).row_sums();
        for (int n = 0; n < m.size(); ++n)
            worst = std::max(worst, std::abs((p_next[n] - p_prev[n]) / (2.0 * dt) - sums[n]));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// GuidingEvolution

GuidingEvolution::GuidingEvolution(const JumpModel& model) {
    const MeasureSet& m = model.measure;
    if (m.kind() != MeasureKind::Projective) throw MeasureKindError("jump model: the measure must be projective");
    if (model.hamiltonian.dim() != m.dim() || model.initial.dim() != m.dim())
        throw DimensionError("jump model: dimension mismatch");
    const ProjectiveBasis& basis = m.projective_basis();
    outcome_ = basis.column_outcome;
    outcome_count_ = m.size();
    dim_ = m.dim();
    rotating_ = m.generator() && !m.generator()->is_zero();

    if (!rotating_) {
        Propagator prop(model.hamiltonian);
        eigenvalues_ = prop.eigenvalues();
        const bool plain = is_identity(basis.unitary);
        w_ = plain ? prop.eigenvectors() : CMatrix(basis.unitary.adjoint() * prop.eigenvectors());
        d0_ = prop.to_eigenbasis(model.initial.amplitudes());
        build_links(plain ? model.hamiltonian.matrix()
                          : CMatrix(basis.unitary.adjoint() * model.hamiltonian.matrix() * basis.unitary));
    } else {
        h_prop_.emplace(model.hamiltonian);
        r_prop_.emplace(*m.generator());
        basis0_ = basis.unitary;
        h_minus_r_ = model.hamiltonian.matrix() - m.generator()->matrix();
        psi0_ = model.initial.amplitudes();
        build_links(CMatrix::Ones(dim_, dim_));
    }
}

void GuidingEvolution::build_links(const CMatrix& g) {
    const double scale = g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
    const double cut = 1e-15 * scale;
    std::unordered_map<long long, int> index;
    for (int l = 0; l < dim_; ++l) {
        for (int k = 0; k < l; ++k) {
            const int a = outcome_[k], b = outcome_[l];
            if (a == b || std::abs(g(k, l)) <= cut) continue;
            const int lo = std::min(a, b), hi = std::max(a, b);
            const long long key = static_cast<long long>(lo) * outcome_count_ + hi;
            auto [it, inserted] = index.try_emplace(key, static_cast<int>(pairs_.size()));
            if (inserted) pairs_.emplace_back(lo, hi);
            links_.push_back({k, l, it->second, g(k, l), a > b});
        }
    }
}

CVector GuidingEvolution::coefficients(double t) const {
    if (!rotating_) {
        CVector phased(d0_.size());
        for (Eigen::Index k = 0; k < d0_.size(); ++k) phased[k] = d0_[k] * std::polar(1.0, -eigenvalues_[k] * t);
        return w_ * phased;
    }
    // c = B0^dagger exp(iRt) exp(-iHt) psi0.
    const CVector psi = h_prop_->apply(psi0_, t);
    return basis0_.adjoint() * r_prop_->apply(psi, -t);
}

std::vector<double> GuidingEvolution::probabilities(double t) const {
    const CVector c = coefficients(t);
    std::vector<double> p(outcome_count_, 0.0);
    for (int k = 0; k < dim_; ++k) p[outcome_[k]] += std::norm(c[k]);
    return p;
}

void GuidingEvolution::evaluate(double t, std::vector<double>& p, std::vector<double>& pair_current) const {
    const CVector c = coefficients(t);
    p.assign(outcome_count_, 0.0);
    for (int k = 0; k < dim_; ++k) p[outcome_[k]] += std::norm(c[k]);
    pair_current.assign(pairs_.size(), 0.0);
    if (!rotating_) {
        for (const Link& link : links_) {
            const double v = 2.0 * (std::conj(c[link.k]) * link.g * c[link.l]).imag();
            pair_current[link.pair] += link.flipped ? -v : v;
        }
        return;
    }
    const CMatrix rot = basis0_.adjoint() * r_prop_->unitary(-t);
    const CMatrix g = rot * h_minus_r_ * rot.adjoint();
    for (const Link& link : links_) {
        const double v = 2.0 * (std::conj(c[link.k]) * g(link.k, link.l) * c[link.l]).imag();
        pair_current[link.pair] += link.flipped ? -v : v;
    }
}

CurrentMatrix GuidingEvolution::current(double t) const {
    std::vector<double> p, pc;
    evaluate(t, p, pc);
    std::vector<Eigen::Triplet<double>> upper;
    upper.reserve(pairs_.size());
    for (size_t q = 0; q < pairs_.size(); ++q)
        if (pc[q] != 0.0) upper.emplace_back(pairs_[q].first, pairs_[q].second, pc[q]);
    return CurrentMatrix::from_upper(outcome_count_, upper);
}

// ---------------------------------------------------------------------------
// Ensemble statistics

EnsembleStats::EnsembleStats(std::vector<double> times, int outcome_count, long count)
    : times_(std::move(times)), outcome_count_(outcome_count), count_(count) {
    counts_.setZero(static_cast<Eigen::Index>(times_.size()), outcome_count);
}

double EnsembleStats::halfwidth(int k, int n) const {
    const double f = frequency(k, n);
    return 4.0 * std::sqrt(f * (1.0 - f) / static_cast<double>(count_));
}

cplx EnsembleStats::mean_value(int k, const std::vector<cplx>& values) const {
    cplx s = 0.0;
    for (int n = 0; n < outcome_count_; ++n) {
        if (counts_(k, n) == 0) continue;
        s += frequency(k, n) * values[n];
    }
    return s;
}

int worker_count(int requested) {
    int n = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("MODALFLOW_THREADS")) {
        const int cap = std::atoi(env);
        if (cap > 0) n = std::min(n, cap);
    }
    return std::max(1, n);
}

// ---------------------------------------------------------------------------
// Ensemble engine

namespace {

struct StepRates {
    std::vector<double> p;
    std::vector<double> pair_current;
    std::vector<double> outflow;   // total current leaving each outcome
    std::vector<double> out_rate;  // outflow / P, zero when starved
};

class EnsembleEngine {
   public:
    EnsembleEngine(const JumpModel& model, const EnsembleOptions& opt)
        : opt_(opt), guide_(model), values_(model.measure.values()) {
        const int n_out = guide_.outcome_count();
        adjacency_.resize(n_out);
        const auto& pairs = guide_.pairs();
        for (size_t q = 0; q < pairs.size(); ++q) {
            adjacency_[pairs[q].first].push_back(static_cast<int>(q));
            adjacency_[pairs[q].second].push_back(static_cast<int>(q));
        }
        threads_ = worker_count(opt.threads);
    }

    EnsembleResult run(const PureState& initial) {
        const long count = opt_.count;
        if (count <= 0) throw Error("simulate_ensemble: count must be positive");
        if (!(opt_.dt > 0.0) || !(opt_.t_max >= 0.0)) throw StepSizeError("simulate_ensemble: invalid dt or t_max");
        if (opt_.record_every < 1) throw Error("simulate_ensemble: record_every must be >= 1");
        const int n_out = guide_.outcome_count();
        if (opt_.initial_index && (*opt_.initial_index < 0 || *opt_.initial_index >= n_out))
            throw DimensionError("simulate_ensemble: initial_index out of range");

        const long steps = opt_.t_max == 0.0 ? 0 : std::max<long>(1, static_cast<long>(std::ceil(opt_.t_max / opt_.dt - 1e-9)));
        const double h = steps ? opt_.t_max / steps : 0.0;
        std::vector<double> times;
        for (long s = 0; s <= steps; ++s)
            if (s % opt_.record_every == 0 || s == steps) times.push_back(s * h);

        EnsembleResult result;
        result.stats = EnsembleStats(times, n_out, count);

        site_.resize(count);
        rng_.clear();
        rng_.reserve(count);
        const auto p0 = guide_.probabilities(0.0);
        std::vector<double> cdf(n_out);
        std::partial_sum(p0.begin(), p0.end(), cdf.begin());
        for (long id = 0; id < count; ++id) {
            rng_.emplace_back(derive_seed(opt_.seed, static_cast<std::uint64_t>(id)));
            if (opt_.initial_index) {
                site_[id] = *opt_.initial_index;
            } else {
                const double u = rng_[id].uniform() * cdf.back();
                int n = static_cast<int>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
                n = std::min(n, n_out - 1);
                while (n > 0 && p0[n] == 0.0) --n;
                site_[id] = n;
            }
        }

        const long kept = std::min<long>(opt_.keep_trajectories, count);
        kept_.assign(kept, JumpTrajectory{});
        for (long id = 0; id < kept; ++id) {
            kept_[id].seed = derive_seed(opt_.seed, static_cast<std::uint64_t>(id));
            push_event(id, 0.0, site_[id]);
        }

        occupancy_.assign(n_out, 0);
        for (long id = 0; id < count; ++id) ++occupancy_[site_[id]];

        size_t rec = 0;
        auto record = [&](long s) {
            if (rec < times.size() && std::abs(times[rec] - s * h) <= 1e-12 * std::max(1.0, opt_.t_max)) {
                for (int n = 0; n < n_out; ++n) result.stats.counts()(static_cast<Eigen::Index>(rec), n) = occupancy_[n];
                ++rec;
            }
        };
        record(0);
        for (long s = 0; s < steps; ++s) {
            advance(s * h, h, 0);
            record(s + 1);
        }
        result.stats.diagnostics = diag_;
        result.trajectories = std::move(kept_);
        return result;
    }

   private:
    void push_event(long id, double t, int n) {
        auto& tr = kept_[id];
        tr.times.push_back(t);
        tr.indices.push_back(n);
        tr.values.push_back(values_[n]);
    }

    void compute_rates(double t, StepRates& r) const {
        guide_.evaluate(t, r.p, r.pair_current);
        const int n_out = guide_.outcome_count();
        r.outflow.assign(n_out, 0.0);
        const auto& pairs = guide_.pairs();
        for (size_t q = 0; q < pairs.size(); ++q) {
            const double j = r.pair_current[q];
            if (j > 0.0)
                r.outflow[pairs[q].second] += j;
            else if (j < 0.0)
                r.outflow[pairs[q].first] -= j;
        }
        r.out_rate.assign(n_out, 0.0);
        for (int n = 0; n < n_out; ++n)
            if (r.p[n] >= p_floor) r.out_rate[n] = r.outflow[n] / r.p[n];
    }

    // Destination for a jump out of `src`, chosen with probability
    // proportional to the current leaving along each pair.
    int pick_destination(int src, const StepRates& r, double u) const {
        const auto& pairs = guide_.pairs();
        double target = u * r.outflow[src];
        int last = -1;
        for (int q : adjacency_[src]) {
            const double j = r.pair_current[q];
            const bool out = pairs[q].first == src ? j < 0.0 : j > 0.0;
            if (!out) continue;
            const int other = pairs[q].first == src ? pairs[q].second : pairs[q].first;
            last = other;
            target -= std::abs(j);
            if (target < 0.0) return other;
        }
        return last;
    }

    void advance(double t, double h, int depth) {
        StepRates r;
        compute_rates(t + 0.5 * h, r);
        const int n_out = guide_.outcome_count();
        double max_rate = 0.0;
        bool starved = false;
        for (int n = 0; n < n_out; ++n) {
            if (occupancy_[n] == 0) continue;
            if (r.p[n] < p_floor) {
                if (r.outflow[n] > 0.0) starved = true;
                continue;
            }
            max_rate = std::max(max_rate, r.out_rate[n]);
        }
        if (h * max_rate >= opt_.max_rate_step) {
            if (depth >= opt_.max_refinement_depth) {
                std::ostringstream msg;
                msg << "simulate_ensemble: step " << h << " at t = " << t << " still has rate*h = " << h * max_rate
                    << " after " << depth << " refinements";
                throw StepSizeError(msg.str());
            }
            ++diag_.refinements;
            diag_.max_depth = std::max(diag_.max_depth, depth + 1);
            advance(t, 0.5 * h, depth + 1);
            advance(t + 0.5 * h, 0.5 * h, depth + 1);
            return;
        }
        if (starved)
            for (int n = 0; n < n_out; ++n)
                if (occupancy_[n] > 0 && r.p[n] < p_floor && r.outflow[n] > 0.0) ++diag_.starved_events;
        if (max_rate == 0.0 && !starved) return;

        const long count = opt_.count;
        const int workers = (threads_ > 1 && count >= 8192) ? threads_ : 1;
        std::vector<EnsembleDiagnostics> local(workers);
        auto work = [&](int w) {
            const long lo = count * w / workers, hi = count * (w + 1) / workers;
            for (long id = lo; id < hi; ++id) step_trajectory(id, t, h, r, local[w]);
        };
        if (workers == 1) {
            work(0);
        } else {
            std::vector<std::thread> pool;
            for (int w = 1; w < workers; ++w) pool.emplace_back(work, w);
            work(0);
            for (auto& th : pool) th.join();
        }
        for (const auto& d : local) {
            diag_.jumps += d.jumps;
            diag_.forced_jumps += d.forced_jumps;
        }
        std::fill(occupancy_.begin(), occupancy_.end(), 0);
        for (long id = 0; id < count; ++id) ++occupancy_[site_[id]];
    }

    void step_trajectory(long id, double t, double h, const StepRates& r, EnsembleDiagnostics& d) {
        int src = site_[id];
        StreamRng& rng = rng_[id];
        const bool kept = id < static_cast<long>(kept_.size());
        auto jump = [&](int dest, double when) {
            src = dest;
            ++d.jumps;
            if (kept) push_event(id, when, dest);
        };

        double elapsed = 0.0;
        if (r.p[src] < p_floor && r.outflow[src] > 0.0) {
            ++d.forced_jumps;
            jump(pick_destination(src, r, rng.uniform()), t);
            if (opt_.scheme == JumpScheme::Bernoulli) {
                site_[id] = src;
                return;
            }
        }

        if (opt_.scheme == JumpScheme::Bernoulli) {
            const double rate = r.out_rate[src];
            if (rate > 0.0 && rng.uniform() < rate * h) jump(pick_destination(src, r, rng.uniform()), t + h);
            site_[id] = src;
            return;
        }

        for (int guard = 0;; ++guard) {
            const double rate = r.out_rate[src];
            if (rate <= 0.0) break;
            const double wait = -std::log1p(-rng.uniform()) / rate;
            if (elapsed + wait >= h) break;
            elapsed += wait;
            if (guard > 100000) throw StepSizeError("simulate_ensemble: runaway jump sequence within a step");
            jump(pick_destination(src, r, rng.uniform()), t + elapsed);
        }
        site_[id] = src;
    }

    EnsembleOptions opt_;
    GuidingEvolution guide_;
    std::vector<cplx> values_;
    std::vector<std::vector<int>> adjacency_;
    int threads_ = 1;
    std::vector<int> site_;
    std::vector<StreamRng> rng_;
    std::vector<long> occupancy_;
    std::vector<JumpTrajectory> kept_;
    EnsembleDiagnostics diag_;
};

}  // namespace

EnsembleResult simulate_ensemble(const JumpModel& model, const EnsembleOptions& options) {
    EnsembleEngine engine(model, options);
    return engine.run(model.initial);
}

// ---------------------------------------------------------------------------
// Master-equation reference

namespace {

// Generator A with dP/dt = A P from Bell rates at the Born probabilities.
SparseR bell_generator(const GuidingEvolution& guide, double t) {
    std::vector<double> p, pc;
    guide.evaluate(t, p, pc);
    const auto& pairs = guide.pairs();
    const int n_out = guide.outcome_count();
    std::vector<Eigen::Triplet<double>> trip;
    RVector diag = RVector::Zero(n_out);
    for (size_t q = 0; q < pairs.size(); ++q) {
        const double j = pc[q];
        if (j == 0.0) continue;
        const int source = j < 0 ? pairs[q].first : pairs[q].second;
        const int target = j < 0 ? pairs[q].second : pairs[q].first;
        if (p[source] < p_floor) continue;
        const double rate = std::abs(j) / p[source];
        trip.emplace_back(target, source, rate);
        diag[source] -= rate;
    }
    for (int n = 0; n < n_out; ++n)
        if (diag[n] != 0.0) trip.emplace_back(n, n, diag[n]);
    SparseR a(n_out, n_out);
    a.setFromTriplets(trip.begin(), trip.end());
    return a;
}

RVector solve_shifted(const SparseR& a, double c, const RVector& rhs) {
    // (I - c A) x = rhs
    const int n = static_cast<int>(a.rows());
    SparseR m(n, n);
    m.setIdentity();
    m -= c * a;
    if (n <= 300) return RMatrix(m).partialPivLu().solve(rhs);
    Eigen::SparseLU<SparseR> lu;
    lu.compute(m);
    if (lu.info() != Eigen::Success) throw Error("integrate_master_equation: factorization failed");
    return lu.solve(rhs);
}

}  // namespace

RMatrix integrate_master_equation(const JumpModel& model, const std::vector<double>& times, double h_max) {
    GuidingEvolution guide(model);
    const int n_out = guide.outcome_count();
    RMatrix out(static_cast<Eigen::Index>(times.size()), n_out);
    if (times.empty()) return out;
    const auto p0 = guide.probabilities(times.front());
    RVector p = Eigen::Map<const RVector>(p0.data(), n_out);
    out.row(0) = p.transpose();

    // TR-BDF2: trapezoid to t + gamma h, then BDF2; L-stable and second order.
    const double gamma = 2.0 - std::numbers::sqrt2;
    const double w_bdf = (1.0 - gamma) / (2.0 - gamma);
    const double c_g = 1.0 / (gamma * (2.0 - gamma));
    const double c_n = (1.0 - gamma) * (1.0 - gamma) / (gamma * (2.0 - gamma));
    double t = times.front();
    SparseR a_t = bell_generator(guide, t);
    for (size_t k = 1; k < times.size(); ++k) {
        const double span = times[k] - t;
        const long sub = std::max<long>(1, static_cast<long>(std::ceil(span / h_max - 1e-9)));
        const double h = span / sub;
        for (long s = 0; s < sub; ++s) {
            const SparseR a_g = bell_generator(guide, t + gamma * h);
            const RVector rhs1 = p + 0.5 * gamma * h * (a_t * p);
            const RVector p_g = solve_shifted(a_g, 0.5 * gamma * h, rhs1);
            const SparseR a_1 = bell_generator(guide, t + h);
            const RVector rhs2 = c_g * p_g - c_n * p;
            p = solve_shifted(a_1, w_bdf * h, rhs2);
            t += h;
            a_t = a_1;
        }
        t = times[k];
        out.row(static_cast<Eigen::Index>(k)) = p.transpose();
    }
    return out;
}

namespace {

// log P(X >= k) for X ~ Binomial(n, p), k >= n p.
double log_upper_tail(long k, long n, double p) {
    if (k <= 0) return 0.0;
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    if (p >= 1.0) return 0.0;
    const double log_pmf = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                           k * std::log(p) + (n - k) * std::log1p(-p);
    const double odds = p / (1.0 - p);
    double term = 1.0, sum = 1.0;
    for (long j = k; j < n; ++j) {
        term *= static_cast<double>(n - j) / static_cast<double>(j + 1) * odds;
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return log_pmf + std::log(sum);
}

// z with Phi(-z) equal to the one-sided tail exp(log_tail); 0 for tails >= 1/2.
double normal_equivalent(double log_tail) {
    if (log_tail >= std::log(0.5)) return 0.0;
    if (!std::isfinite(log_tail)) return std::numeric_limits<double>::infinity();
    auto log_phi = [](double z) { return std::log(0.5 * std::erfc(z / std::sqrt(2.0))); };
    double lo = 0.0, hi = 37.0;
    if (log_phi(hi) > log_tail) return hi;
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (log_phi(mid) > log_tail ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

double binomial_sigma_equivalent(long k, long n, double p) {
    p = std::clamp(p, 0.0, 1.0);
    if (static_cast<double>(k) >= n * p) return normal_equivalent(log_upper_tail(k, n, p));
    return normal_equivalent(log_upper_tail(n - k, n, 1.0 - p));
}

MasterCheck check_against_master(const EnsembleStats& stats, const RMatrix& reference) {
    if (reference.rows() != static_cast<Eigen::Index>(stats.times().size()) || reference.cols() != stats.outcome_count())
        throw DimensionError("check_against_master: reference grid mismatch");
    MasterCheck check;
    for (Eigen::Index k = 0; k < reference.rows(); ++k) {
        for (int n = 0; n < stats.outcome_count(); ++n) {
            const double ratio =
                binomial_sigma_equivalent(stats.occupation(static_cast<int>(k), n), stats.count(), reference(k, n)) /
                4.0;
            if (ratio > check.worst_ratio) {
                check.worst_ratio = ratio;
                check.worst_time = static_cast<int>(k);
                check.worst_outcome = n;
            }
        }
    }
    check.ok = check.worst_ratio <= 1.0;
    return check;
}

}  // namespace modalflow
