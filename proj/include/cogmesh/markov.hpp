#pragma once

#include "cogmesh/error.hpp"
#include "cogmesh/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cogmesh::markov {

// Primary and secondary users sharing `channels` channels. A PU arriving to
// a full system takes the channel of one SU when any SU is present; an SU
// arriving to a full system is blocked.
struct OccupancyModel {
    int channels = 1;
    double lambda_p = 0.0;
    double mu_p = 0.0;
    double lambda_s = 0.0;
    double mu_s = 0.0;

    bool operator==(const OccupancyModel&) const = default;
};

inline void validate(const OccupancyModel& m) {
    std::vector<std::string> v;
    if (m.channels < 1) v.push_back("channels must be at least 1");
    auto rate = [&](double r, const char* name) {
        if (!std::isfinite(r) || r < 0.0) v.push_back(std::string(name) + " must be finite and >= 0");
    };
    rate(m.lambda_p, "lambda_p");
    rate(m.mu_p, "mu_p");
    rate(m.lambda_s, "lambda_s");
    rate(m.mu_s, "mu_s");
    if (m.lambda_p > 0.0 && !(m.mu_p > 0.0)) v.push_back("mu_p must be > 0 when lambda_p > 0");
    if (m.lambda_s > 0.0 && !(m.mu_s > 0.0)) v.push_back("mu_s must be > 0 when lambda_s > 0");
    if (!v.empty()) throw ValidationError(std::move(v));
}

// (PUs, SUs) in service.
struct OccupancyState {
    int pus = 0;
    int sus = 0;
    bool operator==(const OccupancyState&) const = default;
};

inline constexpr std::uint64_t kDefaultStateCap = 1'000'000;

inline std::uint64_t state_count(int channels) {
    const auto c = static_cast<std::uint64_t>(channels);
    return (c + 1) * (c + 2) / 2;
}

/// Row-major position of (i, j) among states with i + j <= C.
inline std::size_t state_index(int channels, int i, int j) {
    const auto c = static_cast<std::size_t>(channels);
    const auto ii = static_cast<std::size_t>(i);
    return ii * (c + 1) - ii * (ii - 1) / 2 + static_cast<std::size_t>(j);
}

struct Entry {
    std::size_t to;
    double rate;
};

// Sparse generator: off-diagonal rates per row plus the diagonal.
class Generator {
public:
    Generator(const OccupancyModel& m, std::uint64_t state_cap = kDefaultStateCap) : model_(m) {
        validate(m);
        const auto n = state_count(m.channels);
        if (n > state_cap)
            throw CapacityError("state space of " + std::to_string(n) + " states exceeds cap of " +
                                std::to_string(state_cap));
        const int c = m.channels;
        states_.reserve(n);
        for (int i = 0; i <= c; ++i)
            for (int j = 0; i + j <= c; ++j) states_.push_back({i, j});
        rows_.resize(n);
        diag_.assign(n, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            const auto [i, j] = states_[k];
            auto add = [&](int ti, int tj, double rate) {
                if (rate > 0.0) {
                    rows_[k].push_back({state_index(c, ti, tj), rate});
                    diag_[k] -= rate;
                }
            };
            if (i + j < c) {
                add(i + 1, j, m.lambda_p);
                add(i, j + 1, m.lambda_s);
            } else if (j > 0) {
                add(i + 1, j - 1, m.lambda_p);
            }
            if (i > 0) add(i - 1, j, i * m.mu_p);
            if (j > 0) add(i, j - 1, j * m.mu_s);
        }
    }

    const OccupancyModel& model() const { return model_; }
    std::size_t size() const { return states_.size(); }
    const std::vector<OccupancyState>& states() const { return states_; }
    std::span<const Entry> row(std::size_t k) const { return rows_[k]; }
    double diagonal(std::size_t k) const { return diag_[k]; }

    double rate(OccupancyState from, OccupancyState to) const {
        const auto k = state_index(model_.channels, from.pus, from.sus);
        const auto t = state_index(model_.channels, to.pus, to.sus);
        if (k == t) return diag_[k];
        for (const auto& e : rows_[k])
            if (e.to == t) return e.rate;
        return 0.0;
    }

    Eigen::MatrixXd dense() const {
        Eigen::MatrixXd q = Eigen::MatrixXd::Zero(size(), size());
        for (std::size_t k = 0; k < size(); ++k) {
            q(k, k) = diag_[k];
            for (const auto& e : rows_[k]) q(k, e.to) += e.rate;
        }
        return q;
    }

private:
    OccupancyModel model_;
    std::vector<OccupancyState> states_;
    std::vector<std::vector<Entry>> rows_;
    std::vector<double> diag_;
};

inline Generator build_generator(const OccupancyModel& m,
                                 std::uint64_t state_cap = kDefaultStateCap) {
    return Generator(m, state_cap);
}

class StationaryDistribution {
public:
    StationaryDistribution(int channels, std::vector<double> pi, double residual)
        : channels_(channels), pi_(std::move(pi)), residual_(residual) {}

    int channels() const { return channels_; }
    double operator()(int pus, int sus) const {
        if (pus < 0 || sus < 0 || pus + sus > channels_) return 0.0;
        return pi_[state_index(channels_, pus, sus)];
    }
    std::span<const double> values() const { return pi_; }
    /// max-norm of pi * Q after the solve.
    double residual() const { return residual_; }

private:
    int channels_;
    std::vector<double> pi_;
    double residual_;
};

struct SolverOptions {
    std::size_t dense_limit = 2000;
    double tolerance = 1e-10;
    std::size_t max_sweeps = 200000;
    std::uint64_t state_cap = kDefaultStateCap;
};

namespace detail {

inline std::vector<std::size_t> reachable_from_empty(const Generator& g) {
    std::vector<char> seen(g.size(), 0);
    std::vector<std::size_t> order{0};
    seen[0] = 1;
    for (std::size_t head = 0; head < order.size(); ++head)
        for (const auto& e : g.row(order[head]))
            if (!seen[e.to]) {
                seen[e.to] = 1;
                order.push_back(e.to);
            }
    std::sort(order.begin(), order.end());
    return order;
}

inline double residual_norm(const Generator& g, std::span<const double> pi) {
    std::vector<double> r(g.size(), 0.0);
    for (std::size_t k = 0; k < g.size(); ++k) {
        r[k] += pi[k] * g.diagonal(k);
        for (const auto& e : g.row(k)) r[e.to] += pi[k] * e.rate;
    }
    double out = 0.0;
    for (double v : r) out = std::max(out, std::fabs(v));
    return out;
}

inline double rate_scale(const Generator& g) {
    double s = 1.0;
    for (std::size_t k = 0; k < g.size(); ++k) s = std::max(s, -g.diagonal(k));
    return s;
}

// Global balance on the reachable class with one equation swapped for the
// normalization.
inline std::vector<double> solve_dense(const Generator& g, std::span<const std::size_t> live) {
    const auto n = live.size();
    std::vector<std::ptrdiff_t> pos(g.size(), -1);
    for (std::size_t a = 0; a < n; ++a) pos[live[a]] = static_cast<std::ptrdiff_t>(a);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        const auto k = live[r];
        a(r, r) += g.diagonal(k);
        for (const auto& e : g.row(k)) a(pos[e.to], r) += e.rate;
    }
    a.row(n - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b(n - 1) = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible()) throw NumericalError("balance equations are singular");
    Eigen::VectorXd x = lu.solve(b);
    std::vector<double> pi(g.size(), 0.0);
    for (std::size_t r = 0; r < n; ++r) pi[live[r]] = x(r);
    return pi;
}

inline std::vector<double> solve_gauss_seidel(const Generator& g,
                                              std::span<const std::size_t> live,
                                              const SolverOptions& opt) {
    std::vector<std::vector<Entry>> incoming(g.size());
    for (std::size_t k = 0; k < g.size(); ++k)
        for (const auto& e : g.row(k)) incoming[e.to].push_back({k, e.rate});
    std::vector<double> pi(g.size(), 0.0);
    for (auto k : live) pi[k] = 1.0 / static_cast<double>(live.size());
    // A small residual does not bound the error in pi on slowly mixing
    // chains, so sweep well past the acceptance tolerance.
    const double target = opt.tolerance * rate_scale(g);
    const double tight = target * 1e-3;
    for (std::size_t sweep = 0; sweep < opt.max_sweeps; ++sweep) {
        for (auto k : live) {
            double inflow = 0.0;
            for (const auto& e : incoming[k]) inflow += pi[e.to] * e.rate;
            pi[k] = inflow / -g.diagonal(k);
        }
        const double total = std::accumulate(pi.begin(), pi.end(), 0.0);
        for (auto& v : pi) v /= total;
        if (sweep % 16 == 15 && residual_norm(g, pi) <= tight) return pi;
    }
    if (residual_norm(g, pi) <= target) return pi;
    throw NumericalError("relaxation did not converge in " + std::to_string(opt.max_sweeps) +
                         " sweeps");
}

} // namespace detail

/// Solves pi Q = 0, sum(pi) = 1 on the states reachable from the empty
/// system. Dense LU up to `dense_limit` reachable states, Gauss-Seidel
/// relaxation beyond.
inline StationaryDistribution stationary(const Generator& g, const SolverOptions& opt = {}) {
    const auto live = detail::reachable_from_empty(g);
    std::vector<double> pi;
    if (live.size() == 1) {
        pi.assign(g.size(), 0.0);
        pi[0] = 1.0;
    } else if (live.size() <= opt.dense_limit) {
        pi = detail::solve_dense(g, live);
    } else {
        pi = detail::solve_gauss_seidel(g, live, opt);
    }
    // Round-off can leave tiny negatives on near-empty states.
    for (auto& v : pi)
        if (v < 0.0 && v > -opt.tolerance) v = 0.0;
    const double total = std::accumulate(pi.begin(), pi.end(), 0.0);
    for (auto& v : pi) v /= total;
    const double res = detail::residual_norm(g, pi);
    const bool bad_entry = std::any_of(pi.begin(), pi.end(),
                                       [](double v) { return !std::isfinite(v) || v < 0.0; });
    if (bad_entry || !(res <= opt.tolerance * detail::rate_scale(g)))
        throw NumericalError("stationary solve residual " + std::to_string(res) +
                             " exceeds tolerance");
    return StationaryDistribution(g.model().channels, std::move(pi), res);
}

inline StationaryDistribution stationary(const OccupancyModel& m, const SolverOptions& opt = {}) {
    return stationary(Generator(m, opt.state_cap), opt);
}

namespace detail {

inline void require_matching(const StationaryDistribution& d, const OccupancyModel& m) {
    if (d.channels() != m.channels)
        throw InputError("distribution was solved for a different channel count");
}

} // namespace detail

/// Probability that an arriving SU finds every channel busy.
inline double blocking_probability(const StationaryDistribution& d, const OccupancyModel& m) {
    detail::require_matching(d, m);
    double b = 0.0;
    for (int i = 0; i <= m.channels; ++i) b += d(i, m.channels - i);
    return std::clamp(b, 0.0, 1.0);
}

/// Preemption rate over accepted-SU rate.
inline double noncompletion_probability(const StationaryDistribution& d, const OccupancyModel& m) {
    detail::require_matching(d, m);
    const double accepted = m.lambda_s * (1.0 - blocking_probability(d, m));
    if (!(accepted > 0.0))
        throw UndefinedMetricError("no SU is ever accepted, non-completion is undefined");
    double full_with_su = 0.0;
    for (int j = 1; j <= m.channels; ++j) full_with_su += d(m.channels - j, j);
    return std::clamp(m.lambda_p * full_with_su / accepted, 0.0, 1.0);
}

struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
    bool operator==(const Estimate&) const = default;
};

struct MonteCarloResult {
    Estimate blocking;
    Estimate noncompletion;
    std::uint64_t su_arrivals = 0;
    std::uint64_t su_blocked = 0;
    std::uint64_t preemptions = 0;
    bool operator==(const MonteCarloResult&) const = default;
};

inline constexpr std::uint64_t kMinMonteCarloEvents = 10'000;
inline constexpr int kBatches = 100;

namespace detail {

inline Estimate batch_estimate(double total_num, double total_den,
                               std::span<const double> nums, std::span<const double> dens) {
    Estimate e;
    if (total_den <= 0.0) return e;
    e.value = total_num / total_den;
    // Ratio estimator over batches; the variance uses the linearized
    // residuals num_b - value * den_b.
    const double nb = static_cast<double>(nums.size());
    const double mean_den = total_den / nb;
    double ss = 0.0;
    for (std::size_t b = 0; b < nums.size(); ++b) {
        const double r = nums[b] - e.value * dens[b];
        ss += r * r;
    }
    e.std_error = std::sqrt(ss / (nb * (nb - 1.0))) / mean_den;
    return e;
}

} // namespace detail

/// Simulates the chain with competing exponential clocks. Every SU and PU
/// arrival attempt is an event, including blocked ones, so SU attempts form
/// a Poisson stream and the blocked fraction estimates the time-average
/// probability of a full system. Standard errors come from 100 batch means.
inline MonteCarloResult monte_carlo(const OccupancyModel& m, std::uint64_t events,
                                    std::uint64_t seed) {
    validate(m);
    if (events < kMinMonteCarloEvents)
        throw DomainError("monte_carlo needs at least 10^4 events");
    RngStream rng(seed, "markov/monte-carlo");
    const int c = m.channels;
    int i = 0, j = 0;
    std::vector<double> att(kBatches, 0.0), blk(kBatches, 0.0), acc(kBatches, 0.0),
        pre(kBatches, 0.0);
    MonteCarloResult out;
    const std::uint64_t per_batch = events / kBatches;
    for (std::uint64_t n = 0; n < per_batch * kBatches; ++n) {
        const auto b = static_cast<std::size_t>(n / per_batch);
        const double r_pa = m.lambda_p, r_sa = m.lambda_s;
        const double r_pd = i * m.mu_p, r_sd = j * m.mu_s;
        const double total = r_pa + r_sa + r_pd + r_sd;
        if (total <= 0.0) break;
        const double u = rng.uniform() * total;
        if (u < r_pa) {
            if (i + j < c) ++i;
            else if (j > 0) {
                ++i;
                --j;
                pre[b] += 1.0;
            }
        } else if (u < r_pa + r_sa) {
            att[b] += 1.0;
            if (i + j < c) {
                ++j;
                acc[b] += 1.0;
            } else {
                blk[b] += 1.0;
            }
        } else if (u < r_pa + r_sa + r_pd) {
            --i;
        } else {
            --j;
        }
    }
    auto sum = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); };
    out.su_arrivals = static_cast<std::uint64_t>(sum(att));
    out.su_blocked = static_cast<std::uint64_t>(sum(blk));
    out.preemptions = static_cast<std::uint64_t>(sum(pre));
    out.blocking = detail::batch_estimate(sum(blk), sum(att), blk, att);
    out.noncompletion = detail::batch_estimate(sum(pre), sum(acc), pre, acc);
    return out;
}

/// Independent replications merged by averaging. The result depends only on
/// the seed list, not on `threads`.
inline MonteCarloResult monte_carlo_replicated(const OccupancyModel& m, std::uint64_t events,
                                               std::span<const std::uint64_t> seeds,
                                               unsigned threads = 1) {
    std::vector<MonteCarloResult> reps(seeds.size());
    threads = std::max(1u, threads);
    for (std::size_t start = 0; start < seeds.size(); start += threads) {
        std::vector<std::future<MonteCarloResult>> batch;
        const auto end = std::min(seeds.size(), start + threads);
        for (std::size_t k = start; k < end; ++k)
            batch.push_back(std::async(threads > 1 ? std::launch::async : std::launch::deferred,
                                       [&m, events, s = seeds[k]] { return monte_carlo(m, events, s); }));
        for (std::size_t k = start; k < end; ++k) reps[k] = batch[k - start].get();
    }
    MonteCarloResult out;
    if (reps.empty()) return out;
    const double n = static_cast<double>(reps.size());
    double vb = 0.0, vn = 0.0;
    for (const auto& r : reps) {
        out.blocking.value += r.blocking.value / n;
        out.noncompletion.value += r.noncompletion.value / n;
        vb += r.blocking.std_error * r.blocking.std_error;
        vn += r.noncompletion.std_error * r.noncompletion.std_error;
        out.su_arrivals += r.su_arrivals;
        out.su_blocked += r.su_blocked;
        out.preemptions += r.preemptions;
    }
    out.blocking.std_error = std::sqrt(vb) / n;
    out.noncompletion.std_error = std::sqrt(vn) / n;
    return out;
}

} // namespace cogmesh::markov
