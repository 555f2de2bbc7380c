#include "cogmesh/markov.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

using namespace cogmesh;
using markov::OccupancyModel;

namespace {

OccupancyModel ones(int c) { return {c, 1, 1, 1, 1}; }

} // namespace

TEST(BuildGenerator, EnumeratesStates) {
    const auto g = markov::build_generator(ones(1));
    ASSERT_EQ(g.size(), 3u);
    EXPECT_EQ(g.states()[0], (markov::OccupancyState{0, 0}));
    EXPECT_EQ(g.states()[1], (markov::OccupancyState{0, 1}));
    EXPECT_EQ(g.states()[2], (markov::OccupancyState{1, 0}));
    EXPECT_EQ(markov::build_generator(ones(10)).size(), 66u);
}

TEST(BuildGenerator, PreemptionEdge) {
    const auto g = markov::build_generator(ones(1));
    EXPECT_DOUBLE_EQ(g.rate({0, 1}, {1, 0}), 1.0);
    EXPECT_DOUBLE_EQ(g.rate({1, 0}, {0, 1}), 0.0);
}

TEST(BuildGenerator, MatchesPairwiseRuleOracleAndRowsSumToZero) {
    for (int c : {1, 2, 3, 5})
        for (auto m : {OccupancyModel{c, 0.7, 1.3, 2.1, 0.4}, OccupancyModel{c, 0, 1, 3, 2},
                       OccupancyModel{c, 2, 1, 0, 0}}) {
            const auto g = markov::build_generator(m);
            const auto q = g.dense();
            const auto ref = oracle::build_chain(c, m.lambda_p, m.mu_p, m.lambda_s, m.mu_s);
            ASSERT_EQ(ref.states.size(), g.size());
            for (std::size_t a = 0; a < g.size(); ++a) {
                double row = 0.0;
                for (std::size_t b = 0; b < g.size(); ++b) {
                    // Both sides enumerate states in the same (i, j) order.
                    ASSERT_EQ(g.states()[a], (markov::OccupancyState{ref.states[a].first,
                                                                     ref.states[a].second}));
                    EXPECT_NEAR(q(a, b), ref.q[a][b], 1e-15);
                    row += q(a, b);
                }
                EXPECT_NEAR(row, 0.0, 1e-12) << "row " << a;
            }
        }
}

TEST(BuildGenerator, NoPuTrafficLeavesPuDimensionUnreachable) {
    const auto g = markov::build_generator({3, 0, 1, 2, 1});
    for (std::size_t k = 0; k < g.size(); ++k)
        for (const auto& e : g.row(k))
            if (g.states()[k].pus == 0) {
                EXPECT_EQ(g.states()[e.to].pus, 0);
            }
}

TEST(BuildGenerator, CapacityCap) {
    EXPECT_THROW(markov::build_generator(ones(2000)), CapacityError);
    EXPECT_THROW(markov::build_generator(ones(10), 50), CapacityError);
    EXPECT_NO_THROW(markov::build_generator(ones(10), 66));
}

TEST(BuildGenerator, RejectsInvalidModels) {
    EXPECT_THROW(markov::build_generator({0, 1, 1, 1, 1}), ValidationError);
    EXPECT_THROW(markov::build_generator({1, 1, 0, 1, 1}), ValidationError);
    EXPECT_THROW(markov::build_generator({1, -1, 1, 1, 1}), ValidationError);
}

TEST(Stationary, HandSolvedSingleChannel) {
    const auto d = markov::stationary(ones(1));
    EXPECT_NEAR(d(0, 0), 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(d(1, 0), 1.0 / 2.0, 1e-12);
    EXPECT_NEAR(d(0, 1), 1.0 / 6.0, 1e-12);
    EXPECT_LE(d.residual(), 1e-10);
}

TEST(Stationary, EmptySystemIsAbsorbing) {
    const auto d = markov::stationary(OccupancyModel{4, 0, 0, 0, 0});
    EXPECT_EQ(d(0, 0), 1.0);
    EXPECT_EQ(std::accumulate(d.values().begin(), d.values().end(), 0.0), 1.0);
}

TEST(Stationary, ErlangBClosedFormSingleChannel) {
    const auto d = markov::stationary(OccupancyModel{1, 1, 1, 0, 0});
    EXPECT_NEAR(d(1, 0), 0.5, 1e-12);
}

TEST(Stationary, ErlangBReduction) {
    for (int c = 1; c <= 10; ++c)
        for (double load : {0.5, 1.0, 2.0, 5.0}) {
            const OccupancyModel m{c, load, 1.0, 0, 0};
            EXPECT_NEAR(markov::stationary(m)(c, 0), oracle::erlang_b(c, load), 1e-9)
                << "C=" << c << " load=" << load;
        }
}

TEST(Stationary, AgreesWithPowerIterationOracle) {
    for (int c : {1, 2, 3, 4, 6})
        for (auto m : {OccupancyModel{c, 1, 1, 1, 1}, OccupancyModel{c, 0.5, 2, 3, 1.5},
                       OccupancyModel{c, 4, 1, 0.25, 0.5}}) {
            const auto d = markov::stationary(m);
            const auto ref = oracle::power_stationary(
                oracle::build_chain(c, m.lambda_p, m.mu_p, m.lambda_s, m.mu_s));
            for (std::size_t k = 0; k < ref.size(); ++k)
                EXPECT_NEAR(d.values()[k], ref[k], 1e-9);
        }
}

TEST(Stationary, InvariantsOverAModelGrid) {
    for (int c : {1, 2, 3, 5, 8, 12})
        for (double lp : {0.0, 0.3, 1.0, 4.0})
            for (double ls : {0.0, 0.5, 2.0, 7.0}) {
                const OccupancyModel m{c, lp, 1.0, ls, 0.8};
                const auto d = markov::stationary(m);
                const auto v = d.values();
                EXPECT_NEAR(std::accumulate(v.begin(), v.end(), 0.0), 1.0, 1e-10);
                EXPECT_LE(d.residual(), 1e-10);
                for (double p : v) EXPECT_GE(p, 0.0);
                const double b = markov::blocking_probability(d, m);
                EXPECT_GE(b, 0.0);
                EXPECT_LE(b, 1.0);
                if (ls > 0) {
                    const double nc = markov::noncompletion_probability(d, m);
                    EXPECT_GE(nc, 0.0);
                    EXPECT_LE(nc, 1.0);
                }
            }
}

TEST(Stationary, RelaxationMatchesDenseSolve) {
    const OccupancyModel m{30, 8, 1, 6, 0.7};
    markov::SolverOptions iterative;
    iterative.dense_limit = 10;
    const auto a = markov::stationary(m);
    const auto b = markov::stationary(m, iterative);
    for (std::size_t k = 0; k < a.values().size(); ++k)
        EXPECT_NEAR(a.values()[k], b.values()[k], 1e-9);
    EXPECT_NEAR(markov::blocking_probability(a, m), markov::blocking_probability(b, m), 1e-9);
}

TEST(Stationary, LargeChainTakesTheRelaxationPath) {
    // 2080 states, above the dense limit.
    const OccupancyModel m{63, 20, 1, 25, 1};
    ASSERT_GT(markov::state_count(m.channels), 2000u);
    const auto d = markov::stationary(m);
    // Tolerance scales with the fastest exit rate, here lambda_p + lambda_s + 63.
    EXPECT_LE(d.residual(), 1e-10 * (20 + 25 + 63));
    EXPECT_NEAR(std::accumulate(d.values().begin(), d.values().end(), 0.0), 1.0, 1e-10);
}

TEST(Probabilities, HandSolvedSingleChannel) {
    const auto m = ones(1);
    const auto d = markov::stationary(m);
    EXPECT_NEAR(markov::blocking_probability(d, m), 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(markov::noncompletion_probability(d, m), 0.5, 1e-12);
}

TEST(Probabilities, EdgeCases) {
    const OccupancyModel empty{3, 0, 0, 0, 0};
    EXPECT_EQ(markov::blocking_probability(markov::stationary(empty), empty), 0.0);
    EXPECT_THROW(markov::noncompletion_probability(markov::stationary(empty), empty),
                 UndefinedMetricError);
    const OccupancyModel no_pu{3, 0, 1, 2, 1};
    EXPECT_EQ(markov::noncompletion_probability(markov::stationary(no_pu), no_pu), 0.0);
    EXPECT_THROW(markov::blocking_probability(markov::stationary(ones(2)), ones(3)), InputError);
}

TEST(Probabilities, BlockingGrowsWithSuLoad) {
    double prev = -1.0;
    for (double ls : {0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0, 1000.0}) {
        const OccupancyModel m{3, 0.5, 1, ls, 1};
        const double b = markov::blocking_probability(markov::stationary(m), m);
        EXPECT_GT(b, prev);
        prev = b;
    }
    EXPECT_GT(prev, 0.98);
}

TEST(MonteCarlo, BracketsSingleChannelBlocking) {
    const auto r = markov::monte_carlo(ones(1), 1'000'000, 17);
    EXPECT_NEAR(r.blocking.value, 2.0 / 3.0, 0.01);
    EXPECT_LT(std::fabs(r.blocking.value - 2.0 / 3.0), 3 * r.blocking.std_error + 1e-12);
}

TEST(MonteCarlo, TwoChannelNonCompletionWithinThreeSigma) {
    const auto m = ones(2);
    const auto d = markov::stationary(m);
    const auto r = markov::monte_carlo(m, 1'000'000, 5);
    EXPECT_LT(std::fabs(r.noncompletion.value - markov::noncompletion_probability(d, m)),
              3 * r.noncompletion.std_error);
    EXPECT_LT(std::fabs(r.blocking.value - markov::blocking_probability(d, m)),
              3 * r.blocking.std_error);
}

TEST(MonteCarlo, NoPuTrafficMeansNoPreemption) {
    const auto r = markov::monte_carlo({2, 0, 1, 3, 1}, 100'000, 3);
    EXPECT_EQ(r.noncompletion.value, 0.0);
    EXPECT_EQ(r.preemptions, 0u);
}

TEST(MonteCarlo, DeterministicPerSeed) {
    EXPECT_EQ(markov::monte_carlo(ones(2), 50'000, 9), markov::monte_carlo(ones(2), 50'000, 9));
    EXPECT_NE(markov::monte_carlo(ones(2), 50'000, 9), markov::monte_carlo(ones(2), 50'000, 10));
    EXPECT_THROW(markov::monte_carlo(ones(2), 9'999, 9), DomainError);
}

TEST(MonteCarlo, ReplicationsIndependentOfThreadCount) {
    const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    const auto a = markov::monte_carlo_replicated(ones(2), 20'000, seeds, 1);
    const auto b = markov::monte_carlo_replicated(ones(2), 20'000, seeds, 3);
    EXPECT_EQ(a, b);
}
