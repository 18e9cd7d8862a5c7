#include <cmath>

#include <gtest/gtest.h>

#include "gchmm/model.hpp"
#include "support/oracles.hpp"

using namespace gchmm;

TEST(TransitionProb, HandCases) {
    const PersonParams p{0.2, 0.1, 0.2};
    EXPECT_DOUBLE_EQ(transition_prob(1, 0, p, 0), 0.2);
    EXPECT_NEAR(transition_prob(0, 1, p, 2), 0.424, 1e-15);
    EXPECT_DOUBLE_EQ(transition_prob(0, 0, PersonParams{0.3, 0.0, 0.0}, 5), 1.0);
    const std::vector<double> betas{0.5, 0.5};
    EXPECT_DOUBLE_EQ(transition_prob(0, 1, 0.3, 0.0, betas), 0.75);
    EXPECT_THROW(transition_prob(2, 0, p, 0), DomainError);
    EXPECT_THROW(transition_prob(0, -1, p, 0), DomainError);
}

TEST(TransitionProb, RowsSumToOne) {
    Rng rng(1);
    for (int rep = 0; rep < 1000; ++rep) {
        const PersonParams p{rng.uniform(), rng.uniform(), rng.uniform()};
        const std::size_t C = rng.below(12);
        for (int prev = 0; prev < 2; ++prev)
            EXPECT_NEAR(transition_prob(prev, 0, p, C) + transition_prob(prev, 1, p, C), 1.0, 1e-12);
    }
}

TEST(TransitionProb, TransmitWithEqualBetasIsReceive) {
    Rng rng(2);
    for (int rep = 0; rep < 1000; ++rep) {
        const double a = rng.uniform(), b = rng.uniform(), g = rng.uniform();
        const std::size_t C = rng.below(12);
        const std::vector<double> betas(C, b);
        for (int prev = 0; prev < 2; ++prev)
            for (int next = 0; next < 2; ++next)
                EXPECT_NEAR(transition_prob(prev, next, g, a, betas), transition_prob(prev, next, {g, a, b}, C), 1e-15);
    }
}

TEST(InfectionProbability, HandCases) {
    EXPECT_DOUBLE_EQ(infection_probability(0.1, 0.2, 0), 0.1);
    EXPECT_NEAR(infection_probability(0.1, 0.2, 2), 0.424, 1e-15);
    const std::vector<double> betas{0.2, 0.5};
    EXPECT_NEAR(infection_probability(0.1, betas), 0.64, 1e-15);
}

TEST(SigmoidLink, HandCases) {
    auto eta = LinkCoefficients::zeros(LinkKind::sigmoid, 1);
    Eigen::VectorXd z(1);
    z << 1.0;
    auto p = sigmoid_link(z, eta);
    EXPECT_DOUBLE_EQ(p.gamma, 0.5);
    EXPECT_DOUBLE_EQ(p.alpha, 0.5);
    EXPECT_DOUBLE_EQ(p.beta, 0.5);
    eta.eta[0](0) = std::log(3.0);
    EXPECT_NEAR(sigmoid_link(z, eta).gamma, 0.75, 1e-15);

    auto eta2 = LinkCoefficients::zeros(LinkKind::sigmoid, 2);
    eta2.eta[1] << 2.0, -2.0;
    Eigen::VectorXd z2(2);
    z2 << 1.0, 1.0;
    EXPECT_DOUBLE_EQ(sigmoid_link(z2, eta2).alpha, 0.5);
    EXPECT_THROW(sigmoid_link(z, eta2), DomainError);
}

TEST(BetaExpLink, UnitShapesAreUniform) {
    const auto eta = LinkCoefficients::zeros(LinkKind::beta_exp, 1);
    Eigen::VectorXd z(1);
    z << 1.0;
    Rng rng(3);
    std::vector<int> bins(10, 0);
    const int n = 100000;
    double mean = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto p = beta_exp_link_draw(z, eta, rng);
        ASSERT_GT(p.gamma, 0.0);
        ASSERT_LT(p.gamma, 1.0);
        mean += p.gamma;
        ++bins[std::min(9, int(p.gamma * 10))];
    }
    EXPECT_NEAR(mean / n, 0.5, 0.01);
    for (int b : bins)
        EXPECT_NEAR(b / double(n), 0.1, 0.01);
}

TEST(BetaExpLink, MeanMatchesLogisticForm) {
    auto eta = LinkCoefficients::zeros(LinkKind::beta_exp, 1);
    eta.eta[0](0) = 1.0; // Beta(e, 1)
    Eigen::VectorXd z(1);
    z << 1.0;
    Rng rng(4);
    const int n = 100000;
    double mean = 0.0;
    for (int i = 0; i < n; ++i)
        mean += beta_exp_link_draw(z, eta, rng).gamma;
    const double e = std::exp(1.0);
    EXPECT_NEAR(mean / n, e / (e + 1.0), 0.01);
    EXPECT_NEAR(beta_exp_link_mean(z, eta).gamma, e / (e + 1.0), 1e-15);
}

TEST(BetaExpLink, DimensionMismatch) {
    const auto eta = LinkCoefficients::zeros(LinkKind::beta_exp, 2);
    Eigen::VectorXd z(1);
    z << 1.0;
    Rng rng(0);
    EXPECT_THROW(beta_exp_link_draw(z, eta, rng), DomainError);
}

TEST(LinkCoefficients, ValidatesPriorCovariance) {
    auto eta = LinkCoefficients::zeros(LinkKind::sigmoid, 2);
    EXPECT_NO_THROW(eta.validate(2));
    eta.prior_cov(0, 0) = -1.0;
    EXPECT_THROW(eta.validate(2), DomainError);
}

namespace {
SimConfig config(std::uint64_t seed, double p_miss = 0.0) {
    SimConfig c;
    c.link = LinkKind::fixed;
    c.seed = seed;
    c.p_miss = p_miss;
    return c;
}
} // namespace

TEST(Simulate, ForcedRecoveryWithoutReinfection) {
    Rng rng(5);
    const auto g = oracle::random_network(6, 8, 0.5, rng);
    auto p = InfectionParams::homogeneous(6, {1.0, 0.0, 0.0}, 1.0, {0.3}, {0.7});
    const auto r = simulate(g, p, config(1));
    for (std::size_t n = 0; n < 6; ++n) {
        EXPECT_EQ(r.x(n, 0), 1);
        for (std::size_t t = 1; t <= 8; ++t)
            EXPECT_EQ(r.x(n, t), 0);
    }
}

TEST(Simulate, NoSourceMeansNoInfection) {
    const auto g = DynamicNetwork::empty(50, 40);
    auto p = InfectionParams::homogeneous(50, {0.3, 0.0, 0.4}, 0.0, {0.25}, {0.9});
    const auto r = simulate(g, p, config(2));
    double ones = 0.0, cells = 0.0;
    for (std::size_t n = 0; n < 50; ++n)
        for (std::size_t t = 0; t <= 40; ++t) {
            EXPECT_EQ(r.x(n, t), 0);
            if (t) {
                ones += r.y(n, t, 0);
                cells += 1.0;
            }
        }
    EXPECT_NEAR(ones / cells, 0.25, 4.0 * std::sqrt(0.25 * 0.75 / cells));
}

TEST(Simulate, SingleChainInfectionFrequency) {
    const std::size_t T = 100000;
    const auto g = DynamicNetwork::empty(1, T);
    auto p = InfectionParams::homogeneous(1, {0.6, 0.15, 0.5}, 0.3, {0.2}, {0.8});
    const auto r = simulate(g, p, config(3));
    double from0 = 0, up = 0, from1 = 0, down = 0;
    for (std::size_t t = 1; t <= T; ++t) {
        if (r.x(0, t - 1) == 0) {
            ++from0;
            up += r.x(0, t);
        } else {
            ++from1;
            down += 1 - r.x(0, t);
        }
    }
    EXPECT_NEAR(up / from0, 0.15, 3.0 * std::sqrt(0.15 * 0.85 / from0));
    EXPECT_NEAR(down / from1, 0.6, 3.0 * std::sqrt(0.6 * 0.4 / from1));
}

TEST(Simulate, ExposureFrequencyMatchesTransition) {
    // Two people in permanent contact; tally infections by exposure.
    const std::size_t T = 60000;
    std::vector<Edge> e;
    for (std::size_t t = 1; t <= T; ++t)
        e.push_back({t, 0, 1});
    const DynamicNetwork g(2, T, e);
    auto p = InfectionParams::homogeneous(2, {0.3, 0.05, 0.25}, 0.5, {0.2}, {0.8});
    const auto r = simulate(g, p, config(4));
    double n_exp = 0, up_exp = 0;
    for (std::size_t t = 1; t <= T; ++t)
        for (std::size_t n = 0; n < 2; ++n)
            if (r.x(n, t - 1) == 0 && r.x(1 - n, t - 1) == 1) {
                ++n_exp;
                up_exp += r.x(n, t);
            }
    const double want = transition_prob(0, 1, {0.3, 0.05, 0.25}, 1);
    EXPECT_NEAR(up_exp / n_exp, want, 3.0 * std::sqrt(want * (1 - want) / n_exp));
}

TEST(Simulate, BitReproducible) {
    Rng rng(6);
    const auto g = oracle::random_network(12, 15, 0.2, rng);
    const auto p = oracle::random_params(12, 3, rng);
    const auto a = simulate(g, p, config(9, 0.3));
    const auto b = simulate(g, p, config(9, 0.3));
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.y, b.y);
    const auto c = simulate(g, p, config(10, 0.3));
    EXPECT_FALSE(a.x == c.x && a.y == c.y);
}

TEST(Simulate, AddingPeopleKeepsIsolatedTrajectories) {
    // Per-person substreams: an isolated person's path does not depend on N.
    auto p3 = InfectionParams::homogeneous(3, {0.2, 0.1, 0.3}, 0.2, {0.2}, {0.8});
    auto p5 = InfectionParams::homogeneous(5, {0.2, 0.1, 0.3}, 0.2, {0.2}, {0.8});
    const auto a = simulate(DynamicNetwork::empty(3, 20), p3, config(7));
    const auto b = simulate(DynamicNetwork::empty(5, 20), p5, config(7));
    for (std::size_t n = 0; n < 3; ++n)
        for (std::size_t t = 0; t <= 20; ++t)
            EXPECT_EQ(a.x(n, t), b.x(n, t));
}

TEST(Simulate, BetaExpGroundTruthWarns) {
    std::vector<std::string> msgs;
    ScopedWarningHandler h([&](std::string_view m) { msgs.emplace_back(m); });
    const auto z = CovariateMatrix::intercept_only(4);
    const auto eta = LinkCoefficients::zeros(LinkKind::beta_exp, 1);
    SimConfig c;
    c.link = LinkKind::beta_exp;
    const auto r = simulate(DynamicNetwork::empty(4, 3), z, eta, 0.1, std::array<std::vector<double>, 2>{std::vector<double>{0.1}, std::vector<double>{0.9}}, c);
    EXPECT_EQ(msgs.size(), 1u);
    EXPECT_NO_THROW(r.params.validate());
}

TEST(MaskMissing, Extremes) {
    Rng rng(8);
    auto y = oracle::random_symptoms(5, 6, 2, 0.0, rng);
    EXPECT_EQ(mask_missing(y, 0.0, Rng(1)), y);
    EXPECT_EQ(mask_missing(y, 1.0, Rng(1)).count_observed(), 0u);
}

TEST(MaskMissing, HalfRate) {
    Rng rng(9);
    const auto y = oracle::random_symptoms(100, 100, 10, 0.0, rng);
    const auto m = mask_missing(y, 0.5, Rng(2));
    const double frac = 1.0 - double(m.count_observed()) / double(y.size());
    EXPECT_NEAR(frac, 0.5, 0.01);
    EXPECT_EQ(m, mask_missing(y, 0.5, Rng(2)));
    for (std::size_t n = 0; n < 100; ++n)
        for (std::size_t t = 1; t <= 100; ++t)
            for (std::size_t s = 0; s < 10; ++s)
                if (!m.missing(n, t, s))
                    ASSERT_EQ(m(n, t, s), y(n, t, s));
}

TEST(SyntheticNetwork, RespectsDegreeCap) {
    const auto g = synthetic_scale_free_network(84, 107, 11, Rng(3));
    EXPECT_LE(g.max_degree(), 11u);
    std::size_t edges = 0;
    for (std::size_t t = 1; t <= 107; ++t)
        edges += g.num_edges(t);
    EXPECT_GT(edges, 0u);
}
