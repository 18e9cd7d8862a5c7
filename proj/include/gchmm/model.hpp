#pragma once

// Generative model: transition function, covariate links, forward simulation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "gchmm/data_model.hpp"
#include "gchmm/error.hpp"
#include "gchmm/rng.hpp"

namespace gchmm {

// How beta_n enters the infection probability.
//   receive:  1 - (1-alpha_n)(1-beta_n)^C
//   transmit: 1 - (1-alpha_n) prod_{m in S} (1-beta_m)
enum class BetaMode { receive, transmit };

enum class LinkKind { sigmoid, beta_exp, fixed };

inline const char *to_string(BetaMode m) { return m == BetaMode::receive ? "receive" : "transmit"; }

inline const char *to_string(LinkKind k) {
    switch (k) {
    case LinkKind::sigmoid:
        return "sigmoid";
    case LinkKind::beta_exp:
        return "beta-exp";
    default:
        return "fixed";
    }
}

struct PersonParams {
    double gamma = 0.0; // recovery
    double alpha = 0.0; // infection from outside the network
    double beta = 0.0;  // infection from inside the network
};

// Per-person transition parameters plus the shared initial rate and emission matrix.
struct InfectionParams {
    std::vector<double> gamma, alpha, beta;
    double pi = 0.0;
    std::array<std::vector<double>, 2> theta; // theta[state][symptom]

    std::size_t num_people() const noexcept { return gamma.size(); }
    std::size_t num_symptoms() const noexcept { return theta[0].size(); }

    PersonParams person(std::size_t n) const { return {gamma[n], alpha[n], beta[n]}; }

    void set_person(std::size_t n, const PersonParams &p) {
        gamma[n] = p.gamma;
        alpha[n] = p.alpha;
        beta[n] = p.beta;
    }

    static InfectionParams homogeneous(std::size_t N, PersonParams p, double pi, std::vector<double> theta0,
                                       std::vector<double> theta1) {
        InfectionParams out;
        out.gamma.assign(N, p.gamma);
        out.alpha.assign(N, p.alpha);
        out.beta.assign(N, p.beta);
        out.pi = pi;
        out.theta = {std::move(theta0), std::move(theta1)};
        return out;
    }

    // Probabilities must lie in [0,1]; `open` demands (0,1) as inference requires.
    void validate(bool open = false) const {
        auto ok = [open](double v) { return open ? (v > 0.0 && v < 1.0) : (v >= 0.0 && v <= 1.0); };
        const auto N = gamma.size();
        if (alpha.size() != N || beta.size() != N)
            throw DomainError("infection parameter vectors differ in length");
        if (theta[0].size() != theta[1].size())
            throw DomainError("emission rows differ in length");
        bool good = ok(pi);
        for (std::size_t n = 0; n < N; ++n)
            good = good && ok(gamma[n]) && ok(alpha[n]) && ok(beta[n]);
        for (int i = 0; i < 2; ++i)
            for (double v : theta[i])
                good = good && ok(v);
        if (!good)
            throw DomainError(open ? "infection parameters must lie in (0,1)" : "infection parameters must lie in [0,1]");
    }
};

// Regression coefficients of a link plus their Gaussian prior. Sigmoid links carry
// three vectors (r, a, b); beta-exponential links carry six (r1, r2, a1, a2, b1, b2).
struct LinkCoefficients {
    LinkKind kind = LinkKind::sigmoid;
    std::vector<Eigen::VectorXd> eta;
    Eigen::VectorXd prior_mean;
    Eigen::MatrixXd prior_cov;

    static std::size_t vectors_for(LinkKind k) { return k == LinkKind::beta_exp ? 6 : 3; }

    static LinkCoefficients zeros(LinkKind k, std::size_t K, double prior_scale = 10.0) {
        LinkCoefficients c;
        c.kind = k;
        c.eta.assign(vectors_for(k), Eigen::VectorXd::Zero(Eigen::Index(K)));
        c.prior_mean = Eigen::VectorXd::Zero(Eigen::Index(K));
        c.prior_cov = prior_scale * Eigen::MatrixXd::Identity(Eigen::Index(K), Eigen::Index(K));
        return c;
    }

    std::size_t dim() const { return eta.empty() ? 0 : std::size_t(eta.front().size()); }

    void validate(std::size_t K) const {
        if (kind == LinkKind::fixed)
            throw DomainError("fixed parameters carry no link coefficients");
        if (eta.size() != vectors_for(kind))
            throw DomainError("wrong number of coefficient vectors for the link");
        for (const auto &v : eta)
            if (std::size_t(v.size()) != K)
                throw DomainError("coefficient vector length differs from covariate dimension");
        if (std::size_t(prior_mean.size()) != K || std::size_t(prior_cov.rows()) != K ||
            std::size_t(prior_cov.cols()) != K)
            throw DomainError("prior dimensions differ from covariate dimension");
        if (!prior_cov.isApprox(prior_cov.transpose(), 1e-12))
            throw DomainError("prior covariance must be symmetric");
        Eigen::LLT<Eigen::MatrixXd> llt(prior_cov);
        if (llt.info() != Eigen::Success)
            throw DomainError("prior covariance must be positive definite");
    }

    Eigen::VectorXd stacked() const {
        const auto K = Eigen::Index(dim());
        Eigen::VectorXd out(K * Eigen::Index(eta.size()));
        for (std::size_t i = 0; i < eta.size(); ++i)
            out.segment(Eigen::Index(i) * K, K) = eta[i];
        return out;
    }

    void set_stacked(const Eigen::VectorXd &v) {
        const auto K = Eigen::Index(dim());
        for (std::size_t i = 0; i < eta.size(); ++i)
            eta[i] = v.segment(Eigen::Index(i) * K, K);
    }
};

// Shared parameters of the homogeneous model.
struct HomogeneousParams {
    double pi = 0.1, gamma = 0.1, alpha = 0.1, beta = 0.1;
    std::array<std::vector<double>, 2> theta;

    // pi = gamma = alpha = beta = theta0 = 0.1 and theta1 = 0.9.
    static HomogeneousParams neutral(std::size_t S) {
        HomogeneousParams p;
        p.theta = {std::vector<double>(S, 0.1), std::vector<double>(S, 0.9)};
        return p;
    }

    InfectionParams expand(std::size_t N) const {
        return InfectionParams::homogeneous(N, {gamma, alpha, beta}, pi, theta[0], theta[1]);
    }

    // Every scalar, in a fixed order, for convergence checks.
    std::vector<double> flat() const {
        std::vector<double> v{pi, gamma, alpha, beta};
        for (int i = 0; i < 2; ++i)
            v.insert(v.end(), theta[i].begin(), theta[i].end());
        return v;
    }
};

struct SimConfig {
    LinkKind link = LinkKind::sigmoid;
    BetaMode mode = BetaMode::receive;
    double p_miss = 0.0;
    std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Transition function

inline double sigmoid(double x) {
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double infection_probability(double alpha, double beta, std::size_t infected_contacts) {
    return 1.0 - (1.0 - alpha) * std::pow(1.0 - beta, double(infected_contacts));
}

inline double infection_probability(double alpha, std::span<const double> source_betas) {
    double escape = 1.0 - alpha;
    for (double b : source_betas)
        escape *= 1.0 - b;
    return 1.0 - escape;
}

namespace detail {
inline void check_state(int s) {
    if (s != 0 && s != 1)
        throw DomainError("hidden state must be 0 or 1");
}

inline double transition_from_infection(int prev, int next, double gamma, double infect) {
    if (prev == 1)
        return next == 0 ? gamma : 1.0 - gamma;
    return next == 1 ? infect : 1.0 - infect;
}
} // namespace detail

// P(x_t = next | x_{t-1} = prev) with C infected contacts (receive interpretation).
inline double transition_prob(int prev, int next, const PersonParams &p, std::size_t infected_contacts) {
    detail::check_state(prev);
    detail::check_state(next);
    if (prev == 0 && next == 0)
        return (1.0 - p.alpha) * std::pow(1.0 - p.beta, double(infected_contacts));
    return detail::transition_from_infection(prev, next, p.gamma,
                                             infection_probability(p.alpha, p.beta, infected_contacts));
}

// Transmit interpretation: each infected source contributes its own beta.
inline double transition_prob(int prev, int next, double gamma, double alpha, std::span<const double> source_betas) {
    detail::check_state(prev);
    detail::check_state(next);
    if (prev == 0 && next == 0) {
        double escape = 1.0 - alpha;
        for (double b : source_betas)
            escape *= 1.0 - b;
        return escape;
    }
    return detail::transition_from_infection(prev, next, gamma, infection_probability(alpha, source_betas));
}

// ---------------------------------------------------------------------------
// Links

inline PersonParams sigmoid_link(const Eigen::VectorXd &z, const LinkCoefficients &eta) {
    if (eta.kind != LinkKind::sigmoid || eta.eta.size() != 3)
        throw DomainError("sigmoid_link needs sigmoid coefficients");
    for (const auto &v : eta.eta)
        if (v.size() != z.size())
            throw DomainError("sigmoid_link: covariate and coefficient lengths differ");
    return {sigmoid(z.dot(eta.eta[0])), sigmoid(z.dot(eta.eta[1])), sigmoid(z.dot(eta.eta[2]))};
}

// Draws (gamma, alpha, beta) from Beta(exp(z.eta_1), exp(z.eta_2)) per role.
inline PersonParams beta_exp_link_draw(const Eigen::VectorXd &z, const LinkCoefficients &eta, Rng &rng) {
    if (eta.kind != LinkKind::beta_exp || eta.eta.size() != 6)
        throw DomainError("beta_exp_link_draw needs beta-exponential coefficients");
    for (const auto &v : eta.eta)
        if (v.size() != z.size())
            throw DomainError("beta_exp_link_draw: covariate and coefficient lengths differ");
    auto draw = [&](int role) {
        return rng.beta(std::exp(z.dot(eta.eta[2 * role])), std::exp(z.dot(eta.eta[2 * role + 1])));
    };
    PersonParams p;
    p.gamma = draw(0);
    p.alpha = draw(1);
    p.beta = draw(2);
    return p;
}

// Mean of the beta-exponential link, exp(u)/(exp(u)+exp(v)) = sigmoid(u - v).
inline PersonParams beta_exp_link_mean(const Eigen::VectorXd &z, const LinkCoefficients &eta) {
    auto m = [&](int role) { return sigmoid(z.dot(eta.eta[2 * role]) - z.dot(eta.eta[2 * role + 1])); };
    return {m(0), m(1), m(2)};
}

// Person parameters implied by a link: sigmoid values, or beta-exponential means.
inline PersonParams implied_params(const Eigen::VectorXd &z, const LinkCoefficients &eta) {
    return eta.kind == LinkKind::sigmoid ? sigmoid_link(z, eta) : beta_exp_link_mean(z, eta);
}

// ---------------------------------------------------------------------------
// Simulation

struct SimResult {
    HiddenStateMatrix x;
    SymptomTensor y;
    InfectionParams params;
};

// Escape probability (1-alpha_n) * prod over infected neighbours of the matching (1-beta).
inline double escape_probability(const HiddenStateMatrix &x, const DynamicNetwork &g, const InfectionParams &p,
                                 BetaMode mode, std::size_t n, std::size_t t) {
    double escape = 1.0 - p.alpha[n];
    for (auto m : g.neighbors(t, n))
        if (x(m, t - 1))
            escape *= 1.0 - (mode == BetaMode::receive ? p.beta[n] : p.beta[m]);
    return escape;
}

inline SymptomTensor mask_missing(const SymptomTensor &y, double p_miss, const Rng &rng) {
    if (!(p_miss >= 0.0 && p_miss <= 1.0))
        throw DomainError("missing probability must lie in [0,1]");
    SymptomTensor out = y;
    for (std::size_t n = 0; n < y.num_nodes(); ++n) {
        Rng r = rng.substream({3, n});
        for (std::size_t t = 1; t <= y.num_days(); ++t)
            for (std::size_t s = 0; s < y.num_symptoms(); ++s) {
                if (y.missing(n, t, s))
                    continue;
                if (r.bernoulli(p_miss))
                    out.set(n, t, s, SymptomTensor::kMissing);
            }
    }
    return out;
}

// Forward simulation from fixed per-person parameters.
inline SimResult simulate(const DynamicNetwork &g, const InfectionParams &params, const SimConfig &config) {
    params.validate();
    const auto N = g.num_nodes();
    const auto T = g.num_days();
    const auto S = params.num_symptoms();
    if (params.num_people() != N)
        throw DomainError("simulate: parameter count differs from network size");
    if (S == 0)
        throw DomainError("simulate: emission matrix is empty");
    const Rng root(config.seed);
    std::vector<Rng> state_rng, emit_rng;
    for (std::size_t n = 0; n < N; ++n) {
        state_rng.push_back(root.substream({1, n}));
        emit_rng.push_back(root.substream({2, n}));
    }
    SimResult out{HiddenStateMatrix(N, T), SymptomTensor(N, T, S), params};
    for (std::size_t n = 0; n < N; ++n)
        out.x.set(n, 0, state_rng[n].bernoulli(params.pi) ? 1 : 0);
    for (std::size_t t = 1; t <= T; ++t) {
        for (std::size_t n = 0; n < N; ++n) {
            double p_infected;
            if (out.x(n, t - 1) == 1)
                p_infected = 1.0 - params.gamma[n];
            else
                p_infected = 1.0 - escape_probability(out.x, g, params, config.mode, n, t);
            out.x.set(n, t, state_rng[n].bernoulli(p_infected) ? 1 : 0);
        }
    }
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t t = 1; t <= T; ++t) {
            const auto &th = params.theta[out.x(n, t)];
            for (std::size_t s = 0; s < S; ++s)
                out.y.set(n, t, s, emit_rng[n].bernoulli(th[s]) ? 1 : 0);
        }
    if (config.p_miss > 0.0)
        out.y = mask_missing(out.y, config.p_miss, root);
    return out;
}

// Simulation through a covariate link. Beta-exponential ground truth is allowed but
// flagged: one realisation of the per-person draws is not the link's expectation.
inline SimResult simulate(const DynamicNetwork &g, const CovariateMatrix &z, const LinkCoefficients &eta, double pi,
                          std::array<std::vector<double>, 2> theta, const SimConfig &config) {
    if (z.num_people() != g.num_nodes())
        throw DomainError("simulate: covariate rows differ from network size");
    eta.validate(z.dim());
    const auto N = g.num_nodes();
    InfectionParams p;
    p.gamma.resize(N);
    p.alpha.resize(N);
    p.beta.resize(N);
    p.pi = pi;
    p.theta = std::move(theta);
    if (eta.kind == LinkKind::beta_exp) {
        warn("beta-exponential ground truth: simulated parameters are one draw, not the link expectation");
        const Rng root(config.seed);
        for (std::size_t n = 0; n < N; ++n) {
            Rng r = root.substream({4, n});
            p.set_person(n, beta_exp_link_draw(z.row(n), eta, r));
        }
    } else {
        for (std::size_t n = 0; n < N; ++n)
            p.set_person(n, sigmoid_link(z.row(n), eta));
    }
    return simulate(g, p, config);
}

// ---------------------------------------------------------------------------
// Synthetic inputs

struct SyntheticNetworkOptions {
    std::size_t attach = 3;       // preferential-attachment edges per new node
    double daily_activity = 0.35; // probability a base edge is active on a given day
    double random_contacts = 0.01; // expected extra random contacts per node and day
};

// Scale-free base graph (preferential attachment) whose edges switch on independently
// each day; daily degrees are capped at max_degree.
inline DynamicNetwork synthetic_scale_free_network(std::size_t N, std::size_t T, std::size_t max_degree, const Rng &rng,
                                                   SyntheticNetworkOptions opts = {}) {
    if (N < 2)
        throw DomainError("synthetic network needs at least two nodes");
    Rng r = rng.substream({10});
    std::vector<std::pair<std::size_t, std::size_t>> base;
    std::vector<std::size_t> endpoints; // degree-weighted sampling pool
    const std::size_t seed_nodes = std::min(N, opts.attach + 1);
    for (std::size_t i = 0; i < seed_nodes; ++i)
        for (std::size_t j = i + 1; j < seed_nodes; ++j) {
            base.emplace_back(i, j);
            endpoints.push_back(i);
            endpoints.push_back(j);
        }
    for (std::size_t v = seed_nodes; v < N; ++v) {
        std::vector<std::size_t> targets;
        while (targets.size() < std::min(opts.attach, v)) {
            const auto u = endpoints[r.below(endpoints.size())];
            if (std::find(targets.begin(), targets.end(), u) == targets.end())
                targets.push_back(u);
        }
        for (auto u : targets) {
            base.emplace_back(u, v);
            endpoints.push_back(u);
            endpoints.push_back(v);
        }
    }
    std::vector<Edge> edges;
    std::vector<std::size_t> degree(N);
    for (std::size_t t = 1; t <= T; ++t) {
        std::fill(degree.begin(), degree.end(), 0);
        auto try_add = [&](std::size_t i, std::size_t j) {
            if (degree[i] >= max_degree || degree[j] >= max_degree)
                return;
            ++degree[i];
            ++degree[j];
            edges.push_back({t, std::min(i, j), std::max(i, j)});
        };
        for (auto [i, j] : base)
            if (r.bernoulli(opts.daily_activity))
                try_add(i, j);
        const auto extra = static_cast<std::size_t>(std::lround(opts.random_contacts * double(N)));
        for (std::size_t e = 0; e < extra; ++e) {
            const auto i = r.below(N);
            const auto j = r.below(N);
            if (i != j)
                try_add(i, j);
        }
    }
    // Duplicates (base edge drawn again as random contact) collapse in the constructor;
    // the degree cap was applied to the multiset so it still holds.
    return DynamicNetwork(N, T, edges);
}

// Eight correlated lifestyle features (weight, height, diet, exercise, smoking, ...)
// driven by three latent factors, loosely mimicking a dormitory health survey.
inline CovariateMatrix synthetic_lifestyle_covariates(std::size_t N, const Rng &rng) {
    Rng r = rng.substream({11});
    Eigen::MatrixXd z(Eigen::Index(N), 9);
    for (Eigen::Index n = 0; n < Eigen::Index(N); ++n) {
        const double body = r.normal(), diet = r.normal(), active = r.normal();
        z(n, 0) = 1.0;
        z(n, 1) = 68.0 + 12.0 * body + 3.0 * r.normal();             // weight
        z(n, 2) = 172.0 + 6.0 * body + 5.0 * r.normal();             // height
        z(n, 3) = std::max(0.0, 2.0 + 1.2 * diet + 0.6 * r.normal()); // salads per week
        z(n, 4) = std::max(0.0, 3.0 + 1.0 * diet + 0.8 * r.normal()); // veggies per day
        z(n, 5) = std::clamp(std::round(3.5 + 1.1 * diet + 0.5 * r.normal()), 1.0, 6.0); // diet level
        z(n, 6) = std::max(0.0, 1.5 + 1.0 * active + 0.7 * r.normal()); // aerobics per week
        z(n, 7) = std::max(0.0, 2.0 + 1.3 * active + 0.5 * body + 0.7 * r.normal()); // sports per week
        z(n, 8) = r.bernoulli(sigmoid(-1.8 - 0.8 * diet)) ? 1.0 : 0.0; // smoker
    }
    return CovariateMatrix(std::move(z), {"intercept", "weight", "height", "salads_per_week", "veggies_per_day",
                                          "healthy_diet", "aerobics_per_week", "sports_per_week", "smoker"});
}

} // namespace gchmm
