#pragma once

// Burn-in Gibbs EM for the hierarchical model: Gibbs E-step under the previous
// coefficients, Newton M-steps on the burn-in average and on the last sample, and a
// stochastic-approximation combination of the two.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "gchmm/data_model.hpp"
#include "gchmm/error.hpp"
#include "gchmm/gibbs.hpp"
#include "gchmm/likelihood.hpp"
#include "gchmm/model.hpp"
#include "gchmm/newton.hpp"

namespace gchmm {

struct BgemConfig {
    std::size_t samples = 60; // J, Gibbs sweeps per E-step
    std::size_t burn_in = 30; // B
    std::size_t max_em_iters = 10;
    double tol = 1e-3;
    LinkKind link = LinkKind::sigmoid;
    BetaMode mode = BetaMode::receive;
    SourceModel sources = SourceModel::drop_both;
    bool fast_binary = false;
    double prior_scale = 10.0;
    NewtonOptions newton;
    BetaHyperParams hyper;
    std::uint64_t seed = 0;

    void validate() const {
        if (samples < 1 || burn_in >= samples)
            throw DomainError("bGEM needs 0 <= burn-in < samples");
        if (max_em_iters < 1)
            throw DomainError("bGEM needs at least one EM iteration");
        if (link == LinkKind::fixed)
            throw DomainError("bGEM estimates a sigmoid or beta-exponential link");
        if (!(prior_scale > 0.0))
            throw DomainError("prior scale must be positive");
    }
};

struct BgemIteration {
    std::size_t k = 0;
    double delta = 0.0;
    double q_bgem = 0.0, q_sem = 0.0;
    double grad_norm_bgem = 0.0, grad_norm_sem = 0.0;
    double eta_change = 0.0;
    std::size_t newton_steps_bgem = 0, newton_steps_sem = 0;
};

struct BgemResult {
    LinkCoefficients eta;
    std::size_t N = 0, T = 0;
    std::vector<double> p_infected; // posterior mean from the last E-step, index t*N + n
    InfectionParams implied;        // per-person parameters implied by eta, with pi and theta means
    std::vector<BgemIteration> diagnostics;
    std::size_t iterations = 0;
    bool converged = false;

    double posterior(std::size_t n, std::size_t t) const { return p_infected[t * N + n]; }
};

namespace detail {

// Majority source label per cell among samples whose label is consistent with x_hat;
// cells without a consistent vote take the most probable source under `p`.
inline AuxiliarySourceMatrix majority_sources(const HiddenStateMatrix &xh, const std::vector<AuxiliarySourceMatrix> &rs, const DynamicNetwork &g,
                                              const InfectionParams &p, BetaMode mode, SourceModel model) {
    const auto N = xh.num_nodes(), T = xh.num_days();
    AuxiliarySourceMatrix out(N, T, mode);
    std::map<int, std::size_t> votes;
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t t = 1; t <= T; ++t) {
            if (!(xh(n, t - 1) == 0 && xh(n, t) == 1))
                continue;
            const auto src = infectious_sources(xh, g, n, t);
            auto consistent = [&](int code) {
                if (mode == BetaMode::receive)
                    return code == 1 || (src.count > 0 && (code == 2 || code == 3));
                if (code == AuxiliarySourceMatrix::kOutside)
                    return true;
                return code >= 0 && std::find(src.people.begin(), src.people.end(), std::size_t(code)) != src.people.end();
            };
            votes.clear();
            for (const auto &r : rs)
                if (r.defined(n, t) && consistent(r(n, t)))
                    ++votes[r(n, t)];
            if (!votes.empty()) {
                auto best = std::max_element(votes.begin(), votes.end(),
                                             [](const auto &a, const auto &b) { return a.second < b.second; });
                out.set(n, t, best->first);
                continue;
            }
            if (mode == BetaMode::receive) {
                const auto w = source_probabilities(p.alpha[n], p.beta[n], src.count, model);
                out.set(n, t, 1 + int(std::max_element(w.begin(), w.end()) - w.begin()));
            } else {
                std::vector<double> betas;
                for (auto m : src.people)
                    betas.push_back(p.beta[m]);
                const auto w = transmit_source_probabilities(p.alpha[n], betas);
                const auto k = std::size_t(std::max_element(w.begin(), w.end()) - w.begin());
                out.set(n, t, k == 0 ? AuxiliarySourceMatrix::kOutside : int(src.people[k - 1]));
            }
        }
    return out;
}

} // namespace detail

// Per-person parameters implied by coefficients, with pi and theta carried over.
inline InfectionParams implied_infection_params(const CovariateMatrix &z, const LinkCoefficients &eta, double pi,
                                                std::array<std::vector<double>, 2> theta) {
    InfectionParams p;
    const auto N = z.num_people();
    p.gamma.resize(N);
    p.alpha.resize(N);
    p.beta.resize(N);
    for (std::size_t n = 0; n < N; ++n)
        p.set_person(n, implied_params(z.row(n), eta));
    p.pi = pi;
    p.theta = std::move(theta);
    return p;
}

// eta(k) = (1 - delta) eta_bGEM + delta eta_SEM, written so that delta = 0 or 1
// returns one endpoint exactly and every component stays between the two.
inline Eigen::VectorXd combine_estimates(const Eigen::VectorXd &bgem, const Eigen::VectorXd &sem, double delta) {
    if (!(delta >= 0.0 && delta <= 1.0))
        throw DomainError("step size must lie in [0,1]");
    Eigen::VectorXd out(bgem.size());
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        const double lo = std::min(bgem(i), sem(i)), hi = std::max(bgem(i), sem(i));
        out(i) = std::clamp(bgem(i) + delta * (sem(i) - bgem(i)), lo, hi);
    }
    return out;
}

inline BgemResult run_bgem(const SymptomTensor &y, const DynamicNetwork &g, const CovariateMatrix &z,
                           const BgemConfig &cfg, std::optional<LinkCoefficients> init = std::nullopt) {
    cfg.validate();
    const auto N = g.num_nodes(), T = g.num_days(), S = y.num_symptoms();
    if (z.num_people() != N)
        throw DomainError("covariate rows differ from network size");
    LinkCoefficients eta = init ? *init : LinkCoefficients::zeros(cfg.link, z.dim(), cfg.prior_scale);
    eta.validate(z.dim());
    if (eta.kind != cfg.link)
        throw DomainError("initial coefficients do not match the requested link");

    GibbsConfig gc;
    gc.param_mode = cfg.link == LinkKind::sigmoid ? ParamMode::sigmoid : ParamMode::beta_exp;
    gc.mode = cfg.mode;
    gc.sources = cfg.sources;
    gc.hyper = cfg.hyper;
    gc.seed = cfg.seed;
    InfectionParams start = implied_infection_params(
        z, eta, cfg.hyper.pi.mean(),
        {std::vector<double>(S, cfg.hyper.theta0.mean()), std::vector<double>(S, cfg.hyper.theta1.mean())});
    GibbsSampler sampler(g, y, start, gc, &z, eta);

    BgemResult res;
    res.N = N;
    res.T = T;
    const auto kept = cfg.samples - cfg.burn_in;
    const double w = 1.0 / double(kept);
    for (std::size_t k = 1; k <= cfg.max_em_iters; ++k) {
        sampler.set_link(eta);
        PosteriorAverager avg(N, T, S);
        std::vector<HiddenStateMatrix> xs;
        std::vector<AuxiliarySourceMatrix> rs;
        for (std::size_t j = 1; j <= cfg.samples; ++j) {
            sampler.sweep();
            if (j <= cfg.burn_in)
                continue;
            avg.add(sampler.states(), sampler.params());
            xs.push_back(sampler.states());
            rs.push_back(sampler.sources());
        }
        GibbsResult means;
        avg.fill(means);
        res.p_infected = means.p_infected;

        // Build Q_bGEM (burn-in average, or the single pseudo-sample) and Q_SEM (last draw).
        std::function<ObjectiveEval(const Eigen::VectorXd &)> q_bgem, q_sem;
        auto with = [&eta](const Eigen::VectorXd &v) {
            LinkCoefficients e = eta;
            e.set_stacked(v);
            return e;
        };
        std::optional<HiddenStateMatrix> xhat;
        if (cfg.fast_binary) {
            xhat.emplace(N, T);
            for (std::size_t t = 0; t <= T; ++t)
                for (std::size_t n = 0; n < N; ++n)
                    xhat->set(n, t, means.posterior(n, t) > 0.5 ? 1 : 0);
        }
        if (cfg.link == LinkKind::sigmoid) {
            auto avg_stats = std::make_shared<SigmoidStats>(N, cfg.mode);
            if (xhat)
                avg_stats->add(*xhat, g);
            else
                for (const auto &x : xs)
                    avg_stats->add(x, g, w);
            auto last_stats = std::make_shared<SigmoidStats>(N, cfg.mode);
            last_stats->add(xs.back(), g);
            q_bgem = [&, avg_stats](const Eigen::VectorXd &v) { return log_likelihood_sigmoid(*avg_stats, z, with(v)); };
            q_sem = [&, last_stats](const Eigen::VectorXd &v) { return log_likelihood_sigmoid(*last_stats, z, with(v)); };
        } else {
            auto counts = std::make_shared<std::vector<CountStatistics>>();
            if (xhat) {
                const auto rhat = detail::majority_sources(*xhat, rs, g, sampler.params(), cfg.mode, cfg.sources);
                counts->push_back(count_statistics(*xhat, rhat, g, cfg.mode));
            } else {
                for (std::size_t i = 0; i < xs.size(); ++i)
                    counts->push_back(count_statistics(xs[i], rs[i], g, cfg.mode));
            }
            auto last = std::make_shared<CountStatistics>(count_statistics(xs.back(), rs.back(), g, cfg.mode));
            auto weighted = std::make_shared<std::vector<WeightedCounts>>();
            for (const auto &c : *counts)
                weighted->push_back({&c, 1.0 / double(counts->size())});
            q_bgem = [&, counts, weighted](const Eigen::VectorXd &v) {
                return log_likelihood_betaexp(std::span<const WeightedCounts>(*weighted), z, with(v));
            };
            q_sem = [&, last](const Eigen::VectorXd &v) { return log_likelihood_betaexp(*last, z, with(v)); };
        }
        const Eigen::VectorXd prev = eta.stacked();
        const auto nb = newton_maximize(q_bgem, prev, cfg.newton);
        const auto ns = newton_maximize(q_sem, prev, cfg.newton);
        const double delta = step_size_schedule(k);
        const Eigen::VectorXd next = combine_estimates(nb.eta, ns.eta, delta);
        eta.set_stacked(next);

        BgemIteration d;
        d.k = k;
        d.delta = delta;
        d.q_bgem = nb.value;
        d.q_sem = ns.value;
        d.grad_norm_bgem = nb.gradient_norm;
        d.grad_norm_sem = ns.gradient_norm;
        d.eta_change = (next - prev).lpNorm<Eigen::Infinity>();
        d.newton_steps_bgem = nb.iterations;
        d.newton_steps_sem = ns.iterations;
        res.diagnostics.push_back(d);
        res.iterations = k;
        res.implied = implied_infection_params(z, eta, means.pi, means.theta);
        if (d.eta_change < cfg.tol) {
            res.converged = true;
            break;
        }
    }
    res.eta = eta;
    return res;
}

} // namespace gchmm
