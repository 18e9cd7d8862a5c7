#pragma once

// Metrics, one-step-ahead symptom prediction, the two-step logistic baseline, and the
// semi-synthetic benchmark scenario.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gchmm/belief_propagation.hpp"
#include "gchmm/data_model.hpp"
#include "gchmm/error.hpp"
#include "gchmm/gibbs.hpp"
#include "gchmm/model.hpp"
#include "gchmm/rng.hpp"

namespace gchmm {

// Strict inequality: p == threshold is not infected.
inline int classify(double p, double threshold = 0.5) { return p > threshold ? 1 : 0; }

// Posterior probabilities laid out t*N + n, t = 0..T.
inline HiddenStateMatrix classify(std::span<const double> p, std::size_t N, std::size_t T, double threshold = 0.5) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw DomainError("threshold must lie in (0,1)");
    if (p.size() != N * (T + 1))
        throw DomainError("posterior size differs from N*(T+1)");
    HiddenStateMatrix x(N, T);
    for (std::size_t t = 0; t <= T; ++t)
        for (std::size_t n = 0; n < N; ++n)
            x.set(n, t, classify(p[t * N + n], threshold));
    return x;
}

inline std::vector<double> posterior_vector(const Marginals &m) {
    std::vector<double> p(m.belief.size());
    for (std::size_t i = 0; i < p.size(); ++i)
        p[i] = m.belief[i][1];
    return p;
}

struct Metrics {
    double accuracy = 0.0;
    std::optional<double> recall; // absent when the truth has no infected cell
    std::optional<double> norm_gamma, norm_alpha, norm_beta;
    std::optional<double> y_onestep_accuracy;
};

inline Metrics metrics(const HiddenStateMatrix &truth, const HiddenStateMatrix &pred,
                       const InfectionParams *truth_params = nullptr, const InfectionParams *pred_params = nullptr) {
    if (truth.num_nodes() != pred.num_nodes() || truth.num_days() != pred.num_days())
        throw DomainError("state matrices differ in shape");
    std::size_t agree = 0, pos = 0, tp = 0, cells = 0;
    for (std::size_t n = 0; n < truth.num_nodes(); ++n)
        for (std::size_t t = 0; t <= truth.num_days(); ++t) {
            ++cells;
            agree += truth(n, t) == pred(n, t);
            if (truth(n, t)) {
                ++pos;
                tp += pred(n, t);
            }
        }
    Metrics m;
    m.accuracy = double(agree) / double(cells);
    if (pos)
        m.recall = double(tp) / double(pos);
    if (truth_params && pred_params) {
        if (truth_params->num_people() != pred_params->num_people())
            throw DomainError("parameter vectors differ in length");
        auto norm = [](const std::vector<double> &a, const std::vector<double> &b) {
            double s = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i)
                s += (a[i] - b[i]) * (a[i] - b[i]);
            return std::sqrt(s);
        };
        m.norm_gamma = norm(truth_params->gamma, pred_params->gamma);
        m.norm_alpha = norm(truth_params->alpha, pred_params->alpha);
        m.norm_beta = norm(truth_params->beta, pred_params->beta);
    }
    return m;
}

// Pushes day-t infection probabilities one step through the transition model with
// G_{t+1}, treating contacts as independent. Returns P(x[n][t+1] = 1).
inline std::vector<double> propagate_one_step(std::span<const double> p_now, const InfectionParams &params,
                                              const DynamicNetwork &g, std::size_t t, BetaMode mode) {
    const auto N = g.num_nodes();
    if (t + 1 > g.num_days())
        throw DomainError("no contact graph for the day after the last day");
    std::vector<double> next(N);
    for (std::size_t n = 0; n < N; ++n) {
        double escape = 1.0 - params.alpha[n];
        for (auto m : g.neighbors(t + 1, n))
            escape *= 1.0 - p_now[m] * (mode == BetaMode::receive ? params.beta[n] : params.beta[m]);
        next[n] = p_now[n] * (1.0 - params.gamma[n]) + (1.0 - p_now[n]) * (1.0 - escape);
    }
    return next;
}

// P(y[n][t+1][s] = 1) for every n, s (row-major n*S + s) from filtered beliefs of day t.
inline std::vector<double> one_step_ahead(std::span<const double> p_now, const InfectionParams &params,
                                          const DynamicNetwork &g, std::size_t t, BetaMode mode = BetaMode::receive) {
    const auto next = propagate_one_step(p_now, params, g, t, mode);
    const auto S = params.num_symptoms();
    std::vector<double> out(next.size() * S);
    for (std::size_t n = 0; n < next.size(); ++n)
        for (std::size_t s = 0; s < S; ++s)
            out[n * S + s] = next[n] * params.theta[1][s] + (1.0 - next[n]) * params.theta[0][s];
    return out;
}

// Accuracy of thresholded one-step-ahead forecasts over every observed cell of days 1..T,
// each forecast using only the evidence through the previous day.
inline double one_step_accuracy(const SymptomTensor &y, const DynamicNetwork &g, const InfectionParams &params,
                                BetaMode mode = BetaMode::receive) {
    FactorGraph fg(g, y, params, mode);
    const auto filt = filter_forward(fg);
    const auto N = g.num_nodes(), T = g.num_days(), S = y.num_symptoms();
    std::size_t hit = 0, total = 0;
    std::vector<double> p(N);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t n = 0; n < N; ++n)
            p[n] = filt.p_infected(n, t);
        const auto pred = one_step_ahead(p, params, g, t, mode);
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t s = 0; s < S; ++s) {
                const auto v = y(n, t + 1, s);
                if (v == SymptomTensor::kMissing)
                    continue;
                ++total;
                hit += classify(pred[n * S + s]) == v;
            }
    }
    return total ? double(hit) / double(total) : 0.0;
}

// Least squares of logit(clamped means) on Z; ridge with lambda 1e-6 when Z is rank deficient.
inline Eigen::VectorXd fit_logistic_baseline(std::span<const double> means, const CovariateMatrix &z) {
    const auto N = z.num_people();
    if (means.size() != N)
        throw DomainError("posterior means differ from covariate rows");
    Eigen::VectorXd l(Eigen::Index(N), 1);
    for (std::size_t n = 0; n < N; ++n) {
        const double p = std::clamp(means[n], 1e-6, 1.0 - 1e-6);
        l(Eigen::Index(n)) = std::log(p / (1.0 - p));
    }
    const Eigen::MatrixXd &Z = z.matrix();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Z);
    if (qr.rank() == Z.cols())
        return qr.solve(l);
    warn("collinear covariates; using ridge regression with lambda 1e-6");
    const Eigen::MatrixXd A = Z.transpose() * Z + 1e-6 * Eigen::MatrixXd::Identity(Z.cols(), Z.cols());
    return A.ldlt().solve(Z.transpose() * l);
}

struct BaselineConfig {
    std::size_t iterations = 2000;
    std::optional<std::size_t> burn_in;
    BetaMode mode = BetaMode::receive;
    BetaHyperParams hyper;
    std::uint64_t seed = 0;
};

struct BaselineResult {
    LinkCoefficients eta; // sigmoid coefficients fitted to the posterior means
    GibbsResult gibbs;
    InfectionParams implied;
};

// Stage one: heterogeneous Gibbs with flat Beta(1,1) priors (beta-exponential link at
// eta = 0). Stage two: per-role regression of the posterior means on the covariates.
inline BaselineResult two_step_baseline(const SymptomTensor &y, const DynamicNetwork &g, const CovariateMatrix &z,
                                        const BaselineConfig &cfg) {
    const auto N = g.num_nodes(), S = y.num_symptoms();
    GibbsConfig gc;
    gc.iterations = cfg.iterations;
    gc.burn_in = cfg.burn_in;
    gc.param_mode = ParamMode::beta_exp;
    gc.mode = cfg.mode;
    gc.hyper = cfg.hyper;
    gc.seed = cfg.seed;
    auto flat = LinkCoefficients::zeros(LinkKind::beta_exp, z.dim());
    InfectionParams init = InfectionParams::homogeneous(
        N, {0.5, 0.5, 0.5}, cfg.hyper.pi.mean(), std::vector<double>(S, cfg.hyper.theta0.mean()),
        std::vector<double>(S, cfg.hyper.theta1.mean()));
    BaselineResult r;
    r.gibbs = run_gibbs(g, y, init, gc, &z, flat);
    r.eta = LinkCoefficients::zeros(LinkKind::sigmoid, z.dim());
    r.eta.eta[0] = fit_logistic_baseline(r.gibbs.gamma, z);
    r.eta.eta[1] = fit_logistic_baseline(r.gibbs.alpha, z);
    r.eta.eta[2] = fit_logistic_baseline(r.gibbs.beta, z);
    r.implied = r.gibbs.final_params;
    for (std::size_t n = 0; n < N; ++n)
        r.implied.set_person(n, sigmoid_link(z.row(n), r.eta));
    r.implied.pi = r.gibbs.pi;
    r.implied.theta = r.gibbs.theta;
    return r;
}

// ---------------------------------------------------------------------------
// Semi-synthetic benchmark: scale-free dynamic contacts with a degree cap, eight
// correlated lifestyle features reduced to four principal components, and a sigmoid
// ground truth.

struct ScenarioOptions {
    std::size_t N = 84, T = 107, S = 6, max_degree = 11;
    int components = 4;
    double p_miss = 0.0;
    BetaMode mode = BetaMode::receive;
    std::uint64_t seed = 1;
};

struct Scenario {
    DynamicNetwork g;
    CovariateMatrix raw_covariates;
    CovariateMatrix z;
    PcaResult pca;
    LinkCoefficients truth_eta;
    SimResult sim; // y is already masked by p_miss
};

inline LinkCoefficients scenario_truth(std::size_t K) {
    if (K != 5)
        throw DomainError("the benchmark ground truth is defined for four components");
    auto eta = LinkCoefficients::zeros(LinkKind::sigmoid, K);
    eta.eta[0] << -0.85, 0.30, -0.20, 0.15, 0.10;
    eta.eta[1] << -3.90, 0.30, 0.20, -0.20, 0.10;
    eta.eta[2] << -2.75, 0.25, -0.30, 0.20, 0.10;
    return eta;
}

// Beta-exponential truth whose means equal the sigmoid truth: Beta(c e^{z.eta}, c) has
// mean sigmoid(z.eta), with c = 20 controlling the spread.
inline LinkCoefficients scenario_truth_betaexp(std::size_t K) {
    const auto sig = scenario_truth(K);
    auto eta = LinkCoefficients::zeros(LinkKind::beta_exp, K);
    const double c = std::log(20.0);
    for (std::size_t r = 0; r < 3; ++r) {
        eta.eta[2 * r] = sig.eta[r];
        eta.eta[2 * r](0) += c;
        eta.eta[2 * r + 1](0) = c;
    }
    return eta;
}

inline std::array<std::vector<double>, 2> scenario_theta(std::size_t S) {
    const std::vector<double> t1{0.80, 0.75, 0.70, 0.85, 0.60, 0.70}, t0{0.05, 0.10, 0.05, 0.08, 0.10, 0.05};
    std::array<std::vector<double>, 2> th{std::vector<double>(S), std::vector<double>(S)};
    for (std::size_t s = 0; s < S; ++s) {
        th[0][s] = t0[s % t0.size()];
        th[1][s] = t1[s % t1.size()];
    }
    return th;
}

inline Scenario make_scenario(const ScenarioOptions &o) {
    const Rng root(o.seed);
    auto g = synthetic_scale_free_network(o.N, o.T, o.max_degree, root);
    auto raw = synthetic_lifestyle_covariates(o.N, root);
    auto pca = pca_reduce(raw, o.components);
    auto eta = scenario_truth(pca.reduced.dim());
    SimConfig sc;
    sc.link = LinkKind::sigmoid;
    sc.mode = o.mode;
    sc.p_miss = o.p_miss;
    sc.seed = root.substream({12}).seed();
    auto sim = simulate(g, pca.reduced, eta, 0.1, scenario_theta(o.S), sc);
    return Scenario{std::move(g), std::move(raw), pca.reduced, std::move(pca), std::move(eta), std::move(sim)};
}

} // namespace gchmm
