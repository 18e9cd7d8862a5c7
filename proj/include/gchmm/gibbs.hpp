#pragma once

// Gibbs sampling for homogeneous and hierarchical models with auxiliary infection
// sources. R[n][t] labels the source of the transition x[n][t-1] = 0 -> x[n][t] = 1.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gchmm/data_model.hpp"
#include "gchmm/error.hpp"
#include "gchmm/model.hpp"
#include "gchmm/rng.hpp"

namespace gchmm {

// Receive mode: 1 outside, 2 inside, 3 both. Transmit mode: kOutside or the index of
// the infecting neighbour.
class AuxiliarySourceMatrix {
  public:
    static constexpr int kUndefined = -2;
    static constexpr int kOutside = -1;
    static constexpr int kReceiveOutside = 1, kReceiveInside = 2, kReceiveBoth = 3;

    AuxiliarySourceMatrix() = default;
    AuxiliarySourceMatrix(std::size_t N, std::size_t T, BetaMode mode)
        : N_(N), T_(T), mode_(mode), code_(N * (T + 1), kUndefined) {}

    std::size_t num_nodes() const noexcept { return N_; }
    std::size_t num_days() const noexcept { return T_; }
    BetaMode mode() const noexcept { return mode_; }

    int operator()(std::size_t n, std::size_t t) const { return code_[n * (T_ + 1) + t]; }
    bool defined(std::size_t n, std::size_t t) const { return (*this)(n, t) != kUndefined; }
    void set(std::size_t n, std::size_t t, int v) { code_[n * (T_ + 1) + t] = v; }

    bool operator==(const AuxiliarySourceMatrix &) const = default;

  private:
    std::size_t N_ = 0, T_ = 0;
    BetaMode mode_ = BetaMode::receive;
    std::vector<int> code_;
};

enum class SourceModel {
    drop_both, // P(R = 3) treated as 0 and the rest renormalised
    exact,     // the full three-way split
};

// Source probabilities (outside, inside, both) for one receive-mode infection.
inline std::array<double, 3> source_probabilities(double alpha, double beta, std::size_t C,
                                                  SourceModel model = SourceModel::exact) {
    if (C == 0)
        return {1.0, 0.0, 0.0};
    const double keep = std::pow(1.0 - beta, double(C));
    std::array<double, 3> w{alpha * keep, (1.0 - alpha) * (1.0 - keep), alpha * (1.0 - keep)};
    if (model == SourceModel::drop_both)
        w[2] = 0.0;
    const double s = w[0] + w[1] + w[2];
    for (auto &v : w)
        v /= s;
    return w;
}

// First-order forms of the three source terms, the ones that keep alpha and beta
// conjugate: outside alpha(1-beta)^C, inside C(1-alpha)beta, both C alpha beta.
// Their sum is exact for C <= 1.
inline std::array<double, 3> linearized_source_terms(double alpha, double beta, std::size_t C) {
    const double c = double(C);
    return {alpha * std::pow(1.0 - beta, c), c * (1.0 - alpha) * beta, c * alpha * beta};
}

inline double linearized_infection_probability(double alpha, double beta, std::size_t C) {
    const auto w = linearized_source_terms(alpha, beta, C);
    return w[0] + w[1] + w[2];
}

// The older additive approximation alpha + C beta, kept for comparison.
inline double additive_infection_probability(double alpha, double beta, std::size_t C) {
    return alpha + double(C) * beta;
}

// Transmit-mode weights: index 0 is the outside source, index k the k-th infected
// contact in `source_betas`. Normalised by their sum.
inline std::vector<double> transmit_source_probabilities(double alpha, std::span<const double> source_betas) {
    std::vector<double> w(source_betas.size() + 1);
    double keep = 1.0;
    for (double b : source_betas)
        keep *= 1.0 - b;
    w[0] = alpha * keep;
    for (std::size_t k = 0; k < source_betas.size(); ++k)
        w[k + 1] = (1.0 - alpha) * source_betas[k];
    double s = 0.0;
    for (double v : w)
        s += v;
    for (auto &v : w)
        v /= s;
    return w;
}

inline AuxiliarySourceMatrix sample_aux_source(const HiddenStateMatrix &x, const InfectionParams &p,
                                               const DynamicNetwork &g, Rng &rng, BetaMode mode,
                                               SourceModel model = SourceModel::drop_both) {
    AuxiliarySourceMatrix r(x.num_nodes(), x.num_days(), mode);
    std::vector<double> betas;
    for (std::size_t n = 0; n < x.num_nodes(); ++n)
        for (std::size_t t = 1; t <= x.num_days(); ++t) {
            if (!(x(n, t - 1) == 0 && x(n, t) == 1))
                continue;
            const auto src = infectious_sources(x, g, n, t);
            if (mode == BetaMode::receive) {
                const auto w = source_probabilities(p.alpha[n], p.beta[n], src.count, model);
                r.set(n, t, 1 + int(rng.categorical(w)));
            } else {
                betas.clear();
                for (auto m : src.people)
                    betas.push_back(p.beta[m]);
                const auto w = transmit_source_probabilities(p.alpha[n], betas);
                const auto k = rng.categorical(w);
                r.set(n, t, k == 0 ? AuxiliarySourceMatrix::kOutside : int(src.people[k - 1]));
            }
        }
    return r;
}

// Sufficient statistics of one person. The alpha and beta pairs are the
// (success, failure) counts added to the two shape parameters of their posteriors.
struct PersonCounts {
    std::size_t c00 = 0, c01 = 0, c10 = 0, c11 = 0;
    std::size_t r_outside = 0, r_inside = 0, r_both = 0; // sources of this person's infections
    std::size_t alpha_success = 0, alpha_failure = 0;
    std::size_t beta_success = 0, beta_failure = 0;

    bool operator==(const PersonCounts &) const = default;
};

using CountStatistics = std::vector<PersonCounts>;

inline CountStatistics count_statistics(const HiddenStateMatrix &x, const AuxiliarySourceMatrix &r,
                                        const DynamicNetwork &g, BetaMode mode) {
    const auto N = x.num_nodes(), T = x.num_days();
    if (r.num_nodes() != N || r.num_days() != T || g.num_nodes() != N || g.num_days() != T)
        throw DomainError("count_statistics: shapes differ");
    CountStatistics c(N);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t t = 1; t <= T; ++t) {
            const int prev = x(n, t - 1), next = x(n, t);
            const int code = r(n, t);
            auto where = [&] { return " at node " + std::to_string(n) + ", day " + std::to_string(t); };
            if (!(prev == 0 && next == 1) && code != AuxiliarySourceMatrix::kUndefined)
                throw IntegrityError("source label off a 0->1 transition" + where());
            if (prev == 1) {
                (next ? c[n].c11 : c[n].c10)++;
                continue;
            }
            const auto src = infectious_sources(x, g, n, t);
            if (next == 0) {
                c[n].c00++;
                if (mode == BetaMode::receive)
                    c[n].beta_failure += src.count;
                else
                    for (auto m : src.people)
                        c[m].beta_failure++;
                continue;
            }
            c[n].c01++;
            if (mode == BetaMode::receive) {
                if (code < 1 || code > 3 || (src.count == 0 && code != 1))
                    throw IntegrityError("invalid receive-mode source label" + where());
                if (code == 1) {
                    c[n].r_outside++;
                    c[n].beta_failure += src.count;
                } else if (code == 2) {
                    c[n].r_inside++;
                } else {
                    c[n].r_both++;
                }
            } else {
                if (code == AuxiliarySourceMatrix::kOutside) {
                    c[n].r_outside++;
                    for (auto m : src.people)
                        c[m].beta_failure++;
                } else if (code >= 0 && std::find(src.people.begin(), src.people.end(), std::size_t(code)) !=
                                            src.people.end()) {
                    c[n].r_inside++;
                    c[std::size_t(code)].beta_success++;
                } else {
                    throw IntegrityError("transmit-mode source is not an infected contact" + where());
                }
            }
        }
    for (auto &p : c) {
        p.alpha_success = p.r_outside + p.r_both;
        p.alpha_failure = p.r_inside + p.c00;
        if (mode == BetaMode::receive)
            p.beta_success = p.r_inside + p.r_both;
    }
    return c;
}

// Per-person draws from the conjugate posteriors under a beta-exponential prior.
inline InfectionParams sample_infection_params(const CountStatistics &c, const CovariateMatrix &z,
                                               const LinkCoefficients &eta, Rng &rng, InfectionParams base) {
    const auto N = c.size();
    if (z.num_people() != N)
        throw DomainError("sample_infection_params: covariate rows differ from counts");
    base.gamma.resize(N);
    base.alpha.resize(N);
    base.beta.resize(N);
    for (std::size_t n = 0; n < N; ++n) {
        const Eigen::VectorXd zn = z.row(n);
        auto shape = [&](int k) { return std::exp(zn.dot(eta.eta[std::size_t(k)])); };
        base.gamma[n] = rng.beta(shape(0) + double(c[n].c10), shape(1) + double(c[n].c11));
        base.alpha[n] = rng.beta(shape(2) + double(c[n].alpha_success), shape(3) + double(c[n].alpha_failure));
        base.beta[n] = rng.beta(shape(4) + double(c[n].beta_success), shape(5) + double(c[n].beta_failure));
    }
    return base;
}

// Pooled draws for the homogeneous model.
inline PersonParams sample_homogeneous_params(const CountStatistics &c, const BetaHyperParams &h, Rng &rng) {
    PersonCounts s;
    for (const auto &p : c) {
        s.c10 += p.c10;
        s.c11 += p.c11;
        s.alpha_success += p.alpha_success;
        s.alpha_failure += p.alpha_failure;
        s.beta_success += p.beta_success;
        s.beta_failure += p.beta_failure;
    }
    PersonParams p;
    p.gamma = rng.beta(h.gamma.a + double(s.c10), h.gamma.b + double(s.c11));
    p.alpha = rng.beta(h.alpha.a + double(s.alpha_success), h.alpha.b + double(s.alpha_failure));
    p.beta = rng.beta(h.beta.a + double(s.beta_success), h.beta.b + double(s.beta_failure));
    return p;
}

inline double sample_initial_rate(const HiddenStateMatrix &x, const BetaHyperParams &h, Rng &rng) {
    double infected = 0.0;
    for (std::size_t n = 0; n < x.num_nodes(); ++n)
        infected += x(n, 0);
    return rng.beta(h.pi.a + infected, h.pi.b + double(x.num_nodes()) - infected);
}

// Draws theta from its full conditional (observed cells only), then fills every
// missing cell from Bernoulli(theta[x][s]). The imputations are returned, never stored
// back into the observed tensor.
inline std::pair<std::array<std::vector<double>, 2>, SymptomTensor>
sample_emissions_and_impute(const HiddenStateMatrix &x, const SymptomTensor &y, const BetaHyperParams &h, Rng &rng) {
    const auto N = y.num_nodes(), T = y.num_days(), S = y.num_symptoms();
    std::vector<std::array<double, 2>> ones(S, {0.0, 0.0}), zeros(S, {0.0, 0.0});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t t = 1; t <= T; ++t) {
            const int i = x(n, t);
            for (std::size_t s = 0; s < S; ++s) {
                const auto v = y(n, t, s);
                if (v == 1)
                    ones[s][i] += 1.0;
                else if (v == 0)
                    zeros[s][i] += 1.0;
            }
        }
    std::array<std::vector<double>, 2> theta{std::vector<double>(S), std::vector<double>(S)};
    const BetaPrior prior[2] = {h.theta0, h.theta1};
    for (int i = 0; i < 2; ++i)
        for (std::size_t s = 0; s < S; ++s)
            theta[i][s] = rng.beta(prior[i].a + ones[s][i], prior[i].b + zeros[s][i]);
    SymptomTensor filled = y;
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t t = 1; t <= T; ++t)
            for (std::size_t s = 0; s < S; ++s)
                if (y.missing(n, t, s))
                    filled.set(n, t, s, rng.bernoulli(theta[x(n, t)][s]) ? 1 : 0);
    return {theta, filled};
}

// P(x[n][t] = next | x[n][t-1] = prev) read off the current state of the other chains.
inline double chain_transition(const HiddenStateMatrix &x, const DynamicNetwork &g, const InfectionParams &p,
                               BetaMode mode, std::size_t n, std::size_t t, int prev, int next) {
    if (prev == 1)
        return next ? 1.0 - p.gamma[n] : p.gamma[n];
    double escape = 1.0 - p.alpha[n];
    for (auto m : g.neighbors(t, n))
        if (x(m, t - 1))
            escape *= 1.0 - (mode == BetaMode::receive ? p.beta[n] : p.beta[m]);
    return next ? 1.0 - escape : escape;
}

// Full conditional P(x[n][t] = 1 | everything else). Missing symptoms are integrated
// out; the Markov blanket covers the own chain at t-1 and t+1 and every contact whose
// transition into t+1 sees x[n][t].
inline double hidden_state_conditional(HiddenStateMatrix &x, const SymptomTensor &y, const InfectionParams &p,
                                       const DynamicNetwork &g, BetaMode mode, std::size_t n, std::size_t t) {
    const auto T = x.num_days();
    const int saved = x(n, t);
    double w[2];
    for (int i = 0; i < 2; ++i) {
        x.set(n, t, i);
        double v = 1.0;
        if (t == 0) {
            v = i ? p.pi : 1.0 - p.pi;
        } else {
            v = chain_transition(x, g, p, mode, n, t, x(n, t - 1), i);
            for (std::size_t s = 0; s < y.num_symptoms(); ++s) {
                const auto o = y(n, t, s);
                if (o != SymptomTensor::kMissing)
                    v *= o ? p.theta[i][s] : 1.0 - p.theta[i][s];
            }
        }
        if (t < T) {
            v *= chain_transition(x, g, p, mode, n, t + 1, i, x(n, t + 1));
            for (auto m : g.neighbors(t + 1, n))
                if (x(m, t) == 0)
                    v *= chain_transition(x, g, p, mode, m, t + 1, 0, x(m, t + 1));
        }
        w[i] = v;
    }
    x.set(n, t, saved);
    const double s = w[0] + w[1];
    if (!(s > 0.0) || !std::isfinite(s))
        throw NumericalError("degenerate full conditional at node " + std::to_string(n) + ", day " + std::to_string(t));
    return w[1] / s;
}

inline int sample_hidden_state(HiddenStateMatrix &x, const SymptomTensor &y, const InfectionParams &p,
                               const DynamicNetwork &g, BetaMode mode, std::size_t n, std::size_t t, Rng &rng) {
    const int v = rng.bernoulli(hidden_state_conditional(x, y, p, g, mode, n, t)) ? 1 : 0;
    x.set(n, t, v);
    return v;
}

// ---------------------------------------------------------------------------
// Sampler

enum class ParamMode {
    known,       // every parameter fixed
    homogeneous, // shared gamma, alpha, beta with beta priors
    beta_exp,    // per-person draws with Beta(exp(z.eta1), exp(z.eta2)) priors
    sigmoid,     // per-person values fixed at sigmoid(z.eta)
};

struct GibbsConfig {
    std::size_t iterations = 500;
    std::optional<std::size_t> burn_in; // default: half the iterations
    ParamMode param_mode = ParamMode::known;
    BetaMode mode = BetaMode::receive;
    SourceModel sources = SourceModel::drop_both;
    BetaHyperParams hyper;
    std::size_t thin = 0; // keep every thin-th post-burn-in draw in the trace; 0 keeps none
    std::uint64_t seed = 0;

    std::size_t burn() const { return burn_in.value_or(iterations / 2); }
};

struct TraceRecord {
    std::size_t iteration = 0;
    double pi = 0.0;
    std::array<std::vector<double>, 2> theta;
    double mean_gamma = 0.0, mean_alpha = 0.0, mean_beta = 0.0;
    std::size_t infected_cells = 0;
};

class GibbsSampler {
  public:
    GibbsSampler(const DynamicNetwork &g, const SymptomTensor &y, InfectionParams init, GibbsConfig cfg,
                 const CovariateMatrix *z = nullptr, std::optional<LinkCoefficients> eta = std::nullopt)
        : g_(g), y_(y), cfg_(std::move(cfg)), z_(z), eta_(std::move(eta)), params_(std::move(init)),
          rng_(Rng(cfg_.seed).substream({20})), x_(g.num_nodes(), g.num_days()),
          r_(g.num_nodes(), g.num_days(), cfg_.mode), imputed_(y) {
        if (y.num_nodes() != g.num_nodes() || y.num_days() != g.num_days())
            throw DomainError("symptom tensor shape differs from network");
        if (params_.num_people() != g.num_nodes() || params_.num_symptoms() != y.num_symptoms())
            throw DomainError("parameter shape differs from data");
        params_.validate();
        if (cfg_.param_mode == ParamMode::beta_exp || cfg_.param_mode == ParamMode::sigmoid) {
            if (!z_ || !eta_)
                throw DomainError("hierarchical sampling needs covariates and link coefficients");
            eta_->validate(z_->dim());
        }
        initialize_states();
        if (cfg_.param_mode == ParamMode::sigmoid)
            apply_sigmoid();
        r_ = sample_aux_source(x_, params_, g_, rng_, cfg_.mode, cfg_.sources);
    }

    // Emission-only classification of each cell; x[n][0] copies day 1.
    void initialize_states() {
        const auto N = x_.num_nodes(), T = x_.num_days();
        for (std::size_t n = 0; n < N; ++n) {
            for (std::size_t t = 1; t <= T; ++t) {
                double l[2] = {1.0, 1.0};
                for (std::size_t s = 0; s < y_.num_symptoms(); ++s) {
                    const auto o = y_(n, t, s);
                    if (o == SymptomTensor::kMissing)
                        continue;
                    for (int i = 0; i < 2; ++i)
                        l[i] *= o ? params_.theta[i][s] : 1.0 - params_.theta[i][s];
                }
                x_.set(n, t, l[1] > l[0] ? 1 : 0);
            }
            x_.set(n, 0, T ? x_(n, 1) : 0);
        }
    }

    void set_states(const HiddenStateMatrix &x) {
        x_ = x;
        r_ = sample_aux_source(x_, params_, g_, rng_, cfg_.mode, cfg_.sources);
    }

    void set_link(const LinkCoefficients &eta) {
        eta.validate(z_ ? z_->dim() : 0);
        eta_ = eta;
        if (cfg_.param_mode == ParamMode::sigmoid)
            apply_sigmoid();
    }

    // One systematic scan: parameters, then X in (t, n) raster order, then R.
    void sweep() {
        switch (cfg_.param_mode) {
        case ParamMode::known:
            break;
        case ParamMode::homogeneous: {
            const auto p = sample_homogeneous_params(count_statistics(x_, r_, g_, cfg_.mode), cfg_.hyper, rng_);
            for (std::size_t n = 0; n < params_.num_people(); ++n)
                params_.set_person(n, p);
            break;
        }
        case ParamMode::beta_exp:
            params_ = sample_infection_params(count_statistics(x_, r_, g_, cfg_.mode), *z_, *eta_, rng_,
                                              std::move(params_));
            break;
        case ParamMode::sigmoid:
            apply_sigmoid();
            break;
        }
        if (cfg_.param_mode != ParamMode::known) {
            params_.pi = sample_initial_rate(x_, cfg_.hyper, rng_);
            auto [theta, filled] = sample_emissions_and_impute(x_, y_, cfg_.hyper, rng_);
            params_.theta = std::move(theta);
            imputed_ = std::move(filled);
        }
        for (std::size_t t = 0; t <= x_.num_days(); ++t)
            for (std::size_t n = 0; n < x_.num_nodes(); ++n)
                sample_hidden_state(x_, y_, params_, g_, cfg_.mode, n, t, rng_);
        r_ = sample_aux_source(x_, params_, g_, rng_, cfg_.mode, cfg_.sources);
        ++sweeps_;
    }

    const HiddenStateMatrix &states() const noexcept { return x_; }
    const AuxiliarySourceMatrix &sources() const noexcept { return r_; }
    const InfectionParams &params() const noexcept { return params_; }
    const SymptomTensor &imputed() const noexcept { return imputed_; }
    const GibbsConfig &config() const noexcept { return cfg_; }
    const DynamicNetwork &network() const noexcept { return g_; }
    Rng &rng() noexcept { return rng_; }
    std::size_t sweeps() const noexcept { return sweeps_; }

  private:
    void apply_sigmoid() {
        for (std::size_t n = 0; n < params_.num_people(); ++n)
            params_.set_person(n, sigmoid_link(z_->row(n), *eta_));
    }

    const DynamicNetwork &g_;
    const SymptomTensor &y_;
    GibbsConfig cfg_;
    const CovariateMatrix *z_;
    std::optional<LinkCoefficients> eta_;
    InfectionParams params_;
    Rng rng_;
    HiddenStateMatrix x_;
    AuxiliarySourceMatrix r_;
    SymptomTensor imputed_;
    std::size_t sweeps_ = 0;
};

struct GibbsResult {
    std::size_t N = 0, T = 0;
    std::vector<double> p_infected;            // posterior mean, index t*N + n
    std::vector<double> gamma, alpha, beta;    // posterior means per person
    double pi = 0.0;
    std::array<std::vector<double>, 2> theta;  // posterior means
    HiddenStateMatrix final_x;
    AuxiliarySourceMatrix final_r;
    InfectionParams final_params;
    std::vector<TraceRecord> trace;
    std::size_t kept = 0;

    double posterior(std::size_t n, std::size_t t) const { return p_infected[t * N + n]; }
};

// Accumulates post-burn-in means from a sampler.
class PosteriorAverager {
  public:
    PosteriorAverager(std::size_t N, std::size_t T, std::size_t S) : N_(N), T_(T) {
        p_.assign((T + 1) * N, 0.0);
        g_.assign(N, 0.0);
        a_.assign(N, 0.0);
        b_.assign(N, 0.0);
        th_ = {std::vector<double>(S, 0.0), std::vector<double>(S, 0.0)};
    }

    void add(const HiddenStateMatrix &x, const InfectionParams &p) {
        for (std::size_t t = 0; t <= T_; ++t)
            for (std::size_t n = 0; n < N_; ++n)
                p_[t * N_ + n] += x(n, t);
        for (std::size_t n = 0; n < N_; ++n) {
            g_[n] += p.gamma[n];
            a_[n] += p.alpha[n];
            b_[n] += p.beta[n];
        }
        pi_ += p.pi;
        for (int i = 0; i < 2; ++i)
            for (std::size_t s = 0; s < th_[i].size(); ++s)
                th_[i][s] += p.theta[i][s];
        ++count_;
    }

    std::size_t count() const noexcept { return count_; }

    void fill(GibbsResult &r) const {
        const double k = count_ ? 1.0 / double(count_) : 0.0;
        r.N = N_;
        r.T = T_;
        r.kept = count_;
        auto scale = [k](std::vector<double> v) {
            for (auto &e : v)
                e *= k;
            return v;
        };
        r.p_infected = scale(p_);
        r.gamma = scale(g_);
        r.alpha = scale(a_);
        r.beta = scale(b_);
        r.pi = pi_ * k;
        r.theta = {scale(th_[0]), scale(th_[1])};
    }

  private:
    std::size_t N_, T_;
    std::vector<double> p_, g_, a_, b_;
    std::array<std::vector<double>, 2> th_;
    double pi_ = 0.0;
    std::size_t count_ = 0;
};

inline TraceRecord trace_record(std::size_t iteration, const GibbsSampler &s) {
    TraceRecord r;
    r.iteration = iteration;
    const auto &p = s.params();
    r.pi = p.pi;
    r.theta = p.theta;
    const double N = double(p.num_people());
    for (std::size_t n = 0; n < p.num_people(); ++n) {
        r.mean_gamma += p.gamma[n] / N;
        r.mean_alpha += p.alpha[n] / N;
        r.mean_beta += p.beta[n] / N;
    }
    const auto &x = s.states();
    for (std::size_t n = 0; n < x.num_nodes(); ++n)
        for (std::size_t t = 0; t <= x.num_days(); ++t)
            r.infected_cells += x(n, t);
    return r;
}

inline GibbsResult run_gibbs(const DynamicNetwork &g, const SymptomTensor &y, const InfectionParams &init,
                             const GibbsConfig &cfg, const CovariateMatrix *z = nullptr,
                             std::optional<LinkCoefficients> eta = std::nullopt) {
    if (cfg.iterations < 2)
        throw DomainError("Gibbs sampling needs at least two iterations");
    if (cfg.burn() >= cfg.iterations)
        throw DomainError("burn-in must be smaller than the iteration count");
    GibbsSampler s(g, y, init, cfg, z, std::move(eta));
    PosteriorAverager avg(g.num_nodes(), g.num_days(), y.num_symptoms());
    GibbsResult r;
    for (std::size_t it = 1; it <= cfg.iterations; ++it) {
        s.sweep();
        if (it <= cfg.burn())
            continue;
        avg.add(s.states(), s.params());
        if (cfg.thin && (it - cfg.burn()) % cfg.thin == 0)
            r.trace.push_back(trace_record(it, s));
    }
    avg.fill(r);
    r.final_x = s.states();
    r.final_r = s.sources();
    r.final_params = s.params();
    return r;
}

} // namespace gchmm
