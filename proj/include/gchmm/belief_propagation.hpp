#pragma once

// Loopy belief propagation on the unrolled graph-coupled HMM.
//
// Variables are x[n][t], t = 0..T. Transition factor F(n,t), t >= 1, joins the child
// x[n][t] with its parents: slot 0 is x[n][t-1], slots 1..d are x[m][t-1] for the
// neighbours m of n in G_t (sorted). Emission factors are folded into a per-variable
// evidence table since the y nodes are leaves.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "gchmm/data_model.hpp"
#include "gchmm/error.hpp"
#include "gchmm/model.hpp"

namespace gchmm {

using Table2 = std::array<double, 2>;

enum class Schedule {
    time_ordered, // forward pass over t, then backward pass; exact on chains in one sweep
    synchronous,  // Jacobi: every message from the previous sweep's values
};

struct BpOptions {
    Schedule schedule = Schedule::time_ordered;
    std::size_t max_sweeps = 50;
    double tol = 1e-6;
};

struct Marginals {
    std::size_t N = 0, T = 0;
    std::vector<Table2> belief; // index t*N + n
    bool converged = false;
    std::size_t sweeps = 0;
    double delta = 0.0;

    const Table2 &operator()(std::size_t n, std::size_t t) const { return belief[t * N + n]; }
    double p_infected(std::size_t n, std::size_t t) const { return belief[t * N + n][1]; }
};

// Emission message toward x: prod over observed s of theta^y (1-theta)^(1-y).
inline Table2 emission_message(const SymptomTensor &y, const InfectionParams &p, std::size_t n, std::size_t t) {
    Table2 e{1.0, 1.0};
    for (std::size_t s = 0; s < y.num_symptoms(); ++s) {
        const auto v = y(n, t, s);
        if (v == SymptomTensor::kMissing)
            continue;
        for (int i = 0; i < 2; ++i)
            e[i] *= v ? p.theta[i][s] : 1.0 - p.theta[i][s];
    }
    return e;
}

class FactorGraph {
  public:
    FactorGraph(DynamicNetwork g, const SymptomTensor &y, InfectionParams params, BetaMode mode = BetaMode::receive)
        : g_(std::move(g)), N_(g_.num_nodes()), T_(g_.num_days()), mode_(mode) {
        if (y.num_nodes() != N_ || y.num_days() != T_)
            throw DomainError("symptom tensor shape differs from network");
        if (params.num_people() != N_ || params.num_symptoms() != y.num_symptoms())
            throw DomainError("parameter shape differs from data");
        S_ = y.num_symptoms();
        offset_.resize(N_ * T_ + 1);
        std::size_t e = 0;
        for (std::size_t t = 1; t <= T_; ++t)
            for (std::size_t n = 0; n < N_; ++n) {
                offset_[factor(n, t)] = e;
                e += 1 + g_.neighbors(t, n).size();
            }
        offset_.back() = e;
        edge_var_.resize(e);
        std::vector<std::size_t> count((T_ + 1) * N_, 0);
        for (std::size_t t = 1; t <= T_; ++t)
            for (std::size_t n = 0; n < N_; ++n) {
                auto base = offset_[factor(n, t)];
                edge_var_[base] = var(n, t - 1);
                auto nb = g_.neighbors(t, n);
                for (std::size_t k = 0; k < nb.size(); ++k)
                    edge_var_[base + 1 + k] = var(nb[k], t - 1);
            }
        for (auto v : edge_var_)
            ++count[v];
        var_offset_.assign(count.size() + 1, 0);
        for (std::size_t v = 0; v < count.size(); ++v)
            var_offset_[v + 1] = var_offset_[v] + count[v];
        var_edges_.resize(e);
        std::vector<std::size_t> fill(var_offset_.begin(), var_offset_.end() - 1);
        for (std::size_t k = 0; k < e; ++k)
            var_edges_[fill[edge_var_[k]]++] = k;
        set_params(std::move(params), y);
    }

    void set_params(InfectionParams params, const SymptomTensor &y) {
        params.validate();
        params_ = std::move(params);
        evidence_.assign((T_ + 1) * N_, Table2{1.0, 1.0});
        for (std::size_t t = 1; t <= T_; ++t)
            for (std::size_t n = 0; n < N_; ++n)
                evidence_[var(n, t)] = emission_message(y, params_, n, t);
    }

    std::size_t num_nodes() const noexcept { return N_; }
    std::size_t num_days() const noexcept { return T_; }
    std::size_t num_symptoms() const noexcept { return S_; }
    std::size_t num_transition_factors() const noexcept { return N_ * T_; }
    std::size_t num_emission_factors() const noexcept { return N_ * T_ * S_; }
    std::size_t num_edges() const noexcept { return edge_var_.size(); }
    BetaMode mode() const noexcept { return mode_; }
    const InfectionParams &params() const noexcept { return params_; }
    const DynamicNetwork &network() const noexcept { return g_; }

    std::size_t factor(std::size_t n, std::size_t t) const { return (t - 1) * N_ + n; }
    std::size_t var(std::size_t n, std::size_t t) const { return t * N_ + n; }

    // Parents of F(n,t): the person itself first, then its neighbours in G_t.
    std::vector<std::size_t> parents(std::size_t n, std::size_t t) const {
        std::vector<std::size_t> out{n};
        auto nb = g_.neighbors(t, n);
        out.insert(out.end(), nb.begin(), nb.end());
        return out;
    }

    std::size_t arity(std::size_t n, std::size_t t) const {
        const auto f = factor(n, t);
        return offset_[f + 1] - offset_[f];
    }

    std::size_t edge(std::size_t n, std::size_t t, std::size_t slot) const { return offset_[factor(n, t)] + slot; }
    std::size_t edge_variable(std::size_t e) const { return edge_var_[e]; }

    // Edges from factors at t+1 into variable v = x[n][t].
    std::span<const std::size_t> downstream(std::size_t v) const {
        return {var_edges_.data() + var_offset_[v], var_offset_[v + 1] - var_offset_[v]};
    }

    const Table2 &evidence(std::size_t n, std::size_t t) const { return evidence_[var(n, t)]; }

    Table2 prior() const { return {1.0 - params_.pi, params_.pi}; }

    // The (1 - b) contributed by the parent in `slot` >= 1 of F(n,t).
    double neighbor_beta(std::size_t n, std::size_t t, std::size_t slot) const {
        if (mode_ == BetaMode::receive)
            return params_.beta[n];
        return params_.beta[g_.neighbors(t, n)[slot - 1]];
    }

  private:
    DynamicNetwork g_;
    std::size_t N_, T_, S_ = 0;
    BetaMode mode_;
    InfectionParams params_;
    std::vector<std::size_t> offset_;     // factor -> first edge
    std::vector<std::size_t> edge_var_;   // edge -> parent variable
    std::vector<std::size_t> var_offset_; // variable -> range in var_edges_
    std::vector<std::size_t> var_edges_;
    std::vector<Table2> evidence_;
};

inline FactorGraph build_factor_graph(const DynamicNetwork &g, const SymptomTensor &y, const InfectionParams &params,
                                      BetaMode mode = BetaMode::receive) {
    return FactorGraph(g, y, params, mode);
}

namespace detail {

inline void normalize(Table2 &m, const char *what, std::size_t n, std::size_t t) {
    const double s = m[0] + m[1];
    if (!std::isfinite(s) || !(s > 0.0) || !std::isfinite(m[0]) || !std::isfinite(m[1]))
        throw NumericalError(std::string("non-finite or vanishing ") + what + " message at node " + std::to_string(n) +
                             ", day " + std::to_string(t));
    m[0] /= s;
    m[1] /= s;
}

struct NeighborWeight {
    double w0, w1, keep; // message into the factor and the escape factor 1 - b
};

// max over subsets J of prod_j w(x_j) * (1 - q0 * prod_{j in J} keep_j).
inline double max_infection(double q0, std::span<const NeighborWeight> nb) {
    const auto d = nb.size();
    bool equal = true;
    for (const auto &w : nb)
        equal = equal && w.keep == nb.front().keep;
    if (equal) {
        // With a shared keep factor only the count matters; the best set of each size
        // takes the largest w1/w0 ratios.
        std::vector<std::size_t> order(d);
        for (std::size_t i = 0; i < d; ++i)
            order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return nb[a].w1 * nb[b].w0 > nb[b].w1 * nb[a].w0;
        });
        std::vector<double> suffix0(d + 1, 1.0);
        for (std::size_t i = d; i-- > 0;)
            suffix0[i] = suffix0[i + 1] * nb[order[i]].w0;
        const double keep = d ? nb.front().keep : 1.0;
        double best = suffix0[0] * (1.0 - q0);
        double prefix1 = 1.0, qc = q0;
        for (std::size_t c = 1; c <= d; ++c) {
            prefix1 *= nb[order[c - 1]].w1;
            qc *= keep;
            best = std::max(best, prefix1 * suffix0[c] * (1.0 - qc));
        }
        return best;
    }
    if (d > 20)
        throw DomainError("max-product with distinct per-source betas supports at most 20 neighbours");
    double best = 0.0;
    for (std::size_t mask = 0; mask < (std::size_t(1) << d); ++mask) {
        double w = 1.0, q = q0;
        for (std::size_t j = 0; j < d; ++j) {
            if (mask >> j & 1) {
                w *= nb[j].w1;
                q *= nb[j].keep;
            } else {
                w *= nb[j].w0;
            }
        }
        best = std::max(best, w * (1.0 - q));
    }
    return best;
}

} // namespace detail

// Message store and update rules. Max = true gives max-product.
template <bool Max = false> class BeliefPropagation {
  public:
    explicit BeliefPropagation(const FactorGraph &fg) : fg_(fg) { init_messages(); }

    void init_messages() {
        const auto E = fg_.num_edges();
        const auto V = (fg_.num_days() + 1) * fg_.num_nodes();
        pi_.assign(E, Table2{1.0, 1.0});
        lambda_.assign(E, Table2{1.0, 1.0});
        up_.assign(V, Table2{1.0, 1.0});
        belief_.assign(V, Table2{0.5, 0.5});
        for (std::size_t n = 0; n < fg_.num_nodes(); ++n)
            up_[fg_.var(n, 0)] = fg_.prior();
    }

    const Table2 &pi_message(std::size_t n, std::size_t t, std::size_t slot) const { return pi_[fg_.edge(n, t, slot)]; }
    const Table2 &lambda_message(std::size_t n, std::size_t t, std::size_t slot) const {
        return lambda_[fg_.edge(n, t, slot)];
    }
    // Message from F(n,t) down to its child x[n][t]; for t = 0 the prior.
    const Table2 &child_message(std::size_t n, std::size_t t) const { return up_[fg_.var(n, t)]; }
    const Table2 &belief(std::size_t n, std::size_t t) const { return belief_[fg_.var(n, t)]; }

    // Messages from the parents of F(n,t) into the factor.
    void update_pi(std::size_t n, std::size_t t) {
        const auto d = fg_.arity(n, t);
        for (std::size_t k = 0; k < d; ++k) {
            const auto e = fg_.edge(n, t, k);
            pi_[e] = variable_to_factor(fg_.edge_variable(e), e);
        }
    }

    // Messages out of F(n,t): to the child and to every parent.
    void update_lambda(std::size_t n, std::size_t t) {
        Table2 up, nu = child_to_factor(n, t);
        std::vector<Table2> lam(fg_.arity(n, t));
        factor_messages(n, t, nu, up, lam);
        up_[fg_.var(n, t)] = up;
        for (std::size_t k = 0; k < lam.size(); ++k)
            lambda_[fg_.edge(n, t, k)] = lam[k];
    }

    void update_belief(std::size_t n, std::size_t t) {
        const auto v = fg_.var(n, t);
        Table2 b = local(v);
        for (auto e : fg_.downstream(v))
            for (int i = 0; i < 2; ++i)
                b[i] *= lambda_[e][i];
        detail::normalize(b, "belief", n, t);
        belief_[v] = b;
    }

    // One sweep; returns the max absolute belief change.
    double sweep(Schedule schedule) {
        const auto N = fg_.num_nodes(), T = fg_.num_days();
        if (schedule == Schedule::time_ordered) {
            for (std::size_t t = 1; t <= T; ++t)
                for (std::size_t n = 0; n < N; ++n) {
                    update_pi(n, t);
                    update_child(n, t);
                }
            for (std::size_t t = T; t >= 1; --t)
                for (std::size_t n = 0; n < N; ++n)
                    update_lambda(n, t);
        } else {
            for (std::size_t t = 1; t <= T; ++t)
                for (std::size_t n = 0; n < N; ++n)
                    update_pi(n, t);
            std::vector<Table2> up(up_.size()), lam(lambda_.size());
            up = up_;
            for (std::size_t t = 1; t <= T; ++t)
                for (std::size_t n = 0; n < N; ++n) {
                    std::vector<Table2> out(fg_.arity(n, t));
                    factor_messages(n, t, child_to_factor(n, t), up[fg_.var(n, t)], out);
                    for (std::size_t k = 0; k < out.size(); ++k)
                        lam[fg_.edge(n, t, k)] = out[k];
                }
            up_ = std::move(up);
            lambda_ = std::move(lam);
        }
        double delta = 0.0;
        for (std::size_t t = 0; t <= T; ++t)
            for (std::size_t n = 0; n < N; ++n) {
                const auto old = belief_[fg_.var(n, t)];
                update_belief(n, t);
                delta = std::max(delta, std::abs(belief_[fg_.var(n, t)][1] - old[1]));
            }
        return delta;
    }

    Marginals run(const BpOptions &opts = {}) {
        if (opts.max_sweeps < 1)
            throw DomainError("max_sweeps must be at least 1");
        Marginals m;
        m.N = fg_.num_nodes();
        m.T = fg_.num_days();
        for (std::size_t i = 0; i < opts.max_sweeps; ++i) {
            m.delta = sweep(opts.schedule);
            m.sweeps = i + 1;
            // The first sweep moves beliefs away from the placeholder, so it cannot signal convergence.
            if (i > 0 && m.delta < opts.tol) {
                m.converged = true;
                break;
            }
        }
        m.belief = belief_;
        return m;
    }

    // Forward pass only, with every backward message uniform: beliefs of x[n][t]
    // given the evidence through day t (exact on chains, approximate on loopy graphs).
    Marginals filter() {
        init_messages();
        const auto N = fg_.num_nodes(), T = fg_.num_days();
        for (std::size_t t = 1; t <= T; ++t)
            for (std::size_t n = 0; n < N; ++n) {
                update_pi(n, t);
                update_child(n, t);
            }
        Marginals m;
        m.N = N;
        m.T = T;
        m.belief.resize(up_.size());
        for (std::size_t v = 0; v < up_.size(); ++v) {
            Table2 b = local(v);
            detail::normalize(b, "filtered belief", v % N, v / N);
            m.belief[v] = b;
        }
        m.sweeps = 1;
        m.converged = true;
        return m;
    }

    // Message from x[n][t] into its own upstream factor F(n,t).
    Table2 child_to_factor(std::size_t n, std::size_t t) const {
        const auto v = fg_.var(n, t);
        Table2 m = fg_.evidence(n, t);
        for (auto e : fg_.downstream(v))
            for (int i = 0; i < 2; ++i)
                m[i] *= lambda_[e][i];
        detail::normalize(m, "child-to-factor", n, t);
        return m;
    }

  private:
    static double combine(double a, double b) { return Max ? std::max(a, b) : a + b; }

    Table2 local(std::size_t v) const {
        const auto &u = up_[v];
        const auto t = v / fg_.num_nodes(), n = v % fg_.num_nodes();
        const auto &e = fg_.evidence(n, t);
        return {u[0] * e[0], u[1] * e[1]};
    }

    // Product of everything reaching variable v except the message on edge `skip`.
    Table2 variable_to_factor(std::size_t v, std::size_t skip) const {
        Table2 m = local(v);
        for (auto e : fg_.downstream(v))
            if (e != skip)
                for (int i = 0; i < 2; ++i)
                    m[i] *= lambda_[e][i];
        detail::normalize(m, "parent-to-factor", v % fg_.num_nodes(), v / fg_.num_nodes());
        return m;
    }

    void update_child(std::size_t n, std::size_t t) {
        std::vector<Table2> unused;
        factor_messages(n, t, Table2{1.0, 1.0}, up_[fg_.var(n, t)], unused, false);
    }

    // Outgoing messages of F(n,t) given incoming pi (parents) and nu (child).
    //
    // With own parent 0, summing over neighbour configurations collapses to products:
    //   stay susceptible:  (1-alpha) prod_j S_j,   S_j = w0_j + w1_j (1-b_j)
    //   become infected:   prod_j Z_j - (1-alpha) prod_j S_j,   Z_j = w0_j + w1_j
    // With own parent 1 the neighbours only contribute prod_j Z_j.
    void factor_messages(std::size_t n, std::size_t t, const Table2 &nu, Table2 &up, std::vector<Table2> &lam,
                         bool parents = true) const {
        const auto d = fg_.arity(n, t) - 1;
        const auto &p = fg_.params();
        const double gamma = p.gamma[n], keep_out = 1.0 - p.alpha[n];
        const Table2 &own = pi_[fg_.edge(n, t, 0)];
        std::vector<detail::NeighborWeight> nb(d);
        for (std::size_t j = 0; j < d; ++j) {
            const auto &m = pi_[fg_.edge(n, t, j + 1)];
            nb[j] = {m[0], m[1], 1.0 - fg_.neighbor_beta(n, t, j + 1)};
        }
        // Prefix and suffix products of Z_j (or max) and S_j (or max) for leave-one-out.
        std::vector<double> zpre(d + 1, 1.0), spre(d + 1, 1.0), zsuf(d + 1, 1.0), ssuf(d + 1, 1.0);
        auto zf = [](const detail::NeighborWeight &w) { return Max ? std::max(w.w0, w.w1) : w.w0 + w.w1; };
        auto sf = [](const detail::NeighborWeight &w) {
            return Max ? std::max(w.w0, w.w1 * w.keep) : w.w0 + w.w1 * w.keep;
        };
        for (std::size_t j = 0; j < d; ++j) {
            zpre[j + 1] = zpre[j] * zf(nb[j]);
            spre[j + 1] = spre[j] * sf(nb[j]);
        }
        for (std::size_t j = d; j-- > 0;) {
            zsuf[j] = zsuf[j + 1] * zf(nb[j]);
            ssuf[j] = ssuf[j + 1] * sf(nb[j]);
        }
        // g[o][c]: factor summed (maxed) over neighbours, own parent o, child c.
        auto table = [&](double PZ, double PS, double q0, std::span<const detail::NeighborWeight> rest) {
            std::array<Table2, 2> g;
            g[1] = {gamma * PZ, (1.0 - gamma) * PZ};
            g[0][0] = q0 * PS;
            g[0][1] = Max ? detail::max_infection(q0, rest) : std::max(0.0, PZ - q0 * PS);
            return g;
        };
        const auto g = table(zpre[d], spre[d], keep_out, nb);
        up = {combine(own[0] * g[0][0], own[1] * g[1][0]), combine(own[0] * g[0][1], own[1] * g[1][1])};
        detail::normalize(up, "factor-to-child", n, t);
        if (!parents)
            return;
        lam.resize(d + 1);
        lam[0] = {combine(nu[0] * g[0][0], nu[1] * g[0][1]), combine(nu[0] * g[1][0], nu[1] * g[1][1])};
        detail::normalize(lam[0], "factor-to-parent", n, t);
        std::vector<detail::NeighborWeight> rest;
        for (std::size_t j = 0; j < d; ++j) {
            const double PZ = zpre[j] * zsuf[j + 1], PS = spre[j] * ssuf[j + 1];
            if (Max) {
                rest.assign(nb.begin(), nb.end());
                rest.erase(rest.begin() + std::ptrdiff_t(j));
            }
            Table2 out;
            for (int x = 0; x < 2; ++x) {
                const double q0 = x ? keep_out * nb[j].keep : keep_out;
                const auto gj = table(PZ, PS, q0, rest);
                const double a0 = combine(nu[0] * gj[0][0], nu[1] * gj[0][1]);
                const double a1 = combine(nu[0] * gj[1][0], nu[1] * gj[1][1]);
                out[x] = combine(own[0] * a0, own[1] * a1);
            }
            detail::normalize(out, "factor-to-neighbour", n, t);
            lam[j + 1] = out;
        }
    }

    const FactorGraph &fg_;
    std::vector<Table2> pi_;     // parent -> factor, per edge
    std::vector<Table2> lambda_; // factor -> parent, per edge
    std::vector<Table2> up_;     // factor -> child (prior at t = 0), per variable
    std::vector<Table2> belief_;
};

inline Marginals run_forward_backward(const FactorGraph &fg, const BpOptions &opts = {}) {
    BeliefPropagation<false> bp(fg);
    return bp.run(opts);
}

inline Marginals filter_forward(const FactorGraph &fg) {
    BeliefPropagation<false> bp(fg);
    return bp.filter();
}

// Max-product decoding: argmax of the max-marginals, ties to 0.
inline HiddenStateMatrix viterbi(const FactorGraph &fg, const BpOptions &opts = {}) {
    BeliefPropagation<true> bp(fg);
    const auto m = bp.run(opts);
    HiddenStateMatrix x(fg.num_nodes(), fg.num_days());
    for (std::size_t t = 0; t <= fg.num_days(); ++t)
        for (std::size_t n = 0; n < fg.num_nodes(); ++n)
            x.set(n, t, m(n, t)[1] > m(n, t)[0] ? 1 : 0);
    return x;
}

inline HiddenStateMatrix hard_assign(const Marginals &m) {
    HiddenStateMatrix x(m.N, m.T);
    for (std::size_t t = 0; t <= m.T; ++t)
        for (std::size_t n = 0; n < m.N; ++n)
            x.set(n, t, m(n, t)[1] > m(n, t)[0] ? 1 : 0);
    return x;
}

} // namespace gchmm
