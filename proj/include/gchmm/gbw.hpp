#pragma once

// Generalized Baum-Welch for the homogeneous model: belief-propagation E-step and a
// count-based approximate M-step on the hard-assigned state matrix.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "gchmm/belief_propagation.hpp"
#include "gchmm/data_model.hpp"
#include "gchmm/error.hpp"
#include "gchmm/model.hpp"

namespace gchmm {

inline constexpr double kParamFloor = 1e-6;

inline double clamp_open(double v) { return std::clamp(v, kParamFloor, 1.0 - kParamFloor); }

inline std::pair<double, std::array<std::vector<double>, 2>> m_step_pi_theta(const Marginals &m, const SymptomTensor &y,
                                                                            const BetaHyperParams &hyper = {}) {
    const auto N = m.N, T = m.T, S = y.num_symptoms();
    if (y.num_nodes() != N || y.num_days() != T)
        throw DomainError("beliefs and symptoms differ in shape");
    double pi = 0.0;
    for (std::size_t n = 0; n < N; ++n)
        pi += m.p_infected(n, 0);
    pi /= double(N);
    std::array<std::vector<double>, 2> theta{std::vector<double>(S), std::vector<double>(S)};
    for (std::size_t s = 0; s < S; ++s) {
        double num[2] = {0, 0}, den[2] = {0, 0};
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t t = 1; t <= T; ++t) {
                const auto v = y(n, t, s);
                if (v == SymptomTensor::kMissing)
                    continue;
                const double w[2] = {m(n, t)[0], m(n, t)[1]};
                for (int i = 0; i < 2; ++i) {
                    den[i] += w[i];
                    num[i] += v * w[i];
                }
            }
        const BetaPrior fallback[2] = {hyper.theta0, hyper.theta1};
        for (int i = 0; i < 2; ++i)
            theta[i][s] = den[i] > 0.0 ? num[i] / den[i] : fallback[i].mean();
    }
    return {pi, theta};
}

inline double m_step_gamma(const HiddenStateMatrix &x, double previous) {
    std::size_t recover = 0, infected = 0;
    for (std::size_t n = 0; n < x.num_nodes(); ++n)
        for (std::size_t t = 1; t <= x.num_days(); ++t)
            if (x(n, t - 1) == 1) {
                ++infected;
                recover += x(n, t) == 0;
            }
    return infected ? double(recover) / double(infected) : previous;
}

struct AlphaBetaEstimate {
    double alpha = 0.0;
    double beta = 0.0;
    std::map<std::size_t, double> tau; // survival ratio per exposure count j >= 1
};

// alpha from susceptible days with no infected contact; tau_j = P(stay 0 | j infected
// contacts) = (1-alpha)(1-beta)^j, and beta averages 1 - (tau_j/(1-alpha))^(1/j) over
// the exposure counts present in the data.
inline AlphaBetaEstimate m_step_alpha_beta(const HiddenStateMatrix &x, const DynamicNetwork &g, double prev_alpha = 0.1,
                                           double prev_beta = 0.1) {
    std::map<std::size_t, std::pair<std::size_t, std::size_t>> by_count; // j -> (stay, total)
    for (std::size_t n = 0; n < x.num_nodes(); ++n)
        for (std::size_t t = 1; t <= x.num_days(); ++t) {
            if (x(n, t - 1) != 0)
                continue;
            auto &c = by_count[infected_neighbor_count(x, g, n, t)];
            ++c.second;
            c.first += x(n, t) == 0;
        }
    AlphaBetaEstimate out;
    auto zero = by_count.find(0);
    if (zero != by_count.end() && zero->second.second > 0)
        out.alpha = 1.0 - double(zero->second.first) / double(zero->second.second);
    else
        out.alpha = prev_alpha;
    if (out.alpha < kParamFloor || out.alpha > 1.0 - kParamFloor) {
        warn("alpha estimate " + std::to_string(out.alpha) + " clamped into (1e-6, 1-1e-6)");
        out.alpha = clamp_open(out.alpha);
    }
    double sum = 0.0;
    std::size_t used = 0;
    for (const auto &[j, c] : by_count) {
        if (j == 0 || c.second == 0)
            continue;
        const double tau = double(c.first) / double(c.second);
        out.tau[j] = tau;
        double ratio = tau / (1.0 - out.alpha);
        if (!(ratio > 0.0 && ratio <= 1.0)) {
            warn("survival ratio for " + std::to_string(j) + " infected contacts outside (0,1]; clamped");
            ratio = std::clamp(ratio, kParamFloor, 1.0);
        }
        sum += 1.0 - std::pow(ratio, 1.0 / double(j));
        ++used;
    }
    out.beta = used ? sum / double(used) : prev_beta;
    if (out.beta < kParamFloor || out.beta > 1.0 - kParamFloor) {
        warn("beta estimate " + std::to_string(out.beta) + " clamped into (1e-6, 1-1e-6)");
        out.beta = clamp_open(out.beta);
    }
    return out;
}

struct GbwOptions {
    std::size_t max_iters = 15;
    double tol = 1e-4;
    bool known_params = false;
    BpOptions bp;
    BetaHyperParams hyper;
};

struct GbwResult {
    HomogeneousParams params;
    Marginals beliefs;
    HiddenStateMatrix x;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> changes; // max-norm parameter change per iteration
};

inline GbwResult run_gbw(const SymptomTensor &y, const DynamicNetwork &g, const HomogeneousParams &init,
                         const GbwOptions &opts = {}) {
    const auto N = g.num_nodes();
    init.expand(N).validate(true);
    GbwResult r;
    r.params = init;
    FactorGraph fg(g, y, init.expand(N));
    if (opts.known_params) {
        r.beliefs = run_forward_backward(fg, opts.bp);
        r.x = hard_assign(r.beliefs);
        r.converged = true;
        return r;
    }
    for (std::size_t it = 0; it < opts.max_iters; ++it) {
        fg.set_params(r.params.expand(N), y);
        r.beliefs = run_forward_backward(fg, opts.bp);
        r.x = hard_assign(r.beliefs);
        HomogeneousParams next = r.params;
        auto [pi, theta] = m_step_pi_theta(r.beliefs, y, opts.hyper);
        next.pi = clamp_open(pi);
        for (auto &row : theta)
            for (auto &v : row)
                v = clamp_open(v);
        next.theta = std::move(theta);
        next.gamma = clamp_open(m_step_gamma(r.x, r.params.gamma));
        const auto ab = m_step_alpha_beta(r.x, g, r.params.alpha, r.params.beta);
        next.alpha = ab.alpha;
        next.beta = ab.beta;
        const auto a = r.params.flat(), b = next.flat();
        double change = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            change = std::max(change, std::abs(a[i] - b[i]));
        r.params = std::move(next);
        r.changes.push_back(change);
        r.iterations = it + 1;
        if (change < opts.tol) {
            r.converged = true;
            break;
        }
    }
    // Final E-step so the reported beliefs match the reported parameters.
    fg.set_params(r.params.expand(N), y);
    r.beliefs = run_forward_backward(fg, opts.bp);
    r.x = hard_assign(r.beliefs);
    return r;
}

} // namespace gchmm
