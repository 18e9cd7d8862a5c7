#pragma once

// Damped Newton ascent with Armijo backtracking, and the stochastic-EM step sizes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "gchmm/error.hpp"
#include "gchmm/likelihood.hpp"

namespace gchmm {

struct NewtonOptions {
    std::size_t max_inner = 5;
    double armijo = 1e-4;
    std::size_t max_halvings = 40;
    double grad_tol = 1e-9;
    double min_curvature = 1e-8; // eigenvalues of -H are floored here, relative to the largest
};

struct NewtonResult {
    Eigen::VectorXd eta;
    double value = 0.0;
    std::size_t iterations = 0;
    std::size_t gradient_fallbacks = 0;
    double gradient_norm = 0.0;
    std::vector<double> values; // objective before the first and after each accepted step
};

// Maximises f: VectorXd -> ObjectiveEval starting at eta.
template <class F> NewtonResult newton_maximize(F &&f, Eigen::VectorXd eta, const NewtonOptions &opts = {}) {
    NewtonResult res;
    ObjectiveEval cur = f(eta);
    res.values.push_back(cur.value);
    for (std::size_t it = 0; it < opts.max_inner; ++it) {
        const Eigen::VectorXd &g = cur.gradient;
        if (!g.allFinite() || !std::isfinite(cur.value))
            throw NumericalError("non-finite objective or gradient in Newton step");
        if (g.lpNorm<Eigen::Infinity>() < opts.grad_tol)
            break;
        Eigen::VectorXd dir;
        bool fallback = !cur.hessian.allFinite();
        if (!fallback) {
            // Ascent needs -H positive definite; flip and floor the spectrum if it is not.
            const Eigen::MatrixXd negH = -0.5 * (cur.hessian + cur.hessian.transpose());
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(negH);
            if (es.info() != Eigen::Success) {
                fallback = true;
            } else {
                Eigen::VectorXd ev = es.eigenvalues().cwiseAbs();
                const double floor = opts.min_curvature * std::max(1.0, ev.maxCoeff());
                ev = ev.cwiseMax(floor);
                dir = es.eigenvectors() * ((es.eigenvectors().transpose() * g).array() / ev.array()).matrix();
                fallback = !dir.allFinite();
            }
        }
        if (fallback) {
            warn("Hessian unusable; taking a gradient step");
            dir = g;
            ++res.gradient_fallbacks;
        }
        const double slope = g.dot(dir);
        double step = 1.0;
        bool accepted = false;
        ObjectiveEval next;
        for (std::size_t h = 0; h <= opts.max_halvings; ++h, step *= 0.5) {
            Eigen::VectorXd cand = eta + step * dir;
            try {
                next = f(cand);
            } catch (const NumericalError &) {
                continue; // overflowed shape parameters: shrink the step
            }
            if (std::isfinite(next.value) && next.value >= cur.value + opts.armijo * step * slope) {
                eta = std::move(cand);
                accepted = true;
                break;
            }
        }
        if (!accepted)
            break;
        cur = std::move(next);
        res.values.push_back(cur.value);
        res.iterations = it + 1;
    }
    res.eta = std::move(eta);
    res.value = cur.value;
    res.gradient_norm = cur.gradient.norm();
    return res;
}

// delta_k = 1/k: tends to 0, consecutive ratio tends to 1, and the series diverges.
inline double step_size_schedule(std::size_t k) {
    if (k < 1)
        throw DomainError("step-size index starts at 1");
    return 1.0 / double(k);
}

} // namespace gchmm
