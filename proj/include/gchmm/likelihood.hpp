#pragma once

// Complete-data log-likelihoods of the link coefficients, with analytic gradients and
// Hessians over the stacked coefficient vector.
//   beta-exponential: [r1, r2, a1, a2, b1, b2], each of length K
//   sigmoid:          [r, a, b]

#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "gchmm/data_model.hpp"
#include "gchmm/error.hpp"
#include "gchmm/gibbs.hpp"
#include "gchmm/model.hpp"

namespace gchmm {

struct ObjectiveEval {
    double value = 0.0;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;
};

// Independent N(mean, cov) prior on every coefficient vector of the link.
inline void add_gaussian_prior(const LinkCoefficients &eta, ObjectiveEval &out) {
    const auto K = Eigen::Index(eta.dim());
    Eigen::LLT<Eigen::MatrixXd> llt(eta.prior_cov);
    if (llt.info() != Eigen::Success)
        throw DomainError("prior covariance must be positive definite");
    const Eigen::MatrixXd prec = llt.solve(Eigen::MatrixXd::Identity(K, K));
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double norm = -0.5 * (double(K) * std::log(2.0 * std::numbers::pi) + logdet);
    for (std::size_t i = 0; i < eta.eta.size(); ++i) {
        const Eigen::VectorXd d = eta.eta[i] - eta.prior_mean;
        const auto off = Eigen::Index(i) * K;
        out.value += norm - 0.5 * d.dot(prec * d);
        out.gradient.segment(off, K) -= prec * d;
        out.hessian.block(off, off, K, K) -= prec;
    }
}

namespace detail {

inline ObjectiveEval empty_eval(Eigen::Index dim) {
    return {0.0, Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Zero(dim, dim)};
}

inline double checked_exp(double u) {
    if (u > 700.0 || u < -700.0)
        throw NumericalError("link shape exponent " + std::to_string(u) +
                             " overflows; rescale or standardise the covariates");
    return std::exp(u);
}

inline double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

// log B(e^u + c1, e^v + c2) - log B(e^u, e^v) and its derivatives in (u, v).
struct BetaRatio {
    double value = 0.0, du = 0.0, dv = 0.0, duu = 0.0, dvv = 0.0, duv = 0.0;
};

// Differences f(x + k) - f(x) for lgamma, digamma and trigamma with k > 0. Large x uses
// the asymptotic series with the leading terms differenced analytically, since the
// naive difference cancels once x is many orders above k.
inline constexpr double kAsymptotic = 1e3;

inline double lgamma_diff(double x, double k) {
    if (x < kAsymptotic)
        return std::lgamma(x + k) - std::lgamma(x);
    const double y = x + k;
    auto tail = [](double z) { return 1.0 / (12.0 * z) - 1.0 / (360.0 * z * z * z) + 1.0 / (1260.0 * std::pow(z, 5)); };
    return (x - 0.5) * std::log1p(k / x) + k * std::log(y) - k + tail(y) - tail(x);
}

// x * (psi(x + k) - psi(x))
inline double scaled_digamma_diff(double x, double k) {
    using boost::math::digamma;
    if (x < kAsymptotic)
        return x * (digamma(x + k) - digamma(x + 1.0)) + 1.0; // psi(x) = psi(x+1) - 1/x
    const double y = x + k;
    auto tail = [](double z) { return -1.0 / (12.0 * z * z) + 1.0 / (120.0 * std::pow(z, 4)) - 1.0 / (252.0 * std::pow(z, 6)); };
    return x * std::log1p(k / x) + k / (2.0 * y) + x * (tail(y) - tail(x));
}

// x^2 * (psi1(x + k) - psi1(x))
inline double scaled_trigamma_diff(double x, double k) {
    using boost::math::trigamma;
    if (x < kAsymptotic)
        return x * x * (trigamma(x + k) - trigamma(x + 1.0)) - 1.0; // psi1(x) = psi1(x+1) + 1/x^2
    const double y = x + k;
    auto tail = [](double z) { return 1.0 / (6.0 * z * z * z) - 1.0 / (30.0 * std::pow(z, 5)) + 1.0 / (42.0 * std::pow(z, 7)); };
    const double r = x / y;
    return -k * r - 0.5 * k * (2.0 * x + k) / (y * y) + x * x * (tail(y) - tail(x));
}

inline BetaRatio beta_ratio(double u, double v, double c1, double c2) {
    BetaRatio r;
    if (c1 == 0.0 && c2 == 0.0)
        return r;
    const double A = checked_exp(u), B = checked_exp(v), S = A + B, c = c1 + c2;
    r.value = (c1 == 0.0 ? 0.0 : lgamma_diff(A, c1)) + (c2 == 0.0 ? 0.0 : lgamma_diff(B, c2)) - lgamma_diff(S, c);
    const double pa = A / S, pb = B / S;
    const double psi_all = scaled_digamma_diff(S, c), tri_all = scaled_trigamma_diff(S, c);
    const double gu = (c1 == 0.0 ? 0.0 : scaled_digamma_diff(A, c1)) - pa * psi_all;
    const double gv = (c2 == 0.0 ? 0.0 : scaled_digamma_diff(B, c2)) - pb * psi_all;
    const double hu = (c1 == 0.0 ? 0.0 : scaled_trigamma_diff(A, c1)) - pa * pa * tri_all;
    const double hv = (c2 == 0.0 ? 0.0 : scaled_trigamma_diff(B, c2)) - pb * pb * tri_all;
    r.du = gu;
    r.dv = gv;
    r.duu = gu + hu;
    r.dvv = gv + hv;
    r.duv = -pa * pb * tri_all;
    if (!(std::isfinite(r.value) && std::isfinite(r.duu) && std::isfinite(r.dvv) && std::isfinite(r.duv)))
        throw NumericalError("non-finite beta-function ratio");
    return r;
}

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
inline double log_sigmoid(double x) { return -softplus(-x); }

} // namespace detail

// A sample of count statistics with its weight in the Monte Carlo average.
struct WeightedCounts {
    const CountStatistics *counts;
    double weight;
};

// Integrated beta-exponential likelihood averaged over samples, plus the prior. The
// same routine serves both interpretations of beta because the per-person
// (success, failure) pairs already carry the interpretation.
inline ObjectiveEval log_likelihood_betaexp(std::span<const WeightedCounts> samples, const CovariateMatrix &z,
                                            const LinkCoefficients &eta) {
    if (eta.kind != LinkKind::beta_exp)
        throw DomainError("beta-exponential likelihood needs beta-exponential coefficients");
    eta.validate(z.dim());
    const auto K = Eigen::Index(z.dim());
    auto out = detail::empty_eval(6 * K);
    const auto N = z.num_people();
    std::vector<Eigen::VectorXd> rows(N);
    std::vector<std::array<double, 6>> lin(N);
    for (std::size_t n = 0; n < N; ++n) {
        rows[n] = z.row(n);
        for (std::size_t k = 0; k < 6; ++k)
            lin[n][k] = rows[n].dot(eta.eta[k]);
    }
    for (const auto &smp : samples) {
        if (smp.counts->size() != N)
            throw DomainError("count statistics differ from covariate rows");
        for (std::size_t n = 0; n < N; ++n) {
            const auto &c = (*smp.counts)[n];
            const std::pair<double, double> pairs[3] = {{double(c.c10), double(c.c11)},
                                                        {double(c.alpha_success), double(c.alpha_failure)},
                                                        {double(c.beta_success), double(c.beta_failure)}};
            for (int role = 0; role < 3; ++role) {
                const auto br =
                    detail::beta_ratio(lin[n][2 * role], lin[n][2 * role + 1], pairs[role].first, pairs[role].second);
                if (br.value == 0.0 && br.du == 0.0 && br.dv == 0.0)
                    continue;
                const auto ou = Eigen::Index(2 * role) * K, ov = ou + K;
                const auto &zn = rows[n];
                const double w = smp.weight;
                out.value += w * br.value;
                out.gradient.segment(ou, K) += w * br.du * zn;
                out.gradient.segment(ov, K) += w * br.dv * zn;
                const Eigen::MatrixXd zz = zn * zn.transpose();
                out.hessian.block(ou, ou, K, K) += w * br.duu * zz;
                out.hessian.block(ov, ov, K, K) += w * br.dvv * zz;
                out.hessian.block(ou, ov, K, K) += w * br.duv * zz;
                out.hessian.block(ov, ou, K, K) += w * br.duv * zz;
            }
        }
    }
    add_gaussian_prior(eta, out);
    return out;
}

inline ObjectiveEval log_likelihood_betaexp(const CountStatistics &counts, const CovariateMatrix &z,
                                            const LinkCoefficients &eta) {
    const WeightedCounts one{&counts, 1.0};
    return log_likelihood_betaexp(std::span<const WeightedCounts>(&one, 1), z, eta);
}

// Transmit-interpretation counts: beta successes and failures were attributed to the
// infecting contact when the counts were built.
inline ObjectiveEval log_likelihood_betaexp_transmit(const CountStatistics &counts, const CovariateMatrix &z,
                                                     const LinkCoefficients &eta) {
    return log_likelihood_betaexp(counts, z, eta);
}

// Sufficient statistics of the sigmoid-link likelihood, accumulated over weighted
// state samples. Infection events keep their exposure so the 0->1 terms stay exact.
class SigmoidStats {
  public:
    SigmoidStats(std::size_t N, BetaMode mode)
        : mode_(mode), c10_(N, 0.0), c11_(N, 0.0), n00_(N, 0.0), exposure00_(N, 0.0) {}

    void add(const HiddenStateMatrix &x, const DynamicNetwork &g, double weight = 1.0) {
        std::vector<std::size_t> src;
        for (std::size_t n = 0; n < x.num_nodes(); ++n)
            for (std::size_t t = 1; t <= x.num_days(); ++t) {
                if (x(n, t - 1) == 1) {
                    (x(n, t) ? c11_ : c10_)[n] += weight;
                    continue;
                }
                src.clear();
                for (auto m : g.neighbors(t, n))
                    if (x(m, t - 1))
                        src.push_back(m);
                if (x(n, t) == 0) {
                    n00_[n] += weight;
                    if (mode_ == BetaMode::receive)
                        exposure00_[n] += weight * double(src.size());
                    else
                        for (auto m : src)
                            exposure00_[m] += weight;
                } else if (mode_ == BetaMode::receive) {
                    infections_[{n, std::vector<std::size_t>(src.size(), n)}] += weight;
                } else {
                    infections_[{n, src}] += weight;
                }
            }
    }

    BetaMode mode() const noexcept { return mode_; }
    std::size_t num_people() const noexcept { return c10_.size(); }

    friend ObjectiveEval log_likelihood_sigmoid(const SigmoidStats &, const CovariateMatrix &,
                                                const LinkCoefficients &);

  private:
    BetaMode mode_;
    std::vector<double> c10_, c11_, n00_, exposure00_;
    // (infected person, beta owner per infected contact) -> weight
    std::map<std::pair<std::size_t, std::vector<std::size_t>>, double> infections_;
};

// Exact sigmoid-link log-likelihood of the transitions plus the prior. The initial
// state term does not involve the coefficients and is left out.
inline ObjectiveEval log_likelihood_sigmoid(const SigmoidStats &s, const CovariateMatrix &z,
                                            const LinkCoefficients &eta) {
    if (eta.kind != LinkKind::sigmoid)
        throw DomainError("sigmoid likelihood needs sigmoid coefficients");
    eta.validate(z.dim());
    const auto N = z.num_people();
    if (s.num_people() != N)
        throw DomainError("statistics differ from covariate rows");
    const auto K = Eigen::Index(z.dim());
    auto out = detail::empty_eval(3 * K);
    std::vector<Eigen::VectorXd> rows(N);
    std::vector<double> r(N), a(N), b(N);
    for (std::size_t n = 0; n < N; ++n) {
        rows[n] = z.row(n);
        r[n] = rows[n].dot(eta.eta[0]);
        a[n] = rows[n].dot(eta.eta[1]);
        b[n] = rows[n].dot(eta.eta[2]);
    }
    const Eigen::Index OR = 0, OA = K, OB = 2 * K;
    for (std::size_t n = 0; n < N; ++n) {
        const auto &zn = rows[n];
        const Eigen::MatrixXd zz = zn * zn.transpose();
        const double sr = sigmoid(r[n]), sa = sigmoid(a[n]), sb = sigmoid(b[n]);
        // c10 log sig(r) + c11 log sig(-r)
        out.value += s.c10_[n] * detail::log_sigmoid(r[n]) + s.c11_[n] * detail::log_sigmoid(-r[n]);
        out.gradient.segment(OR, K) += (s.c10_[n] * (1.0 - sr) - s.c11_[n] * sr) * zn;
        out.hessian.block(OR, OR, K, K) -= (s.c10_[n] + s.c11_[n]) * sr * (1.0 - sr) * zz;
        // n00 log sig(-a) + exposure log sig(-b)
        out.value += s.n00_[n] * detail::log_sigmoid(-a[n]) + s.exposure00_[n] * detail::log_sigmoid(-b[n]);
        out.gradient.segment(OA, K) -= s.n00_[n] * sa * zn;
        out.gradient.segment(OB, K) -= s.exposure00_[n] * sb * zn;
        out.hessian.block(OA, OA, K, K) -= s.n00_[n] * sa * (1.0 - sa) * zz;
        out.hessian.block(OB, OB, K, K) -= s.exposure00_[n] * sb * (1.0 - sb) * zz;
    }
    // 0->1: log(1 - e^L), L = log sig(-a_n) + sum over sources m of log sig(-b_m).
    Eigen::VectorXd dL(3 * K);
    for (const auto &[key, w] : s.infections_) {
        const auto n = key.first;
        double L = detail::log_sigmoid(-a[n]);
        dL.setZero();
        dL.segment(OA, K) = -sigmoid(a[n]) * rows[n];
        Eigen::MatrixXd d2L = Eigen::MatrixXd::Zero(3 * K, 3 * K);
        const double sa = sigmoid(a[n]);
        d2L.block(OA, OA, K, K) = -sa * (1.0 - sa) * rows[n] * rows[n].transpose();
        for (auto m : key.second) {
            const double sb = sigmoid(b[m]);
            L += detail::log_sigmoid(-b[m]);
            dL.segment(OB, K) -= sb * rows[m];
            d2L.block(OB, OB, K, K) -= sb * (1.0 - sb) * rows[m] * rows[m].transpose();
        }
        const double em = std::expm1(-L); // e^{-L} - 1 > 0
        const double f = std::log(-std::expm1(L));
        const double f1 = -1.0 / em;
        const double f2 = -std::exp(-L) / (em * em);
        out.value += w * f;
        out.gradient += w * f1 * dL;
        out.hessian += w * (f2 * dL * dL.transpose() + f1 * d2L);
    }
    add_gaussian_prior(eta, out);
    return out;
}

inline ObjectiveEval log_likelihood_sigmoid(const HiddenStateMatrix &x, const CovariateMatrix &z,
                                            const LinkCoefficients &eta, const DynamicNetwork &g,
                                            BetaMode mode = BetaMode::receive) {
    SigmoidStats s(x.num_nodes(), mode);
    s.add(x, g);
    return log_likelihood_sigmoid(s, z, eta);
}

} // namespace gchmm
