#pragma once

// File formats shared by the command-line tools: state, symptom, contact and covariate
// CSVs, posterior grids, and JSON for parameters, coefficients, metrics and diagnostics.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gchmm/bgem.hpp"
#include "gchmm/csv.hpp"
#include "gchmm/data_model.hpp"
#include "gchmm/error.hpp"
#include "gchmm/eval.hpp"
#include "gchmm/gibbs.hpp"
#include "gchmm/model.hpp"

namespace gchmm::io {

using json = nlohmann::json;

// Shortest text that reads back to the same double.
inline std::string fmt(double v) {
    char buf[32];
    for (int prec = 6; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v)
            break;
    }
    return buf;
}

inline std::ofstream create(const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DomainError("cannot write '" + path + "'");
    return out;
}

inline void write_states(std::ostream &out, const HiddenStateMatrix &x, const PersonIndex &people) {
    out << "node,day,state\n";
    for (std::size_t n = 0; n < x.num_nodes(); ++n)
        for (std::size_t t = 0; t <= x.num_days(); ++t)
            out << people.label(n) << ',' << t << ',' << int(x(n, t)) << '\n';
}

inline HiddenStateMatrix read_states(std::istream &in, const PersonIndex &people, std::size_t num_days) {
    HiddenStateMatrix x(people.size(), num_days);
    std::vector<std::uint8_t> seen(people.size() * (num_days + 1), 0);
    csv::Reader reader(in);
    std::vector<std::string_view> f;
    bool first = true;
    while (reader.next(f)) {
        if (first && detail::looks_like_header(f, "node")) {
            first = false;
            continue;
        }
        first = false;
        const auto line = reader.line();
        if (f.size() != 3)
            throw ParseError("state row needs 3 fields", line);
        const auto n = people.at(f[0], line);
        const auto t = csv::require_int(f[1], "day", line);
        const auto v = csv::require_int(f[2], "state", line);
        if (t < 0 || std::size_t(t) > num_days)
            throw DomainError("state day outside [0, T] (line " + std::to_string(line) + ")");
        if (v != 0 && v != 1)
            throw DomainError("state must be 0 or 1 (line " + std::to_string(line) + ")");
        seen[n * (num_days + 1) + std::size_t(t)] = 1;
        x.set(n, std::size_t(t), int(v));
    }
    for (auto s : seen)
        if (!s)
            throw DomainError("state file does not cover every person and day");
    return x;
}

inline void write_symptoms(std::ostream &out, const SymptomTensor &y, const PersonIndex &people) {
    out << "node,day,symptom,value\n";
    for (std::size_t n = 0; n < y.num_nodes(); ++n)
        for (std::size_t t = 1; t <= y.num_days(); ++t)
            for (std::size_t s = 0; s < y.num_symptoms(); ++s) {
                const auto v = y(n, t, s);
                out << people.label(n) << ',' << t << ',' << s + 1 << ',';
                if (v == SymptomTensor::kMissing)
                    out << "NA\n";
                else
                    out << int(v) << '\n';
            }
}

inline void write_contacts(std::ostream &out, const DynamicNetwork &g, const PersonIndex &people) {
    out << "day,node_i,node_j\n";
    for (const auto &e : g.edges())
        out << e.day << ',' << people.label(e.i) << ',' << people.label(e.j) << '\n';
}

// Writes every column except the intercept.
inline void write_covariates(std::ostream &out, const CovariateMatrix &z, const PersonIndex &people) {
    out << "node";
    for (std::size_t k = 1; k < z.dim(); ++k)
        out << ',' << z.names()[k];
    out << '\n';
    for (std::size_t n = 0; n < z.num_people(); ++n) {
        out << people.label(n);
        for (std::size_t k = 1; k < z.dim(); ++k)
            out << ',' << fmt(z.matrix()(Eigen::Index(n), Eigen::Index(k)));
        out << '\n';
    }
}

inline void write_id_map(std::ostream &out, const PersonIndex &people) {
    out << "node,index\n";
    for (std::size_t n = 0; n < people.size(); ++n)
        out << people.label(n) << ',' << n << '\n';
}

// Posterior probabilities in long form `node,day,p_infected`.
inline void write_posterior(std::ostream &out, std::span<const double> p, std::size_t N, std::size_t T,
                            const PersonIndex &people) {
    out << "node,day,p_infected\n";
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t t = 0; t <= T; ++t)
            out << people.label(n) << ',' << t << ',' << fmt(p[t * N + n]) << '\n';
}

inline std::vector<double> read_posterior(std::istream &in, const PersonIndex &people, std::size_t num_days) {
    const auto N = people.size();
    std::vector<double> p(N * (num_days + 1), -1.0);
    csv::Reader reader(in);
    std::vector<std::string_view> f;
    bool first = true;
    while (reader.next(f)) {
        if (first && detail::looks_like_header(f, "node")) {
            first = false;
            continue;
        }
        first = false;
        const auto line = reader.line();
        if (f.size() != 3)
            throw ParseError("posterior row needs 3 fields", line);
        const auto n = people.at(f[0], line);
        const auto t = csv::require_int(f[1], "day", line);
        const auto v = csv::require_double(f[2], "p_infected", line);
        if (t < 0 || std::size_t(t) > num_days)
            throw DomainError("posterior day outside [0, T] (line " + std::to_string(line) + ")");
        if (!(v >= 0.0 && v <= 1.0))
            throw DomainError("posterior probability outside [0,1] (line " + std::to_string(line) + ")");
        p[std::size_t(t) * N + n] = v;
    }
    for (double v : p)
        if (v < 0.0)
            throw DomainError("posterior file does not cover every person and day");
    return p;
}

// Wide node-by-day grid for heatmaps.
inline void write_heatmap(std::ostream &out, std::span<const double> p, std::size_t N, std::size_t T,
                          const PersonIndex &people) {
    out << "node";
    for (std::size_t t = 0; t <= T; ++t)
        out << ",d" << t;
    out << '\n';
    for (std::size_t n = 0; n < N; ++n) {
        out << people.label(n);
        for (std::size_t t = 0; t <= T; ++t)
            out << ',' << fmt(p[t * N + n]);
        out << '\n';
    }
}

inline json params_json(const InfectionParams &p) {
    return json{{"gamma", p.gamma}, {"alpha", p.alpha}, {"beta", p.beta}, {"pi", p.pi},
                {"theta", {p.theta[0], p.theta[1]}}};
}

inline InfectionParams params_from_json(const json &j) {
    try {
        InfectionParams p;
        p.gamma = j.at("gamma").get<std::vector<double>>();
        p.alpha = j.at("alpha").get<std::vector<double>>();
        p.beta = j.at("beta").get<std::vector<double>>();
        p.pi = j.at("pi").get<double>();
        const auto &th = j.at("theta");
        if (!th.is_array() || th.size() != 2)
            throw DomainError("theta must hold two rows");
        p.theta[0] = th[0].get<std::vector<double>>();
        p.theta[1] = th[1].get<std::vector<double>>();
        p.validate();
        return p;
    } catch (const json::exception &e) {
        throw ParseError(std::string("malformed parameter JSON: ") + e.what(), 0);
    }
}

inline InfectionParams load_params(const std::string &path) {
    auto in = detail::open_or_throw(path);
    json j;
    try {
        in >> j;
    } catch (const json::exception &e) {
        throw ParseError(std::string("malformed JSON in '") + path + "': " + e.what(), 0);
    }
    return params_from_json(j);
}

inline json eta_json(const LinkCoefficients &eta, const std::vector<std::string> &names) {
    static const char *roles[] = {"r", "a", "b"};
    json j{{"link", to_string(eta.kind)}};
    const auto per_role = eta.kind == LinkKind::beta_exp ? 2u : 1u;
    for (std::size_t r = 0; r < 3; ++r) {
        json role = json::array();
        for (std::size_t v = 0; v < per_role; ++v) {
            json coef = json::object();
            const auto &e = eta.eta[r * per_role + v];
            for (Eigen::Index k = 0; k < e.size(); ++k)
                coef[names.at(std::size_t(k))] = e(k);
            role.push_back(coef);
        }
        j[roles[r]] = per_role == 1 ? role[0] : role;
    }
    return j;
}

inline json metrics_json(const Metrics &m) {
    auto opt = [](const std::optional<double> &v) { return v ? json(*v) : json(nullptr); };
    return json{{"accuracy", m.accuracy},          {"recall", opt(m.recall)},
                {"norm_gamma", opt(m.norm_gamma)}, {"norm_alpha", opt(m.norm_alpha)},
                {"norm_beta", opt(m.norm_beta)},   {"y_onestep_accuracy", opt(m.y_onestep_accuracy)}};
}

inline json diagnostics_json(const BgemResult &r) {
    json its = json::array();
    for (const auto &d : r.diagnostics)
        its.push_back({{"k", d.k},
                       {"delta", d.delta},
                       {"q_bgem", d.q_bgem},
                       {"q_sem", d.q_sem},
                       {"grad_norm_bgem", d.grad_norm_bgem},
                       {"grad_norm_sem", d.grad_norm_sem},
                       {"eta_change", d.eta_change},
                       {"newton_steps_bgem", d.newton_steps_bgem},
                       {"newton_steps_sem", d.newton_steps_sem}});
    return json{{"iterations", r.iterations}, {"converged", r.converged}, {"history", its}};
}

inline json trace_json(const TraceRecord &rec) {
    return json{{"iteration", rec.iteration},   {"pi", rec.pi},
                {"theta", {rec.theta[0], rec.theta[1]}}, {"mean_gamma", rec.mean_gamma},
                {"mean_alpha", rec.mean_alpha}, {"mean_beta", rec.mean_beta},
                {"infected_cells", rec.infected_cells}};
}

inline void write_json(const std::string &path, const json &j) {
    auto out = create(path);
    out << j.dump(2) << '\n';
}

} // namespace gchmm::io
