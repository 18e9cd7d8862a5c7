#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gchmm/gchmm.hpp"

namespace gchmm::cli {

namespace fs = std::filesystem;
using io::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

// Person labels in first-appearance order from one CSV column, header skipped.
inline PersonIndex people_from_column(const std::string &path, std::size_t col = 0) {
    auto in = detail::open_or_throw(path);
    csv::Reader reader(in);
    std::vector<std::string_view> f;
    std::vector<std::string> labels;
    std::unordered_set<std::string> seen;
    bool header = true;
    while (reader.next(f)) {
        if (header) {
            header = false;
            continue;
        }
        if (col >= f.size())
            throw ParseError("row too short to hold a person label", reader.line());
        std::string label(f[col]);
        if (seen.insert(label).second)
            labels.push_back(std::move(label));
    }
    if (labels.empty())
        throw DomainError("no person labels found in '" + path + "'");
    return PersonIndex(std::move(labels));
}

// Label order comes from, in priority: an id map, the covariate file, the symptom file.
inline PersonIndex resolve_people(const std::string &id_map, const std::string &covariates,
                                  const std::string &symptoms) {
    if (!id_map.empty())
        return people_from_column(id_map);
    if (!covariates.empty()) {
        auto in = detail::open_or_throw(covariates);
        return read_covariate_labels(in);
    }
    return people_from_column(symptoms);
}

inline std::size_t resolve_days(std::size_t days, const std::string &symptoms) {
    if (days)
        return days;
    auto in = detail::open_or_throw(symptoms);
    const auto t = scan_max_int(in, 1);
    if (!t)
        throw DomainError("cannot infer the number of days; pass --days");
    return t;
}

inline void ensure_dir(const std::string &dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw DomainError("cannot create output directory '" + dir + "'");
}

inline std::string join(const std::string &dir, const char *name) { return (fs::path(dir) / name).string(); }

template <class Fn> void write_file(const std::string &path, Fn &&fn) {
    auto out = io::create(path);
    fn(out);
    if (!out)
        throw DomainError("failed writing '" + path + "'");
}

// Appends `--key value` pairs from a JSON config for every key not already given on the
// command line, so flags on the command line win.
inline std::vector<std::string> merge_config(std::vector<std::string> args) {
    std::string path;
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[++i];
            continue;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            continue;
        }
        kept.push_back(args[i]);
    }
    if (path.empty())
        return kept;
    auto in = detail::open_or_throw(path);
    json cfg;
    try {
        in >> cfg;
    } catch (const json::exception &e) {
        throw ParseError("malformed config '" + path + "': " + e.what());
    }
    if (!cfg.is_object())
        throw ParseError("config '" + path + "' must be a JSON object");
    std::set<std::string> given;
    for (const auto &a : kept)
        if (a.rfind("--", 0) == 0)
            given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2));
    for (const auto &[key, value] : cfg.items()) {
        if (given.count(key))
            continue;
        if (value.is_boolean()) {
            if (value.get<bool>())
                kept.push_back("--" + key);
        } else if (value.is_string()) {
            kept.push_back("--" + key);
            kept.push_back(value.get<std::string>());
        } else if (value.is_number_integer()) {
            kept.push_back("--" + key);
            kept.push_back(std::to_string(value.get<long long>()));
        } else if (value.is_number()) {
            kept.push_back("--" + key);
            kept.push_back(io::fmt(value.get<double>()));
        } else {
            throw ParseError("config key '" + key + "' must be a scalar");
        }
    }
    return kept;
}

inline std::uint64_t default_seed() {
    if (const char *env = std::getenv("GCHMM_SEED")) {
        char *end = nullptr;
        const auto v = std::strtoull(env, &end, 10);
        if (end && *end == '\0' && end != env)
            return v;
        throw DomainError("GCHMM_SEED must be a nonnegative integer");
    }
    return 1;
}

inline const std::map<std::string, LinkKind> &link_names() {
    static const std::map<std::string, LinkKind> m{
        {"sigmoid", LinkKind::sigmoid}, {"beta-exp", LinkKind::beta_exp}, {"fixed", LinkKind::fixed}};
    return m;
}

inline const std::map<std::string, BetaMode> &mode_names() {
    static const std::map<std::string, BetaMode> m{{"receive", BetaMode::receive}, {"transmit", BetaMode::transmit}};
    return m;
}

struct SimulateArgs {
    std::string out;
    std::size_t nodes = 84, days = 107, symptoms = 6, max_degree = 11;
    int components = 4;
    std::string link = "sigmoid", mode = "receive", params;
    double p_miss = 0.0;
    std::uint64_t seed = 1;
};

inline void run_simulate(const SimulateArgs &a) {
    if (!(a.p_miss >= 0.0 && a.p_miss <= 1.0))
        throw DomainError("--p-miss must lie in [0,1]");
    const auto link = link_names().at(a.link);
    const auto mode = mode_names().at(a.mode);
    const Rng root(a.seed);
    const auto people = PersonIndex::sequential(a.nodes);
    const auto g = synthetic_scale_free_network(a.nodes, a.days, a.max_degree, root);
    const auto raw = synthetic_lifestyle_covariates(a.nodes, root);
    const auto pca = pca_reduce(raw, a.components);
    SimConfig sc;
    sc.link = link;
    sc.mode = mode;
    sc.p_miss = a.p_miss;
    sc.seed = root.substream({12}).seed();
    SimResult sim;
    std::optional<LinkCoefficients> eta;
    if (link == LinkKind::fixed) {
        InfectionParams p;
        if (!a.params.empty()) {
            p = io::load_params(a.params);
            if (p.num_people() != a.nodes || p.num_symptoms() != a.symptoms)
                throw DomainError("--params shape differs from --nodes/--symptoms");
        } else {
            p = implied_infection_params(pca.reduced, scenario_truth(pca.reduced.dim()), 0.1,
                                         scenario_theta(a.symptoms));
        }
        sim = simulate(g, p, sc);
    } else {
        eta = link == LinkKind::sigmoid ? scenario_truth(pca.reduced.dim()) : scenario_truth_betaexp(pca.reduced.dim());
        sim = simulate(g, pca.reduced, *eta, 0.1, scenario_theta(a.symptoms), sc);
    }
    ensure_dir(a.out);
    write_file(join(a.out, "contacts.csv"), [&](auto &o) { io::write_contacts(o, g, people); });
    write_file(join(a.out, "covariates.csv"), [&](auto &o) { io::write_covariates(o, pca.reduced, people); });
    write_file(join(a.out, "covariates_raw.csv"), [&](auto &o) { io::write_covariates(o, raw, people); });
    write_file(join(a.out, "X.csv"), [&](auto &o) { io::write_states(o, sim.x, people); });
    write_file(join(a.out, "Y.csv"), [&](auto &o) { io::write_symptoms(o, sim.y, people); });
    write_file(join(a.out, "id_map.csv"), [&](auto &o) { io::write_id_map(o, people); });
    io::write_json(join(a.out, "params.json"), io::params_json(sim.params));
    if (eta)
        io::write_json(join(a.out, "eta_true.json"), io::eta_json(*eta, pca.reduced.names()));
}

struct InferArgs {
    std::string method, contacts, symptoms, covariates, id_map, known_params, out;
    std::size_t days = 0, symptom_count = 0;
    double threshold = 10.0;
    std::string link = "sigmoid", mode = "receive";
    std::size_t samples = 0, burnin = 0, em_iters = 0, thin = 0;
    bool burnin_set = false, fast_binary = false;
    std::uint64_t seed = 1;
};

inline void run_infer(const InferArgs &a) {
    const auto people = resolve_people(a.id_map, a.covariates, a.symptoms);
    const auto T = resolve_days(a.days, a.symptoms);
    const auto g = load_network(a.contacts, people, T, a.threshold);
    const auto y = load_symptoms(a.symptoms, people, T, a.symptom_count);
    const auto N = people.size();
    const auto mode = mode_names().at(a.mode);
    ensure_dir(a.out);
    auto emit_posterior = [&](std::span<const double> p) {
        write_file(join(a.out, "posterior.csv"), [&](auto &o) { io::write_posterior(o, p, N, T, people); });
        write_file(join(a.out, "heatmap.csv"), [&](auto &o) { io::write_heatmap(o, p, N, T, people); });
        write_file(join(a.out, "states.csv"), [&](auto &o) { io::write_states(o, classify(p, N, T), people); });
    };
    std::optional<InfectionParams> known;
    if (!a.known_params.empty()) {
        known = io::load_params(a.known_params);
        if (known->num_people() != N || known->num_symptoms() != y.num_symptoms())
            throw DomainError("--known-params shape differs from the data");
    }

    if (a.method == "gbw") {
        if (known) {
            FactorGraph fg(g, y, *known, mode);
            const auto m = run_forward_backward(fg);
            emit_posterior(posterior_vector(m));
            io::write_json(join(a.out, "params.json"), io::params_json(*known));
            return;
        }
        if (mode != BetaMode::receive)
            throw DomainError("homogeneous GBW estimates beta under the receive interpretation only");
        GbwOptions opts;
        if (a.em_iters)
            opts.max_iters = a.em_iters;
        const auto r = run_gbw(y, g, HomogeneousParams::neutral(y.num_symptoms()), opts);
        emit_posterior(posterior_vector(r.beliefs));
        io::write_json(join(a.out, "params.json"), io::params_json(r.params.expand(N)));
        io::write_json(join(a.out, "diagnostics.json"),
                       json{{"iterations", r.iterations}, {"converged", r.converged}, {"changes", r.changes}});
        return;
    }

    if (a.method == "gibbs") {
        GibbsConfig cfg;
        if (a.samples)
            cfg.iterations = a.samples;
        if (a.burnin_set)
            cfg.burn_in = a.burnin;
        cfg.thin = a.thin;
        cfg.mode = mode;
        cfg.seed = a.seed;
        InfectionParams init;
        if (known) {
            cfg.param_mode = ParamMode::known;
            init = *known;
        } else {
            cfg.param_mode = ParamMode::homogeneous;
            init = HomogeneousParams::neutral(y.num_symptoms()).expand(N);
        }
        const auto r = run_gibbs(g, y, init, cfg);
        emit_posterior(r.p_infected);
        InfectionParams means = r.final_params;
        means.gamma = r.gamma;
        means.alpha = r.alpha;
        means.beta = r.beta;
        means.pi = r.pi;
        means.theta = r.theta;
        io::write_json(join(a.out, "params.json"), io::params_json(means));
        write_file(join(a.out, "trace.jsonl"), [&](auto &o) {
            for (const auto &rec : r.trace)
                o << io::trace_json(rec).dump() << '\n';
        });
        return;
    }

    // bgem
    if (a.covariates.empty())
        throw DomainError("bgem needs --covariates");
    const auto z = load_covariates(a.covariates, people);
    BgemConfig cfg;
    cfg.link = link_names().at(a.link);
    if (cfg.link == LinkKind::fixed)
        throw DomainError("bgem estimates a sigmoid or beta-exp link");
    cfg.mode = mode;
    if (a.samples)
        cfg.samples = a.samples;
    if (a.burnin_set)
        cfg.burn_in = a.burnin;
    else if (a.samples)
        cfg.burn_in = cfg.samples / 2;
    if (a.em_iters)
        cfg.max_em_iters = a.em_iters;
    cfg.fast_binary = a.fast_binary;
    cfg.seed = a.seed;
    const auto r = run_bgem(y, g, z, cfg);
    emit_posterior(r.p_infected);
    io::write_json(join(a.out, "eta.json"), io::eta_json(r.eta, z.names()));
    io::write_json(join(a.out, "params.json"), io::params_json(r.implied));
    io::write_json(join(a.out, "diagnostics.json"), io::diagnostics_json(r));
}

struct EvaluateArgs {
    std::string truth_states, posterior, truth_params, params, symptoms, contacts, out;
    std::size_t days = 0;
    double threshold = 10.0;
    std::string mode = "receive";
};

inline Metrics run_evaluate(const EvaluateArgs &a) {
    const auto people = people_from_column(a.truth_states);
    std::size_t T = a.days;
    if (!T) {
        auto in = detail::open_or_throw(a.truth_states);
        T = scan_max_int(in, 1);
        if (!T)
            throw DomainError("cannot infer the number of days; pass --days");
    }
    auto tin = detail::open_or_throw(a.truth_states);
    const auto truth = io::read_states(tin, people, T);
    auto pin = detail::open_or_throw(a.posterior);
    const auto p = io::read_posterior(pin, people, T);
    const auto pred = classify(p, people.size(), T);
    std::optional<InfectionParams> tp, pp;
    if (!a.truth_params.empty())
        tp = io::load_params(a.truth_params);
    if (!a.params.empty())
        pp = io::load_params(a.params);
    auto m = metrics(truth, pred, tp ? &*tp : nullptr, pp ? &*pp : nullptr);
    if (pp && !a.symptoms.empty() && !a.contacts.empty()) {
        const auto g = load_network(a.contacts, people, T, a.threshold);
        const auto y = load_symptoms(a.symptoms, people, T, pp->num_symptoms());
        m.y_onestep_accuracy = one_step_accuracy(y, g, *pp, mode_names().at(a.mode));
    }
    const auto j = io::metrics_json(m);
    if (a.out.empty())
        std::cout << j.dump(2) << '\n';
    else
        io::write_json(a.out, j);
    return m;
}

struct PredictArgs {
    std::string contacts, symptoms, params, id_map, out;
    std::size_t days = 0;
    double threshold = 10.0;
    std::string mode = "receive";
};

// Writes P(y[n][t+1][s] = 1) for t = 0..T-1 using filtered beliefs through day t.
inline double run_predict(const PredictArgs &a) {
    const auto people = resolve_people(a.id_map, "", a.symptoms);
    const auto T = resolve_days(a.days, a.symptoms);
    const auto params = io::load_params(a.params);
    if (params.num_people() != people.size())
        throw DomainError("--params covers a different number of people");
    const auto S = params.num_symptoms();
    const auto g = load_network(a.contacts, people, T, a.threshold);
    const auto y = load_symptoms(a.symptoms, people, T, S);
    const auto mode = mode_names().at(a.mode);
    FactorGraph fg(g, y, params, mode);
    const auto filt = filter_forward(fg);
    const auto N = people.size();
    std::vector<double> now(N);
    write_file(a.out, [&](auto &o) {
        o << "node,day,symptom,p_symptom\n";
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t n = 0; n < N; ++n)
                now[n] = filt.p_infected(n, t);
            const auto pred = one_step_ahead(now, params, g, t, mode);
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t s = 0; s < S; ++s)
                    o << people.label(n) << ',' << t + 1 << ',' << s + 1 << ',' << io::fmt(pred[n * S + s]) << '\n';
        }
    });
    const double acc = one_step_accuracy(y, g, params, mode);
    std::cout << json{{"y_onestep_accuracy", acc}}.dump() << '\n';
    return acc;
}

inline int cli_main(int argc, char **argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i)
        args.emplace_back(argv[i]);

    CLI::App app{"Epidemic inference on graph-coupled hidden Markov models"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);
    auto links = CLI::IsMember({"sigmoid", "beta-exp", "fixed"});
    auto modes = CLI::IsMember({"receive", "transmit"});

    SimulateArgs sa;
    std::uint64_t seed = 0;
    auto *sim = app.add_subcommand("simulate", "Simulate contacts, covariates, states and symptoms");
    sim->add_option("--out", sa.out, "Output directory")->required();
    sim->add_option("--nodes", sa.nodes, "Number of people")->check(CLI::PositiveNumber);
    sim->add_option("--days", sa.days, "Number of tracked days")->check(CLI::PositiveNumber);
    sim->add_option("--symptoms", sa.symptoms, "Number of symptom types")->check(CLI::PositiveNumber);
    sim->add_option("--max-degree", sa.max_degree, "Daily degree cap");
    sim->add_option("--components", sa.components, "Principal components kept from the raw covariates");
    sim->add_option("--link", sa.link, "Parameter link")->check(links);
    sim->add_option("--beta-interp", sa.mode, "Meaning of beta")->check(modes);
    sim->add_option("--p-miss", sa.p_miss, "Probability that a symptom report is missing");
    sim->add_option("--params", sa.params, "Per-person parameters JSON for --link fixed");
    sim->add_option("--seed", seed, "Random seed");

    InferArgs ia;
    auto *inf = app.add_subcommand("infer", "Infer hidden states and parameters");
    inf->add_option("--method", ia.method, "Inference method")->required()->check(CLI::IsMember({"gbw", "gibbs", "bgem"}));
    inf->add_option("--contacts", ia.contacts, "Contact CSV")->required();
    inf->add_option("--symptoms", ia.symptoms, "Symptom CSV")->required();
    inf->add_option("--covariates", ia.covariates, "Covariate CSV");
    inf->add_option("--id-map", ia.id_map, "CSV whose first column fixes the person order");
    inf->add_option("--days", ia.days, "Number of tracked days (default: largest day in the symptom file)");
    inf->add_option("--symptom-count", ia.symptom_count, "Number of symptom types");
    inf->add_option("--duration-threshold", ia.threshold, "Minutes of contact per day that make an edge");
    inf->add_option("--known-params", ia.known_params, "Freeze parameters to this JSON");
    inf->add_option("--link", ia.link, "Link for bgem")->check(CLI::IsMember({"sigmoid", "beta-exp"}));
    inf->add_option("--beta-interp", ia.mode, "Meaning of beta")->check(modes);
    inf->add_option("--samples", ia.samples, "Gibbs sweeps (per E-step for bgem)");
    auto *burn = inf->add_option("--burnin", ia.burnin, "Discarded sweeps");
    inf->add_option("--em-iters", ia.em_iters, "EM iterations");
    inf->add_option("--thin", ia.thin, "Keep every k-th post-burn-in draw in trace.jsonl");
    inf->add_flag("--fast-binary", ia.fast_binary, "Use thresholded states in the bgem M-step");
    inf->add_option("--seed", seed, "Random seed");
    inf->add_option("--out", ia.out, "Output directory")->required();

    EvaluateArgs ea;
    auto *ev = app.add_subcommand("evaluate", "Score posterior states against the truth");
    ev->add_option("--truth-states", ea.truth_states, "True X CSV")->required();
    ev->add_option("--posterior", ea.posterior, "Posterior CSV")->required();
    ev->add_option("--truth-params", ea.truth_params, "True parameters JSON");
    ev->add_option("--params", ea.params, "Estimated parameters JSON");
    ev->add_option("--symptoms", ea.symptoms, "Symptom CSV for one-step-ahead accuracy");
    ev->add_option("--contacts", ea.contacts, "Contact CSV for one-step-ahead accuracy");
    ev->add_option("--days", ea.days, "Number of tracked days");
    ev->add_option("--duration-threshold", ea.threshold, "Minutes of contact per day that make an edge");
    ev->add_option("--beta-interp", ea.mode, "Meaning of beta")->check(modes);
    ev->add_option("--out", ea.out, "Metrics JSON (default: stdout)");

    PredictArgs pa;
    auto *pr = app.add_subcommand("predict", "One-step-ahead symptom forecasts");
    pr->add_option("--contacts", pa.contacts, "Contact CSV")->required();
    pr->add_option("--symptoms", pa.symptoms, "Symptom CSV")->required();
    pr->add_option("--params", pa.params, "Parameters JSON")->required();
    pr->add_option("--id-map", pa.id_map, "CSV whose first column fixes the person order");
    pr->add_option("--days", pa.days, "Number of tracked days");
    pr->add_option("--duration-threshold", pa.threshold, "Minutes of contact per day that make an edge");
    pr->add_option("--beta-interp", pa.mode, "Meaning of beta")->check(modes);
    pr->add_option("--out", pa.out, "Forecast CSV")->required();

    try {
        args = merge_config(std::move(args));
        std::reverse(args.begin(), args.end()); // CLI11 consumes a reversed vector
        app.parse(std::move(args));
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitValidation;
    } catch (const ValidationError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }

    try {
        const bool seeded = sim->count("--seed") || inf->count("--seed");
        const auto s = seeded ? seed : default_seed();
        if (sim->parsed()) {
            sa.seed = s;
            run_simulate(sa);
        } else if (inf->parsed()) {
            ia.seed = s;
            ia.burnin_set = burn->count() > 0;
            run_infer(ia);
        } else if (ev->parsed()) {
            run_evaluate(ea);
        } else if (pr->parsed()) {
            run_predict(pa);
        }
    } catch (const ValidationError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const NumericalError &e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitOk;
}

} // namespace gchmm::cli
