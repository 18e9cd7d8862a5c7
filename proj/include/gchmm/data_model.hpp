#pragma once

// Core containers shared by every module.
//
// Index conventions used throughout the library:
//   * people are dense 0-based indices n in [0, N); external labels live in PersonIndex;
//   * hidden states are indexed by day t in [0, T], day 0 being the initial state;
//   * symptoms and contact graphs are indexed by day t in [1, T];
//   * symptom columns are 0-based s in [0, S).
// The graph of day t couples the transition x[., t-1] -> x[., t].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gchmm/csv.hpp"
#include "gchmm/error.hpp"

namespace gchmm {

struct ProblemDims {
    std::size_t N = 0; // people
    std::size_t T = 0; // tracked days
    std::size_t S = 0; // symptoms
    std::size_t K = 1; // covariate dimension, intercept included
    std::size_t M = 0; // max node degree over all days

    void validate() const {
        if (N == 0 || T == 0 || S == 0 || K == 0)
            throw DomainError("problem dimensions N, T, S, K must be positive");
        if (M > N - 1)
            throw DomainError("max degree M must not exceed N-1");
    }
};

// Bidirectional map between external person labels and dense indices.
class PersonIndex {
  public:
    PersonIndex() = default;

    explicit PersonIndex(std::vector<std::string> labels) : labels_(std::move(labels)) {
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            if (!index_.emplace(labels_[i], i).second)
                throw ConflictError("duplicate person label '" + labels_[i] + "'");
        }
    }

    // Labels "1".."N".
    static PersonIndex sequential(std::size_t n) {
        std::vector<std::string> labels;
        labels.reserve(n);
        for (std::size_t i = 1; i <= n; ++i)
            labels.push_back(std::to_string(i));
        return PersonIndex(std::move(labels));
    }

    std::size_t size() const noexcept { return labels_.size(); }
    const std::string &label(std::size_t i) const { return labels_.at(i); }
    const std::vector<std::string> &labels() const noexcept { return labels_; }

    std::size_t at(std::string_view label, std::size_t line = 0) const {
        auto it = index_.find(std::string(label));
        if (it == index_.end())
            throw DomainError("unknown person id '" + std::string(label) + "'" +
                              (line ? " (line " + std::to_string(line) + ")" : std::string()));
        return it->second;
    }

  private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct Edge {
    std::size_t day; // 1..T
    std::size_t i;
    std::size_t j;
};

// Per-day undirected contact graphs G_1..G_T. Immutable after construction.
class DynamicNetwork {
  public:
    DynamicNetwork() = default;

    DynamicNetwork(std::size_t num_nodes, std::size_t num_days, std::span<const Edge> edges)
        : N_(num_nodes), T_(num_days), adj_((num_days + 1) * num_nodes) {
        for (const auto &e : edges) {
            if (e.day < 1 || e.day > T_)
                throw DomainError("edge day " + std::to_string(e.day) + " outside [1, " + std::to_string(T_) + "]");
            if (e.i >= N_ || e.j >= N_)
                throw DomainError("edge endpoint outside [0, N)");
            if (e.i == e.j)
                throw DomainError("self-loop at node " + std::to_string(e.i));
            slot(e.day, e.i).push_back(e.j);
            slot(e.day, e.j).push_back(e.i);
        }
        for (auto &nb : adj_) {
            std::sort(nb.begin(), nb.end());
            nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
            max_degree_ = std::max(max_degree_, nb.size());
        }
    }

    // Days with no graph at all (every node isolated).
    static DynamicNetwork empty(std::size_t num_nodes, std::size_t num_days) {
        return DynamicNetwork(num_nodes, num_days, std::span<const Edge>{});
    }

    std::size_t num_nodes() const noexcept { return N_; }
    std::size_t num_days() const noexcept { return T_; }
    std::size_t max_degree() const noexcept { return max_degree_; }

    // Sorted neighbours of n in G_t, t in [1, T].
    std::span<const std::size_t> neighbors(std::size_t t, std::size_t n) const {
        if (t < 1 || t > T_ || n >= N_)
            throw DomainError("neighbors: index out of range");
        return adj_[t * N_ + n];
    }

    bool has_edge(std::size_t t, std::size_t i, std::size_t j) const {
        auto nb = neighbors(t, i);
        return std::binary_search(nb.begin(), nb.end(), j);
    }

    std::size_t num_edges(std::size_t t) const {
        std::size_t d = 0;
        for (std::size_t n = 0; n < N_; ++n)
            d += neighbors(t, n).size();
        return d / 2;
    }

    std::vector<Edge> edges() const {
        std::vector<Edge> out;
        for (std::size_t t = 1; t <= T_; ++t)
            for (std::size_t i = 0; i < N_; ++i)
                for (auto j : adj_[t * N_ + i])
                    if (i < j)
                        out.push_back({t, i, j});
        return out;
    }

  private:
    std::vector<std::size_t> &slot(std::size_t t, std::size_t n) { return adj_[t * N_ + n]; }

    std::size_t N_ = 0;
    std::size_t T_ = 0;
    std::size_t max_degree_ = 0;
    std::vector<std::vector<std::size_t>> adj_;
};

// Binary infection states x[n][t], t in [0, T].
class HiddenStateMatrix {
  public:
    HiddenStateMatrix() = default;
    HiddenStateMatrix(std::size_t num_nodes, std::size_t num_days)
        : N_(num_nodes), T_(num_days), x_(num_nodes * (num_days + 1), 0) {}

    std::size_t num_nodes() const noexcept { return N_; }
    std::size_t num_days() const noexcept { return T_; }

    std::uint8_t operator()(std::size_t n, std::size_t t) const { return x_[n * (T_ + 1) + t]; }

    std::uint8_t at(std::size_t n, std::size_t t) const {
        if (n >= N_ || t > T_)
            throw DomainError("state index out of range");
        return (*this)(n, t);
    }

    void set(std::size_t n, std::size_t t, int v) {
        if (v != 0 && v != 1)
            throw DomainError("hidden state must be 0 or 1");
        x_[n * (T_ + 1) + t] = static_cast<std::uint8_t>(v);
    }

    std::span<const std::uint8_t> row(std::size_t n) const { return {x_.data() + n * (T_ + 1), T_ + 1}; }

    bool operator==(const HiddenStateMatrix &) const = default;

  private:
    std::size_t N_ = 0;
    std::size_t T_ = 0;
    std::vector<std::uint8_t> x_;
};

// Binary symptom observations y[n][t][s] with a missing marker, t in [1, T].
class SymptomTensor {
  public:
    static constexpr std::int8_t kMissing = -1;

    SymptomTensor() = default;
    SymptomTensor(std::size_t num_nodes, std::size_t num_days, std::size_t num_symptoms)
        : N_(num_nodes), T_(num_days), S_(num_symptoms), y_(num_nodes * num_days * num_symptoms, kMissing) {}

    std::size_t num_nodes() const noexcept { return N_; }
    std::size_t num_days() const noexcept { return T_; }
    std::size_t num_symptoms() const noexcept { return S_; }

    std::int8_t operator()(std::size_t n, std::size_t t, std::size_t s) const { return y_[index(n, t, s)]; }

    bool missing(std::size_t n, std::size_t t, std::size_t s) const { return (*this)(n, t, s) == kMissing; }

    void set(std::size_t n, std::size_t t, std::size_t s, int v) {
        if (v != 0 && v != 1 && v != kMissing)
            throw DomainError("symptom value must be 0, 1 or missing");
        if (n >= N_ || t < 1 || t > T_ || s >= S_)
            throw DomainError("symptom index out of range");
        y_[index(n, t, s)] = static_cast<std::int8_t>(v);
    }

    std::size_t count_observed() const {
        return static_cast<std::size_t>(std::count_if(y_.begin(), y_.end(), [](auto v) { return v != kMissing; }));
    }

    std::size_t size() const noexcept { return y_.size(); }

    bool operator==(const SymptomTensor &) const = default;

  private:
    std::size_t index(std::size_t n, std::size_t t, std::size_t s) const { return (n * T_ + (t - 1)) * S_ + s; }

    std::size_t N_ = 0;
    std::size_t T_ = 0;
    std::size_t S_ = 0;
    std::vector<std::int8_t> y_;
};

// Per-person covariates; column 0 is the constant 1.
class CovariateMatrix {
  public:
    CovariateMatrix() = default;

    explicit CovariateMatrix(Eigen::MatrixXd z, std::vector<std::string> names = {}) : z_(std::move(z)) {
        if (z_.cols() == 0)
            throw DomainError("covariate matrix needs at least the intercept column");
        for (Eigen::Index n = 0; n < z_.rows(); ++n) {
            if (z_(n, 0) != 1.0)
                throw DomainError("covariate column 0 must be the constant 1");
        }
        if (!z_.allFinite())
            throw DomainError("covariates must be finite");
        if (names.empty()) {
            names.push_back("intercept");
            for (Eigen::Index k = 1; k < z_.cols(); ++k)
                names.push_back("f" + std::to_string(k));
        }
        if (names.size() != static_cast<std::size_t>(z_.cols()))
            throw DomainError("covariate name count does not match column count");
        names_ = std::move(names);
    }

    // Intercept-only design for n people.
    static CovariateMatrix intercept_only(std::size_t n) { return CovariateMatrix(Eigen::MatrixXd::Ones(Eigen::Index(n), 1)); }

    std::size_t num_people() const noexcept { return static_cast<std::size_t>(z_.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(z_.cols()); }
    const Eigen::MatrixXd &matrix() const noexcept { return z_; }
    Eigen::VectorXd row(std::size_t n) const { return z_.row(Eigen::Index(n)).transpose(); }
    const std::vector<std::string> &names() const noexcept { return names_; }

  private:
    Eigen::MatrixXd z_;
    std::vector<std::string> names_;
};

struct BetaPrior {
    double a = 1.0;
    double b = 1.0;
    double mean() const { return a / (a + b); }
};

struct BetaHyperParams {
    BetaPrior pi{1.0, 1.0};
    BetaPrior alpha{1.0, 1.0};
    BetaPrior beta{1.0, 1.0};
    BetaPrior gamma{1.0, 1.0};
    BetaPrior theta0{1.0, 4.0}; // symptom rate while healthy
    BetaPrior theta1{4.0, 1.0}; // symptom rate while infected

    void validate() const {
        for (const auto *p : {&pi, &alpha, &beta, &gamma, &theta0, &theta1})
            if (!(p->a > 0.0 && p->b > 0.0))
                throw DomainError("beta hyper-parameters must be strictly positive");
    }
};

// ---------------------------------------------------------------------------
// Loading

namespace detail {
inline std::ifstream open_or_throw(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw DomainError("cannot open '" + path + "'");
    return in;
}

inline bool looks_like_header(const std::vector<std::string_view> &f, std::string_view first) {
    return !f.empty() && csv::iequals(f[0], first);
}
} // namespace detail

// Contact list `day,node_i,node_j[,duration_minutes]`. Durations of the same pair on
// the same day accumulate; a row without a duration qualifies on its own.
inline DynamicNetwork read_network(std::istream &in, const PersonIndex &people, std::size_t num_days,
                                   double duration_threshold = 10.0) {
    if (!(duration_threshold >= 0.0))
        throw DomainError("duration threshold must be >= 0");
    struct Acc {
        double minutes = 0.0;
        bool qualifies = false;
    };
    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, Acc> acc;
    csv::Reader reader(in);
    std::vector<std::string_view> f;
    bool first = true;
    while (reader.next(f)) {
        if (first && detail::looks_like_header(f, "day")) {
            first = false;
            continue;
        }
        first = false;
        const auto line = reader.line();
        if (f.size() != 3 && f.size() != 4)
            throw ParseError("contact row needs 3 or 4 fields", line);
        const auto day = csv::require_int(f[0], "day", line);
        if (day < 1 || static_cast<std::size_t>(day) > num_days)
            throw DomainError("contact day " + std::to_string(day) + " outside [1, " + std::to_string(num_days) +
                              "] (line " + std::to_string(line) + ")");
        auto i = people.at(f[1], line);
        auto j = people.at(f[2], line);
        if (i == j)
            throw DomainError("self contact on line " + std::to_string(line));
        if (i > j)
            std::swap(i, j);
        auto &a = acc[{static_cast<std::size_t>(day), i, j}];
        if (f.size() == 4 && !f[3].empty()) {
            const double d = csv::require_double(f[3], "duration", line);
            if (d < 0.0)
                throw DomainError("negative duration on line " + std::to_string(line));
            a.minutes += d;
        } else {
            a.qualifies = true;
        }
    }
    std::vector<Edge> edges;
    for (const auto &[key, a] : acc) {
        if (a.qualifies || a.minutes >= duration_threshold)
            edges.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key)});
    }
    return DynamicNetwork(people.size(), num_days, edges);
}

inline DynamicNetwork load_network(const std::string &path, const PersonIndex &people, std::size_t num_days,
                                   double duration_threshold = 10.0) {
    auto in = detail::open_or_throw(path);
    return read_network(in, people, num_days, duration_threshold);
}

// Largest day index mentioned in column `col` of a CSV (header skipped). Used to infer T.
inline std::size_t scan_max_int(std::istream &in, std::size_t col) {
    csv::Reader reader(in);
    std::vector<std::string_view> f;
    long long best = 0;
    while (reader.next(f)) {
        if (col < f.size())
            if (auto v = csv::to_int(f[col]))
                best = std::max(best, *v);
    }
    return static_cast<std::size_t>(best);
}

// Symptom rows `node,day,symptom,value` with value in {0,1,NA}; unlisted cells stay missing.
// Passing num_days or num_symptoms as 0 infers them from the largest index present.
inline SymptomTensor read_symptoms(std::istream &in, const PersonIndex &people, std::size_t num_days,
                                   std::size_t num_symptoms) {
    struct Row {
        std::size_t n;
        long long t, s;
        int v;
        std::size_t line;
    };
    std::vector<Row> rows;
    csv::Reader reader(in);
    std::vector<std::string_view> f;
    bool first = true;
    long long max_t = 0, max_s = 0;
    while (reader.next(f)) {
        if (first && detail::looks_like_header(f, "node")) {
            first = false;
            continue;
        }
        first = false;
        const auto line = reader.line();
        if (f.size() != 4)
            throw ParseError("symptom row needs 4 fields", line);
        const auto n = people.at(f[0], line);
        const auto t = csv::require_int(f[1], "day", line);
        const auto s = csv::require_int(f[2], "symptom", line);
        int v;
        if (f[3] == "0")
            v = 0;
        else if (f[3] == "1")
            v = 1;
        else if (f[3] == "NA")
            v = SymptomTensor::kMissing;
        else
            throw ParseError("symptom value must be 0, 1 or NA, got '" + std::string(f[3]) + "'", line);
        if (t < 1 || s < 1)
            throw DomainError("day and symptom indices are 1-based (line " + std::to_string(line) + ")");
        max_t = std::max(max_t, t);
        max_s = std::max(max_s, s);
        rows.push_back({n, t, s, v, line});
    }
    const std::size_t T = num_days ? num_days : static_cast<std::size_t>(max_t);
    const std::size_t S = num_symptoms ? num_symptoms : static_cast<std::size_t>(max_s);
    if (T == 0 || S == 0)
        throw DomainError("cannot infer symptom tensor shape from an empty file");
    SymptomTensor y(people.size(), T, S);
    std::vector<std::uint8_t> seen(people.size() * T * S, 0);
    for (const auto &r : rows) {
        if (static_cast<std::size_t>(r.t) > T || static_cast<std::size_t>(r.s) > S)
            throw DomainError("symptom row outside tensor shape (line " + std::to_string(r.line) + ")");
        const auto key = (r.n * T + std::size_t(r.t - 1)) * S + std::size_t(r.s - 1);
        if (seen[key])
            throw ConflictError("duplicate symptom cell (line " + std::to_string(r.line) + ")");
        seen[key] = 1;
        y.set(r.n, std::size_t(r.t), std::size_t(r.s - 1), r.v);
    }
    return y;
}

inline SymptomTensor load_symptoms(const std::string &path, const PersonIndex &people, std::size_t num_days = 0,
                                   std::size_t num_symptoms = 0) {
    auto in = detail::open_or_throw(path);
    return read_symptoms(in, people, num_days, num_symptoms);
}

// Person labels in the order they appear in a covariate file.
inline PersonIndex read_covariate_labels(std::istream &in) {
    csv::Reader reader(in);
    std::vector<std::string_view> f;
    std::vector<std::string> labels;
    bool header = true;
    while (reader.next(f)) {
        if (header) {
            header = false;
            continue;
        }
        labels.emplace_back(f.at(0));
    }
    return PersonIndex(std::move(labels));
}

// Covariate file `node,f1,...,fK-1` with a mandatory header. Every person must have
// exactly one row; the intercept column is prepended.
inline CovariateMatrix read_covariates(std::istream &in, const PersonIndex &people) {
    csv::Reader reader(in);
    std::vector<std::string_view> f;
    if (!reader.next(f))
        throw ParseError("covariate file is empty; a header is required", 1);
    if (f.empty() || !csv::iequals(f[0], "node"))
        throw ParseError("covariate header must start with 'node'", reader.line());
    std::vector<std::string> names{"intercept"};
    for (std::size_t k = 1; k < f.size(); ++k)
        names.emplace_back(f[k]);
    const auto K = names.size();
    Eigen::MatrixXd z = Eigen::MatrixXd::Ones(Eigen::Index(people.size()), Eigen::Index(K));
    std::vector<std::uint8_t> seen(people.size(), 0);
    std::size_t rows = 0;
    while (reader.next(f)) {
        const auto line = reader.line();
        if (f.size() != K)
            throw ParseError("covariate row has " + std::to_string(f.size()) + " fields, expected " + std::to_string(K),
                             line);
        const auto n = people.at(f[0], line);
        if (seen[n])
            throw ConflictError("duplicate covariate row for '" + std::string(f[0]) + "' (line " +
                                std::to_string(line) + ")");
        seen[n] = 1;
        ++rows;
        for (std::size_t k = 1; k < K; ++k)
            z(Eigen::Index(n), Eigen::Index(k)) = csv::require_double(f[k], "covariate", line);
    }
    if (rows != people.size())
        throw DomainError("covariate file has " + std::to_string(rows) + " rows for " +
                          std::to_string(people.size()) + " people");
    return CovariateMatrix(std::move(z), std::move(names));
}

inline CovariateMatrix load_covariates(const std::string &path, const PersonIndex &people) {
    auto in = detail::open_or_throw(path);
    return read_covariates(in, people);
}

// ---------------------------------------------------------------------------
// Infectious sources

struct InfectiousSources {
    std::vector<std::size_t> people; // S_{n,t}
    std::size_t count = 0;           // C_{n,t}
};

// Infected neighbours of n in G_t, judged by their states on day t-1: the sources
// that feed the transition x[n][t-1] -> x[n][t].
inline InfectiousSources infectious_sources(const HiddenStateMatrix &x, const DynamicNetwork &g, std::size_t n,
                                            std::size_t t) {
    if (n >= g.num_nodes() || t < 1 || t > g.num_days() || x.num_nodes() != g.num_nodes() ||
        x.num_days() != g.num_days())
        throw DomainError("infectious_sources: index out of range");
    InfectiousSources out;
    for (auto m : g.neighbors(t, n))
        if (x(m, t - 1) == 1)
            out.people.push_back(m);
    out.count = out.people.size();
    return out;
}

// C_{n,t} without materialising the set.
inline std::size_t infected_neighbor_count(const HiddenStateMatrix &x, const DynamicNetwork &g, std::size_t n,
                                           std::size_t t) {
    std::size_t c = 0;
    for (auto m : g.neighbors(t, n))
        c += x(m, t - 1);
    return c;
}

// ---------------------------------------------------------------------------
// PCA preprocessing

struct PcaOptions {
    bool standardize = true; // z-score features before the decomposition
};

struct PcaResult {
    CovariateMatrix reduced;              // intercept + component scores
    std::vector<double> explained_ratio;  // per retained component
    std::vector<double> all_ratios;       // every component, non-increasing
};

inline PcaResult pca_reduce(const CovariateMatrix &z, int num_components, PcaOptions opts = {}) {
    if (num_components <= 0)
        throw DomainError("pca_reduce: num_components must be positive");
    const auto P = Eigen::Index(z.dim()) - 1;
    if (num_components > P)
        throw DomainError("pca_reduce: num_components exceeds the feature count");
    const auto N = Eigen::Index(z.num_people());
    Eigen::MatrixXd f = z.matrix().rightCols(P);
    const Eigen::RowVectorXd mean = f.colwise().mean();
    f.rowwise() -= mean;
    if (opts.standardize) {
        for (Eigen::Index k = 0; k < P; ++k) {
            const double sd = std::sqrt(f.col(k).squaredNorm() / double(std::max<Eigen::Index>(N - 1, 1)));
            if (sd > 0.0)
                f.col(k) /= sd;
        }
    }
    const Eigen::MatrixXd cov = (f.transpose() * f) / double(std::max<Eigen::Index>(N - 1, 1));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    // Eigen returns ascending eigenvalues.
    Eigen::VectorXd evals = es.eigenvalues().reverse().cwiseMax(0.0);
    Eigen::MatrixXd evecs = es.eigenvectors().rowwise().reverse();
    // Fix the sign so the largest-magnitude loading of each component is positive.
    for (Eigen::Index c = 0; c < P; ++c) {
        Eigen::Index arg = 0;
        evecs.col(c).cwiseAbs().maxCoeff(&arg);
        if (evecs(arg, c) < 0.0)
            evecs.col(c) = -evecs.col(c);
    }
    const double total = evals.sum();
    PcaResult out;
    for (Eigen::Index c = 0; c < P; ++c)
        out.all_ratios.push_back(total > 0.0 ? evals(c) / total : 0.0);
    out.explained_ratio.assign(out.all_ratios.begin(), out.all_ratios.begin() + num_components);
    Eigen::MatrixXd reduced(N, num_components + 1);
    reduced.col(0).setOnes();
    reduced.rightCols(num_components) = f * evecs.leftCols(num_components);
    std::vector<std::string> names{"intercept"};
    for (int c = 1; c <= num_components; ++c)
        names.push_back("pc" + std::to_string(c));
    out.reduced = CovariateMatrix(std::move(reduced), std::move(names));
    return out;
}

} // namespace gchmm
