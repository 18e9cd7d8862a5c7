#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gchmm/error.hpp"

namespace gchmm::csv {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

// Plain comma splitting. Quoting is not supported; none of the formats need it.
inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

inline std::optional<long long> to_int(std::string_view s) {
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
        return std::nullopt;
    return v;
}

inline std::optional<double> to_double(std::string_view s) {
    if (!s.empty() && s.front() == '+')
        s.remove_prefix(1);
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty() || !std::isfinite(v))
        return std::nullopt;
    return v;
}

inline long long require_int(std::string_view s, std::string_view what, std::size_t line) {
    if (auto v = to_int(s))
        return *v;
    throw ParseError("expected integer " + std::string(what) + ", got '" + std::string(s) + "'", line);
}

inline double require_double(std::string_view s, std::string_view what, std::size_t line) {
    if (auto v = to_double(s))
        return *v;
    throw ParseError("expected number " + std::string(what) + ", got '" + std::string(s) + "'", line);
}

// Line reader that tracks 1-based line numbers and skips blank lines.
class Reader {
  public:
    explicit Reader(std::istream &in) : in_(in) {}

    bool next(std::vector<std::string_view> &fields) {
        while (std::getline(in_, buf_)) {
            ++line_;
            if (trim(buf_).empty())
                continue;
            fields = split(buf_);
            return true;
        }
        return false;
    }

    std::size_t line() const noexcept { return line_; }

  private:
    std::istream &in_;
    std::string buf_;
    std::size_t line_ = 0;
};

inline bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size())
        return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto lower = [](char c) { return (c >= 'A' && c <= 'Z') ? char(c - 'A' + 'a') : c; };
        if (lower(a[i]) != lower(b[i]))
            return false;
    }
    return true;
}

} // namespace gchmm::csv
