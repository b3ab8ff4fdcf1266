#pragma once

// Line-oriented run trace.
//
//   <time> <kind> key=value key=value ...
//
// Times and reals are written in shortest round-trip form, so a trace
// parses back to exactly the values the simulator used. The last line of
// a complete trace is an `end` record.

#include <fmt/format.h>

#include <charconv>
#include <cstdlib>
#include <cstdint>
#include <iterator>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qoscomp {

class TraceWriter
{
public:
    template <typename... Fields>
    void record(double time, std::string_view kind, const Fields &...fields)
    {
        fmt::format_to(std::back_inserter(text_), "{} {}", time, kind);
        (append(fields), ...);
        text_.push_back('\n');
        ++lines_;
    }

    const std::string &text() const { return text_; }
    std::string take() { return std::move(text_); }
    std::size_t lines() const { return lines_; }

private:
    template <typename V>
    void append(const std::pair<std::string_view, V> &kv)
    {
        fmt::format_to(std::back_inserter(text_), " {}={}", kv.first, kv.second);
    }

    std::string text_;
    std::size_t lines_ = 0;
};

template <typename V>
std::pair<std::string_view, V> kv(std::string_view key, V value)
{
    return {key, std::move(value)};
}

template <typename Range>
std::string join_ids(const Range &ids, char sep = ',')
{
    std::string s;
    for (const auto &id : ids)
    {
        if (!s.empty())
        {
            s.push_back(sep);
        }
        s += std::to_string(static_cast<std::uint64_t>(id));
    }
    return s.empty() ? "-" : s;
}

class TraceFormatError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct TraceRecord
{
    std::size_t line = 0; // 1-based
    double time = 0.0;
    std::string_view kind;
    std::vector<std::pair<std::string_view, std::string_view>> fields;

    std::optional<std::string_view> find(std::string_view key) const
    {
        for (const auto &[k, v] : fields)
        {
            if (k == key)
            {
                return v;
            }
        }
        return std::nullopt;
    }

    std::string_view get(std::string_view key) const
    {
        auto v = find(key);
        if (!v)
        {
            throw TraceFormatError("trace line " + std::to_string(line) + ": missing field '" +
                                   std::string(key) + "'");
        }
        return *v;
    }

    double number(std::string_view key) const { return parse_double(get(key), line); }

    std::uint64_t integer(std::string_view key) const
    {
        auto s = get(key);
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size())
        {
            throw TraceFormatError("trace line " + std::to_string(line) + ": bad integer in '" +
                                   std::string(key) + "'");
        }
        return v;
    }

    static double parse_double(std::string_view s, std::size_t line)
    {
        // from_chars<double> is missing on older toolchains; strtod on a copy.
        std::string copy(s);
        char *end = nullptr;
        const double v = std::strtod(copy.c_str(), &end);
        if (copy.empty() || end != copy.c_str() + copy.size())
        {
            throw TraceFormatError("trace line " + std::to_string(line) + ": bad number '" + copy + "'");
        }
        return v;
    }
};

inline std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start <= s.size())
    {
        auto pos = s.find(sep, start);
        if (pos == std::string_view::npos)
        {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline std::optional<TraceRecord> parse_record(std::string_view line, std::size_t number)
{
    auto parts = split(line, ' ');
    if (parts.size() < 2 || parts[0].empty() || parts[1].empty())
    {
        return std::nullopt;
    }
    TraceRecord rec;
    rec.line = number;
    try
    {
        rec.time = TraceRecord::parse_double(parts[0], number);
    }
    catch (const TraceFormatError &)
    {
        return std::nullopt;
    }
    rec.kind = parts[1];
    for (std::size_t i = 2; i < parts.size(); ++i)
    {
        auto eq = parts[i].find('=');
        if (eq == std::string_view::npos || eq == 0)
        {
            return std::nullopt;
        }
        rec.fields.emplace_back(parts[i].substr(0, eq), parts[i].substr(eq + 1));
    }
    return rec;
}

/// Parses a whole trace. Records view into `text`, which must outlive them.
/// Throws naming the last valid record when a line is malformed or the
/// closing `end` record is missing.
inline std::vector<TraceRecord> parse_trace(std::string_view text)
{
    std::vector<TraceRecord> records;
    std::size_t number = 0;
    std::size_t start = 0;
    auto last_valid = [&records]() -> std::string {
        if (records.empty())
        {
            return "none";
        }
        const auto &r = records.back();
        return "line " + std::to_string(r.line) + " (" + std::string(r.kind) + " at t=" +
               fmt::format("{}", r.time) + ")";
    };
    while (start < text.size())
    {
        auto nl = text.find('\n', start);
        const bool terminated = nl != std::string_view::npos;
        auto line = text.substr(start, terminated ? nl - start : std::string_view::npos);
        start = terminated ? nl + 1 : text.size();
        ++number;
        auto rec = terminated ? parse_record(line, number) : std::nullopt;
        if (!rec)
        {
            throw TraceFormatError("truncated or malformed trace at line " + std::to_string(number) +
                                   "; last valid record: " + last_valid());
        }
        if (!records.empty() && records.back().kind == "end")
        {
            throw TraceFormatError("record after end at line " + std::to_string(number));
        }
        records.push_back(*rec);
    }
    if (records.empty() || records.back().kind != "end")
    {
        throw TraceFormatError("truncated trace: no end record; last valid record: " + last_valid());
    }
    return records;
}

} // namespace qoscomp
