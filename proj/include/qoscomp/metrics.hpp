#pragma once

// The three run metrics, computed purely from a trace plus the config:
// path failures per time bin, delivered result throughput per time bin,
// and composition efficiency (successful / attempted composite requests).

#include "qoscomp/scenario.hpp"
#include "qoscomp/trace.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qoscomp {

struct MetricsBin
{
    double start = 0.0;
    double end = 0.0;
    std::uint64_t path_failures = 0;
    double delivered_bits = 0.0;
    double throughput_bps = 0.0;
};

struct MetricsReport
{
    std::vector<MetricsBin> bins;
    std::uint64_t attempts = 0;
    std::uint64_t successes = 0;
    std::uint64_t unrecovered_failures = 0;
    std::uint64_t path_failures = 0;
    double delivered_bits = 0.0;
    std::optional<double> efficiency; // absent when nothing was attempted

    std::uint64_t seed = 0;
    std::string method;
    std::string config_hash;

    double mean_throughput(double duration) const { return duration > 0 ? delivered_bits / duration : 0.0; }
};

inline std::size_t bin_count(double duration, double bin)
{
    if (duration <= 0.0)
    {
        return 0;
    }
    return static_cast<std::size_t>(std::ceil(duration / bin));
}

inline MetricsReport compute_metrics(std::string_view trace, const ScenarioConfig &config)
{
    const auto records = parse_trace(trace);
    MetricsReport rep;
    const std::size_t n = bin_count(config.duration, config.metrics_bin);
    for (std::size_t i = 0; i < n; ++i)
    {
        MetricsBin b;
        b.start = static_cast<double>(i) * config.metrics_bin;
        b.end = std::min(config.duration, b.start + config.metrics_bin);
        rep.bins.push_back(b);
    }
    auto bin_of = [&](double t) -> MetricsBin * {
        if (rep.bins.empty() || t < 0.0)
        {
            return nullptr;
        }
        auto i = static_cast<std::size_t>(t / config.metrics_bin);
        return &rep.bins[std::min(i, rep.bins.size() - 1)];
    };

    for (const auto &r : records)
    {
        if (r.kind == "init")
        {
            rep.seed = r.integer("seed");
            rep.method = std::string(r.get("method"));
            rep.config_hash = std::string(r.get("config"));
        }
        else if (r.kind == "compose_start")
        {
            ++rep.attempts;
        }
        else if (r.kind == "compose_ok")
        {
            ++rep.successes;
        }
        else if (r.kind == "compose_fail")
        {
            ++rep.unrecovered_failures;
        }
        else if (r.kind == "path_fail")
        {
            ++rep.path_failures;
            if (auto *b = bin_of(r.time))
            {
                ++b->path_failures;
            }
        }
        else if (r.kind == "deliver")
        {
            const double bits = r.number("bits");
            rep.delivered_bits += bits;
            if (auto *b = bin_of(r.time))
            {
                b->delivered_bits += bits;
            }
        }
    }
    for (auto &b : rep.bins)
    {
        b.throughput_bps = b.delivered_bits / config.metrics_bin;
    }
    if (rep.attempts > 0)
    {
        rep.efficiency = static_cast<double>(rep.successes) / static_cast<double>(rep.attempts);
    }
    return rep;
}

/// metrics.csv: `#` metadata lines, then one row per bin.
inline std::string metrics_csv(const MetricsReport &r)
{
    std::string s;
    auto out = std::back_inserter(s);
    fmt::format_to(out, "# seed={}\n# method={}\n# config_hash={}\n", r.seed, r.method, r.config_hash);
    fmt::format_to(out, "# attempts={}\n# successes={}\n# unrecovered_failures={}\n", r.attempts, r.successes,
                   r.unrecovered_failures);
    fmt::format_to(out, "# path_failures={}\n# delivered_bits={}\n", r.path_failures, r.delivered_bits);
    if (r.efficiency)
    {
        fmt::format_to(out, "# efficiency={}\n", *r.efficiency);
    }
    else
    {
        fmt::format_to(out, "# efficiency=undefined\n");
    }
    fmt::format_to(out, "bin_start,bin_end,path_failures,throughput_bps\n");
    for (const auto &b : r.bins)
    {
        fmt::format_to(out, "{},{},{},{}\n", b.start, b.end, b.path_failures, b.throughput_bps);
    }
    return s;
}

} // namespace qoscomp
