#pragma once

// Seed sweeps comparing two methods on identical seed lists. Runs are
// independent and may execute on worker threads; aggregation happens after
// every run has finished.

#include "qoscomp/config_io.hpp"
#include "qoscomp/simulator.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace qoscomp {

class BatchError : public std::runtime_error
{
public:
    BatchError(std::uint64_t seed, Method method, const std::string &what)
        : std::runtime_error(fmt::format("run seed={} method={} failed: {}", seed, method_name(method), what)),
          seed_(seed), method_(method)
    {
    }

    std::uint64_t seed() const { return seed_; }
    Method method() const { return method_; }

private:
    std::uint64_t seed_;
    Method method_;
};

struct RunSummary
{
    std::uint64_t seed = 0;
    Method method = Method::Proposed;
    MetricsReport report;
    double path_failures = 0.0;
    double throughput = 0.0; // mean delivered bit/s over the run
    std::optional<double> efficiency;
};

struct Stat
{
    double mean = 0.0;
    double stddev = 0.0; // sample, 0 for fewer than two values
    std::size_t count = 0;
};

inline Stat describe(const std::vector<double> &xs)
{
    Stat s;
    s.count = xs.size();
    if (xs.empty())
    {
        return s;
    }
    double sum = 0.0;
    for (double x : xs)
    {
        sum += x;
    }
    s.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1)
    {
        double sq = 0.0;
        for (double x : xs)
        {
            sq += (x - s.mean) * (x - s.mean);
        }
        s.stddev = std::sqrt(sq / static_cast<double>(xs.size() - 1));
    }
    return s;
}

enum class BatchMetric
{
    PathFailures,
    Throughput,
    Efficiency,
};

inline constexpr BatchMetric kBatchMetrics[] = {BatchMetric::PathFailures, BatchMetric::Throughput,
                                                BatchMetric::Efficiency};

inline std::string_view batch_metric_name(BatchMetric m)
{
    switch (m)
    {
    case BatchMetric::PathFailures: return "path_failures";
    case BatchMetric::Throughput: return "throughput_bps";
    case BatchMetric::Efficiency: return "efficiency";
    }
    return "?";
}

/// Fewer path failures is better; more throughput and efficiency is better.
inline bool lower_is_better(BatchMetric m)
{
    return m == BatchMetric::PathFailures;
}

inline std::optional<double> batch_value(const RunSummary &r, BatchMetric m)
{
    switch (m)
    {
    case BatchMetric::PathFailures: return r.path_failures;
    case BatchMetric::Throughput: return r.throughput;
    case BatchMetric::Efficiency: return r.efficiency;
    }
    return std::nullopt;
}

struct PairedRow
{
    std::uint64_t seed = 0;
    const RunSummary *a = nullptr;
    const RunSummary *b = nullptr;
};

struct MetricComparison
{
    BatchMetric metric = BatchMetric::PathFailures;
    Stat a;
    Stat b;
    Stat diff;                 // a - b over seeds where both values exist
    double win_fraction = 0.0; // share of those seeds where a strictly beats b
    std::size_t pairs = 0;
};

struct ComparisonSummary
{
    Method a = Method::Proposed;
    Method b = Method::Baseline;
    std::vector<std::uint64_t> seeds;
    std::vector<RunSummary> runs_a; // same order as seeds
    std::vector<RunSummary> runs_b;
    std::vector<MetricComparison> metrics;

    const MetricComparison &metric(BatchMetric m) const
    {
        for (const auto &c : metrics)
        {
            if (c.metric == m)
            {
                return c;
            }
        }
        throw std::out_of_range("metric not in summary");
    }
};

struct BatchOptions
{
    Method a = Method::Proposed;
    Method b = Method::Baseline;
    unsigned workers = 0;                   // 0: hardware concurrency
    std::optional<std::filesystem::path> out; // write artifacts here when set
    bool keep_traces = false;                 // also write runs/*/trace.log
};

inline RunSummary summarize_run(std::uint64_t seed, Method method, const ScenarioConfig &config,
                                MetricsReport report)
{
    RunSummary s;
    s.seed = seed;
    s.method = method;
    s.path_failures = static_cast<double>(report.path_failures);
    s.throughput = report.mean_throughput(config.duration);
    s.efficiency = report.efficiency;
    s.report = std::move(report);
    return s;
}

inline ComparisonSummary compare_runs(Method a, Method b, std::vector<std::uint64_t> seeds,
                                      std::vector<RunSummary> runs_a, std::vector<RunSummary> runs_b)
{
    ComparisonSummary sum;
    sum.a = a;
    sum.b = b;
    sum.seeds = std::move(seeds);
    sum.runs_a = std::move(runs_a);
    sum.runs_b = std::move(runs_b);
    for (auto m : kBatchMetrics)
    {
        MetricComparison c;
        c.metric = m;
        std::vector<double> va, vb, diffs;
        std::size_t wins = 0;
        for (std::size_t i = 0; i < sum.seeds.size(); ++i)
        {
            const auto x = batch_value(sum.runs_a[i], m);
            const auto y = batch_value(sum.runs_b[i], m);
            if (x)
            {
                va.push_back(*x);
            }
            if (y)
            {
                vb.push_back(*y);
            }
            if (x && y)
            {
                diffs.push_back(*x - *y);
                wins += lower_is_better(m) ? (*x < *y) : (*x > *y);
            }
        }
        c.a = describe(va);
        c.b = describe(vb);
        c.diff = describe(diffs);
        c.pairs = diffs.size();
        c.win_fraction = diffs.empty() ? 0.0 : static_cast<double>(wins) / static_cast<double>(diffs.size());
        sum.metrics.push_back(c);
    }
    return sum;
}

inline std::string summary_csv(const ComparisonSummary &s)
{
    std::string out = fmt::format("metric,{0}_mean,{0}_stddev,{1}_mean,{1}_stddev,mean_diff,diff_stddev,pairs,"
                                  "win_fraction\n",
                                  method_name(s.a), method_name(s.b));
    if (s.a == s.b)
    {
        out = "metric,a_mean,a_stddev,b_mean,b_stddev,mean_diff,diff_stddev,pairs,win_fraction\n";
    }
    for (const auto &c : s.metrics)
    {
        out += fmt::format("{},{},{},{},{},{},{},{},{}\n", batch_metric_name(c.metric), c.a.mean, c.a.stddev,
                           c.b.mean, c.b.stddev, c.diff.mean, c.diff.stddev, c.pairs, c.win_fraction);
    }
    return out;
}

inline std::string paired_csv(const ComparisonSummary &s)
{
    auto opt = [](const std::optional<double> &v) { return v ? fmt::format("{}", *v) : std::string(); };
    std::string out = "seed,a_method,b_method,a_path_failures,b_path_failures,a_throughput_bps,b_throughput_bps,"
                      "a_efficiency,b_efficiency\n";
    for (std::size_t i = 0; i < s.seeds.size(); ++i)
    {
        const auto &a = s.runs_a[i];
        const auto &b = s.runs_b[i];
        out += fmt::format("{},{},{},{},{},{},{},{},{}\n", s.seeds[i], method_name(a.method), method_name(b.method),
                           a.path_failures, b.path_failures, a.throughput, b.throughput, opt(a.efficiency),
                           opt(b.efficiency));
    }
    return out;
}

/// Aligned plain-text table for terminals.
inline std::string summary_table(const ComparisonSummary &s)
{
    std::string out = fmt::format("{:<16}{:>24}{:>24}{:>16}{:>8}\n", "metric",
                                  fmt::format("{} mean±sd", method_name(s.a)),
                                  fmt::format("{} mean±sd", method_name(s.b)), "mean diff", "wins");
    for (const auto &c : s.metrics)
    {
        out += fmt::format("{:<16}{:>24}{:>24}{:>16.4g}{:>8}\n", batch_metric_name(c.metric),
                           fmt::format("{:.4g}±{:.3g}", c.a.mean, c.a.stddev),
                           fmt::format("{:.4g}±{:.3g}", c.b.mean, c.b.stddev), c.diff.mean,
                           fmt::format("{}/{}", static_cast<std::size_t>(std::lround(c.win_fraction * c.pairs)),
                                       c.pairs));
    }
    return out;
}

namespace detail {

inline void write_file(const std::filesystem::path &p, std::string_view text)
{
    std::ofstream f(p, std::ios::binary);
    if (!f)
    {
        throw std::runtime_error("cannot write " + p.string());
    }
    f << text;
}

} // namespace detail

inline ComparisonSummary run_batch(const ScenarioConfig &config, const std::vector<std::uint64_t> &seeds,
                                   const BatchOptions &opts = {})
{
    if (seeds.empty())
    {
        throw std::invalid_argument("run_batch: no seeds");
    }
    validate(config);

    struct Job
    {
        std::uint64_t seed;
        Method method;
        std::size_t slot;
    };
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < seeds.size(); ++i)
    {
        jobs.push_back({seeds[i], opts.a, i});
        jobs.push_back({seeds[i], opts.b, seeds.size() + i});
    }
    std::vector<std::optional<RunSummary>> results(jobs.size());

    std::filesystem::path runs_dir;
    if (opts.out)
    {
        runs_dir = *opts.out / "runs";
        std::filesystem::create_directories(runs_dir);
    }

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::optional<BatchError> first_error;
    auto worker = [&] {
        for (std::size_t k = next++; k < jobs.size(); k = next++)
        {
            const auto &job = jobs[k];
            try
            {
                auto c = config;
                c.seed = job.seed;
                c.method = job.method;
                auto result = run(c);
                if (opts.out)
                {
                    const auto dir = runs_dir / fmt::format("{}_{}_seed{}", job.slot < seeds.size() ? "a" : "b",
                                                            method_name(job.method), job.seed);
                    std::filesystem::create_directories(dir);
                    detail::write_file(dir / "metrics.csv", metrics_csv(result.metrics));
                    if (opts.keep_traces)
                    {
                        detail::write_file(dir / "trace.log", result.trace);
                    }
                }
                results[job.slot] = summarize_run(job.seed, job.method, c, std::move(result.metrics));
            }
            catch (const std::exception &e)
            {
                std::lock_guard lock(error_mutex);
                if (!first_error)
                {
                    first_error.emplace(job.seed, job.method, e.what());
                }
                next = jobs.size();
            }
        }
    };

    unsigned workers = opts.workers ? opts.workers : std::max(1U, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, jobs.size()));
    if (workers <= 1)
    {
        worker();
    }
    else
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w)
        {
            pool.emplace_back(worker);
        }
    }
    if (first_error)
    {
        throw *first_error;
    }

    std::vector<RunSummary> a, b;
    for (std::size_t i = 0; i < seeds.size(); ++i)
    {
        a.push_back(std::move(*results[i]));
        b.push_back(std::move(*results[seeds.size() + i]));
    }
    auto summary = compare_runs(opts.a, opts.b, seeds, std::move(a), std::move(b));
    if (opts.out)
    {
        detail::write_file(*opts.out / "config.resolved", config_to_string(config));
        detail::write_file(*opts.out / "summary.csv", summary_csv(summary));
        detail::write_file(*opts.out / "paired.csv", paired_csv(summary));
    }
    return summary;
}

} // namespace qoscomp
