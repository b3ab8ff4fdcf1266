#pragma once

// Command-line front end: run, compare, replay, validate.
// Exit codes: 0 ok, 1 usage, 2 invalid config, 3 run or replay failure.

#include "qoscomp/batch.hpp"
#include "qoscomp/config_io.hpp"
#include "qoscomp/metrics.hpp"
#include "qoscomp/simulator.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace qoscomp {

enum ExitCode : int
{
    kExitOk = 0,
    kExitUsage = 1,
    kExitConfig = 2,
    kExitRun = 3,
};

inline constexpr const char *kOutEnv = "QOSCOMP_OUT";

struct Overrides
{
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint32_t> nodes;
    std::optional<double> duration;
    std::optional<double> range;
    std::optional<std::string> method;
    std::optional<std::uint32_t> ttl;
    std::optional<std::uint32_t> plan_size;
    std::string out;

    void attach(CLI::App &app)
    {
        app.add_option("--config", config, "scenario config (JSON)");
        app.add_option("--seed", seed, "random seed");
        app.add_option("--nodes", nodes, "node count");
        app.add_option("--duration", duration, "simulated seconds");
        app.add_option("--range", range, "radio range in meters");
        app.add_option("--method", method, "proposed or baseline");
        app.add_option("--ttl", ttl, "discovery hop budget");
        app.add_option("--plan-size", plan_size, "abstract services per request");
        app.add_option("--out", out, "output directory (default $QOSCOMP_OUT or ./out)");
    }

    ScenarioConfig resolve() const
    {
        ScenarioConfig c = config.empty() ? ScenarioConfig{} : load_config(config);
        if (seed)
        {
            c.seed = *seed;
        }
        if (nodes)
        {
            c.nodes = *nodes;
        }
        if (duration)
        {
            c.duration = *duration;
        }
        if (range)
        {
            c.radio.range = *range;
        }
        if (method)
        {
            auto m = parse_method(*method);
            if (!m)
            {
                throw ConfigError({"method: expected 'proposed' or 'baseline', got '" + *method + "'"});
            }
            c.method = *m;
        }
        if (ttl)
        {
            c.protocol.ttl = *ttl;
        }
        if (plan_size)
        {
            c.plan_size = *plan_size;
        }
        validate(c);
        return c;
    }

    std::filesystem::path out_dir() const
    {
        if (!out.empty())
        {
            return out;
        }
        if (const char *env = std::getenv(kOutEnv); env && *env)
        {
            return env;
        }
        return "out";
    }
};

namespace detail {

inline std::string read_file(const std::filesystem::path &p)
{
    std::ifstream f(p, std::ios::binary);
    if (!f)
    {
        throw std::runtime_error("cannot read " + p.string());
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline std::vector<std::uint64_t> seed_list(std::uint64_t first, std::uint32_t count)
{
    std::vector<std::uint64_t> s;
    for (std::uint32_t i = 0; i < count; ++i)
    {
        s.push_back(first + i);
    }
    return s;
}

} // namespace detail

inline int run_cli(std::vector<std::string> args, std::ostream &out, std::ostream &err)
{
    CLI::App app{"QoS-aware service composition in simulated MANETs", "qoscomp"};
    app.require_subcommand(1);

    Overrides run_opts;
    auto *run_cmd = app.add_subcommand("run", "simulate one scenario");
    run_opts.attach(*run_cmd);

    Overrides cmp_opts;
    std::uint32_t seed_count = 20;
    std::vector<std::uint64_t> explicit_seeds;
    bool traces = false;
    unsigned jobs = 0;
    auto *cmp_cmd = app.add_subcommand("compare", "proposed vs baseline over a seed list");
    cmp_opts.attach(*cmp_cmd);
    cmp_cmd->add_option("--seeds", seed_count, "number of consecutive seeds, starting at --seed or 1")
        ->check(CLI::PositiveNumber);
    cmp_cmd->add_option("--seed-list", explicit_seeds, "explicit seeds")->delimiter(',');
    cmp_cmd->add_flag("--traces", traces, "keep per-run trace.log files");
    cmp_cmd->add_option("--jobs", jobs, "worker threads (0: all cores)");

    std::string trace_path;
    std::string replay_config;
    std::string replay_out;
    auto *replay_cmd = app.add_subcommand("replay", "recompute metrics from a trace");
    replay_cmd->add_option("trace", trace_path, "trace.log")->required();
    replay_cmd->add_option("--config", replay_config,
                           "config used for the run (default: config.resolved beside the trace)");
    replay_cmd->add_option("--out", replay_out, "write metrics.csv here instead of stdout");

    std::string validate_path;
    auto *validate_cmd = app.add_subcommand("validate", "check a config file");
    validate_cmd->add_option("config", validate_path, "config file")->required();

    try
    {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    }
    catch (const CLI::CallForHelp &)
    {
        out << app.help();
        return kExitOk;
    }
    catch (const CLI::CallForAllHelp &)
    {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    }
    catch (const CLI::ParseError &e)
    {
        err << "error: " << e.what() << "\nrun with --help for usage\n";
        return kExitUsage;
    }

    try
    {
        if (validate_cmd->parsed())
        {
            const auto c = load_config(validate_path);
            out << "ok: " << validate_path << " (config " << config_hash(c) << ")\n";
            return kExitOk;
        }

        if (run_cmd->parsed())
        {
            const auto c = run_opts.resolve();
            const auto dir = run_opts.out_dir();
            RunResult result;
            try
            {
                result = run(c);
            }
            catch (const std::exception &e)
            {
                err << "error: run failed: " << e.what() << "\n";
                return kExitRun;
            }
            std::filesystem::create_directories(dir);
            detail::write_file(dir / "config.resolved", config_to_string(c));
            detail::write_file(dir / "trace.log", result.trace);
            detail::write_file(dir / "metrics.csv", metrics_csv(result.metrics));
            const auto &m = result.metrics;
            out << fmt::format("seed={} method={} attempts={} successes={} path_failures={} "
                               "throughput_bps={} efficiency={}\n",
                               c.seed, method_name(c.method), m.attempts, m.successes, m.path_failures,
                               m.mean_throughput(c.duration),
                               m.efficiency ? fmt::format("{}", *m.efficiency) : "undefined");
            out << "wrote " << dir.string() << "/{config.resolved,trace.log,metrics.csv}\n";
            return kExitOk;
        }

        if (cmp_cmd->parsed())
        {
            const auto c = cmp_opts.resolve();
            const auto seeds =
                explicit_seeds.empty() ? detail::seed_list(cmp_opts.seed.value_or(1), seed_count) : explicit_seeds;
            BatchOptions opts;
            opts.out = cmp_opts.out_dir();
            opts.keep_traces = traces;
            opts.workers = jobs;
            ComparisonSummary s;
            try
            {
                s = run_batch(c, seeds, opts);
            }
            catch (const BatchError &e)
            {
                err << "error: " << e.what() << "\n";
                return kExitRun;
            }
            out << summary_table(s);
            out << "wrote " << opts.out->string() << "/{summary.csv,paired.csv,runs/}\n";
            return kExitOk;
        }

        if (replay_cmd->parsed())
        {
            std::filesystem::path cfg_path = replay_config;
            if (cfg_path.empty())
            {
                cfg_path = std::filesystem::path(trace_path).parent_path() / "config.resolved";
            }
            const auto c = load_config(cfg_path.string());
            MetricsReport m;
            try
            {
                m = compute_metrics(detail::read_file(trace_path), c);
            }
            catch (const std::exception &e)
            {
                err << "error: replay failed: " << e.what() << "\n";
                return kExitRun;
            }
            if (replay_out.empty())
            {
                out << metrics_csv(m);
            }
            else
            {
                std::filesystem::create_directories(replay_out);
                detail::write_file(std::filesystem::path(replay_out) / "metrics.csv", metrics_csv(m));
            }
            return kExitOk;
        }
    }
    catch (const ConfigError &e)
    {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    catch (const std::exception &e)
    {
        err << "error: " << e.what() << "\n";
        return kExitRun;
    }
    return kExitUsage;
}

inline int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err)
{
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i)
    {
        args.emplace_back(argv[i]);
    }
    return run_cli(std::move(args), out, err);
}

} // namespace qoscomp
