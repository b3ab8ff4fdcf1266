#pragma once

// Scenario configuration. Default scale: 100 nodes, 150 s, 45 m range at
// 1 Mbit/s, 180 concrete services, 5-service plans. Arena, speeds, energy
// budget, service attributes and misbehavior are tunable guesses.

#include "qoscomp/hammerstein.hpp"
#include "qoscomp/qos_metrics.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qoscomp {

enum class Method
{
    Proposed,
    Baseline,
};

inline std::string_view method_name(Method m)
{
    return m == Method::Proposed ? "proposed" : "baseline";
}

inline std::optional<Method> parse_method(std::string_view s)
{
    if (s == "proposed")
    {
        return Method::Proposed;
    }
    if (s == "baseline")
    {
        return Method::Baseline;
    }
    return std::nullopt;
}

struct RadioParams
{
    double range = 45.0;            // m
    double per_hop_latency = 0.002; // s
    double bit_rate = 1e6;          // bit/s
    double loss_probability = 0.0;
};

struct MobilityParams
{
    double speed_min = 1.0; // m/s
    double speed_max = 10.0;
    double pause = 2.0; // s
    double tick = 0.1;  // s
};

struct ServiceAttributeParams
{
    double task_time_min = 0.02; // s
    double task_time_max = 0.3;
    double failure_prob_min = 0.0; // per execution
    double failure_prob_max = 0.2;
    double history_window = 100.0;          // s of pre-run history
    std::uint32_t history_executions = 50;  // executions in that history
};

struct ProtocolParams
{
    std::uint32_t ttl = 5;
    double beacon_period = 1.0;
    double staleness_periods = 3.0;
    double discovery_timeout = 0.5;
    double rebroadcast_jitter = 0.0; // s, uniform delay before a rebroadcast
    std::uint32_t max_recompositions = 2;
    double stage_timeout_factor = 2.0;
    double beacon_bits = 512;
    double request_bits = 256;
    double reply_bits = 512;
    double plan_bits = 4096;
    double result_bits = 8192;
    double t_stack_per_hop = 0.001; // s
    double t_cd = 0.002;
    double t_ed = 0.003;
};

enum class NoiseMode
{
    Deterministic,
    Stochastic,
};

struct TrustConfig
{
    std::vector<MetricInput> inputs = core_inputs();
    // Empty means the static default for inputs.size() inputs.
    std::optional<HammersteinModel> model;
    NoiseMode noise = NoiseMode::Deterministic;
    double empty_reliability = kEmptyReliability;

    HammersteinModel resolved_model() const
    {
        return model ? *model : HammersteinModel::static_default(inputs.size());
    }
};

struct RequestSchedule
{
    std::uint32_t initiators = 10; // capped at the node count
    double first_min = 5.0; // s
    double first_max = 15.0;
    double interval = 10.0;
};

struct ExplicitService
{
    std::uint32_t type = 0;
    double task_time = 0.1;
    double failure_prob = 0.0;
};

/// Hand-placed node, used for small deterministic topologies.
struct ExplicitNode
{
    double x = 0.0;
    double y = 0.0;
    std::optional<double> waypoint_x; // moves once toward the waypoint, then stops
    std::optional<double> waypoint_y;
    double speed = 0.0;
    double energy = 1.0;
    bool misbehaving = false;
    std::vector<ExplicitService> services;
};

struct ExplicitRequest
{
    double time = 0.0;
    std::uint32_t initiator = 0;
    std::vector<std::uint32_t> plan; // abstract service types in order
};

struct ScenarioConfig
{
    std::uint32_t nodes = 100;
    double arena_width = 300.0;
    double arena_height = 300.0;
    double duration = 150.0;
    RadioParams radio;
    MobilityParams mobility;
    EnergyParams energy;
    double initial_energy_min = 0.05; // J
    double initial_energy_max = 0.5;
    std::uint32_t concrete_services = 180;
    std::uint32_t plan_size = 5;
    ServiceAttributeParams service;
    RequestSchedule requests;
    double misbehaving_fraction = 0.2;
    double misbehaving_drop_probability = 0.8;
    Method method = Method::Proposed;
    TrustConfig trust;
    ProtocolParams protocol;
    double metrics_bin = 10.0;
    std::uint64_t seed = 1;
    bool beacons = true;

    std::vector<ExplicitNode> explicit_nodes;
    std::vector<ExplicitRequest> explicit_requests;
};

class ConfigError : public std::runtime_error
{
public:
    explicit ConfigError(std::vector<std::string> problems)
        : std::runtime_error(join(problems)), problems_(std::move(problems))
    {
    }

    const std::vector<std::string> &problems() const { return problems_; }

private:
    static std::string join(const std::vector<std::string> &p)
    {
        std::string s = "invalid config:";
        for (const auto &x : p)
        {
            s += "\n  " + x;
        }
        return s;
    }

    std::vector<std::string> problems_;
};

/// Every offending field, empty when the config is usable.
inline std::vector<std::string> validation_problems(const ScenarioConfig &c)
{
    std::vector<std::string> p;
    auto need = [&p](bool ok, const char *msg) {
        if (!ok)
        {
            p.emplace_back(msg);
        }
    };
    need(c.nodes > 0, "nodes: must be > 0");
    need(c.arena_width > 0 && c.arena_height > 0, "arena: width and height must be > 0");
    need(c.duration >= 0, "duration: must be >= 0");
    need(c.radio.range > 0, "radio.range: must be > 0");
    need(c.radio.bit_rate > 0, "radio.bit_rate: must be > 0");
    need(c.radio.per_hop_latency >= 0, "radio.per_hop_latency: must be >= 0");
    need(c.radio.loss_probability >= 0 && c.radio.loss_probability <= 1,
         "radio.loss_probability: must lie in [0,1]");
    need(c.mobility.speed_min >= 0 && c.mobility.speed_max >= c.mobility.speed_min,
         "mobility.speed: need 0 <= speed_min <= speed_max");
    need(c.mobility.pause >= 0, "mobility.pause: must be >= 0");
    need(c.mobility.tick > 0, "mobility.tick: must be > 0");
    need(c.energy.e_act >= 0 && c.energy.e_amp >= 0, "energy: e_act and e_amp must be >= 0");
    need(c.initial_energy_min > 0 && c.initial_energy_max >= c.initial_energy_min,
         "initial_energy: need 0 < min <= max");
    need(c.concrete_services > 0, "concrete_services: must be > 0");
    need(c.plan_size > 0, "plan_size: must be > 0");
    need(c.service.task_time_min >= 0 && c.service.task_time_max >= c.service.task_time_min,
         "service.task_time: need 0 <= min <= max");
    need(c.service.failure_prob_min >= 0 && c.service.failure_prob_max <= 1 &&
             c.service.failure_prob_max >= c.service.failure_prob_min,
         "service.failure_prob: need 0 <= min <= max <= 1");
    need(c.service.history_window > 0, "service.history_window: must be > 0");
    need(c.requests.initiators > 0, "requests.initiators: must be > 0");
    need(c.requests.first_min >= 0 && c.requests.first_max >= c.requests.first_min,
         "requests.first: need 0 <= first_min <= first_max");
    need(c.requests.interval > 0, "requests.interval: must be > 0");
    need(c.misbehaving_fraction >= 0 && c.misbehaving_fraction <= 1,
         "misbehaving_fraction: must lie in [0,1]");
    need(c.misbehaving_drop_probability >= 0 && c.misbehaving_drop_probability <= 1,
         "misbehaving_drop_probability: must lie in [0,1]");
    need(c.protocol.beacon_period > 0, "protocol.beacon_period: must be > 0");
    need(c.protocol.staleness_periods > 0, "protocol.staleness_periods: must be > 0");
    need(c.protocol.discovery_timeout > 0, "protocol.discovery_timeout: must be > 0");
    need(c.protocol.rebroadcast_jitter >= 0, "protocol.rebroadcast_jitter: must be >= 0");
    need(c.protocol.stage_timeout_factor > 0, "protocol.stage_timeout_factor: must be > 0");
    need(c.protocol.beacon_bits > 0 && c.protocol.request_bits > 0 && c.protocol.reply_bits > 0 &&
             c.protocol.plan_bits > 0 && c.protocol.result_bits > 0,
         "protocol.*_bits: packet sizes must be > 0");
    need(c.protocol.t_stack_per_hop >= 0 && c.protocol.t_cd >= 0 && c.protocol.t_ed >= 0,
         "protocol.t_*: response time components must be >= 0");
    need(c.metrics_bin > 0, "metrics_bin: must be > 0");
    need(!c.trust.inputs.empty(), "trust.inputs: at least one input");
    need(c.trust.empty_reliability >= 0 && c.trust.empty_reliability <= 1,
         "trust.empty_reliability: must lie in [0,1]");
    if (c.trust.model)
    {
        try
        {
            validate(*c.trust.model);
            need(c.trust.model->inputs() == c.trust.inputs.size(),
                 "trust.model: gain count must match trust.inputs");
        }
        catch (const std::invalid_argument &e)
        {
            p.push_back(std::string("trust.model: ") + e.what());
        }
    }
    if (!c.explicit_nodes.empty())
    {
        need(c.nodes == c.explicit_nodes.size(), "nodes: must equal the explicit node count");
        for (const auto &n : c.explicit_nodes)
        {
            need(n.energy > 0, "explicit_nodes.energy: must be > 0");
            need(n.speed >= 0, "explicit_nodes.speed: must be >= 0");
            need(n.waypoint_x.has_value() == n.waypoint_y.has_value(),
                 "explicit_nodes.waypoint: give both x and y");
            for (const auto &s : n.services)
            {
                need(s.type < c.plan_size, "explicit_nodes.services.type: must be < plan_size");
                need(s.task_time >= 0, "explicit_nodes.services.task_time: must be >= 0");
                need(s.failure_prob >= 0 && s.failure_prob <= 1,
                     "explicit_nodes.services.failure_prob: must lie in [0,1]");
            }
        }
    }
    for (const auto &r : c.explicit_requests)
    {
        need(r.initiator < c.nodes, "explicit_requests.initiator: unknown node");
        need(!r.plan.empty(), "explicit_requests.plan: must not be empty");
        need(r.time >= 0, "explicit_requests.time: must be >= 0");
        for (auto t : r.plan)
        {
            need(t < c.plan_size, "explicit_requests.plan: type must be < plan_size");
        }
    }
    return p;
}

inline void validate(const ScenarioConfig &c)
{
    auto problems = validation_problems(c);
    if (!problems.empty())
    {
        throw ConfigError(std::move(problems));
    }
}

} // namespace qoscomp
