#pragma once

// Scenario config file (JSON). Every key is optional; absent keys keep the
// defaults from scenario.hpp. Unknown keys and type mismatches are
// reported together with semantic validation problems.

#include "qoscomp/scenario.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

namespace qoscomp {

using json = nlohmann::json;

namespace detail {

class JsonReader
{
public:
    std::vector<std::string> problems;

    bool object(const json &j, const std::string &path, std::initializer_list<const char *> keys)
    {
        if (!j.is_object())
        {
            problems.push_back(path + ": expected an object");
            return false;
        }
        for (const auto &[k, v] : j.items())
        {
            bool ok = false;
            for (const char *key : keys)
            {
                ok = ok || k == key;
            }
            if (!ok)
            {
                problems.push_back(join(path, k) + ": unknown key");
            }
        }
        return true;
    }

    template <typename T>
    void get(const json &j, const std::string &path, const char *key, T &out)
    {
        auto it = j.find(key);
        if (it == j.end())
        {
            return;
        }
        read(*it, join(path, key), out);
    }

    void read(const json &v, const std::string &path, double &out)
    {
        if (!v.is_number())
        {
            problems.push_back(path + ": expected a number");
            return;
        }
        out = v.get<double>();
    }

    void read(const json &v, const std::string &path, std::uint32_t &out)
    {
        if (!v.is_number_unsigned() || v.get<std::uint64_t>() > UINT32_MAX)
        {
            problems.push_back(path + ": expected a non-negative integer");
            return;
        }
        out = v.get<std::uint32_t>();
    }

    void read(const json &v, const std::string &path, std::uint64_t &out)
    {
        if (!v.is_number_unsigned())
        {
            problems.push_back(path + ": expected a non-negative integer");
            return;
        }
        out = v.get<std::uint64_t>();
    }

    void read(const json &v, const std::string &path, bool &out)
    {
        if (!v.is_boolean())
        {
            problems.push_back(path + ": expected true or false");
            return;
        }
        out = v.get<bool>();
    }

    void read(const json &v, const std::string &path, std::vector<double> &out)
    {
        if (!v.is_array())
        {
            problems.push_back(path + ": expected an array of numbers");
            return;
        }
        out.clear();
        for (std::size_t i = 0; i < v.size(); ++i)
        {
            double x = 0.0;
            read(v[i], path + "[" + std::to_string(i) + "]", x);
            out.push_back(x);
        }
    }

    void read(const json &v, const std::string &path, std::vector<std::uint32_t> &out)
    {
        if (!v.is_array())
        {
            problems.push_back(path + ": expected an array of integers");
            return;
        }
        out.clear();
        for (std::size_t i = 0; i < v.size(); ++i)
        {
            std::uint32_t x = 0;
            read(v[i], path + "[" + std::to_string(i) + "]", x);
            out.push_back(x);
        }
    }

    static std::string join(const std::string &path, const std::string &key)
    {
        return path.empty() ? key : path + "." + key;
    }
};

inline std::string_view gain_kind_name(GainKind k)
{
    switch (k)
    {
    case GainKind::Identity: return "identity";
    case GainKind::Polynomial: return "polynomial";
    case GainKind::Bernstein: return "bernstein";
    }
    return "identity";
}

inline void read_trust(JsonReader &r, const json &j, TrustConfig &t)
{
    if (!r.object(j, "trust", {"inputs", "model", "noise", "empty_reliability"}))
    {
        return;
    }
    if (auto it = j.find("inputs"); it != j.end())
    {
        if (!it->is_array() || it->empty())
        {
            r.problems.push_back("trust.inputs: expected a non-empty array");
        }
        else
        {
            t.inputs.clear();
            for (std::size_t i = 0; i < it->size(); ++i)
            {
                const auto &e = (*it)[i];
                const std::string path = "trust.inputs[" + std::to_string(i) + "]";
                try
                {
                    if (e.is_string())
                    {
                        const auto m = metric_from_name(e.get<std::string>());
                        t.inputs.push_back({m, default_polarity(m)});
                    }
                    else if (e.is_object() && e.contains("metric") && e["metric"].is_string())
                    {
                        r.object(e, path, {"metric", "polarity"});
                        const auto m = metric_from_name(e["metric"].get<std::string>());
                        auto pol = default_polarity(m);
                        if (e.contains("polarity"))
                        {
                            const auto p = e["polarity"].is_string() ? e["polarity"].get<std::string>() : "";
                            if (p == "benefit")
                            {
                                pol = Polarity::Benefit;
                            }
                            else if (p == "cost")
                            {
                                pol = Polarity::Cost;
                            }
                            else
                            {
                                r.problems.push_back(path + ".polarity: expected \"benefit\" or \"cost\"");
                            }
                        }
                        t.inputs.push_back({m, pol});
                    }
                    else
                    {
                        r.problems.push_back(path + ": expected a metric name or {metric, polarity}");
                    }
                }
                catch (const std::invalid_argument &ex)
                {
                    r.problems.push_back(path + ": " + ex.what());
                }
            }
        }
    }
    if (auto it = j.find("noise"); it != j.end())
    {
        const auto s = it->is_string() ? it->get<std::string>() : "";
        if (s == "deterministic")
        {
            t.noise = NoiseMode::Deterministic;
        }
        else if (s == "stochastic")
        {
            t.noise = NoiseMode::Stochastic;
        }
        else
        {
            r.problems.push_back("trust.noise: expected \"deterministic\" or \"stochastic\"");
        }
    }
    r.get(j, "trust", "empty_reliability", t.empty_reliability);
    if (auto it = j.find("model"); it != j.end() && !it->is_null())
    {
        const auto &m = *it;
        if (!r.object(m, "trust.model", {"gains", "output_coeffs", "input_coeffs", "noise_variance"}))
        {
            return;
        }
        HammersteinModel model = HammersteinModel::static_default(std::max<std::size_t>(1, t.inputs.size()));
        if (auto g = m.find("gains"); g != m.end())
        {
            if (!g->is_array())
            {
                r.problems.push_back("trust.model.gains: expected an array");
            }
            else
            {
                model.gains.clear();
                for (std::size_t i = 0; i < g->size(); ++i)
                {
                    const auto &e = (*g)[i];
                    const std::string path = "trust.model.gains[" + std::to_string(i) + "]";
                    if (!r.object(e, path, {"kind", "coefficients"}))
                    {
                        continue;
                    }
                    GainFunction gf;
                    const auto kind = e.contains("kind") && e["kind"].is_string() ? e["kind"].get<std::string>() : "";
                    if (kind == "identity")
                    {
                        gf.kind = GainKind::Identity;
                    }
                    else if (kind == "polynomial")
                    {
                        gf.kind = GainKind::Polynomial;
                    }
                    else if (kind == "bernstein")
                    {
                        gf.kind = GainKind::Bernstein;
                    }
                    else
                    {
                        r.problems.push_back(path + ".kind: expected identity, polynomial or bernstein");
                    }
                    r.get(e, path, "coefficients", gf.coefficients);
                    model.gains.push_back(gf);
                }
            }
        }
        r.get(m, "trust.model", "output_coeffs", model.output_coeffs);
        if (auto b = m.find("input_coeffs"); b != m.end())
        {
            if (!b->is_array())
            {
                r.problems.push_back("trust.model.input_coeffs: expected an array of arrays");
            }
            else
            {
                model.input_coeffs.clear();
                for (std::size_t i = 0; i < b->size(); ++i)
                {
                    std::vector<double> row;
                    r.read((*b)[i], "trust.model.input_coeffs[" + std::to_string(i) + "]", row);
                    model.input_coeffs.push_back(row);
                }
            }
        }
        r.get(m, "trust.model", "noise_variance", model.noise_variance);
        t.model = model;
    }
}

} // namespace detail

/// Parses a config document on top of the defaults. Throws ConfigError
/// listing every offending field.
inline ScenarioConfig config_from_json(const json &j)
{
    ScenarioConfig c;
    detail::JsonReader r;
    if (!r.object(j, "", {"nodes", "arena", "duration", "radio", "mobility", "energy", "services", "plan_size",
                          "requests", "misbehavior", "method", "trust", "protocol", "metrics_bin", "seed",
                          "beacons", "explicit_nodes"}))
    {
        throw ConfigError(r.problems);
    }
    r.get(j, "", "nodes", c.nodes);
    if (auto a = j.find("arena"); a != j.end() && r.object(*a, "arena", {"width", "height"}))
    {
        r.get(*a, "arena", "width", c.arena_width);
        r.get(*a, "arena", "height", c.arena_height);
    }
    r.get(j, "", "duration", c.duration);
    if (auto a = j.find("radio"); a != j.end() &&
        r.object(*a, "radio", {"range", "per_hop_latency", "bit_rate", "loss_probability"}))
    {
        r.get(*a, "radio", "range", c.radio.range);
        r.get(*a, "radio", "per_hop_latency", c.radio.per_hop_latency);
        r.get(*a, "radio", "bit_rate", c.radio.bit_rate);
        r.get(*a, "radio", "loss_probability", c.radio.loss_probability);
    }
    if (auto a = j.find("mobility"); a != j.end() &&
        r.object(*a, "mobility", {"speed_min", "speed_max", "pause", "tick"}))
    {
        r.get(*a, "mobility", "speed_min", c.mobility.speed_min);
        r.get(*a, "mobility", "speed_max", c.mobility.speed_max);
        r.get(*a, "mobility", "pause", c.mobility.pause);
        r.get(*a, "mobility", "tick", c.mobility.tick);
    }
    if (auto a = j.find("energy"); a != j.end() &&
        r.object(*a, "energy", {"e_act", "e_amp", "initial_min", "initial_max"}))
    {
        r.get(*a, "energy", "e_act", c.energy.e_act);
        r.get(*a, "energy", "e_amp", c.energy.e_amp);
        r.get(*a, "energy", "initial_min", c.initial_energy_min);
        r.get(*a, "energy", "initial_max", c.initial_energy_max);
    }
    if (auto a = j.find("services"); a != j.end() &&
        r.object(*a, "services", {"concrete", "task_time_min", "task_time_max", "failure_prob_min",
                                  "failure_prob_max", "history_window", "history_executions"}))
    {
        r.get(*a, "services", "concrete", c.concrete_services);
        r.get(*a, "services", "task_time_min", c.service.task_time_min);
        r.get(*a, "services", "task_time_max", c.service.task_time_max);
        r.get(*a, "services", "failure_prob_min", c.service.failure_prob_min);
        r.get(*a, "services", "failure_prob_max", c.service.failure_prob_max);
        r.get(*a, "services", "history_window", c.service.history_window);
        r.get(*a, "services", "history_executions", c.service.history_executions);
    }
    r.get(j, "", "plan_size", c.plan_size);
    if (auto a = j.find("requests"); a != j.end() &&
        r.object(*a, "requests", {"initiators", "first_min", "first_max", "interval", "explicit"}))
    {
        r.get(*a, "requests", "initiators", c.requests.initiators);
        r.get(*a, "requests", "first_min", c.requests.first_min);
        r.get(*a, "requests", "first_max", c.requests.first_max);
        r.get(*a, "requests", "interval", c.requests.interval);
        if (auto e = a->find("explicit"); e != a->end())
        {
            if (!e->is_array())
            {
                r.problems.push_back("requests.explicit: expected an array");
            }
            else
            {
                for (std::size_t i = 0; i < e->size(); ++i)
                {
                    const std::string path = "requests.explicit[" + std::to_string(i) + "]";
                    ExplicitRequest req;
                    if (r.object((*e)[i], path, {"time", "initiator", "plan"}))
                    {
                        r.get((*e)[i], path, "time", req.time);
                        r.get((*e)[i], path, "initiator", req.initiator);
                        r.get((*e)[i], path, "plan", req.plan);
                    }
                    c.explicit_requests.push_back(req);
                }
            }
        }
    }
    if (auto a = j.find("misbehavior"); a != j.end() &&
        r.object(*a, "misbehavior", {"fraction", "drop_probability"}))
    {
        r.get(*a, "misbehavior", "fraction", c.misbehaving_fraction);
        r.get(*a, "misbehavior", "drop_probability", c.misbehaving_drop_probability);
    }
    if (auto a = j.find("method"); a != j.end())
    {
        auto m = a->is_string() ? parse_method(a->get<std::string>()) : std::nullopt;
        if (!m)
        {
            r.problems.push_back("method: expected \"proposed\" or \"baseline\"");
        }
        else
        {
            c.method = *m;
        }
    }
    if (auto a = j.find("trust"); a != j.end())
    {
        detail::read_trust(r, *a, c.trust);
    }
    if (auto a = j.find("protocol"); a != j.end() &&
        r.object(*a, "protocol",
                 {"ttl", "beacon_period", "staleness_periods", "discovery_timeout", "rebroadcast_jitter",
                  "max_recompositions", "stage_timeout_factor", "beacon_bits", "request_bits", "reply_bits",
                  "plan_bits", "result_bits", "t_stack_per_hop", "t_cd", "t_ed"}))
    {
        auto &p = c.protocol;
        r.get(*a, "protocol", "ttl", p.ttl);
        r.get(*a, "protocol", "beacon_period", p.beacon_period);
        r.get(*a, "protocol", "staleness_periods", p.staleness_periods);
        r.get(*a, "protocol", "discovery_timeout", p.discovery_timeout);
        r.get(*a, "protocol", "rebroadcast_jitter", p.rebroadcast_jitter);
        r.get(*a, "protocol", "max_recompositions", p.max_recompositions);
        r.get(*a, "protocol", "stage_timeout_factor", p.stage_timeout_factor);
        r.get(*a, "protocol", "beacon_bits", p.beacon_bits);
        r.get(*a, "protocol", "request_bits", p.request_bits);
        r.get(*a, "protocol", "reply_bits", p.reply_bits);
        r.get(*a, "protocol", "plan_bits", p.plan_bits);
        r.get(*a, "protocol", "result_bits", p.result_bits);
        r.get(*a, "protocol", "t_stack_per_hop", p.t_stack_per_hop);
        r.get(*a, "protocol", "t_cd", p.t_cd);
        r.get(*a, "protocol", "t_ed", p.t_ed);
    }
    r.get(j, "", "metrics_bin", c.metrics_bin);
    r.get(j, "", "seed", c.seed);
    r.get(j, "", "beacons", c.beacons);
    if (auto a = j.find("explicit_nodes"); a != j.end())
    {
        if (!a->is_array())
        {
            r.problems.push_back("explicit_nodes: expected an array");
        }
        else
        {
            for (std::size_t i = 0; i < a->size(); ++i)
            {
                const auto &e = (*a)[i];
                const std::string path = "explicit_nodes[" + std::to_string(i) + "]";
                ExplicitNode n;
                if (r.object(e, path, {"x", "y", "waypoint", "speed", "energy", "misbehaving", "services"}))
                {
                    r.get(e, path, "x", n.x);
                    r.get(e, path, "y", n.y);
                    if (auto w = e.find("waypoint"); w != e.end())
                    {
                        std::vector<double> wp;
                        r.read(*w, path + ".waypoint", wp);
                        if (wp.size() == 2)
                        {
                            n.waypoint_x = wp[0];
                            n.waypoint_y = wp[1];
                        }
                        else
                        {
                            r.problems.push_back(path + ".waypoint: expected [x, y]");
                        }
                    }
                    r.get(e, path, "speed", n.speed);
                    r.get(e, path, "energy", n.energy);
                    r.get(e, path, "misbehaving", n.misbehaving);
                    if (auto s = e.find("services"); s != e.end())
                    {
                        if (!s->is_array())
                        {
                            r.problems.push_back(path + ".services: expected an array");
                        }
                        else
                        {
                            for (std::size_t k = 0; k < s->size(); ++k)
                            {
                                const std::string sp = path + ".services[" + std::to_string(k) + "]";
                                ExplicitService svc;
                                if (r.object((*s)[k], sp, {"type", "task_time", "failure_prob"}))
                                {
                                    r.get((*s)[k], sp, "type", svc.type);
                                    r.get((*s)[k], sp, "task_time", svc.task_time);
                                    r.get((*s)[k], sp, "failure_prob", svc.failure_prob);
                                }
                                n.services.push_back(svc);
                            }
                        }
                    }
                }
                c.explicit_nodes.push_back(n);
            }
        }
    }
    if (!r.problems.empty())
    {
        throw ConfigError(r.problems);
    }
    validate(c);
    return c;
}

inline json config_to_json(const ScenarioConfig &c)
{
    json j;
    j["nodes"] = c.nodes;
    j["arena"] = {{"width", c.arena_width}, {"height", c.arena_height}};
    j["duration"] = c.duration;
    j["radio"] = {{"range", c.radio.range},
                  {"per_hop_latency", c.radio.per_hop_latency},
                  {"bit_rate", c.radio.bit_rate},
                  {"loss_probability", c.radio.loss_probability}};
    j["mobility"] = {{"speed_min", c.mobility.speed_min},
                     {"speed_max", c.mobility.speed_max},
                     {"pause", c.mobility.pause},
                     {"tick", c.mobility.tick}};
    j["energy"] = {{"e_act", c.energy.e_act},
                   {"e_amp", c.energy.e_amp},
                   {"initial_min", c.initial_energy_min},
                   {"initial_max", c.initial_energy_max}};
    j["services"] = {{"concrete", c.concrete_services},
                     {"task_time_min", c.service.task_time_min},
                     {"task_time_max", c.service.task_time_max},
                     {"failure_prob_min", c.service.failure_prob_min},
                     {"failure_prob_max", c.service.failure_prob_max},
                     {"history_window", c.service.history_window},
                     {"history_executions", c.service.history_executions}};
    j["plan_size"] = c.plan_size;
    json explicit_requests = json::array();
    for (const auto &r : c.explicit_requests)
    {
        explicit_requests.push_back({{"time", r.time}, {"initiator", r.initiator}, {"plan", r.plan}});
    }
    j["requests"] = {{"initiators", c.requests.initiators},
                     {"first_min", c.requests.first_min},
                     {"first_max", c.requests.first_max},
                     {"interval", c.requests.interval},
                     {"explicit", explicit_requests}};
    j["misbehavior"] = {{"fraction", c.misbehaving_fraction},
                        {"drop_probability", c.misbehaving_drop_probability}};
    j["method"] = std::string(method_name(c.method));

    json inputs = json::array();
    for (const auto &in : c.trust.inputs)
    {
        inputs.push_back({{"metric", std::string(metric_name(in.metric))},
                          {"polarity", in.polarity == Polarity::Benefit ? "benefit" : "cost"}});
    }
    const auto model = c.trust.resolved_model();
    json gains = json::array();
    for (const auto &g : model.gains)
    {
        gains.push_back({{"kind", std::string(detail::gain_kind_name(g.kind))}, {"coefficients", g.coefficients}});
    }
    j["trust"] = {{"inputs", inputs},
                  {"noise", c.trust.noise == NoiseMode::Deterministic ? "deterministic" : "stochastic"},
                  {"empty_reliability", c.trust.empty_reliability},
                  {"model",
                   {{"gains", gains},
                    {"output_coeffs", model.output_coeffs},
                    {"input_coeffs", model.input_coeffs},
                    {"noise_variance", model.noise_variance}}}};
    const auto &p = c.protocol;
    j["protocol"] = {{"ttl", p.ttl},
                     {"beacon_period", p.beacon_period},
                     {"staleness_periods", p.staleness_periods},
                     {"discovery_timeout", p.discovery_timeout},
                     {"rebroadcast_jitter", p.rebroadcast_jitter},
                     {"max_recompositions", p.max_recompositions},
                     {"stage_timeout_factor", p.stage_timeout_factor},
                     {"beacon_bits", p.beacon_bits},
                     {"request_bits", p.request_bits},
                     {"reply_bits", p.reply_bits},
                     {"plan_bits", p.plan_bits},
                     {"result_bits", p.result_bits},
                     {"t_stack_per_hop", p.t_stack_per_hop},
                     {"t_cd", p.t_cd},
                     {"t_ed", p.t_ed}};
    j["metrics_bin"] = c.metrics_bin;
    j["seed"] = c.seed;
    j["beacons"] = c.beacons;
    json nodes = json::array();
    for (const auto &n : c.explicit_nodes)
    {
        json services = json::array();
        for (const auto &s : n.services)
        {
            services.push_back({{"type", s.type}, {"task_time", s.task_time}, {"failure_prob", s.failure_prob}});
        }
        json e = {{"x", n.x}, {"y", n.y}, {"speed", n.speed}, {"energy", n.energy},
                  {"misbehaving", n.misbehaving}, {"services", services}};
        if (n.waypoint_x)
        {
            e["waypoint"] = {*n.waypoint_x, *n.waypoint_y};
        }
        nodes.push_back(e);
    }
    j["explicit_nodes"] = nodes;
    return j;
}

inline std::string config_to_string(const ScenarioConfig &c)
{
    return config_to_json(c).dump(2) + "\n";
}

inline ScenarioConfig load_config(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw ConfigError({"cannot open config file '" + path + "'"});
    }
    json j;
    try
    {
        j = json::parse(in);
    }
    catch (const json::parse_error &e)
    {
        throw ConfigError({"'" + path + "' is not valid JSON: " + e.what()});
    }
    return config_from_json(j);
}

/// FNV-1a over the resolved config text.
inline std::string config_hash(const ScenarioConfig &c)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : config_to_json(c).dump())
    {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

} // namespace qoscomp
