#pragma once

// Scenario builders and trace helpers shared by the test binaries.

#include "qoscomp/mobility.hpp"
#include "qoscomp/scenario.hpp"
#include "qoscomp/trace.hpp"

#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace qoscomp::testing {

struct Topology
{
    std::string name;
    std::vector<Vec2> positions;
    std::uint32_t diameter = 0;
};

inline Topology line_topology(std::uint32_t n, double spacing = 40.0)
{
    Topology t{"line", {}, n - 1};
    for (std::uint32_t i = 0; i < n; ++i)
    {
        t.positions.push_back({10.0 + spacing * i, 50.0});
    }
    return t;
}

/// Adjacent nodes 40 m apart, every other pair out of a 45 m range.
inline Topology ring_topology(std::uint32_t n)
{
    const double radius = 40.0 / (2.0 * std::sin(std::numbers::pi / n));
    Topology t{"ring", {}, n / 2};
    for (std::uint32_t i = 0; i < n; ++i)
    {
        const double a = 2.0 * std::numbers::pi * i / n;
        t.positions.push_back({radius + 5.0 + radius * std::cos(a), radius + 5.0 + radius * std::sin(a)});
    }
    return t;
}

inline Topology grid_topology(std::uint32_t side, double spacing = 40.0)
{
    Topology t{"grid", {}, 2 * (side - 1)};
    for (std::uint32_t r = 0; r < side; ++r)
    {
        for (std::uint32_t c = 0; c < side; ++c)
        {
            t.positions.push_back({10.0 + spacing * c, 10.0 + spacing * r});
        }
    }
    return t;
}

/// Static, lossless, honest nodes with ample energy. `offers` lists the
/// nodes hosting one instance of service type 0.
inline ScenarioConfig static_scenario(const Topology &t, const std::set<std::uint32_t> &offers,
                                      std::uint32_t ttl, double duration = 3.0)
{
    ScenarioConfig c;
    c.nodes = static_cast<std::uint32_t>(t.positions.size());
    c.arena_width = 1000;
    c.arena_height = 1000;
    c.duration = duration;
    c.plan_size = 1;
    c.misbehaving_fraction = 0;
    c.radio.loss_probability = 0;
    c.protocol.ttl = ttl;
    c.protocol.discovery_timeout = 1.0;
    c.beacons = false;
    for (std::uint32_t i = 0; i < c.nodes; ++i)
    {
        ExplicitNode n;
        n.x = t.positions[i].x;
        n.y = t.positions[i].y;
        n.energy = 100.0;
        if (offers.count(i))
        {
            n.services.push_back({0, 0.05, 0.0});
        }
        c.explicit_nodes.push_back(n);
    }
    c.explicit_requests.push_back({0.5, 0, {0}});
    return c;
}

inline std::vector<std::uint32_t> hop_distances(const std::vector<Vec2> &pos, std::uint32_t from, double range)
{
    std::vector<std::uint32_t> d(pos.size(), UINT32_MAX);
    std::deque<std::uint32_t> q{from};
    d[from] = 0;
    while (!q.empty())
    {
        auto u = q.front();
        q.pop_front();
        for (std::uint32_t v = 0; v < pos.size(); ++v)
        {
            if (d[v] == UINT32_MAX && distance(pos[u], pos[v]) <= range)
            {
                d[v] = d[u] + 1;
                q.push_back(v);
            }
        }
    }
    return d;
}

inline std::vector<TraceRecord> records_of(const std::vector<TraceRecord> &all, std::string_view kind)
{
    std::vector<TraceRecord> out;
    for (const auto &r : all)
    {
        if (r.kind == kind)
        {
            out.push_back(r);
        }
    }
    return out;
}

} // namespace qoscomp::testing
