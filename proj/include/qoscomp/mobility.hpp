#pragma once

// Random-waypoint mobility and unit-disk connectivity.

#include "qoscomp/scenario.hpp"

#include <cmath>
#include <random>

namespace qoscomp {

struct Vec2
{
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Vec2 &) const = default;
};

inline double distance(Vec2 a, Vec2 b)
{
    return std::hypot(a.x - b.x, a.y - b.y);
}

/// Boundary inclusive.
inline bool in_range(Vec2 a, Vec2 b, const RadioParams &r)
{
    return distance(a, b) <= r.range;
}

struct MobilityState
{
    Vec2 position;
    Vec2 waypoint;
    double speed = 0.0;
    double pause_left = 0.0;
    bool scripted = false; // one leg to a fixed waypoint, then rest forever
};

struct Arena
{
    double width = 0.0;
    double height = 0.0;
};

template <typename Rng>
void draw_leg(MobilityState &s, const Arena &arena, const MobilityParams &p, Rng &rng)
{
    std::uniform_real_distribution<double> ux(0.0, arena.width);
    std::uniform_real_distribution<double> uy(0.0, arena.height);
    std::uniform_real_distribution<double> us(p.speed_min, p.speed_max);
    s.waypoint = {ux(rng), uy(rng)};
    s.speed = us(rng);
}

/// Advances one node by dt. On arrival the node stops exactly at the
/// waypoint, pauses, and draws its next leg when the pause begins.
template <typename Rng>
void mobility_step(MobilityState &s, double dt, const Arena &arena, const MobilityParams &p, Rng &rng)
{
    if (s.pause_left > 0.0)
    {
        s.pause_left = std::max(0.0, s.pause_left - dt);
        return;
    }
    if (s.speed <= 0.0 || s.position == s.waypoint)
    {
        return;
    }
    const double dx = s.waypoint.x - s.position.x;
    const double dy = s.waypoint.y - s.position.y;
    const double left = std::hypot(dx, dy);
    const double step = s.speed * dt;
    if (step >= left)
    {
        s.position = s.waypoint;
        if (s.scripted)
        {
            s.speed = 0.0;
            return;
        }
        s.pause_left = p.pause;
        draw_leg(s, arena, p, rng);
        return;
    }
    s.position.x += dx / left * step;
    s.position.y += dy / left * step;
}

} // namespace qoscomp
