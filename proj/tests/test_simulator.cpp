#include "qoscomp/simulator.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>
#include <tuple>

namespace {

using namespace qoscomp;
using namespace qoscomp::testing;

/// Smaller random scenario with tight energy so that some nodes die.
ScenarioConfig stress_config(std::uint64_t seed)
{
    ScenarioConfig c;
    c.seed = seed;
    c.nodes = 40;
    c.arena_width = 150;
    c.arena_height = 150;
    c.duration = 40;
    c.concrete_services = 60;
    c.plan_size = 3;
    c.initial_energy_min = 0.002;
    c.initial_energy_max = 0.02;
    c.requests.initiators = 6;
    c.requests.first_min = 1;
    c.requests.first_max = 5;
    c.requests.interval = 5;
    c.radio.loss_probability = 0.05;
    c.protocol.rebroadcast_jitter = 0.005;
    return c;
}

std::vector<std::uint32_t> parse_ids(std::string_view s)
{
    std::vector<std::uint32_t> out;
    if (s == "-")
    {
        return out;
    }
    for (auto part : split(s, ','))
    {
        out.push_back(static_cast<std::uint32_t>(std::stoul(std::string(part))));
    }
    return out;
}

std::size_t count(const std::vector<TraceRecord> &recs, std::string_view kind)
{
    return static_cast<std::size_t>(
        std::count_if(recs.begin(), recs.end(), [&](const auto &r) { return r.kind == kind; }));
}

// ---- mobility and radio ------------------------------------------------------

TEST(Mobility, MovesAlongUnitVector)
{
    MobilityState s;
    s.position = {0, 0};
    s.waypoint = {30, 40};
    s.speed = 5;
    std::mt19937_64 rng(1);
    mobility_step(s, 1.0, Arena{100, 100}, MobilityParams{}, rng);
    EXPECT_NEAR(s.position.x, 3.0, 1e-12);
    EXPECT_NEAR(s.position.y, 4.0, 1e-12);
}

TEST(Mobility, ArrivalClampsAndPauses)
{
    MobilityState s;
    s.position = {27, 36};
    s.waypoint = {30, 40};
    s.speed = 10;
    MobilityParams p;
    p.pause = 2.0;
    std::mt19937_64 rng(1);
    mobility_step(s, 1.0, Arena{100, 100}, p, rng);
    EXPECT_EQ(s.position, (Vec2{30, 40}));
    EXPECT_DOUBLE_EQ(s.pause_left, 2.0);

    // paused: stays put while the pause runs down
    mobility_step(s, 1.0, Arena{100, 100}, p, rng);
    EXPECT_EQ(s.position, (Vec2{30, 40}));
    EXPECT_DOUBLE_EQ(s.pause_left, 1.0);
}

TEST(Mobility, ZeroSpeedStaysPut)
{
    MobilityState s;
    s.position = {12, 7};
    s.waypoint = {80, 80};
    std::mt19937_64 rng(1);
    mobility_step(s, 1.0, Arena{100, 100}, MobilityParams{}, rng);
    EXPECT_EQ(s.position, (Vec2{12, 7}));
}

TEST(Mobility, RandomWalkStaysInArena)
{
    std::mt19937_64 rng(99);
    const Arena arena{120, 80};
    MobilityParams p;
    p.pause = 0.3;
    MobilityState s;
    s.position = {60, 40};
    draw_leg(s, arena, p, rng);
    for (int i = 0; i < 20000; ++i)
    {
        mobility_step(s, 0.1, arena, p, rng);
        ASSERT_GE(s.position.x, 0.0);
        ASSERT_LE(s.position.x, arena.width);
        ASSERT_GE(s.position.y, 0.0);
        ASSERT_LE(s.position.y, arena.height);
    }
}

TEST(Radio, InRangeBoundary)
{
    RadioParams r;
    r.range = 45;
    EXPECT_TRUE(in_range({3, 3}, {3, 3}, r));
    EXPECT_TRUE(in_range({0, 0}, {45, 0}, r));
    EXPECT_FALSE(in_range({0, 0}, {45.01, 0}, r));
}

// ---- scenario runs -----------------------------------------------------------

TEST(Run, ZeroDurationIsEmpty)
{
    auto c = stress_config(3);
    c.duration = 0;
    const auto res = run(c);
    const auto recs = parse_trace(res.trace);
    ASSERT_EQ(recs.size(), 2u);
    EXPECT_EQ(recs.front().kind, "init");
    EXPECT_EQ(recs.back().kind, "end");
    EXPECT_TRUE(res.metrics.bins.empty());
    EXPECT_EQ(res.metrics.attempts, 0u);
    EXPECT_EQ(res.metrics.path_failures, 0u);
    EXPECT_FALSE(res.metrics.efficiency.has_value());
}

TEST(Run, TwoNodeComposition)
{
    auto c = static_scenario(line_topology(2), {1}, 2);
    const auto res = run(c);
    const auto recs = parse_trace(res.trace);
    EXPECT_EQ(count(recs, "compose_start"), 1u);
    EXPECT_EQ(count(recs, "compose_ok"), 1u);
    EXPECT_EQ(count(recs, "path_fail"), 0u);
    const auto paths = records_of(recs, "path");
    ASSERT_EQ(paths.size(), 1u);
    EXPECT_EQ(paths[0].get("nodes"), "1");
    EXPECT_EQ(res.metrics.efficiency, 1.0);
    EXPECT_DOUBLE_EQ(res.metrics.delivered_bits, c.protocol.result_bits);
}

TEST(Run, InvalidConfigListsFields)
{
    auto c = stress_config(1);
    c.nodes = 0;
    c.radio.range = -1;
    try
    {
        Simulator sim(c);
        FAIL() << "expected ConfigError";
    }
    catch (const ConfigError &e)
    {
        const auto &p = e.problems();
        auto mentions = [&](std::string_view field) {
            return std::any_of(p.begin(), p.end(), [&](const auto &s) { return s.find(field) == 0; });
        };
        EXPECT_TRUE(mentions("nodes"));
        EXPECT_TRUE(mentions("radio.range"));
    }
}

TEST(Run, DeterministicTrace)
{
    const auto c = stress_config(11);
    const auto a = run(c);
    const auto b = run(c);
    EXPECT_EQ(a.trace, b.trace);
    EXPECT_EQ(metrics_csv(a.metrics), metrics_csv(b.metrics));

    auto other = c;
    other.seed = 12;
    EXPECT_NE(run(other).trace, a.trace);
}

TEST(Run, DefaultScenarioEmitsAllSeries)
{
    ScenarioConfig c;
    c.seed = 5;
    const auto res = run(c);
    const auto &m = res.metrics;
    EXPECT_EQ(m.bins.size(), 15u);
    EXPECT_GT(m.attempts, 0u);
    ASSERT_TRUE(m.efficiency.has_value());
    EXPECT_GE(*m.efficiency, 0.0);
    EXPECT_LE(*m.efficiency, 1.0);
    EXPECT_GT(m.delivered_bits, 0.0);
    EXPECT_EQ(m.method, "proposed");
}

// ---- transmission --------------------------------------------------------------

TEST(Transmit, TotalLossDeliversNothing)
{
    auto c = static_scenario(line_topology(3), {1, 2}, 3);
    c.radio.loss_probability = 1.0;
    const auto res = run(c);
    const auto recs = parse_trace(res.trace);
    EXPECT_EQ(count(recs, "rx"), 0u);
    EXPECT_EQ(count(recs, "reply_in"), 0u);
    const auto drops = records_of(recs, "drop");
    ASSERT_FALSE(drops.empty());
    EXPECT_TRUE(std::all_of(drops.begin(), drops.end(), [](const auto &d) { return d.get("reason") == "loss"; }));
}

TEST(Transmit, UnicastChargesSplitAtTenMetres)
{
    // Node 1 hears one request then unicasts one 1000-bit reply 10 m back.
    Topology t{"pair", {{10, 50}, {20, 50}}, 1};
    auto c = static_scenario(t, {1}, 1, 1.0);
    c.protocol.reply_bits = 1000;
    c.energy = EnergyParams{50e-9, 100e-12};
    const auto res = run(c);
    const auto recs = parse_trace(res.trace);
    const auto tx = records_of(recs, "tx");
    ASSERT_EQ(tx.size(), 2u);
    EXPECT_EQ(tx[1].get("pkt"), "reply");
    EXPECT_DOUBLE_EQ(tx[1].number("d"), 10.0);

    const double req = c.protocol.request_bits;
    const double sender_share = res.nodes[1].energy.consumed - rx_energy(req, c.energy);
    const double receiver_share = res.nodes[0].energy.consumed - tx_energy(req, c.radio.range, c.energy);
    EXPECT_NEAR(sender_share, 6e-5, 1e-18);
    EXPECT_NEAR(receiver_share, 5e-5, 1e-18);
    EXPECT_NEAR(sender_share + receiver_share, 1.1e-4, 1e-18);
}

TEST(Transmit, MisbehavingForwarderEarnsNegativeEvidence)
{
    // 0 -- 1 -- 2 with the only provider behind a relay that drops everything.
    auto c = static_scenario(line_topology(3), {2}, 3);
    c.explicit_nodes[1].misbehaving = true;
    c.misbehaving_drop_probability = 1.0;
    const auto res = run(c);
    const auto recs = parse_trace(res.trace);

    std::size_t offered = 0;
    for (const auto &r : records_of(recs, "rx"))
    {
        offered += r.integer("node") == 1 && r.integer("from") == 0 && r.get("pkt") == "req";
    }
    ASSERT_GT(offered, 0u);
    const auto &t = res.nodes[0].trackers.at(1);
    EXPECT_EQ(t.alpha, 0.0);
    EXPECT_EQ(t.beta, static_cast<double>(offered));
    EXPECT_EQ(count(recs, "reply_in"), 0u);
}

// ---- path failure -----------------------------------------------------------------

TEST(PathFailure, ProviderDiesMidExecution)
{
    // Two providers, both one hop from the initiator. The baseline binds
    // node 1 (same arrival and hop count, lower id); node 1 can afford to
    // reply but dies receiving the plan.
    Topology t{"vee", {{10, 50}, {50, 50}, {10, 90}}, 2};
    auto c = static_scenario(t, {1, 2}, 1, 4.0);
    c.method = Method::Baseline;
    c.explicit_nodes[1].energy = 2e-4;
    const auto res = run(c);
    const auto recs = parse_trace(res.trace);

    EXPECT_EQ(count(recs, "die"), 1u);
    EXPECT_EQ(count(recs, "path_fail"), 1u);
    EXPECT_EQ(count(recs, "discover"), 2u);
    const auto paths = records_of(recs, "path");
    ASSERT_EQ(paths.size(), 2u);
    EXPECT_EQ(paths[0].get("nodes"), "1");
    EXPECT_EQ(paths[1].get("nodes"), "2");
    EXPECT_EQ(count(recs, "compose_ok"), 1u);
}

TEST(PathFailure, AllHandoffsSucceed)
{
    auto c = static_scenario(line_topology(4), {1, 3}, 4);
    c.plan_size = 2;
    c.explicit_nodes[3].services[0].type = 1;
    c.explicit_requests[0].plan = {0, 1};
    const auto res = run(c);
    const auto recs = parse_trace(res.trace);
    EXPECT_EQ(count(recs, "path_fail"), 0u);
    EXPECT_EQ(count(recs, "stage"), 2u);
    EXPECT_EQ(count(recs, "compose_ok"), 1u);
}

TEST(PathFailure, ProviderDriftsAwayBeforeHandoff)
{
    // The provider walks east at 20 m/s. It is in range while discovering
    // and receiving the plan, but out of everyone's range once its 1 s task
    // is done, so the result never leaves and the stage timer fires.
    Topology t{"drift", {{100, 50}, {100, 50}, {60, 50}}, 1};
    auto c = static_scenario(t, {1}, 2, 3.0);
    c.explicit_nodes[1].waypoint_x = 300;
    c.explicit_nodes[1].waypoint_y = 50;
    c.explicit_nodes[1].speed = 20;
    c.explicit_nodes[1].services[0].task_time = 1.0;
    const auto res = run(c);
    const auto recs = parse_trace(res.trace);

    EXPECT_EQ(count(recs, "stage"), 1u);
    bool no_route = false;
    for (const auto &d : records_of(recs, "drop"))
    {
        no_route |= d.get("reason") == "no_route" && d.get("pkt") == "result";
    }
    EXPECT_TRUE(no_route);
    const auto fails = records_of(recs, "path_fail");
    ASSERT_EQ(fails.size(), 1u);
    EXPECT_EQ(fails[0].get("reason"), "timeout");
    EXPECT_EQ(fails[0].integer("stage"), 1u);
    EXPECT_EQ(count(recs, "compose_ok"), 0u);
}

// ---- trace invariants over random scenarios -------------------------------------------

class TraceInvariants : public ::testing::TestWithParam<std::uint64_t>
{
};

TEST_P(TraceInvariants, Hold)
{
    const auto c = stress_config(GetParam());
    const auto res = run(c);
    const auto recs = parse_trace(res.trace);

    // time never runs backwards
    for (std::size_t i = 1; i < recs.size(); ++i)
    {
        ASSERT_LE(recs[i - 1].time, recs[i].time) << "line " << recs[i].line;
    }

    // energy: replay every charge from the tx records
    std::vector<double> charged(c.nodes, 0.0);
    std::map<std::uint32_t, double> died;
    std::map<std::uint32_t, double> initial;
    for (const auto &r : recs)
    {
        if (r.kind == "node")
        {
            initial[r.integer("id")] = r.number("energy");
        }
        else if (r.kind == "die")
        {
            died.emplace(r.integer("node"), r.time);
        }
        else if (r.kind == "tx")
        {
            const auto sender = r.integer("node");
            ASSERT_FALSE(died.count(sender)) << "dead node " << sender << " transmitted at line " << r.line;
            const double bits = r.number("bits");
            charged[sender] += tx_energy(bits, r.number("d"), c.energy);
            for (auto rx : parse_ids(r.get("rx")))
            {
                charged[rx] += rx_energy(bits, c.energy);
            }
        }
    }
    for (const auto &r : records_of(recs, "energy"))
    {
        const auto id = r.integer("node");
        const double expected = std::min(charged[id], initial.at(id));
        EXPECT_NEAR(r.number("consumed"), expected, 1e-9 * expected) << "node " << id;
        EXPECT_EQ(r.number("consumed"), res.nodes[id].energy.consumed);
    }

    // reliability trackers agree with the observation log
    std::map<std::pair<std::uint64_t, std::uint64_t>, std::pair<double, double>> seen;
    for (const auto &r : records_of(recs, "obs"))
    {
        auto &ab = seen[{r.integer("observer"), r.integer("subject")}];
        (r.integer("fwd") ? ab.first : ab.second) += 1;
    }
    std::size_t pairs = 0;
    for (const auto &n : res.nodes)
    {
        for (const auto &[subject, t] : n.trackers)
        {
            const auto it = seen.find({raw(n.id), subject});
            ASSERT_NE(it, seen.end());
            EXPECT_EQ(t.alpha, it->second.first);
            EXPECT_EQ(t.beta, it->second.second);
            ++pairs;
        }
    }
    EXPECT_EQ(pairs, seen.size());

    // requests never travel past their ttl
    for (const auto &r : records_of(recs, "rx"))
    {
        if (r.get("pkt") == "req")
        {
            EXPECT_LE(r.integer("hop"), c.protocol.ttl);
        }
    }
}

INSTANTIATE_TEST_SUITE_P(Seeds, TraceInvariants, ::testing::Values(1, 2, 3, 4, 5, 6));

TEST(TraceInvariants, SomeNodesActuallyDie)
{
    // Guards the property test above against a config that never drains anyone.
    std::size_t deaths = 0;
    for (std::uint64_t seed = 1; seed <= 6; ++seed)
    {
        const auto res = run(stress_config(seed));
        deaths += count(parse_trace(res.trace), "die");
    }
    EXPECT_GT(deaths, 0u);
}

} // namespace
