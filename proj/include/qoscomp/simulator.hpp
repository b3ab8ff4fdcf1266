#pragma once

// Deterministic discrete-event MANET simulator. One Simulator owns all
// mutable state of one scenario run and processes events in (time, seq)
// order on a single thread.
//
// Radio: unit disk, per-hop latency plus serialization delay, optional
// Bernoulli loss. Broadcasts pay the amplifier term for the full radio
// range; unicasts for the actual sender-receiver distance. The sender
// pays e_act*k + e_amp*d^2*k and every receiver e_act*k.
//
// Composition execution is source routed: the plan travels initiator ->
// provider 1 -> ... -> provider m -> initiator over shortest-hop routes
// computed at send time. Losses are silent; the initiator detects them by
// per-stage timeouts and recomposes.

#include "qoscomp/baseline.hpp"
#include "qoscomp/composition.hpp"
#include "qoscomp/config_io.hpp"
#include "qoscomp/discovery.hpp"
#include "qoscomp/metrics.hpp"
#include "qoscomp/mobility.hpp"
#include "qoscomp/scenario.hpp"
#include "qoscomp/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <queue>
#include <random>
#include <ranges>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

namespace qoscomp {

struct HostedService
{
    ServiceId id{};
    ServiceType type{};
    double task_time = 0.0;
    double failure_prob = 0.0;
    std::uint64_t history_failures = 0;
    std::uint64_t runtime_failures = 0;
    std::uint64_t runtime_runs = 0;
};

struct NodeState
{
    NodeId id{};
    MobilityState mobility;
    std::mt19937_64 mobility_rng;
    EnergyAccount energy;
    bool misbehaving = false;
    bool alive = true;
    std::vector<HostedService> services;
    Repository repository;
    std::unordered_set<RequestId> seen;
    std::map<std::uint32_t, ReliabilityTracker> trackers; // opinions about other nodes
    std::uint64_t beacon_seq = 0;
    double payload_bits_sent = 0.0;
};

struct ScheduledRequest
{
    double time = 0.0;
    NodeId initiator{};
    std::vector<ServiceType> plan;
};

struct RunResult
{
    std::string trace;
    MetricsReport metrics;
    std::vector<NodeState> nodes; // final state
};

class Simulator
{
public:
    explicit Simulator(ScenarioConfig config)
        : cfg_(std::move(config)),
          model_((validate(cfg_), cfg_.trust.resolved_model())),
          arena_{cfg_.arena_width, cfg_.arena_height}
    {
        validate(model_);
        std::seed_seq proto{cfg_.seed, std::uint64_t{0x9a1}};
        protocol_rng_.seed(proto);
        setup();
    }

    RunResult run()
    {
        trace_.record(0.0, "init", kv("seed", cfg_.seed), kv("method", method_name(cfg_.method)),
                      kv("config", config_hash(cfg_)), kv("nodes", nodes_.size()), kv("duration", cfg_.duration));
        if (cfg_.duration > 0.0)
        {
            for (const auto &n : nodes_)
            {
                std::string services;
                for (const auto &s : n.services)
                {
                    services += (services.empty() ? "" : ",") + std::to_string(raw(s.id)) + ":" +
                                std::to_string(raw(s.type));
                }
                trace_.record(0.0, "node", kv("id", raw(n.id)), kv("x", n.mobility.position.x),
                              kv("y", n.mobility.position.y), kv("energy", n.energy.initial),
                              kv("misbehaving", int{n.misbehaving}), kv("services", services.empty() ? "-" : services));
            }
            schedule_initial_events();
            while (!queue_.empty())
            {
                Event ev = queue_.top();
                if (ev.time > cfg_.duration)
                {
                    break;
                }
                queue_.pop();
                now_ = ev.time;
                ++events_processed_;
                std::visit([this](auto &payload) { handle(payload); }, ev.payload);
            }
            now_ = cfg_.duration;
            for (const auto &n : nodes_)
            {
                trace_.record(now_, "energy", kv("node", raw(n.id)), kv("initial", n.energy.initial),
                              kv("consumed", n.energy.consumed));
            }
        }
        trace_.record(cfg_.duration, "end", kv("events", events_processed_));
        RunResult result;
        result.trace = trace_.take();
        result.metrics = compute_metrics(result.trace, cfg_);
        result.nodes = std::move(nodes_);
        return result;
    }

    const std::vector<ScheduledRequest> &schedule() const { return requests_; }

private:
    // --- events ------------------------------------------------------------

    struct MobilityTick
    {
    };
    struct BeaconTick
    {
        NodeId node;
    };
    struct BeaconDelivery
    {
        NodeId from;
        NodeId to;
        std::shared_ptr<const ServiceBeacon> beacon;
    };
    struct RequestDelivery
    {
        NodeId from;
        NodeId to;
        std::shared_ptr<const RequestPacket> pkt;
    };
    struct Rebroadcast
    {
        NodeId node;
        std::shared_ptr<const RequestPacket> pkt;
    };

    enum class RoutedKind
    {
        Reply,
        Plan,
        Result,
    };

    struct RoutedPacket
    {
        RoutedKind kind = RoutedKind::Reply;
        std::vector<NodeId> route;
        std::size_t hop = 0; // index into route of the node holding the packet
        double bits = 0.0;
        std::optional<ReplyPacket> reply;
        std::uint64_t creq = 0;
        std::uint32_t round = 0;
        std::size_t stage = 0;
    };

    struct UnicastDelivery
    {
        NodeId from;
        NodeId to;
        std::shared_ptr<RoutedPacket> pkt;
    };
    struct RequestStart
    {
        std::size_t index;
    };
    struct DiscoveryDeadline
    {
        std::uint64_t creq;
        std::uint32_t round;
    };
    struct ServiceDone
    {
        std::uint64_t creq;
        std::uint32_t round;
        std::size_t stage;
        NodeId node;
    };
    struct StageTimeout
    {
        std::uint64_t creq;
        std::uint32_t round;
        std::size_t stage;
    };

    using Payload = std::variant<MobilityTick, BeaconTick, BeaconDelivery, RequestDelivery, Rebroadcast,
                                 UnicastDelivery, RequestStart, DiscoveryDeadline, ServiceDone, StageTimeout>;

    struct Event
    {
        double time = 0.0;
        std::uint64_t seq = 0;
        Payload payload;
    };

    struct Later
    {
        bool operator()(const Event &a, const Event &b) const
        {
            return std::tie(a.time, a.seq) > std::tie(b.time, b.seq);
        }
    };

    void at(double time, Payload p)
    {
        queue_.push(Event{std::max(time, now_), next_seq_++, std::move(p)});
    }

    // --- composite request bookkeeping ---------------------------------------

    enum class Phase
    {
        Discovering,
        Executing,
        Done,
    };

    struct Composite
    {
        std::uint64_t id = 0;
        NodeId initiator{};
        std::vector<ServiceType> plan;
        std::uint32_t round = 0;
        std::uint32_t recompositions = 0;
        Phase phase = Phase::Discovering;
        std::vector<TimedReply> replies;
        CompositionPath path;
        std::vector<std::uint32_t> hops;      // advertised hop count per stage provider
        std::vector<double> stage_timeouts;   // per stage, plus one for the result
        std::ptrdiff_t progress = -1;         // last stage whose provider handed off
    };

    // --- setup ---------------------------------------------------------------

    void setup()
    {
        std::seed_seq setup_seed{cfg_.seed, std::uint64_t{0x5e7}};
        std::mt19937_64 rng(setup_seed);
        std::uniform_real_distribution<double> u01(0.0, 1.0);

        auto make_node = [this](std::uint32_t i) {
            NodeState n;
            n.id = NodeId{i};
            std::seed_seq s{cfg_.seed, std::uint64_t{0x30b}, std::uint64_t{i}};
            n.mobility_rng.seed(s);
            return n;
        };

        std::uint32_t next_service = 0;
        if (!cfg_.explicit_nodes.empty())
        {
            for (std::uint32_t i = 0; i < cfg_.explicit_nodes.size(); ++i)
            {
                const auto &e = cfg_.explicit_nodes[i];
                auto n = make_node(i);
                n.mobility.position = {e.x, e.y};
                n.mobility.scripted = true;
                n.mobility.waypoint = e.waypoint_x ? Vec2{*e.waypoint_x, *e.waypoint_y} : n.mobility.position;
                n.mobility.speed = e.waypoint_x ? e.speed : 0.0;
                n.energy = {e.energy, 0.0};
                n.misbehaving = e.misbehaving;
                for (const auto &s : e.services)
                {
                    n.services.push_back({ServiceId{next_service++}, ServiceType{s.type}, s.task_time, s.failure_prob,
                                          0, 0, 0});
                }
                nodes_.push_back(std::move(n));
            }
        }
        else
        {
            std::uniform_real_distribution<double> ux(0.0, cfg_.arena_width);
            std::uniform_real_distribution<double> uy(0.0, cfg_.arena_height);
            std::uniform_real_distribution<double> ue(cfg_.initial_energy_min, cfg_.initial_energy_max);
            for (std::uint32_t i = 0; i < cfg_.nodes; ++i)
            {
                auto n = make_node(i);
                n.mobility.position = {ux(rng), uy(rng)};
                n.energy = {ue(rng), 0.0};
                draw_leg(n.mobility, arena_, cfg_.mobility, n.mobility_rng);
                nodes_.push_back(std::move(n));
            }
            std::vector<std::uint32_t> order(cfg_.nodes);
            std::iota(order.begin(), order.end(), 0U);
            std::shuffle(order.begin(), order.end(), rng);
            const auto bad = static_cast<std::size_t>(std::lround(cfg_.misbehaving_fraction * cfg_.nodes));
            for (std::size_t k = 0; k < bad; ++k)
            {
                nodes_[order[k]].misbehaving = true;
            }
            std::uniform_int_distribution<std::uint32_t> pick(0, cfg_.nodes - 1);
            std::uniform_real_distribution<double> task(cfg_.service.task_time_min, cfg_.service.task_time_max);
            std::uniform_real_distribution<double> fail(cfg_.service.failure_prob_min, cfg_.service.failure_prob_max);
            for (std::uint32_t k = 0; k < cfg_.concrete_services; ++k)
            {
                HostedService s;
                s.id = ServiceId{next_service++};
                s.type = ServiceType{k % cfg_.plan_size};
                s.task_time = task(rng);
                s.failure_prob = fail(rng);
                std::binomial_distribution<std::uint64_t> hist(cfg_.service.history_executions, s.failure_prob);
                s.history_failures = hist(rng);
                nodes_[pick(rng)].services.push_back(s);
            }
        }

        for (std::size_t i = 0; i < nodes_.size(); ++i)
        {
            beacon_offsets_.push_back(u01(rng) * cfg_.protocol.beacon_period);
        }

        if (!cfg_.explicit_requests.empty())
        {
            for (const auto &r : cfg_.explicit_requests)
            {
                ScheduledRequest s{r.time, NodeId{r.initiator}, {}};
                for (auto t : r.plan)
                {
                    s.plan.push_back(ServiceType{t});
                }
                requests_.push_back(s);
            }
        }
        else
        {
            std::vector<std::uint32_t> order(nodes_.size());
            std::iota(order.begin(), order.end(), 0U);
            std::shuffle(order.begin(), order.end(), rng);
            const auto count = std::min<std::size_t>(cfg_.requests.initiators, nodes_.size());
            std::uniform_real_distribution<double> first(cfg_.requests.first_min, cfg_.requests.first_max);
            std::vector<ServiceType> types;
            for (std::uint32_t t = 0; t < cfg_.plan_size; ++t)
            {
                types.push_back(ServiceType{t});
            }
            for (std::size_t k = 0; k < count; ++k)
            {
                for (double t = first(rng); t < cfg_.duration; t += cfg_.requests.interval)
                {
                    auto plan = types;
                    std::shuffle(plan.begin(), plan.end(), rng);
                    requests_.push_back({t, NodeId{order[k]}, plan});
                }
            }
        }
        std::stable_sort(requests_.begin(), requests_.end(), [](const auto &a, const auto &b) {
            return std::tie(a.time, a.initiator) < std::tie(b.time, b.initiator);
        });
    }

    void schedule_initial_events()
    {
        at(cfg_.mobility.tick, MobilityTick{});
        if (cfg_.beacons)
        {
            for (std::size_t i = 0; i < nodes_.size(); ++i)
            {
                at(beacon_offsets_[i], BeaconTick{NodeId{static_cast<std::uint32_t>(i)}});
            }
        }
        for (std::size_t i = 0; i < requests_.size(); ++i)
        {
            at(requests_[i].time, RequestStart{i});
        }
    }

    // --- helpers -------------------------------------------------------------

    NodeState &node(NodeId id) { return nodes_.at(raw(id)); }
    Vec2 pos(NodeId id) { return node(id).mobility.position; }

    double coin() { return std::uniform_real_distribution<double>(0.0, 1.0)(protocol_rng_); }

    bool lost()
    {
        return cfg_.radio.loss_probability > 0.0 && coin() < cfg_.radio.loss_probability;
    }

    bool misbehaves(const NodeState &n)
    {
        return n.misbehaving && coin() < cfg_.misbehaving_drop_probability;
    }

    double airtime(double bits) const { return cfg_.radio.per_hop_latency + bits / cfg_.radio.bit_rate; }

    void charge(NodeState &n, double amount)
    {
        if (!n.alive)
        {
            return;
        }
        auto r = deplete(n.energy, amount);
        n.energy = r.account;
        if (r.dead)
        {
            n.alive = false;
            trace_.record(now_, "die", kv("node", raw(n.id)));
        }
    }

    void observe(NodeId observer, NodeId subject, bool forwarded)
    {
        auto &t = node(observer).trackers[raw(subject)];
        t = observe_forwarding(t, forwarded ? 1 : 0, 1);
        trace_.record(now_, "obs", kv("observer", raw(observer)), kv("subject", raw(subject)),
                      kv("fwd", int{forwarded}));
    }

    /// Beta evidence about `subject` as seen from `viewer`: its own tracker
    /// plus those of the neighbors in its repository.
    double pooled_reliability(NodeId viewer, NodeId subject)
    {
        ReliabilityTracker pooled;
        auto add = [&](const NodeState &holder) {
            if (holder.id == subject)
            {
                return;
            }
            if (auto it = holder.trackers.find(raw(subject)); it != holder.trackers.end())
            {
                pooled.alpha += it->second.alpha;
                pooled.beta += it->second.beta;
            }
        };
        const auto &v = node(viewer);
        add(v);
        for (const auto &[id, entry] : v.repository)
        {
            add(nodes_.at(id));
        }
        return reliability_expectation(pooled, cfg_.trust.empty_reliability);
    }

    double failure_rate(const HostedService &s) const
    {
        return service_failure_rate(
            {s.history_failures + s.runtime_failures, cfg_.service.history_window + now_});
    }

    double throughput_of(const NodeState &n) const { return now_ > 0.0 ? n.payload_bits_sent / now_ : 0.0; }

    std::vector<ServiceOffer> offers(const NodeState &n) const
    {
        std::vector<ServiceOffer> out;
        for (const auto &s : n.services)
        {
            out.push_back({s.id, s.type, s.task_time, failure_rate(s)});
        }
        return out;
    }

    /// Shortest-hop route over alive nodes, lowest ids first on ties.
    std::optional<std::vector<NodeId>> route(NodeId from, NodeId to)
    {
        const std::size_t n = nodes_.size();
        std::vector<std::int64_t> parent(n, -1);
        std::deque<std::uint32_t> frontier{raw(from)};
        parent[raw(from)] = raw(from);
        while (!frontier.empty())
        {
            const auto cur = frontier.front();
            frontier.pop_front();
            if (cur == raw(to))
            {
                break;
            }
            for (std::uint32_t k = 0; k < n; ++k)
            {
                if (parent[k] < 0 && nodes_[k].alive &&
                    in_range(nodes_[cur].mobility.position, nodes_[k].mobility.position, cfg_.radio))
                {
                    parent[k] = cur;
                    frontier.push_back(k);
                }
            }
        }
        if (parent[raw(to)] < 0)
        {
            return std::nullopt;
        }
        std::vector<NodeId> path{to};
        while (path.back() != from)
        {
            path.push_back(NodeId{static_cast<std::uint32_t>(parent[raw(path.back())])});
        }
        std::reverse(path.begin(), path.end());
        return path;
    }

    static std::string_view kind_name(RoutedKind k)
    {
        switch (k)
        {
        case RoutedKind::Reply: return "reply";
        case RoutedKind::Plan: return "plan";
        case RoutedKind::Result: return "result";
        }
        return "?";
    }

    std::string packet_label(const RoutedPacket &p) const
    {
        if (p.kind == RoutedKind::Reply)
        {
            return p.reply->id.str();
        }
        return std::to_string(p.creq) + "/" + std::to_string(p.round) + "/" + std::to_string(p.stage);
    }

    // --- transmission ----------------------------------------------------------

    template <typename Packet, typename MakeEvent>
    void broadcast(NodeState &sender, std::string_view kind, const std::string &id, std::string ttl, double bits,
                   MakeEvent make_event)
    {
        if (!sender.alive)
        {
            trace_.record(now_, "tx_dead", kv("node", raw(sender.id)), kv("pkt", kind), kv("id", id));
            return;
        }
        std::vector<std::uint32_t> receivers;
        for (const auto &n : nodes_)
        {
            if (n.id != sender.id && n.alive && in_range(sender.mobility.position, n.mobility.position, cfg_.radio))
            {
                receivers.push_back(raw(n.id));
            }
        }
        const double d = cfg_.radio.range;
        trace_.record(now_, "tx", kv("node", raw(sender.id)), kv("pkt", kind), kv("id", id), kv("ttl", ttl),
                      kv("bits", bits), kv("d", d), kv("rx", join_ids(receivers)));
        charge(sender, tx_energy(bits, d, cfg_.energy));
        for (auto r : receivers)
        {
            charge(nodes_[r], rx_energy(bits, cfg_.energy));
            at(now_ + airtime(bits), make_event(NodeId{r}));
        }
    }

    void send_routed(std::shared_ptr<RoutedPacket> pkt)
    {
        const NodeId cur = pkt->route[pkt->hop];
        const NodeId next = pkt->route[pkt->hop + 1];
        auto &sender = node(cur);
        const auto label = packet_label(*pkt);
        if (!sender.alive)
        {
            trace_.record(now_, "tx_dead", kv("node", raw(cur)), kv("pkt", kind_name(pkt->kind)), kv("id", label));
            return;
        }
        auto &receiver = node(next);
        const double d = distance(sender.mobility.position, receiver.mobility.position);
        if (d > cfg_.radio.range)
        {
            trace_.record(now_, "drop", kv("node", raw(cur)), kv("pkt", kind_name(pkt->kind)), kv("id", label),
                          kv("reason", "no_link"));
            return;
        }
        const bool hears = receiver.alive;
        trace_.record(now_, "tx", kv("node", raw(cur)), kv("pkt", kind_name(pkt->kind)), kv("id", label),
                      kv("ttl", "-"), kv("bits", pkt->bits), kv("d", d), kv("rx", hears ? std::to_string(raw(next)) : "-"));
        charge(sender, tx_energy(pkt->bits, d, cfg_.energy));
        if (hears)
        {
            charge(receiver, rx_energy(pkt->bits, cfg_.energy));
        }
        pkt->hop += 1;
        at(now_ + airtime(pkt->bits), UnicastDelivery{cur, next, pkt});
    }

    /// Common delivery checks; true when the packet reaches `to`.
    bool delivered(NodeId from, NodeId to, std::string_view kind, const std::string &id)
    {
        std::string_view reason;
        if (!node(to).alive)
        {
            reason = "dead";
        }
        else if (!in_range(pos(from), pos(to), cfg_.radio))
        {
            reason = "range";
        }
        else if (lost())
        {
            reason = "loss";
        }
        if (!reason.empty())
        {
            trace_.record(now_, "drop", kv("node", raw(to)), kv("pkt", kind), kv("id", id), kv("reason", reason));
            return false;
        }
        return true;
    }

    // --- handlers --------------------------------------------------------------

    void handle(MobilityTick &)
    {
        for (auto &n : nodes_)
        {
            if (n.alive)
            {
                mobility_step(n.mobility, cfg_.mobility.tick, arena_, cfg_.mobility, n.mobility_rng);
            }
        }
        if (now_ + cfg_.mobility.tick <= cfg_.duration)
        {
            at(now_ + cfg_.mobility.tick, MobilityTick{});
        }
    }

    void handle(BeaconTick &ev)
    {
        auto &n = node(ev.node);
        if (!n.alive)
        {
            return;
        }
        n.repository.evict(now_, cfg_.protocol.staleness_periods * cfg_.protocol.beacon_period);
        auto beacon = std::make_shared<ServiceBeacon>();
        beacon->origin = n.id;
        beacon->seq = ++n.beacon_seq;
        beacon->services = offers(n);
        beacon->energy = n.energy.remaining();
        beacon->throughput = throughput_of(n);
        const NodeId from = n.id;
        broadcast<ServiceBeacon>(n, "beacon", std::to_string(beacon->seq), "-", cfg_.protocol.beacon_bits,
                                 [&](NodeId to) { return BeaconDelivery{from, to, beacon}; });
        at(now_ + cfg_.protocol.beacon_period, BeaconTick{ev.node});
    }

    void handle(BeaconDelivery &ev)
    {
        // Beacon receptions are not traced individually; the tx record lists receivers.
        if (!node(ev.to).alive || !in_range(pos(ev.from), pos(ev.to), cfg_.radio) || lost())
        {
            return;
        }
        node(ev.to).repository.update(*ev.beacon, now_);
    }

    void handle(RequestDelivery &ev)
    {
        const auto id = ev.pkt->id.str();
        if (!delivered(ev.from, ev.to, "req", id))
        {
            return;
        }
        trace_.record(now_, "rx", kv("node", raw(ev.to)), kv("from", raw(ev.from)), kv("pkt", "req"), kv("id", id),
                      kv("ttl", ev.pkt->ttl), kv("hop", ev.pkt->hop_count));
        process_request(ev.to, *ev.pkt, ev.from);
    }

    void process_request(NodeId at_node, const RequestPacket &pkt, std::optional<NodeId> from)
    {
        auto &n = node(at_node);
        const auto hosted = offers(n);
        auto decision = handle_request(n.id, hosted, n.repository, n.seen, pkt);
        const auto id = pkt.id.str();
        if (decision.outcome == RequestOutcome::Duplicate)
        {
            trace_.record(now_, "drop", kv("node", raw(at_node)), kv("pkt", "req"), kv("id", id), kv("reason", "dup"));
            return;
        }
        trace_.record(now_, "process", kv("node", raw(at_node)), kv("id", id), kv("ttl", pkt.ttl),
                      kv("hop", pkt.hop_count), kv("matches", decision.matches.size()));
        for (const auto &m : decision.matches)
        {
            send_reply(n, pkt, m);
        }
        if (decision.forward)
        {
            if (from && misbehaves(n))
            {
                trace_.record(now_, "drop", kv("node", raw(at_node)), kv("pkt", "req"), kv("id", id),
                              kv("reason", "misbehave"));
                observe(*from, n.id, false);
                return;
            }
            if (from)
            {
                observe(*from, n.id, true);
            }
            auto fwd = std::make_shared<const RequestPacket>(std::move(*decision.forward));
            const double jitter = from && cfg_.protocol.rebroadcast_jitter > 0.0 ? coin() * cfg_.protocol.rebroadcast_jitter : 0.0;
            at(now_ + jitter, Rebroadcast{n.id, fwd});
        }
        else
        {
            trace_.record(now_, "drop", kv("node", raw(at_node)), kv("pkt", "req"), kv("id", id), kv("reason", "ttl"));
        }
    }

    void handle(Rebroadcast &ev)
    {
        auto &n = node(ev.node);
        const NodeId from = n.id;
        auto pkt = ev.pkt;
        broadcast<RequestPacket>(n, "req", pkt->id.str(), std::to_string(pkt->ttl), cfg_.protocol.request_bits,
                                 [&](NodeId to) { return RequestDelivery{from, to, pkt}; });
    }

    void send_reply(NodeState &responder, const RequestPacket &pkt, const ServiceMatch &m)
    {
        const std::uint32_t hops = pkt.hop_count + (m.proxy ? 1 : 0);
        ServiceAdvertisement ad;
        ad.node = m.provider;
        ad.service = m.offer.id;
        ad.type = m.offer.type;
        ad.qos.hop_count = std::max<std::uint32_t>(1, hops);
        ad.qos.response_time = total_response_time({m.offer.task_time,
                                                    cfg_.protocol.t_stack_per_hop * (hops + 1),
                                                    hops * airtime(cfg_.protocol.plan_bits),
                                                    cfg_.protocol.t_cd,
                                                    cfg_.protocol.t_ed});
        if (m.proxy)
        {
            const auto *entry = responder.repository.find(m.provider);
            ad.qos.service_failure_rate = m.offer.failure_rate;
            ad.qos.node_energy = entry ? entry->beacon.energy : 0.0;
            ad.qos.throughput = entry ? entry->beacon.throughput : 0.0;
        }
        else
        {
            ad.qos.service_failure_rate = m.offer.failure_rate;
            ad.qos.node_energy = responder.energy.remaining();
            ad.qos.throughput = throughput_of(responder);
        }
        ad.qos.node_reliability = pooled_reliability(responder.id, m.provider);

        ReplyPacket reply{pkt.id, ad, responder.id, {}};
        reply.reverse_route = pkt.route;
        if (reply.reverse_route.back() != responder.id)
        {
            reply.reverse_route.push_back(responder.id);
        }
        std::reverse(reply.reverse_route.begin(), reply.reverse_route.end());
        trace_.record(now_, "reply", kv("node", raw(responder.id)), kv("id", pkt.id.str()),
                      kv("provider", raw(m.provider)), kv("service", raw(m.offer.id)), kv("hop", hops),
                      kv("proxy", int{m.proxy}));
        if (reply.reverse_route.size() == 1)
        {
            reply_arrived(reply);
            return;
        }
        auto p = std::make_shared<RoutedPacket>();
        p->kind = RoutedKind::Reply;
        p->route = reply.reverse_route;
        p->bits = cfg_.protocol.reply_bits;
        p->reply = std::move(reply);
        send_routed(p);
    }

    void handle(UnicastDelivery &ev)
    {
        auto &p = *ev.pkt;
        const auto label = packet_label(p);
        if (!delivered(ev.from, ev.to, kind_name(p.kind), label))
        {
            return;
        }
        trace_.record(now_, "rx", kv("node", raw(ev.to)), kv("from", raw(ev.from)), kv("pkt", kind_name(p.kind)),
                      kv("id", label), kv("ttl", "-"), kv("hop", p.hop));
        if (p.hop + 1 == p.route.size())
        {
            arrive(p, ev.from);
            return;
        }
        auto &relay = node(ev.to);
        if (misbehaves(relay))
        {
            trace_.record(now_, "drop", kv("node", raw(ev.to)), kv("pkt", kind_name(p.kind)), kv("id", label),
                          kv("reason", "misbehave"));
            observe(ev.from, relay.id, false);
            return;
        }
        observe(ev.from, relay.id, true);
        send_routed(ev.pkt);
    }

    void arrive(RoutedPacket &p, std::optional<NodeId> last_hop)
    {
        switch (p.kind)
        {
        case RoutedKind::Reply:
            reply_arrived(*p.reply);
            break;
        case RoutedKind::Plan:
            provider_receive(p.creq, p.round, p.stage, p.route.back(), last_hop);
            break;
        case RoutedKind::Result:
            result_arrived(p.creq, p.round);
            break;
        }
    }

    void reply_arrived(ReplyPacket reply)
    {
        auto it = request_owner_.find(reply.id);
        if (it == request_owner_.end())
        {
            return;
        }
        auto &c = composites_.at(it->second.first);
        const bool current = c.phase == Phase::Discovering && c.round == it->second.second;
        trace_.record(now_, current ? "reply_in" : "reply_late", kv("creq", c.id), kv("id", reply.id.str()),
                      kv("provider", raw(reply.ad.node)), kv("responder", raw(reply.responder)),
                      kv("service", raw(reply.ad.service)), kv("type", raw(reply.ad.type)),
                      kv("hop", reply.ad.qos.hop_count.value_or(0)));
        if (!current)
        {
            return;
        }
        reply.ad.received_at = now_;
        c.replies.push_back({reply.id, reply.ad});
    }

    void handle(RequestStart &ev)
    {
        const auto &r = requests_[ev.index];
        if (!node(r.initiator).alive)
        {
            trace_.record(now_, "request_skip", kv("node", raw(r.initiator)), kv("reason", "dead"));
            return;
        }
        Composite c;
        c.id = composites_.size();
        c.initiator = r.initiator;
        c.plan = r.plan;
        trace_.record(now_, "compose_start", kv("creq", c.id), kv("init", raw(c.initiator)),
                      kv("plan", join_ids(c.plan | std::views::transform([](auto t) { return raw(t); }))));
        composites_.push_back(std::move(c));
        start_round(composites_.back());
    }

    void start_round(Composite &c)
    {
        c.round += 1;
        c.phase = Phase::Discovering;
        c.replies.clear();
        c.path.clear();
        c.progress = -1;
        auto &seq = request_seq_[raw(c.initiator)];
        auto packets = split_request(c.initiator, c.plan, seq, cfg_.protocol.ttl);
        seq += static_cast<std::uint32_t>(packets.size());
        std::string ids;
        for (const auto &p : packets)
        {
            request_owner_[p.id] = {c.id, c.round};
            ids += (ids.empty() ? "" : ",") + p.id.str();
        }
        trace_.record(now_, "discover", kv("creq", c.id), kv("round", c.round), kv("ids", ids));
        at(now_ + cfg_.protocol.discovery_timeout, DiscoveryDeadline{c.id, c.round});
        const auto creq = c.id; // process_request may touch composites_ through local replies
        for (const auto &p : packets)
        {
            process_request(composites_[creq].initiator, p, std::nullopt);
        }
    }

    double score(const ServiceAdvertisement &ad, const NormalizationContext &ctx, NodeId initiator)
    {
        double noise = 0.0;
        if (cfg_.trust.noise == NoiseMode::Stochastic && model_.noise_variance > 0.0)
        {
            noise = std::normal_distribution<double>(0.0, std::sqrt(model_.noise_variance))(protocol_rng_);
        }
        if (model_.is_static())
        {
            return trust_score(ad.qos, ctx, model_, noise);
        }
        const auto key = std::make_tuple(raw(initiator), raw(ad.type), raw(ad.node));
        auto it = filters_.find(key);
        if (it == filters_.end())
        {
            it = filters_.emplace(key, HammersteinFilter(model_)).first;
        }
        const auto u = normalize(ad.qos, ctx);
        return std::clamp(kMaxTrust * it->second.step(u, noise), 0.0, kMaxTrust);
    }

    static std::string matrix_cells(const TrustMatrix &m)
    {
        std::string s;
        for (std::size_t r = 0; r < m.row_count(); ++r)
        {
            if (r > 0)
            {
                s.push_back(';');
            }
            for (std::size_t c = 0; c < m.column_count(); ++c)
            {
                if (c > 0)
                {
                    s.push_back(',');
                }
                const auto &cell = m.at(r, c);
                s += cell ? fmt::format("{}", cell->trust) : "-";
            }
        }
        return s.empty() ? "-" : s;
    }

    void handle(DiscoveryDeadline &ev)
    {
        auto &c = composites_.at(ev.creq);
        if (c.round != ev.round || c.phase != Phase::Discovering)
        {
            return;
        }
        const auto groups = collect_replies(c.replies, c.plan, now_);
        std::vector<ServiceAdvertisement> ads;
        for (const auto &[type, list] : groups)
        {
            ads.insert(ads.end(), list.begin(), list.end());
        }
        const auto request = make_plan(c.plan);
        const NodeId initiator = c.initiator;
        try
        {
            const auto matrix = build_trust_matrix(
                request, ads, cfg_.trust.inputs,
                [&](const ServiceAdvertisement &ad, const NormalizationContext &ctx) {
                    return score(ad, ctx, initiator);
                });
            trace_.record(now_, "matrix", kv("creq", c.id), kv("round", c.round),
                          kv("rows", join_ids(matrix.rows() | std::views::transform([](auto t) { return raw(t); }))),
                          kv("cols", join_ids(matrix.columns() | std::views::transform([](auto n) { return raw(n); }))),
                          kv("cells", matrix_cells(matrix)));
            if (cfg_.method == Method::Proposed)
            {
                c.path = build_composition_path(matrix, select_providers(matrix));
            }
            else
            {
                c.path = baseline_compose(request, ads);
            }
        }
        catch (const NoProviderError &e)
        {
            trace_.record(now_, "no_provider", kv("creq", c.id), kv("round", c.round),
                          kv("service", raw(e.service())));
            recompose(c, "no_provider");
            return;
        }

        c.hops.clear();
        for (const auto &entry : c.path)
        {
            std::uint32_t h = 1;
            for (const auto &ad : ads)
            {
                if (ad.node == entry.node && ad.service == entry.concrete)
                {
                    h = ad.qos.hop_count.value_or(1);
                }
            }
            c.hops.push_back(h);
        }
        c.stage_timeouts.clear();
        for (std::size_t s = 0; s < c.path.size(); ++s)
        {
            const auto &entry = c.path[s];
            double rt = 0.0;
            for (const auto &ad : ads)
            {
                if (ad.node == entry.node && ad.service == entry.concrete)
                {
                    rt = ad.qos.response_time;
                }
            }
            const std::uint32_t prev_hops = s == 0 ? 0 : c.hops[s - 1];
            const double transport = (prev_hops + c.hops[s]) * airtime(cfg_.protocol.plan_bits);
            c.stage_timeouts.push_back(cfg_.protocol.stage_timeout_factor * (rt + transport));
        }
        c.stage_timeouts.push_back(cfg_.protocol.stage_timeout_factor * c.hops.back() *
                                   airtime(cfg_.protocol.result_bits));

        trace_.record(now_, "path", kv("creq", c.id), kv("round", c.round), kv("method", method_name(cfg_.method)),
                      kv("nodes", join_ids(c.path | std::views::transform([](const auto &e) { return raw(e.node); }))),
                      kv("services",
                         join_ids(c.path | std::views::transform([](const auto &e) { return raw(e.concrete); }))));
        c.phase = Phase::Executing;
        send_handoff(c, 0, c.initiator);
    }

    void send_handoff(Composite &c, std::size_t stage, NodeId from)
    {
        const bool result = stage == c.path.size();
        const NodeId dest = result ? c.initiator : c.path[stage].node;
        const double bits = result ? cfg_.protocol.result_bits : cfg_.protocol.plan_bits;
        at(now_ + c.stage_timeouts[stage], StageTimeout{c.id, c.round, stage});
        node(from).payload_bits_sent += bits;
        if (dest == from)
        {
            if (result)
            {
                result_arrived(c.id, c.round);
            }
            else
            {
                provider_receive(c.id, c.round, stage, dest, std::nullopt);
            }
            return;
        }
        auto p = std::make_shared<RoutedPacket>();
        p->kind = result ? RoutedKind::Result : RoutedKind::Plan;
        p->bits = bits;
        p->creq = c.id;
        p->round = c.round;
        p->stage = stage;
        auto r = route(from, dest);
        if (!r)
        {
            trace_.record(now_, "drop", kv("node", raw(from)), kv("pkt", kind_name(p->kind)), kv("id", packet_label(*p)),
                          kv("reason", "no_route"));
            return;
        }
        p->route = std::move(*r);
        send_routed(p);
    }

    void provider_receive(std::uint64_t creq, std::uint32_t round, std::size_t stage, NodeId provider,
                          std::optional<NodeId> last_hop)
    {
        auto &c = composites_.at(creq);
        if (c.round != round || c.phase != Phase::Executing)
        {
            return;
        }
        auto &n = node(provider);
        if (misbehaves(n))
        {
            trace_.record(now_, "drop", kv("node", raw(provider)), kv("pkt", "plan"),
                          kv("id", std::to_string(creq) + "/" + std::to_string(round) + "/" + std::to_string(stage)),
                          kv("reason", "misbehave"));
            if (last_hop)
            {
                observe(*last_hop, provider, false);
            }
            return;
        }
        if (last_hop)
        {
            observe(*last_hop, provider, true);
        }
        const auto &svc = find_service(n, c.path[stage].concrete);
        at(now_ + svc.task_time, ServiceDone{creq, round, stage, provider});
    }

    HostedService &find_service(NodeState &n, ServiceId id)
    {
        for (auto &s : n.services)
        {
            if (s.id == id)
            {
                return s;
            }
        }
        throw std::logic_error("provider does not host the chosen service");
    }

    void handle(ServiceDone &ev)
    {
        auto &c = composites_.at(ev.creq);
        auto &n = node(ev.node);
        if (c.round != ev.round || c.phase != Phase::Executing || !n.alive)
        {
            return;
        }
        auto &svc = find_service(n, c.path[ev.stage].concrete);
        svc.runtime_runs += 1;
        if (coin() < svc.failure_prob)
        {
            svc.runtime_failures += 1;
            trace_.record(now_, "svc_fail", kv("creq", c.id), kv("round", c.round), kv("stage", ev.stage),
                          kv("node", raw(n.id)), kv("service", raw(svc.id)));
            return;
        }
        trace_.record(now_, "stage", kv("creq", c.id), kv("round", c.round), kv("stage", ev.stage),
                      kv("node", raw(n.id)));
        c.progress = static_cast<std::ptrdiff_t>(ev.stage);
        send_handoff(c, ev.stage + 1, n.id);
    }

    void result_arrived(std::uint64_t creq, std::uint32_t round)
    {
        auto &c = composites_.at(creq);
        if (c.round != round || c.phase != Phase::Executing)
        {
            return;
        }
        c.phase = Phase::Done;
        c.progress = static_cast<std::ptrdiff_t>(c.path.size());
        trace_.record(now_, "deliver", kv("creq", c.id), kv("node", raw(c.initiator)),
                      kv("bits", cfg_.protocol.result_bits));
        trace_.record(now_, "compose_ok", kv("creq", c.id), kv("rounds", c.round));
    }

    void handle(StageTimeout &ev)
    {
        auto &c = composites_.at(ev.creq);
        if (c.round != ev.round || c.phase != Phase::Executing ||
            c.progress >= static_cast<std::ptrdiff_t>(ev.stage))
        {
            return;
        }
        trace_.record(now_, "path_fail", kv("creq", c.id), kv("round", c.round), kv("stage", ev.stage),
                      kv("reason", "timeout"));
        recompose(c, "path_failure");
    }

    void recompose(Composite &c, std::string_view reason)
    {
        if (c.recompositions < cfg_.protocol.max_recompositions && now_ < cfg_.duration &&
            node(c.initiator).alive)
        {
            c.recompositions += 1;
            start_round(c);
            return;
        }
        c.phase = Phase::Done;
        trace_.record(now_, "compose_fail", kv("creq", c.id), kv("reason", reason));
    }

    ScenarioConfig cfg_;
    HammersteinModel model_;
    Arena arena_;
    std::mt19937_64 protocol_rng_;
    std::vector<NodeState> nodes_;
    std::vector<double> beacon_offsets_;
    std::vector<ScheduledRequest> requests_;
    std::deque<Composite> composites_;
    std::unordered_map<RequestId, std::pair<std::uint64_t, std::uint32_t>> request_owner_;
    std::unordered_map<std::uint32_t, std::uint32_t> request_seq_;
    std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>, HammersteinFilter> filters_;
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    std::uint64_t next_seq_ = 0;
    std::uint64_t events_processed_ = 0;
    double now_ = 0.0;
    TraceWriter trace_;
};

inline RunResult run(const ScenarioConfig &config)
{
    return Simulator(config).run();
}

} // namespace qoscomp
