#pragma once

// Decentralized service discovery: one-hop repositories filled by beacons,
// atomic requests flooded under a TTL budget with duplicate suppression,
// and QoS-bearing replies routed back to the initiator.

#include "qoscomp/composition.hpp"
#include "qoscomp/qos_metrics.hpp"
#include "qoscomp/types.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_set>
#include <vector>

namespace qoscomp {

/// Static attributes a node advertises for one hosted service.
struct ServiceOffer
{
    ServiceId id{};
    ServiceType type{};
    double task_time = 0.0;    // s
    double failure_rate = 0.0; // 1/s
};

struct ServiceBeacon
{
    NodeId origin{};
    std::uint64_t seq = 0;
    std::vector<ServiceOffer> services;
    double energy = 0.0;     // J remaining at send time
    double throughput = 0.0; // bit/s of composition payload sent so far
};

struct RepositoryEntry
{
    ServiceBeacon beacon;
    SimTime last_heard = 0.0;
};

class Repository
{
public:
    /// Returns false when the beacon is not newer than what is stored.
    bool update(const ServiceBeacon &beacon, SimTime now)
    {
        auto it = entries_.find(raw(beacon.origin));
        if (it != entries_.end() && beacon.seq <= it->second.beacon.seq)
        {
            return false;
        }
        entries_[raw(beacon.origin)] = {beacon, now};
        return true;
    }

    /// Drops entries not heard for longer than horizon. Returns how many.
    std::size_t evict(SimTime now, double horizon)
    {
        std::size_t n = 0;
        for (auto it = entries_.begin(); it != entries_.end();)
        {
            if (now - it->second.last_heard > horizon)
            {
                it = entries_.erase(it);
                ++n;
            }
            else
            {
                ++it;
            }
        }
        return n;
    }

    const RepositoryEntry *find(NodeId n) const
    {
        auto it = entries_.find(raw(n));
        return it == entries_.end() ? nullptr : &it->second;
    }

    std::size_t size() const { return entries_.size(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

private:
    std::map<std::uint32_t, RepositoryEntry> entries_; // ordered for deterministic iteration
};

struct RequestPacket
{
    RequestId id;
    ServiceType type{};
    std::uint32_t ttl = 0;
    NodeId initiator{};
    std::uint32_t hop_count = 0;
    std::vector<NodeId> route; // initiator first, last element is the current holder
};

struct ReplyPacket
{
    RequestId id;
    ServiceAdvertisement ad; // received_at is set on arrival at the initiator
    NodeId responder{};
    std::vector<NodeId> reverse_route; // responder first, initiator last
};

/// One atomic request per entry of the composite, each with its own id.
inline std::vector<RequestPacket> split_request(NodeId initiator, std::span<const ServiceType> composite,
                                                std::uint32_t first_seq, std::uint32_t ttl)
{
    if (composite.empty())
    {
        throw std::invalid_argument("split_request: empty composite request");
    }
    std::vector<RequestPacket> out;
    out.reserve(composite.size());
    for (std::size_t i = 0; i < composite.size(); ++i)
    {
        out.push_back({{initiator, first_seq + static_cast<std::uint32_t>(i)},
                       composite[i],
                       ttl,
                       initiator,
                       0,
                       {initiator}});
    }
    return out;
}

struct ServiceMatch
{
    NodeId provider{};
    ServiceOffer offer;
    bool proxy = false; // answered from the repository on behalf of a neighbor
};

enum class RequestOutcome
{
    Duplicate,
    Processed,
};

struct RequestDecision
{
    RequestOutcome outcome = RequestOutcome::Processed;
    std::vector<ServiceMatch> matches;
    std::optional<RequestPacket> forward; // ttl-1, hop+1, route extended
    bool ttl_exhausted = false;           // processed but not forwarded
};

/// Protocol decision for one delivered request. Self-hosted matches are
/// always answered. Neighbor matches from the repository are answered
/// only where the flood stops (ttl == 0), since those neighbors will not
/// see the request themselves. Marks the request as seen.
inline RequestDecision handle_request(NodeId self, std::span<const ServiceOffer> hosted,
                                      const Repository &repo,
                                      std::unordered_set<RequestId> &seen, const RequestPacket &pkt)
{
    RequestDecision d;
    if (!seen.insert(pkt.id).second)
    {
        d.outcome = RequestOutcome::Duplicate;
        return d;
    }
    for (const auto &offer : hosted)
    {
        if (offer.type == pkt.type)
        {
            d.matches.push_back({self, offer, false});
        }
    }
    if (pkt.ttl == 0)
    {
        for (const auto &[id, entry] : repo)
        {
            if (entry.beacon.origin == self)
            {
                continue;
            }
            for (const auto &offer : entry.beacon.services)
            {
                if (offer.type == pkt.type)
                {
                    d.matches.push_back({entry.beacon.origin, offer, true});
                }
            }
        }
        d.ttl_exhausted = true;
        return d;
    }
    RequestPacket fwd = pkt;
    fwd.ttl -= 1;
    fwd.hop_count += 1;
    // The initiator already heads the route.
    if (fwd.route.empty() || fwd.route.back() != self)
    {
        fwd.route.push_back(self);
    }
    d.forward = std::move(fwd);
    return d;
}

struct TimedReply
{
    RequestId id;
    ServiceAdvertisement ad; // ad.received_at is the arrival time
};

/// Replies arriving at or before the deadline, grouped per abstract
/// service (latest advertisement per node and concrete service). Services
/// nobody answered map to an empty list.
inline std::map<std::uint32_t, std::vector<ServiceAdvertisement>>
collect_replies(std::span<const TimedReply> replies, std::span<const ServiceType> wanted, SimTime deadline)
{
    std::map<std::uint32_t, std::vector<ServiceAdvertisement>> raw_groups;
    for (auto t : wanted)
    {
        raw_groups[raw(t)];
    }
    for (const auto &r : replies)
    {
        if (r.ad.received_at > deadline)
        {
            continue;
        }
        auto it = raw_groups.find(raw(r.ad.type));
        if (it != raw_groups.end())
        {
            it->second.push_back(r.ad);
        }
    }
    for (auto &[type, ads] : raw_groups)
    {
        ads = dedup_latest(ads);
    }
    return raw_groups;
}

} // namespace qoscomp
