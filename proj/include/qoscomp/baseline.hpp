#pragma once

// Reference composition without QoS optimization: every abstract service
// goes to the first provider whose reply reached the initiator, the way
// an AODV-style first-responder scheme binds services.

#include "qoscomp/composition.hpp"

#include <limits>
#include <span>

namespace qoscomp {

/// True when a arrived before b; ties by hop count, then node id.
inline bool earlier_reply(const ServiceAdvertisement &a, const ServiceAdvertisement &b)
{
    if (a.received_at != b.received_at)
    {
        return a.received_at < b.received_at;
    }
    const auto ha = a.qos.hop_count.value_or(std::numeric_limits<std::uint32_t>::max());
    const auto hb = b.qos.hop_count.value_or(std::numeric_limits<std::uint32_t>::max());
    if (ha != hb)
    {
        return ha < hb;
    }
    if (a.node != b.node)
    {
        return raw(a.node) < raw(b.node);
    }
    return raw(a.service) < raw(b.service);
}

inline CompositionPath baseline_compose(std::span<const AbstractService> request,
                                        std::span<const ServiceAdvertisement> replies)
{
    CompositionPath path;
    for (const auto &s : request)
    {
        const ServiceAdvertisement *first = nullptr;
        for (const auto &ad : replies)
        {
            if (ad.type == s.id && (!first || earlier_reply(ad, *first)))
            {
                first = &ad;
            }
        }
        if (!first)
        {
            throw NoProviderError(s.id);
        }
        path.push_back({s.id, first->node, first->service, 0.0});
    }
    return path;
}

} // namespace qoscomp
