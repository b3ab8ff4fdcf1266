#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>

namespace qoscomp {

enum class NodeId : std::uint32_t
{
};

/// Abstract service type (what a composite request asks for).
enum class ServiceType : std::uint32_t
{
};

/// Concrete service instance deployed on a node.
enum class ServiceId : std::uint32_t
{
};

template <typename Id>
constexpr std::uint32_t raw(Id id) noexcept
{
    return static_cast<std::uint32_t>(id);
}

inline constexpr NodeId node(std::uint32_t v) noexcept { return NodeId{v}; }
inline constexpr ServiceType stype(std::uint32_t v) noexcept { return ServiceType{v}; }
inline constexpr ServiceId sid(std::uint32_t v) noexcept { return ServiceId{v}; }

/// Initiator id plus a per-initiator sequence number.
struct RequestId
{
    NodeId initiator{};
    std::uint32_t seq = 0;

    auto operator<=>(const RequestId &) const = default;

    std::string str() const { return std::to_string(raw(initiator)) + ":" + std::to_string(seq); }
};

using SimTime = double;

} // namespace qoscomp

template <>
struct std::hash<qoscomp::RequestId>
{
    std::size_t operator()(const qoscomp::RequestId &r) const noexcept
    {
        return (static_cast<std::size_t>(qoscomp::raw(r.initiator)) << 32) ^ r.seq;
    }
};
