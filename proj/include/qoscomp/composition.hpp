#pragma once

// Trust matrix (abstract services x nodes), per-row argmax provider
// selection, composition path and the source-routed handoff schedule.

#include "qoscomp/hammerstein.hpp"
#include "qoscomp/types.hpp"

#include <algorithm>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace qoscomp {

struct AbstractService
{
    ServiceType id{};
    std::size_t position = 0;
};

inline std::vector<AbstractService> make_plan(std::span<const ServiceType> types)
{
    std::vector<AbstractService> plan;
    for (std::size_t i = 0; i < types.size(); ++i)
    {
        plan.push_back({types[i], i});
    }
    return plan;
}

struct ServiceAdvertisement
{
    NodeId node{};
    ServiceId service{};
    ServiceType type{};
    QosVector qos;
    SimTime received_at = 0.0;
};

struct TrustCell
{
    double trust = 0.0;
    ServiceId service{};
    SimTime received_at = 0.0;
};

class TrustMatrix
{
public:
    TrustMatrix() = default;
    TrustMatrix(std::vector<ServiceType> rows, std::vector<NodeId> columns)
        : rows_(std::move(rows)), columns_(std::move(columns)), cells_(rows_.size() * columns_.size())
    {
    }

    std::size_t row_count() const { return rows_.size(); }
    std::size_t column_count() const { return columns_.size(); }
    const std::vector<ServiceType> &rows() const { return rows_; }
    const std::vector<NodeId> &columns() const { return columns_; }

    const std::optional<TrustCell> &at(std::size_t r, std::size_t c) const { return cells_.at(index(r, c)); }
    std::optional<TrustCell> &at(std::size_t r, std::size_t c) { return cells_.at(index(r, c)); }

    void set(std::size_t r, std::size_t c, TrustCell cell)
    {
        if (!(cell.trust >= 0.0 && cell.trust <= kMaxTrust))
        {
            throw std::invalid_argument("TrustMatrix: trust must lie in [0,100]");
        }
        at(r, c) = cell;
    }

    std::optional<std::size_t> column_of(NodeId n) const
    {
        auto it = std::find(columns_.begin(), columns_.end(), n);
        if (it == columns_.end())
        {
            return std::nullopt;
        }
        return static_cast<std::size_t>(it - columns_.begin());
    }

private:
    std::size_t index(std::size_t r, std::size_t c) const
    {
        if (r >= rows_.size() || c >= columns_.size())
        {
            throw std::out_of_range("TrustMatrix: cell out of range");
        }
        return r * columns_.size() + c;
    }

    std::vector<ServiceType> rows_;
    std::vector<NodeId> columns_;
    std::vector<std::optional<TrustCell>> cells_;
};

/// Score of one candidate given its row's normalization context.
using TrustScorer = std::function<double(const ServiceAdvertisement &, const NormalizationContext &)>;

inline TrustScorer static_scorer(const HammersteinModel &model)
{
    return [model](const ServiceAdvertisement &ad, const NormalizationContext &ctx) {
        return trust_score(ad.qos, ctx, model);
    };
}

/// Keeps the latest advertisement per (type, node, concrete service).
inline std::vector<ServiceAdvertisement> dedup_latest(std::span<const ServiceAdvertisement> replies)
{
    std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>, ServiceAdvertisement> latest;
    for (const auto &ad : replies)
    {
        const auto key = std::make_tuple(raw(ad.type), raw(ad.node), raw(ad.service));
        auto it = latest.find(key);
        if (it == latest.end() || ad.received_at > it->second.received_at)
        {
            latest[key] = ad;
        }
    }
    std::vector<ServiceAdvertisement> out;
    out.reserve(latest.size());
    for (auto &[key, ad] : latest)
    {
        out.push_back(ad);
    }
    return out;
}

/// Rows follow the request order; columns are every node that replied,
/// in ascending id. Each row is normalized over its own candidates.
/// A node hosting several instances of one type keeps its best-scoring
/// instance in the cell (lower service id on ties).
inline TrustMatrix build_trust_matrix(std::span<const AbstractService> request,
                                      std::span<const ServiceAdvertisement> replies,
                                      std::span<const MetricInput> inputs, const TrustScorer &scorer)
{
    if (request.empty())
    {
        throw std::invalid_argument("build_trust_matrix: empty request");
    }
    const auto ads = dedup_latest(replies);

    std::vector<NodeId> columns;
    for (const auto &ad : ads)
    {
        columns.push_back(ad.node);
    }
    std::sort(columns.begin(), columns.end());
    columns.erase(std::unique(columns.begin(), columns.end()), columns.end());

    std::vector<ServiceType> rows;
    for (const auto &s : request)
    {
        rows.push_back(s.id);
    }
    TrustMatrix matrix(rows, columns);

    for (std::size_t r = 0; r < request.size(); ++r)
    {
        std::vector<const ServiceAdvertisement *> row_ads;
        std::vector<QosVector> row_qos;
        for (const auto &ad : ads)
        {
            if (ad.type == request[r].id)
            {
                row_ads.push_back(&ad);
                row_qos.push_back(ad.qos);
            }
        }
        if (row_ads.empty())
        {
            continue;
        }
        const auto ctx = build_normalization(row_qos, inputs);
        for (const auto *ad : row_ads)
        {
            const std::size_t c = *matrix.column_of(ad->node);
            const TrustCell cell{scorer(*ad, ctx), ad->service, ad->received_at};
            auto &slot = matrix.at(r, c);
            if (!slot || cell.trust > slot->trust ||
                (cell.trust == slot->trust && raw(cell.service) < raw(slot->service)))
            {
                matrix.set(r, c, cell);
            }
        }
    }
    return matrix;
}

inline TrustMatrix build_trust_matrix(std::span<const AbstractService> request,
                                      std::span<const ServiceAdvertisement> replies,
                                      const HammersteinModel &model,
                                      std::span<const MetricInput> inputs)
{
    return build_trust_matrix(request, replies, inputs, static_scorer(model));
}

class NoProviderError : public std::runtime_error
{
public:
    explicit NoProviderError(ServiceType service)
        : std::runtime_error("no provider for abstract service " + std::to_string(raw(service))),
          service_(service)
    {
    }

    ServiceType service() const { return service_; }

private:
    ServiceType service_;
};

/// Chosen column per row.
using Assignment = std::vector<std::size_t>;

/// True when cell a beats cell b: higher trust, then lower node id, then
/// earlier reply.
inline bool better_candidate(const TrustCell &a, NodeId node_a, const TrustCell &b, NodeId node_b)
{
    if (a.trust != b.trust)
    {
        return a.trust > b.trust;
    }
    if (node_a != node_b)
    {
        return raw(node_a) < raw(node_b);
    }
    return a.received_at < b.received_at;
}

inline Assignment select_providers(const TrustMatrix &matrix)
{
    Assignment assignment;
    assignment.reserve(matrix.row_count());
    for (std::size_t r = 0; r < matrix.row_count(); ++r)
    {
        std::optional<std::size_t> best;
        for (std::size_t c = 0; c < matrix.column_count(); ++c)
        {
            const auto &cell = matrix.at(r, c);
            if (!cell)
            {
                continue;
            }
            if (!best || better_candidate(*cell, matrix.columns()[c], *matrix.at(r, *best),
                                          matrix.columns()[*best]))
            {
                best = c;
            }
        }
        if (!best)
        {
            throw NoProviderError(matrix.rows()[r]);
        }
        assignment.push_back(*best);
    }
    return assignment;
}

struct PathEntry
{
    ServiceType service{};
    NodeId node{};
    ServiceId concrete{};
    double trust = 0.0;

    bool operator==(const PathEntry &) const = default;
};

using CompositionPath = std::vector<PathEntry>;

inline CompositionPath build_composition_path(const TrustMatrix &matrix, const Assignment &assignment)
{
    if (assignment.size() != matrix.row_count())
    {
        throw std::invalid_argument("build_composition_path: assignment does not cover every service");
    }
    CompositionPath path;
    for (std::size_t r = 0; r < assignment.size(); ++r)
    {
        const auto &cell = matrix.at(r, assignment[r]);
        if (!cell)
        {
            throw std::invalid_argument("build_composition_path: assignment picks an absent cell");
        }
        path.push_back({matrix.rows()[r], matrix.columns()[assignment[r]], cell->service, cell->trust});
    }
    return path;
}

/// Endpoint of a handoff; nullopt stands for the composition initiator.
using Endpoint = std::optional<NodeId>;

struct Handoff
{
    Endpoint from;
    Endpoint to;
    std::size_t next_stage = 0;      // index of the stage the receiver runs (== size for the result)
    std::size_t remaining_stages = 0; // plan entries still carried, including the receiver's
};

/// initiator -> provider 1 -> ... -> provider m -> initiator, each hop
/// carrying what is left of the plan.
inline std::vector<Handoff> execution_plan(const CompositionPath &path)
{
    std::vector<Handoff> plan;
    if (path.empty())
    {
        return plan;
    }
    Endpoint prev = std::nullopt;
    for (std::size_t i = 0; i < path.size(); ++i)
    {
        plan.push_back({prev, path[i].node, i, path.size() - i});
        prev = path[i].node;
    }
    plan.push_back({prev, std::nullopt, path.size(), 0});
    return plan;
}

} // namespace qoscomp
