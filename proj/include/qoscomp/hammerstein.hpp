#pragma once

// MISO Hammerstein cascade: memoryless per-input gains feeding one linear
// ARX block. Also the min-max normalization that maps a candidate's
// QosVector onto [0,1] inputs and the trust score built on top of it.

#include "qoscomp/qos_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qoscomp {

enum class GainKind
{
    Identity,
    Polynomial,
    Bernstein,
};

struct GainFunction
{
    GainKind kind = GainKind::Identity;
    // Polynomial: c_j of sum c_j u^j. Bernstein: control values c_j of
    // sum c_j B_{j,n}(u), n = size-1.
    std::vector<double> coefficients;

    static GainFunction identity() { return {}; }
    static GainFunction polynomial(std::vector<double> c) { return {GainKind::Polynomial, std::move(c)}; }
    static GainFunction bernstein(std::vector<double> c) { return {GainKind::Bernstein, std::move(c)}; }
};

inline void validate(const GainFunction &g)
{
    if (g.kind == GainKind::Identity && !g.coefficients.empty())
    {
        throw std::invalid_argument("identity gain takes no coefficients");
    }
    if (g.kind != GainKind::Identity && g.coefficients.empty())
    {
        throw std::invalid_argument("polynomial/bernstein gain needs at least one coefficient");
    }
}

namespace detail {

inline double horner(std::span<const double> c, double u)
{
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it)
    {
        acc = acc * u + *it;
    }
    return acc;
}

// de Casteljau; numerically stable for u in [0,1].
inline double de_casteljau(std::span<const double> c, double u)
{
    std::vector<double> b(c.begin(), c.end());
    for (std::size_t r = 1; r < b.size(); ++r)
    {
        for (std::size_t j = 0; j + r < b.size(); ++j)
        {
            b[j] = (1.0 - u) * b[j] + u * b[j + 1];
        }
    }
    return b.front();
}

} // namespace detail

inline double apply_gain(const GainFunction &g, double u)
{
    switch (g.kind)
    {
    case GainKind::Identity:
        return u;
    case GainKind::Polynomial:
        return detail::horner(g.coefficients, u);
    case GainKind::Bernstein:
        if (!(u >= 0.0 && u <= 1.0))
        {
            throw std::invalid_argument("bernstein gain is defined on [0,1] only");
        }
        return detail::de_casteljau(g.coefficients, u);
    }
    throw std::logic_error("unknown gain kind");
}

struct HammersteinModel
{
    std::vector<GainFunction> gains;            // one per input
    std::vector<double> output_coeffs;          // a_1..a_{n_a}
    std::vector<std::vector<double>> input_coeffs; // per input: b_{0,i}..b_{n_bi,i}
    double noise_variance = 0.0;

    std::size_t inputs() const { return gains.size(); }
    std::size_t output_lag() const { return output_coeffs.size(); }
    std::size_t input_lag(std::size_t i) const { return input_coeffs.at(i).size() - 1; }

    bool is_static() const
    {
        return output_coeffs.empty() &&
               std::all_of(input_coeffs.begin(), input_coeffs.end(),
                           [](const auto &b) { return b.size() == 1; });
    }

    /// Identity gains, zero lags, equal convex weights, no noise.
    static HammersteinModel static_default(std::size_t m)
    {
        if (m == 0)
        {
            throw std::invalid_argument("HammersteinModel needs at least one input");
        }
        HammersteinModel model;
        model.gains.assign(m, GainFunction::identity());
        model.input_coeffs.assign(m, {1.0 / static_cast<double>(m)});
        return model;
    }

    static HammersteinModel static_weighted(std::vector<double> weights)
    {
        auto model = static_default(weights.size());
        for (std::size_t i = 0; i < weights.size(); ++i)
        {
            model.input_coeffs[i] = {weights[i]};
        }
        return model;
    }
};

inline void validate(const HammersteinModel &model)
{
    if (model.gains.empty())
    {
        throw std::invalid_argument("HammersteinModel: no inputs");
    }
    if (model.input_coeffs.size() != model.gains.size())
    {
        throw std::invalid_argument("HammersteinModel: input coefficient lists must match gain count");
    }
    for (const auto &g : model.gains)
    {
        validate(g);
    }
    for (const auto &b : model.input_coeffs)
    {
        if (b.empty())
        {
            throw std::invalid_argument("HammersteinModel: each input needs b_0");
        }
    }
    if (!(model.noise_variance >= 0.0))
    {
        throw std::invalid_argument("HammersteinModel: noise variance must be >= 0");
    }
}

/// One output sample y(t).
/// input_history[i][k] holds u_i(t-k); output_history[j] holds y(t-1-j).
/// Samples beyond the supplied history count as zero.
inline double evaluate(const HammersteinModel &model,
                       std::span<const std::vector<double>> input_history,
                       std::span<const double> output_history, double noise)
{
    if (input_history.size() != model.inputs())
    {
        throw std::invalid_argument("evaluate: expected " + std::to_string(model.inputs()) +
                                    " inputs, got " + std::to_string(input_history.size()));
    }
    double y = 0.0;
    for (std::size_t i = 0; i < model.output_coeffs.size() && i < output_history.size(); ++i)
    {
        y += model.output_coeffs[i] * output_history[i];
    }
    for (std::size_t i = 0; i < model.inputs(); ++i)
    {
        const auto &b = model.input_coeffs[i];
        const auto &u = input_history[i];
        for (std::size_t k = 0; k < b.size() && k < u.size(); ++k)
        {
            y += b[k] * apply_gain(model.gains[i], u[k]);
        }
    }
    return y + noise;
}

inline double evaluate_static(const HammersteinModel &model, std::span<const double> inputs,
                              double noise)
{
    std::vector<std::vector<double>> history;
    history.reserve(inputs.size());
    for (double u : inputs)
    {
        history.push_back({u});
    }
    return evaluate(model, history, {}, noise);
}

/// Stateful stepper that keeps the lagged histories between calls, zero
/// initial conditions.
class HammersteinFilter
{
public:
    explicit HammersteinFilter(HammersteinModel model) : model_(std::move(model))
    {
        validate(model_);
        inputs_.resize(model_.inputs());
    }

    double step(std::span<const double> u, double noise = 0.0)
    {
        if (u.size() != model_.inputs())
        {
            throw std::invalid_argument("HammersteinFilter::step: input arity mismatch");
        }
        for (std::size_t i = 0; i < u.size(); ++i)
        {
            auto &h = inputs_[i];
            h.insert(h.begin(), u[i]);
            if (h.size() > model_.input_coeffs[i].size())
            {
                h.pop_back();
            }
        }
        const double y = evaluate(model_, inputs_, outputs_, noise);
        if (model_.output_lag() > 0)
        {
            outputs_.insert(outputs_.begin(), y);
            if (outputs_.size() > model_.output_lag())
            {
                outputs_.pop_back();
            }
        }
        return y;
    }

    const HammersteinModel &model() const { return model_; }

private:
    HammersteinModel model_;
    std::vector<std::vector<double>> inputs_;
    std::vector<double> outputs_;
};

// --- normalization --------------------------------------------------------

enum class Metric
{
    ResponseTime,
    FailureRate,
    Energy,
    Reliability,
    HopCount,
    Throughput,
};

enum class Polarity
{
    Benefit,
    Cost,
};

inline constexpr Polarity default_polarity(Metric m)
{
    switch (m)
    {
    case Metric::ResponseTime:
    case Metric::FailureRate:
    case Metric::HopCount:
        return Polarity::Cost;
    case Metric::Energy:
    case Metric::Reliability:
    case Metric::Throughput:
        return Polarity::Benefit;
    }
    return Polarity::Benefit;
}

inline std::string_view metric_name(Metric m)
{
    switch (m)
    {
    case Metric::ResponseTime: return "response_time";
    case Metric::FailureRate: return "service_failure_rate";
    case Metric::Energy: return "node_energy";
    case Metric::Reliability: return "node_reliability";
    case Metric::HopCount: return "hop_count";
    case Metric::Throughput: return "throughput";
    }
    return "?";
}

inline Metric metric_from_name(std::string_view name)
{
    for (auto m : {Metric::ResponseTime, Metric::FailureRate, Metric::Energy, Metric::Reliability,
                   Metric::HopCount, Metric::Throughput})
    {
        if (metric_name(m) == name)
        {
            return m;
        }
    }
    throw std::invalid_argument("unknown metric '" + std::string(name) + "'");
}

inline double metric_value(const QosVector &v, Metric m)
{
    switch (m)
    {
    case Metric::ResponseTime: return v.response_time;
    case Metric::FailureRate: return v.service_failure_rate;
    case Metric::Energy: return v.node_energy;
    case Metric::Reliability: return v.node_reliability;
    case Metric::HopCount:
        if (!v.hop_count)
        {
            throw std::invalid_argument("hop_count input enabled but candidate has none");
        }
        return static_cast<double>(*v.hop_count);
    case Metric::Throughput:
        if (!v.throughput)
        {
            throw std::invalid_argument("throughput input enabled but candidate has none");
        }
        return *v.throughput;
    }
    return 0.0;
}

struct MetricInput
{
    Metric metric;
    Polarity polarity;
};

inline std::vector<MetricInput> core_inputs()
{
    std::vector<MetricInput> in;
    for (auto m : {Metric::ResponseTime, Metric::FailureRate, Metric::Energy, Metric::Reliability})
    {
        in.push_back({m, default_polarity(m)});
    }
    return in;
}

struct MetricRange
{
    MetricInput input;
    double min = 0.0;
    double max = 0.0;

    bool degenerate() const { return min == max; }
};

struct NormalizationContext
{
    std::vector<MetricRange> ranges;
};

inline NormalizationContext build_normalization(std::span<const QosVector> candidates,
                                                std::span<const MetricInput> inputs)
{
    if (candidates.empty())
    {
        throw std::invalid_argument("build_normalization: no candidates");
    }
    NormalizationContext ctx;
    for (const auto &in : inputs)
    {
        MetricRange r{in, metric_value(candidates.front(), in.metric),
                      metric_value(candidates.front(), in.metric)};
        for (const auto &c : candidates)
        {
            const double x = metric_value(c, in.metric);
            r.min = std::min(r.min, x);
            r.max = std::max(r.max, x);
        }
        ctx.ranges.push_back(r);
    }
    return ctx;
}

inline std::vector<double> normalize(const QosVector &v, const NormalizationContext &ctx)
{
    std::vector<double> out;
    out.reserve(ctx.ranges.size());
    for (const auto &r : ctx.ranges)
    {
        if (r.degenerate())
        {
            out.push_back(1.0);
            continue;
        }
        const double x = std::clamp(metric_value(v, r.input.metric), r.min, r.max);
        const double span = r.max - r.min;
        out.push_back(r.input.polarity == Polarity::Benefit ? (x - r.min) / span
                                                            : (r.max - x) / span);
    }
    return out;
}

inline constexpr double kMaxTrust = 100.0;

inline double trust_score(const QosVector &v, const NormalizationContext &ctx,
                          const HammersteinModel &model, double noise = 0.0)
{
    if (!model.is_static())
    {
        throw std::invalid_argument("trust_score: model must be static; use HammersteinFilter");
    }
    const auto u = normalize(v, ctx);
    return std::clamp(kMaxTrust * evaluate_static(model, u, noise), 0.0, kMaxTrust);
}

} // namespace qoscomp
