#pragma once

// Per-candidate QoS quantities: radio energy, Bayesian forwarding
// reliability, service failure rate and response-time decomposition.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>

namespace qoscomp {

struct EnergyParams
{
    double e_act = 50e-9;  // J/bit, transmitter/receiver electronics
    double e_amp = 100e-12; // J/bit/m^2, amplifier
};

/// First-order radio model: both ends pay the electronics cost, the
/// sender additionally pays the amplifier term that grows with d^2.
inline double transmission_energy(double bits, double distance, const EnergyParams &p)
{
    if (!(bits >= 0.0) || !(distance >= 0.0))
    {
        throw std::invalid_argument("transmission_energy: bits and distance must be >= 0");
    }
    return 2.0 * p.e_act * bits + p.e_amp * distance * distance * bits;
}

/// Sender share of transmission_energy.
inline double tx_energy(double bits, double distance, const EnergyParams &p)
{
    return p.e_act * bits + p.e_amp * distance * distance * bits;
}

/// Receiver share of transmission_energy.
inline double rx_energy(double bits, const EnergyParams &p)
{
    return p.e_act * bits;
}

struct EnergyAccount
{
    double initial = 0.0;
    double consumed = 0.0;

    double remaining() const { return std::max(0.0, initial - consumed); }
    bool dead() const { return consumed >= initial; }
};

struct DepleteResult
{
    EnergyAccount account;
    double charged = 0.0; // amount actually taken, <= requested
    bool dead = false;
};

// Saturating: a node never goes below zero, it just dies.
inline DepleteResult deplete(EnergyAccount account, double amount)
{
    if (amount < 0.0)
    {
        throw std::invalid_argument("deplete: amount must be >= 0");
    }
    const double take = std::min(amount, account.remaining());
    account.consumed += take;
    if (account.remaining() <= 0.0)
    {
        account.consumed = account.initial;
    }
    return {account, take, account.dead()};
}

/// Beta-style reputation about one subject node, built from counts of
/// packets it forwarded correctly out of the packets it was handed.
struct ReliabilityTracker
{
    double alpha = 0.0;
    double beta = 0.0;
    double prior_alpha = 0.0;
    double prior_beta = 0.0;

    static ReliabilityTracker with_prior(double a, double b)
    {
        if (a < 0.0 || b < 0.0)
        {
            throw std::invalid_argument("ReliabilityTracker: prior must be >= 0");
        }
        return {a, b, a, b};
    }
};

inline ReliabilityTracker observe_forwarding(ReliabilityTracker t, std::uint64_t forwarded,
                                             std::uint64_t received)
{
    if (forwarded > received)
    {
        throw std::invalid_argument("observe_forwarding: forwarded count exceeds received count");
    }
    t.alpha += static_cast<double>(forwarded);
    t.beta += static_cast<double>(received - forwarded);
    return t;
}

inline constexpr double kEmptyReliability = 0.5;

inline double reliability_expectation(const ReliabilityTracker &t,
                                      double empty_default = kEmptyReliability)
{
    const double total = t.alpha + t.beta;
    if (total <= 0.0)
    {
        return empty_default;
    }
    return t.alpha / total;
}

struct FailureWindow
{
    std::uint64_t failures = 0;
    double window = 0.0; // seconds
};

inline double service_failure_rate(const FailureWindow &w)
{
    if (!(w.window > 0.0))
    {
        throw std::invalid_argument("service_failure_rate: window must be > 0");
    }
    return static_cast<double>(w.failures) / w.window;
}

struct ResponseTimeComponents
{
    double t_task = 0.0;
    double t_stack = 0.0;
    double t_transport = 0.0;
    double t_cd = 0.0; // compression/decompression
    double t_ed = 0.0; // encryption/decryption
};

inline double total_response_time(const ResponseTimeComponents &c)
{
    if (c.t_task < 0.0 || c.t_stack < 0.0 || c.t_transport < 0.0 || c.t_cd < 0.0 || c.t_ed < 0.0)
    {
        throw std::invalid_argument("total_response_time: components must be >= 0");
    }
    return c.t_task + c.t_stack + c.t_transport + c.t_cd + c.t_ed;
}

/// Four core inputs plus the optional extras (hop count, measured throughput).
struct QosVector
{
    double response_time = 0.0;        // s, cost
    double service_failure_rate = 0.0; // 1/s, cost
    double node_energy = 0.0;          // J remaining, benefit
    double node_reliability = kEmptyReliability; // [0,1], benefit
    std::optional<std::uint32_t> hop_count; // cost
    std::optional<double> throughput;       // bit/s, benefit
};

inline bool is_valid(const QosVector &v)
{
    const bool finite = std::isfinite(v.response_time) && std::isfinite(v.service_failure_rate) &&
                        std::isfinite(v.node_energy) && std::isfinite(v.node_reliability) &&
                        (!v.throughput || std::isfinite(*v.throughput));
    return finite && v.node_reliability >= 0.0 && v.node_reliability <= 1.0 &&
           (!v.hop_count || *v.hop_count >= 1);
}

} // namespace qoscomp
