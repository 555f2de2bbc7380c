#pragma once

#include "cogmesh/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

namespace cogmesh::qos {

// Observed QoS on one channel: bandwidth in kb/s, delay and jitter in ms,
// error rate in percent.
struct QosMeasurement {
    double bandwidth_kbps = 0.0;
    double delay_ms = 0.0;
    double jitter_ms = 0.0;
    double error_rate_pct = 0.0;

    bool operator==(const QosMeasurement&) const = default;
};

// Ordered by severity: C1 is the ideal class, C3 unusable.
enum class QosClass : int { C1 = 1, C2 = 2, C3 = 3 };

enum class Parameter { Bandwidth, Delay, Jitter, Error };

inline constexpr std::array<Parameter, 4> kParameters{
    Parameter::Bandwidth, Parameter::Delay, Parameter::Jitter, Parameter::Error};

// Class boundaries for video conferencing. Endpoints belong to C2.
inline constexpr double kBandwidthHighKbps = 384.0;
inline constexpr double kBandwidthLowKbps = 162.0;
inline constexpr double kDelayLowMs = 200.0;
inline constexpr double kDelayHighMs = 400.0;
inline constexpr double kJitterLowMs = 30.0;
inline constexpr double kJitterHighMs = 60.0;
inline constexpr double kErrorRatePct = 1.0;
// Width of the C2 error-rate row, which the table gives as exactly 1 %.
inline constexpr double kErrorRateTolerancePct = 1e-9;

inline constexpr bool operator<(QosClass a, QosClass b) {
    return static_cast<int>(a) < static_cast<int>(b);
}

inline constexpr QosClass worst(QosClass a, QosClass b) { return a < b ? b : a; }

inline std::string_view to_string(QosClass c) {
    switch (c) {
    case QosClass::C1: return "C1";
    case QosClass::C2: return "C2";
    case QosClass::C3: return "C3";
    }
    return "?";
}

inline std::optional<QosClass> class_from_string(std::string_view s) {
    if (s == "C1") return QosClass::C1;
    if (s == "C2") return QosClass::C2;
    if (s == "C3") return QosClass::C3;
    return std::nullopt;
}

inline std::string_view to_string(Parameter p) {
    switch (p) {
    case Parameter::Bandwidth: return "bandwidth";
    case Parameter::Delay: return "delay";
    case Parameter::Jitter: return "jitter";
    case Parameter::Error: return "error";
    }
    return "?";
}

inline double get(const QosMeasurement& m, Parameter p) {
    switch (p) {
    case Parameter::Bandwidth: return m.bandwidth_kbps;
    case Parameter::Delay: return m.delay_ms;
    case Parameter::Jitter: return m.jitter_ms;
    case Parameter::Error: return m.error_rate_pct;
    }
    return 0.0;
}

inline double& get(QosMeasurement& m, Parameter p) {
    switch (p) {
    case Parameter::Bandwidth: return m.bandwidth_kbps;
    case Parameter::Delay: return m.delay_ms;
    case Parameter::Jitter: return m.jitter_ms;
    case Parameter::Error: break;
    }
    return m.error_rate_pct;
}

/// Upper bound of a parameter's valid domain (infinite except for error rate).
inline double domain_max(Parameter p) {
    return p == Parameter::Error ? 100.0 : std::numeric_limits<double>::infinity();
}

inline void check_value(Parameter p, double v) {
    if (!std::isfinite(v) || v < 0.0)
        throw DomainError(std::string(to_string(p)) + " must be finite and non-negative, got " +
                          std::to_string(v));
    if (v > domain_max(p))
        throw DomainError(std::string(to_string(p)) + " must be at most 100 %, got " +
                          std::to_string(v));
}

inline void validate(const QosMeasurement& m) {
    for (auto p : kParameters) check_value(p, get(m, p));
}

inline QosClass classify_parameter(Parameter kind, double v) {
    check_value(kind, v);
    switch (kind) {
    case Parameter::Bandwidth:
        if (v > kBandwidthHighKbps) return QosClass::C1;
        return v < kBandwidthLowKbps ? QosClass::C3 : QosClass::C2;
    case Parameter::Delay:
        if (v < kDelayLowMs) return QosClass::C1;
        return v > kDelayHighMs ? QosClass::C3 : QosClass::C2;
    case Parameter::Jitter:
        if (v < kJitterLowMs) return QosClass::C1;
        return v > kJitterHighMs ? QosClass::C3 : QosClass::C2;
    case Parameter::Error:
        // Bounds are compared as stored doubles so 1 +/- 1e-9 both land in C2.
        if (v < kErrorRatePct - kErrorRateTolerancePct) return QosClass::C1;
        return v > kErrorRatePct + kErrorRateTolerancePct ? QosClass::C3 : QosClass::C2;
    }
    return QosClass::C3;
}

/// Worst of the four per-parameter classes.
inline QosClass classify(const QosMeasurement& m) {
    QosClass out = QosClass::C1;
    for (auto p : kParameters) out = worst(out, classify_parameter(p, get(m, p)));
    return out;
}

} // namespace cogmesh::qos
