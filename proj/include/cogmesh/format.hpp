#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

namespace cogmesh {

/// Fixed 9-significant-digit decimal rendering used by every data output.
inline std::string format_sig9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

/// Fixed 9-digits-after-the-point rendering used by key=value reports.
inline std::string format_fixed9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9f", v);
    return buf;
}

/// Rounds through the serialized form so in-memory values equal reparsed ones.
inline double round_sig9(double v) {
    return std::strtod(format_sig9(v).c_str(), nullptr);
}

} // namespace cogmesh
