#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace lvse {

/// Percentile q in [0, 100] by linear interpolation between closest ranks
/// (inclusive definition); 0 for an empty sample.
inline double percentile(std::vector<double> x, double q) {
    if (x.empty()) return 0.0;
    std::sort(x.begin(), x.end());
    const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * double(x.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, x.size() - 1);
    return x[lo] + (pos - double(lo)) * (x[hi] - x[lo]);
}

inline double median(const std::vector<double>& x) { return percentile(x, 50.0); }

inline double iqr(const std::vector<double>& x) { return percentile(x, 75.0) - percentile(x, 25.0); }

inline double mean(const std::vector<double>& x) {
    if (x.empty()) return 0.0;
    double s = 0.0;
    for (double v : x) s += v;
    return s / double(x.size());
}

} // namespace lvse
