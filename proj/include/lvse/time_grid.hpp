#pragma once

#include <array>
#include <cstddef>

namespace lvse {

inline constexpr std::size_t kStepsPerDay = 96;
inline constexpr std::size_t kDaysPerYear = 365;
inline constexpr std::size_t kStepsPerYear = kStepsPerDay * kDaysPerYear; // 35,040
inline constexpr double kStepHours = 0.25;
inline constexpr double kHoursPerYear = 8760.0;

inline constexpr std::array<int, 12> kDaysInMonth{31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};

/// Step 0 is Jan 1, 00:00-00:15 of a non-leap year.
constexpr std::size_t day_of_step(std::size_t step) { return step / kStepsPerDay; }
constexpr int hour_of_step(std::size_t step) { return static_cast<int>((step % kStepsPerDay) / 4); }

/// Zero-based month (0 = January).
constexpr int month_of_step(std::size_t step) {
    auto day = static_cast<int>(day_of_step(step) % kDaysPerYear);
    for (int m = 0; m < 12; ++m) {
        if (day < kDaysInMonth[m]) return m;
        day -= kDaysInMonth[m];
    }
    return 11;
}

/// Fractional hour at the middle of the step.
constexpr double step_mid_hour(std::size_t step) {
    return (static_cast<double>(step % kStepsPerDay) + 0.5) * kStepHours;
}

} // namespace lvse
