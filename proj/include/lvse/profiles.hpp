#pragma once

// Quarter-hourly full-year device profiles and ZIP voltage-dependence.
//
// Sign convention: consumption >= 0 kW, PV generation <= 0 kW. A profile kind
// may carry several variants (individual EVs, heat pumps, ...); devices pick a
// variant by index so that identical devices are not perfectly simultaneous.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lvse/error.hpp"
#include "lvse/time_grid.hpp"

namespace lvse {

inline constexpr double kHouseholdAnnualKwh = 3500.0;
inline constexpr double kPvPeakKw = 11.5;
inline constexpr double kEvChargeKw = 3.68;
inline constexpr double kEvPlugInProbability = 0.70;
inline constexpr double kUrbanHeatPumpFactor = 4.0;
inline constexpr int kUrbanHouseholdsPerNcp = 6;

enum class DeviceClass { household, ev_private, heat_pump, pv, public_cp };

inline std::string_view to_string(DeviceClass c) {
    switch (c) {
    case DeviceClass::household: return "household";
    case DeviceClass::ev_private: return "ev_private";
    case DeviceClass::heat_pump: return "heat_pump";
    case DeviceClass::pv: return "pv";
    case DeviceClass::public_cp: return "public_cp";
    }
    return "?";
}

inline DeviceClass parse_device_class(std::string_view s) {
    if (s == "household") return DeviceClass::household;
    if (s == "ev_private") return DeviceClass::ev_private;
    if (s == "heat_pump") return DeviceClass::heat_pump;
    if (s == "pv") return DeviceClass::pv;
    if (s == "public_cp") return DeviceClass::public_cp;
    throw DomainError("unknown device class '" + std::string(s) + "'");
}

struct ZipParams {
    double z_share = 0.0;
    double i_share = 0.0;
    double p_share = 1.0;
    double cos_phi = 1.0;
};

inline ZipParams builtin_zip(DeviceClass c) {
    switch (c) {
    case DeviceClass::household: return {0.20, 0.10, 0.70, 0.98};
    case DeviceClass::ev_private:
    case DeviceClass::public_cp: return {0.05, 0.05, 0.90, 0.99};
    case DeviceClass::heat_pump: return {0.10, 0.10, 0.80, 0.97};
    case DeviceClass::pv: return {0.0, 0.0, 1.0, 1.0};
    }
    throw DomainError("unknown device class");
}

enum class ProfileKind {
    household,
    ev_private,
    heat_pump_rural,
    heat_pump_urban,
    pv_south,
    pv_west,
    pv_east,
    public_cp_rural,
    public_cp_urban,
};

inline constexpr std::array<ProfileKind, 9> kAllProfileKinds{
    ProfileKind::household,       ProfileKind::ev_private, ProfileKind::heat_pump_rural,
    ProfileKind::heat_pump_urban, ProfileKind::pv_south,   ProfileKind::pv_west,
    ProfileKind::pv_east,         ProfileKind::public_cp_rural, ProfileKind::public_cp_urban};

inline std::string_view to_string(ProfileKind k) {
    switch (k) {
    case ProfileKind::household: return "household";
    case ProfileKind::ev_private: return "ev_private";
    case ProfileKind::heat_pump_rural: return "heat_pump_rural";
    case ProfileKind::heat_pump_urban: return "heat_pump_urban";
    case ProfileKind::pv_south: return "pv_south";
    case ProfileKind::pv_west: return "pv_west";
    case ProfileKind::pv_east: return "pv_east";
    case ProfileKind::public_cp_rural: return "public_cp_rural";
    case ProfileKind::public_cp_urban: return "public_cp_urban";
    }
    return "?";
}

inline DeviceClass device_class(ProfileKind k) {
    switch (k) {
    case ProfileKind::household: return DeviceClass::household;
    case ProfileKind::ev_private: return DeviceClass::ev_private;
    case ProfileKind::heat_pump_rural:
    case ProfileKind::heat_pump_urban: return DeviceClass::heat_pump;
    case ProfileKind::pv_south:
    case ProfileKind::pv_west:
    case ProfileKind::pv_east: return DeviceClass::pv;
    case ProfileKind::public_cp_rural:
    case ProfileKind::public_cp_urban: return DeviceClass::public_cp;
    }
    throw DomainError("unknown profile kind");
}

struct Profile {
    ProfileKind kind = ProfileKind::household;
    std::vector<double> values; // kW, average over each quarter hour
    std::string normalization;

    double annual_energy_kwh() const {
        double e = 0.0;
        for (double v : values) e += v * kStepHours;
        return e;
    }
};

/// Checks length, sign convention and household normalisation.
inline void validate_profile(const Profile& p) {
    if (p.values.size() != kStepsPerYear)
        throw ParseError("profile '" + std::string(to_string(p.kind)) + "' has " + std::to_string(p.values.size()) +
                         " steps, expected " + std::to_string(kStepsPerYear));
    const bool generation = device_class(p.kind) == DeviceClass::pv;
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        const double v = p.values[i];
        if (!std::isfinite(v)) throw ParseError("profile value is not finite at step " + std::to_string(i));
        if (generation ? v > 0.0 : v < 0.0)
            throw ParseError("profile '" + std::string(to_string(p.kind)) + "' violates the sign convention at step " +
                             std::to_string(i));
    }
    if (p.kind == ProfileKind::household) {
        const double e = p.annual_energy_kwh();
        if (std::abs(e - kHouseholdAnnualKwh) > 1e-3 * kHouseholdAnnualKwh)
            throw ParseError("household profile annual energy " + std::to_string(e) + " kWh deviates from 3500 kWh");
    }
}

class ProfileSet {
public:
    void add(Profile p) {
        validate_profile(p);
        variants_[p.kind].push_back(std::move(p));
    }

    bool has(ProfileKind k) const { return variants_.count(k) && !variants_.at(k).empty(); }
    std::size_t variant_count(ProfileKind k) const { return has(k) ? variants_.at(k).size() : 0; }

    /// Variant `index` modulo the number of variants.
    const Profile& get(ProfileKind k, std::size_t index = 0) const {
        if (!has(k)) throw DomainError("profile set has no '" + std::string(to_string(k)) + "' profile");
        const auto& v = variants_.at(k);
        return v[index % v.size()];
    }

    /// Standard household shape normalised to unit mean; the basis of
    /// profile-only pseudo-measurements.
    const std::vector<double>& h0_shape() const {
        if (h0_.empty()) throw DomainError("profile set has no H0 reference shape");
        return h0_;
    }
    void set_h0_shape(std::vector<double> shape) {
        if (shape.size() != kStepsPerYear) throw DomainError("H0 shape must cover a full year");
        double mean = 0.0;
        for (double v : shape) mean += v;
        mean /= static_cast<double>(shape.size());
        if (!(mean > 0.0)) throw DomainError("H0 shape must have a positive mean");
        for (double& v : shape) v /= mean;
        h0_ = std::move(shape);
    }

private:
    std::map<ProfileKind, std::vector<Profile>> variants_;
    std::vector<double> h0_;
};

/// Reads one profile CSV (columns step_index, power_kw; header optional).
inline Profile load_profile_file(const std::filesystem::path& path, ProfileKind kind) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open profile file '" + path.string() + "'");
    Profile p;
    p.kind = kind;
    p.normalization = "imported";
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected 2 columns");
        const std::string first = line.substr(0, comma);
        if (lineno == 1 && first.find_first_not_of("0123456789 ") != std::string::npos) continue; // header
        try {
            const auto step = std::stoul(first);
            if (step != p.values.size())
                throw ParseError(path.string() + ":" + std::to_string(lineno) + ": step index out of sequence");
            p.values.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::logic_error&) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": malformed number");
        }
    }
    validate_profile(p);
    return p;
}

/// Loads every `<kind>.csv` and `<kind>_<n>.csv` file from a directory.
/// A `h0.csv` file, when present, defines the standard household shape;
/// otherwise the mean of the household variants is used.
inline ProfileSet load_profiles(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw ParseError("profile directory '" + dir.string() + "' does not exist");
    ProfileSet set;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (auto kind : kAllProfileKinds) {
        const std::string stem(to_string(kind));
        for (const auto& f : files) {
            const auto s = f.stem().string();
            const bool exact = s == stem;
            const bool numbered = s.size() > stem.size() + 1 && s.compare(0, stem.size(), stem) == 0 &&
                                  s[stem.size()] == '_' &&
                                  s.find_first_not_of("0123456789", stem.size() + 1) == std::string::npos;
            if (exact || numbered) set.add(load_profile_file(f, kind));
        }
        if (!set.has(kind)) throw ParseError("profile directory lacks '" + stem + ".csv'");
    }
    if (fs::exists(dir / "h0.csv")) {
        // Any non-generation, non-household kind passes the sign check.
        auto tmp = load_profile_file(dir / "h0.csv", ProfileKind::ev_private);
        set.set_h0_shape(std::move(tmp.values));
    } else {
        std::vector<double> mean(kStepsPerYear, 0.0);
        const auto n = set.variant_count(ProfileKind::household);
        for (std::size_t v = 0; v < n; ++v) {
            const auto& p = set.get(ProfileKind::household, v);
            for (std::size_t s = 0; s < kStepsPerYear; ++s) mean[s] += p.values[s];
        }
        set.set_h0_shape(std::move(mean));
    }
    return set;
}

namespace synth {

// Shape assumptions of the synthetic generators (not measured data):
//  * household: three-peak daily shape (morning, noon, evening), weekend
//    variant, seasonal dynamisation polynomial of the standard household
//    profile, per-variant noise;
//  * private EV: one charging session on 70 % of days at 3.68 kW, arrival
//    ~N(18.5 h, 1.5 h), energy U(6, 16) kWh;
//  * heat pump: degree-day driven daily energy on a sinusoidal temperature
//    year (5 % hot-water base), rural 4,000 kWh/a, urban 4x rural;
//  * PV: clear-sky irradiance at 50.1 N on a 30 deg plane, daily clearness
//    U(0.25, 1.0), performance ratio 0.85, 11.5 kWp;
//  * public charging: Poisson sessions between 07:00 and 21:00 (rural mean
//    2/day, urban 4/day), 1-3 h at U(7, 22) kW; this stands in for the
//    70th-85th percentile utilisation profiles of the source data.

inline constexpr double kRuralHeatPumpAnnualKwh = 4000.0;

inline double h0_daily_shape(double hour, bool weekend) {
    auto bump = [](double h, double centre, double width) {
        double d = std::abs(h - centre);
        d = std::min(d, 24.0 - d);
        return std::exp(-0.5 * (d / width) * (d / width));
    };
    const double base = 0.45;
    if (weekend)
        return base + 0.55 * bump(hour, 10.0, 1.8) + 0.8 * bump(hour, 12.5, 1.2) + 1.25 * bump(hour, 19.0, 2.0);
    return base + 0.7 * bump(hour, 7.0, 1.0) + 0.55 * bump(hour, 12.5, 1.2) + 1.35 * bump(hour, 19.0, 1.8);
}

/// Seasonal dynamisation factor of the standard household profile.
inline double h0_dynamisation(double day_of_year) {
    const double t = day_of_year + 1.0;
    return -3.92e-10 * std::pow(t, 4) + 3.2e-7 * std::pow(t, 3) - 7.02e-5 * t * t + 2.1e-3 * t + 1.24;
}

inline std::vector<double> h0_reference() {
    std::vector<double> v(kStepsPerYear);
    for (std::size_t s = 0; s < kStepsPerYear; ++s) {
        const auto day = day_of_step(s);
        const bool weekend = day % 7 >= 5;
        v[s] = h0_daily_shape(step_mid_hour(s), weekend) * h0_dynamisation(static_cast<double>(day));
    }
    return v;
}

inline void scale_to_energy(std::vector<double>& v, double kwh) {
    double e = 0.0;
    for (double x : v) e += x * kStepHours;
    for (double& x : v) x *= kwh / e;
}

inline Profile household(std::mt19937_64& rng, const std::vector<double>& h0) {
    std::normal_distribution<double> noise(0.0, 0.25);
    std::uniform_int_distribution<int> shift(-3, 3); // quarter hours
    const int sh = shift(rng);
    Profile p{ProfileKind::household, std::vector<double>(kStepsPerYear), "3500 kWh/a per household"};
    for (std::size_t s = 0; s < kStepsPerYear; ++s) {
        const auto src = static_cast<std::size_t>((static_cast<long>(s) + sh + static_cast<long>(kStepsPerYear)) %
                                                  static_cast<long>(kStepsPerYear));
        p.values[s] = std::max(0.05, h0[src] * (1.0 + noise(rng)));
    }
    scale_to_energy(p.values, kHouseholdAnnualKwh);
    return p;
}

inline Profile ev_private(std::mt19937_64& rng) {
    std::bernoulli_distribution plug(kEvPlugInProbability);
    std::normal_distribution<double> arrival(18.5, 1.5);
    std::uniform_real_distribution<double> energy(6.0, 16.0);
    Profile p{ProfileKind::ev_private, std::vector<double>(kStepsPerYear, 0.0), "3.68 kW sessions, 70 % daily plug-in"};
    for (std::size_t d = 0; d < kDaysPerYear; ++d) {
        if (!plug(rng)) continue;
        const double a = std::clamp(arrival(rng), 14.0, 23.5);
        const auto steps = static_cast<std::size_t>(std::lround(energy(rng) / kEvChargeKw / kStepHours));
        const std::size_t start = d * kStepsPerDay + static_cast<std::size_t>(a / kStepHours);
        for (std::size_t k = 0; k < steps; ++k) p.values[(start + k) % kStepsPerYear] = kEvChargeKw;
    }
    return p;
}

inline double daily_mean_temperature(double day) {
    return 10.5 - 9.5 * std::cos(2.0 * std::numbers::pi * (day - 18.0) / 365.0);
}

inline Profile heat_pump(std::mt19937_64& rng, bool urban) {
    std::normal_distribution<double> weather(0.0, 2.0);
    std::normal_distribution<double> noise(0.0, 0.15);
    std::vector<double> v(kStepsPerYear);
    for (std::size_t d = 0; d < kDaysPerYear; ++d) {
        const double t = daily_mean_temperature(static_cast<double>(d)) + weather(rng);
        const double degree_day = std::max(0.0, 15.0 - t);
        for (std::size_t q = 0; q < kStepsPerDay; ++q) {
            const double h = (static_cast<double>(q) + 0.5) * kStepHours;
            // Heating setback at night, morning and evening boost.
            const double shape = 0.75 + 0.35 * std::exp(-0.5 * std::pow((h - 7.0) / 1.5, 2)) +
                                 0.3 * std::exp(-0.5 * std::pow((h - 18.5) / 2.0, 2)) - (h < 5.0 ? 0.2 : 0.0);
            v[d * kStepsPerDay + q] = (0.05 * 15.0 + degree_day) * shape * std::max(0.3, 1.0 + noise(rng));
        }
    }
    const double annual = kRuralHeatPumpAnnualKwh * (urban ? kUrbanHeatPumpFactor : 1.0);
    scale_to_energy(v, annual);
    return {urban ? ProfileKind::heat_pump_urban : ProfileKind::heat_pump_rural, std::move(v),
            urban ? "16000 kWh/a (4x rural)" : "4000 kWh/a"};
}

/// Clear-sky plane-of-array irradiance (W/m^2) for a 30 deg tilted plane.
inline double plane_irradiance(double day, double solar_hour, double azimuth_deg) {
    constexpr double deg = std::numbers::pi / 180.0;
    const double lat = 50.1 * deg;
    const double decl = 23.44 * deg * std::sin(2.0 * std::numbers::pi * (284.0 + day + 1.0) / 365.0);
    const double hour_angle = (solar_hour - 12.0) * 15.0 * deg;
    const double sin_el = std::sin(lat) * std::sin(decl) + std::cos(lat) * std::cos(decl) * std::cos(hour_angle);
    if (sin_el <= std::sin(2.0 * deg)) return 0.0;
    const double el = std::asin(sin_el);
    // Sun azimuth measured from north, clockwise.
    double cos_az = (std::sin(decl) - sin_el * std::sin(lat)) / (std::cos(el) * std::cos(lat));
    cos_az = std::clamp(cos_az, -1.0, 1.0);
    double az = std::acos(cos_az);
    if (hour_angle > 0) az = 2.0 * std::numbers::pi - az;
    const double airmass = 1.0 / (sin_el + 0.50572 * std::pow(el / deg + 6.07995, -1.6364));
    const double dni = 1353.0 * std::pow(0.7, std::pow(airmass, 0.678));
    const double tilt = 30.0 * deg;
    const double cos_aoi = sin_el * std::cos(tilt) + std::cos(el) * std::sin(tilt) * std::cos(az - azimuth_deg * deg);
    const double diffuse = 0.1 * dni * (1.0 + std::cos(tilt)) / 2.0;
    return std::max(0.0, dni * cos_aoi) + diffuse;
}

inline std::vector<double> clearness_series(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.25, 1.0);
    std::vector<double> k(kDaysPerYear);
    for (auto& x : k) x = u(rng);
    return k;
}

inline Profile pv(ProfileKind kind, const std::vector<double>& clearness) {
    double azimuth = 180.0;
    if (kind == ProfileKind::pv_west) azimuth = 270.0;
    if (kind == ProfileKind::pv_east) azimuth = 90.0;
    Profile p{kind, std::vector<double>(kStepsPerYear, 0.0), "11.5 kWp, generation negative"};
    for (std::size_t s = 0; s < kStepsPerYear; ++s) {
        const auto d = day_of_step(s);
        const double g = plane_irradiance(static_cast<double>(d), step_mid_hour(s), azimuth);
        p.values[s] = -kPvPeakKw * 0.85 * clearness[d] * g / 1000.0;
    }
    return p;
}

inline Profile public_cp(std::mt19937_64& rng, bool urban) {
    std::poisson_distribution<int> sessions(urban ? 4.0 : 2.0);
    std::uniform_real_distribution<double> start(7.0, 21.0);
    std::uniform_real_distribution<double> duration(1.0, 3.0);
    std::uniform_real_distribution<double> power(7.0, 22.0);
    Profile p{urban ? ProfileKind::public_cp_urban : ProfileKind::public_cp_rural,
              std::vector<double>(kStepsPerYear, 0.0), "22 kW point, Poisson sessions"};
    for (std::size_t d = 0; d < kDaysPerYear; ++d) {
        const int n = sessions(rng);
        for (int i = 0; i < n; ++i) {
            const auto first = d * kStepsPerDay + static_cast<std::size_t>(start(rng) / kStepHours);
            const auto len = static_cast<std::size_t>(std::lround(duration(rng) / kStepHours));
            const double kw = power(rng);
            for (std::size_t k = 0; k < len; ++k) {
                auto& slot = p.values[(first + k) % kStepsPerYear];
                slot = std::min(22.0, slot + kw);
            }
        }
    }
    return p;
}

} // namespace synth

struct SynthesisOptions {
    std::size_t household_variants = 12;
    std::size_t ev_variants = 24;
    std::size_t heat_pump_variants = 8;
    std::size_t public_cp_variants = 6;
};

/// Deterministic synthetic stand-ins for the external profile datasets.
inline ProfileSet synthesize_profiles(std::uint64_t seed, const SynthesisOptions& opt = {}) {
    ProfileSet set;
    const auto h0 = synth::h0_reference();
    set.set_h0_shape(h0);
    auto stream = [seed](std::uint64_t salt) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(salt)};
        return std::mt19937_64(seq);
    };
    {
        auto rng = stream(1);
        for (std::size_t i = 0; i < opt.household_variants; ++i) set.add(synth::household(rng, h0));
    }
    {
        auto rng = stream(2);
        for (std::size_t i = 0; i < opt.ev_variants; ++i) set.add(synth::ev_private(rng));
    }
    {
        auto rng = stream(3);
        for (std::size_t i = 0; i < opt.heat_pump_variants; ++i) {
            auto rural = synth::heat_pump(rng, false);
            Profile urban{ProfileKind::heat_pump_urban, rural.values, "4x rural"};
            for (double& v : urban.values) v *= kUrbanHeatPumpFactor;
            set.add(std::move(rural));
            set.add(std::move(urban));
        }
    }
    {
        auto rng = stream(4);
        const auto clearness = synth::clearness_series(rng);
        for (auto k : {ProfileKind::pv_south, ProfileKind::pv_west, ProfileKind::pv_east})
            set.add(synth::pv(k, clearness));
    }
    {
        auto rng = stream(5);
        for (std::size_t i = 0; i < opt.public_cp_variants; ++i) {
            set.add(synth::public_cp(rng, false));
            set.add(synth::public_cp(rng, true));
        }
    }
    return set;
}

/// Writes a profile as `step_index,power_kw` CSV.
inline void write_profile_csv(const Profile& p, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write profile file '" + path.string() + "'");
    out << "step_index,power_kw\n";
    char buf[64];
    for (std::size_t s = 0; s < p.values.size(); ++s) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", s, p.values[s]);
        out << buf;
    }
}

} // namespace lvse
