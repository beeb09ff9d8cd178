#pragma once

// Pathway tables, per-NCP device assignment and the 26-scenario catalog.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <iterator>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lvse/error.hpp"
#include "lvse/grid_model.hpp"
#include "lvse/profiles.hpp"

namespace lvse {

enum class Pathway { FederalGovernment, Agora, Fraunhofer };
enum class Category { public_cp, ev, pv, heat_pump };

inline constexpr std::array<int, 5> kAnchorYears{2025, 2030, 2035, 2040, 2045};
inline constexpr std::array<Pathway, 3> kAllPathways{Pathway::FederalGovernment, Pathway::Agora, Pathway::Fraunhofer};
inline constexpr std::array<Category, 4> kAllCategories{Category::public_cp, Category::ev, Category::pv,
                                                        Category::heat_pump};

inline std::string_view to_string(Pathway p) {
    switch (p) {
    case Pathway::FederalGovernment: return "FederalGovernment";
    case Pathway::Agora: return "Agora";
    case Pathway::Fraunhofer: return "Fraunhofer";
    }
    return "?";
}

inline std::string_view to_string(Category c) {
    switch (c) {
    case Category::public_cp: return "public_cp";
    case Category::ev: return "ev";
    case Category::pv: return "pv";
    case Category::heat_pump: return "heat_pump";
    }
    return "?";
}

inline Pathway parse_pathway(std::string_view s) {
    if (s == "FederalGovernment") return Pathway::FederalGovernment;
    if (s == "Agora") return Pathway::Agora;
    if (s == "Fraunhofer") return Pathway::Fraunhofer;
    throw ParseError("unknown pathway '" + std::string(s) + "'");
}

inline Category parse_category(std::string_view s) {
    if (s == "public_cp") return Category::public_cp;
    if (s == "ev") return Category::ev;
    if (s == "pv") return Category::pv;
    if (s == "heat_pump") return Category::heat_pump;
    throw ParseError("unknown category '" + std::string(s) + "'");
}

/// Per-category values. PV is in GW in a pathway table and in systems per
/// 100 households after conversion; the other categories are per 100 HH.
struct CategoryValues {
    double public_cp = 0.0;
    double ev = 0.0;
    double pv = 0.0;
    double heat_pump = 0.0;

    double& operator[](Category c) {
        switch (c) {
        case Category::public_cp: return public_cp;
        case Category::ev: return ev;
        case Category::pv: return pv;
        case Category::heat_pump: return heat_pump;
        }
        throw DomainError("bad category");
    }
    double operator[](Category c) const { return const_cast<CategoryValues&>(*this)[c]; }
};

class PathwayTable {
public:
    /// Anchor values for one (pathway, category); NaN marks a missing anchor.
    using Anchors = std::array<double, kAnchorYears.size()>;

    void set(Pathway p, Category c, int year, double value) {
        auto& a = slot(p, c);
        const auto it = std::find(kAnchorYears.begin(), kAnchorYears.end(), year);
        if (it == kAnchorYears.end()) throw ParseError("pathway year " + std::to_string(year) + " is not an anchor year");
        a[static_cast<std::size_t>(it - kAnchorYears.begin())] = value;
    }

    /// Fills missing anchors by linear interpolation between, or linear
    /// extrapolation beyond, the nearest present anchors.
    void complete() {
        for (auto& [key, a] : anchors_) {
            std::vector<std::size_t> present;
            for (std::size_t i = 0; i < a.size(); ++i)
                if (!std::isnan(a[i])) present.push_back(i);
            if (present.empty()) throw ParseError("pathway table has an empty series");
            if (present.size() == 1) {
                for (auto& v : a) v = a[present[0]];
                continue;
            }
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (!std::isnan(a[i])) continue;
                auto hi = std::upper_bound(present.begin(), present.end(), i);
                std::size_t l, r;
                if (hi == present.begin()) {
                    l = present[0];
                    r = present[1];
                } else if (hi == present.end()) {
                    l = present[present.size() - 2];
                    r = present.back();
                } else {
                    l = *(hi - 1);
                    r = *hi;
                }
                const double t = (double(i) - double(l)) / (double(r) - double(l));
                a[i] = a[l] + t * (a[r] - a[l]);
            }
        }
    }

    const Anchors& anchors(Pathway p, Category c) const {
        auto it = anchors_.find({p, c});
        if (it == anchors_.end())
            throw DomainError("pathway table lacks " + std::string(to_string(p)) + "/" + std::string(to_string(c)));
        return it->second;
    }

private:
    Anchors& slot(Pathway p, Category c) {
        auto [it, inserted] = anchors_.try_emplace({p, c});
        if (inserted) it->second.fill(std::numeric_limits<double>::quiet_NaN());
        return it->second;
    }

    std::map<std::pair<Pathway, Category>, Anchors> anchors_;
};

/// Pathway values compiled into the library; ranges resolved to their upper bound.
inline PathwayTable builtin_pathways() {
    PathwayTable t;
    auto put = [&](Pathway p, Category c, std::array<double, 5> v) {
        for (std::size_t i = 0; i < v.size(); ++i) t.set(p, c, kAnchorYears[i], v[i]);
    };
    using P = Pathway;
    using C = Category;
    for (auto p : kAllPathways) put(p, C::public_cp, {0.22, 1.62, 2.60, 2.85, 3.72});
    put(P::FederalGovernment, C::ev, {3.93, 36.0, 52.0, 68.1, 84.1});
    put(P::Agora, C::ev, {3.93, 30.0, 49.7, 69.3, 89.0});
    put(P::Fraunhofer, C::ev, {3.93, 49.0, 84.0, 110.0, 114.0});
    put(P::FederalGovernment, C::pv, {76.0, 108.0, 155.0, 200.0, 246.0});
    put(P::Agora, C::pv, {76.0, 108.0, 156.0, 203.0, 251.0});
    put(P::Fraunhofer, C::pv, {76.0, 138.0, 204.0, 282.0, 337.0});
    put(P::FederalGovernment, C::heat_pump, {3.81, 14.0, 24.0, 34.0, 42.0});
    put(P::Agora, C::heat_pump, {3.81, 6.00, 9.25, 12.5, 15.7});
    put(P::Fraunhofer, C::heat_pump, {3.81, 12.0, 17.0, 21.0, 26.0});
    t.complete();
    return t;
}

/// Reads a (pathway, category, year, value, unit) CSV.
inline PathwayTable load_pathways(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open pathway file '" + path + "'");
    PathwayTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
        if (lineno == 1 && !cols.empty() && cols[0] == "pathway") continue;
        if (cols.size() < 4) throw ParseError(path + ":" + std::to_string(lineno) + ": expected at least 4 columns");
        try {
            t.set(parse_pathway(cols[0]), parse_category(cols[1]), std::stoi(cols[2]), std::stod(cols[3]));
        } catch (const std::logic_error&) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": malformed number");
        }
    }
    t.complete();
    return t;
}

/// Piecewise-linear value at a (possibly fractional) year in [2025, 2045].
inline double interpolate_pathway(const PathwayTable& table, Pathway p, Category c, double year) {
    if (!(year >= kAnchorYears.front() && year <= kAnchorYears.back()))
        throw DomainError("year " + std::to_string(year) + " outside 2025..2045");
    const auto& a = table.anchors(p, c);
    for (std::size_t i = 0; i + 1 < kAnchorYears.size(); ++i) {
        const double y0 = kAnchorYears[i], y1 = kAnchorYears[i + 1];
        if (year <= y1) {
            if (year == y0) return a[i];
            if (year == y1) return a[i + 1];
            const double t = (year - y0) / (y1 - y0);
            return a[i] + t * (a[i + 1] - a[i]);
        }
    }
    return a.back();
}

inline CategoryValues interpolate_pathway(const PathwayTable& table, Pathway p, double year) {
    CategoryValues v;
    for (auto c : kAllCategories) v[c] = interpolate_pathway(table, p, c, year);
    return v;
}

inline constexpr double kBaselinePvGw = 76.0;
inline constexpr double kBaselinePvPer100 = 10.7;

/// Linear household count (millions) between 42.0 M in 2025 and 42.6 M in 2045.
inline double household_millions(double year) { return 42.0 + 0.6 * (year - 2025.0) / 20.0; }

/// Converts rooftop PV capacity (GW) to systems per 100 households.
inline double pv_per_100_households(double gw, double year) {
    return kBaselinePvPer100 * (gw / kBaselinePvGw) * (household_millions(2025.0) / household_millions(year));
}

/// Per-100-HH densities of all categories for a pathway and year.
inline CategoryValues pathway_densities(const PathwayTable& table, Pathway p, double year) {
    auto v = interpolate_pathway(table, p, year);
    v.pv = pv_per_100_households(v.pv, year);
    return v;
}

/// round(value / 100 * household units), half away from zero.
inline long scale_to_network(double per_100, const GridNetwork& net) {
    if (per_100 < 0.0) throw DomainError("negative device density");
    return std::lround(per_100 / 100.0 * net.total_household_units());
}

struct DeviceTotals {
    long ev = 0;
    long heat_pump = 0;
    long pv = 0;
    long public_cp = 0;
};

inline DeviceTotals scale_to_network(const CategoryValues& densities, const GridNetwork& net) {
    return {scale_to_network(densities.ev, net), scale_to_network(densities.heat_pump, net),
            scale_to_network(densities.pv, net), scale_to_network(densities.public_cp, net)};
}

enum class PvOrientation { south, west, east };

inline ProfileKind pv_kind(PvOrientation o) {
    switch (o) {
    case PvOrientation::south: return ProfileKind::pv_south;
    case PvOrientation::west: return ProfileKind::pv_west;
    case PvOrientation::east: return ProfileKind::pv_east;
    }
    return ProfileKind::pv_south;
}

/// One device at an NCP: profile binding plus a multiplicative scale.
struct Device {
    DeviceClass cls = DeviceClass::household;
    ProfileKind kind = ProfileKind::household;
    std::size_t variant = 0;
    double scale = 1.0;
};

struct DeviceAssignment {
    std::string ncp_id;
    int household_units = 0;
    int ev = 0;
    int heat_pump = 0;
    int pv_south = 0;
    int pv_west = 0;
    int pv_east = 0;
    int public_cp = 0;
    std::vector<Device> devices;

    int pv() const { return pv_south + pv_west + pv_east; }
};

/// Maximum devices of one category at an NCP: two per household unit.
inline int per_ncp_cap(int household_units) { return 2 * std::max(1, household_units); }

/// Splits n into 60/21/19 south/west/east by largest remainder.
inline std::array<long, 3> pv_orientation_counts(long n) {
    constexpr std::array<double, 3> share{0.60, 0.21, 0.19};
    std::array<long, 3> out{};
    std::array<double, 3> rem{};
    long used = 0;
    for (int k = 0; k < 3; ++k) {
        const double q = share[k] * double(n);
        out[k] = static_cast<long>(std::floor(q));
        rem[k] = q - double(out[k]);
        used += out[k];
    }
    while (used < n) {
        const auto k = std::max_element(rem.begin(), rem.end()) - rem.begin();
        ++out[k];
        rem[k] = -1.0;
        ++used;
    }
    return out;
}

/// Random assignment of device totals to NCPs.
///
/// Each NCP offers `per_ncp_cap` slots per category; the category total is
/// drawn uniformly without replacement from all slots. PV orientations follow
/// the 60/21/19 split, shuffled across the drawn PV systems. Heat pumps and
/// EVs are assigned independently. Every device instance is bound to a
/// profile variant drawn from the same generator.
inline std::vector<DeviceAssignment> assign_devices(const DeviceTotals& totals, const GridNetwork& net,
                                                    std::uint64_t seed, const ProfileSet* profiles = nullptr) {
    const auto ncps = net.ncp_buses();
    std::vector<DeviceAssignment> out(ncps.size());
    std::vector<std::size_t> slots_owner;
    for (std::size_t k = 0; k < ncps.size(); ++k) {
        const auto& b = net.buses()[ncps[k]];
        out[k].ncp_id = b.id;
        out[k].household_units = std::max(1, b.household_units);
        for (int s = 0; s < per_ncp_cap(b.household_units); ++s) slots_owner.push_back(k);
    }
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5eedu};
    std::mt19937_64 rng(seq);

    auto draw = [&](long n, const char* what) {
        if (n < 0 || static_cast<std::size_t>(n) > slots_owner.size())
            throw DomainError(std::string(what) + " total " + std::to_string(n) + " exceeds per-NCP capacity");
        std::vector<std::size_t> picked;
        std::sample(slots_owner.begin(), slots_owner.end(), std::back_inserter(picked), n, rng);
        std::shuffle(picked.begin(), picked.end(), rng);
        return picked;
    };

    for (auto k : draw(totals.ev, "EV")) ++out[k].ev;
    for (auto k : draw(totals.heat_pump, "heat pump")) ++out[k].heat_pump;
    for (auto k : draw(totals.public_cp, "public charging point")) ++out[k].public_cp;
    {
        auto picked = draw(totals.pv, "PV");
        const auto counts = pv_orientation_counts(totals.pv);
        std::size_t i = 0;
        for (long n = 0; n < counts[0]; ++n) ++out[picked[i++]].pv_south;
        for (long n = 0; n < counts[1]; ++n) ++out[picked[i++]].pv_west;
        for (long n = 0; n < counts[2]; ++n) ++out[picked[i++]].pv_east;
    }

    const bool urban = net.area() == Area::urban;
    auto variant = [&](ProfileKind kind) -> std::size_t {
        const std::size_t n = profiles ? std::max<std::size_t>(1, profiles->variant_count(kind)) : 1;
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    };
    for (auto& a : out) {
        a.devices.push_back({DeviceClass::household, ProfileKind::household, variant(ProfileKind::household),
                             double(a.household_units)});
        for (int i = 0; i < a.ev; ++i)
            a.devices.push_back({DeviceClass::ev_private, ProfileKind::ev_private, variant(ProfileKind::ev_private), 1.0});
        const auto hp = urban ? ProfileKind::heat_pump_urban : ProfileKind::heat_pump_rural;
        for (int i = 0; i < a.heat_pump; ++i) a.devices.push_back({DeviceClass::heat_pump, hp, variant(hp), 1.0});
        const auto cp = urban ? ProfileKind::public_cp_urban : ProfileKind::public_cp_rural;
        for (int i = 0; i < a.public_cp; ++i) a.devices.push_back({DeviceClass::public_cp, cp, variant(cp), 1.0});
        for (int i = 0; i < a.pv_south; ++i) a.devices.push_back({DeviceClass::pv, ProfileKind::pv_south, 0, 1.0});
        for (int i = 0; i < a.pv_west; ++i) a.devices.push_back({DeviceClass::pv, ProfileKind::pv_west, 0, 1.0});
        for (int i = 0; i < a.pv_east; ++i) a.devices.push_back({DeviceClass::pv, ProfileKind::pv_east, 0, 1.0});
    }
    return out;
}

struct CatalogEntry {
    int id = 0;
    Area area = Area::rural;
    int year = 2025;
    /// Empty for the 2025 current-state scenarios.
    std::optional<Pathway> pathway;
};

/// The 26 (area, year, pathway) combinations; ids 1-13 urban, 14-26 rural.
inline std::vector<CatalogEntry> scenario_catalog() {
    std::vector<CatalogEntry> out;
    int id = 1;
    for (auto area : {Area::urban, Area::rural}) {
        out.push_back({id++, area, 2025, std::nullopt});
        for (int year : {2030, 2035, 2040, 2045})
            for (auto p : kAllPathways) out.push_back({id++, area, year, p});
    }
    return out;
}

inline CatalogEntry catalog_entry(int id) {
    for (const auto& e : scenario_catalog())
        if (e.id == id) return e;
    throw DomainError("scenario id " + std::to_string(id) + " is not in 1..26");
}

struct ScenarioSpec {
    int scenario_id = 0;
    Area area = Area::rural;
    int year = 2025;
    std::optional<Pathway> pathway;
    Quality level = Quality::good;
    std::uint64_t seed = 0;
    DeviceTotals totals;
    std::vector<DeviceAssignment> assignments;

    std::string label() const {
        return "S" + std::to_string(scenario_id) + "_" + std::string(to_string(area)) + "_" + std::to_string(year) +
               "_" + (pathway ? std::string(to_string(*pathway)) : std::string("CurrentState")) + "_" +
               std::string(to_string(level));
    }
};

/// Builds the scenario; device totals come from the pathway densities scaled
/// to the network's household units.
inline ScenarioSpec build_scenario(const CatalogEntry& entry, const GridNetwork& net, Quality level, std::uint64_t seed,
                                   const PathwayTable& table, const ProfileSet* profiles = nullptr) {
    if (entry.area != net.area()) throw DomainError("scenario area does not match the network");
    ScenarioSpec s;
    s.scenario_id = entry.id;
    s.area = entry.area;
    s.year = entry.year;
    s.pathway = entry.pathway;
    s.level = level;
    s.seed = seed;
    s.totals = scale_to_network(pathway_densities(table, entry.pathway.value_or(Pathway::FederalGovernment), entry.year), net);
    s.assignments = assign_devices(s.totals, net, seed, profiles);
    return s;
}

/// Annual load energy per bus (kWh): the sum of all consumption devices at
/// each NCP, PV excluded. Non-NCP buses receive 0.
inline std::vector<double> annual_energy(const GridNetwork& net, const ScenarioSpec& s, const ProfileSet& profiles) {
    std::vector<double> e(net.bus_count(), 0.0);
    for (const auto& a : s.assignments) {
        const auto b = net.bus_index(a.ncp_id);
        for (const auto& d : a.devices) {
            if (d.cls == DeviceClass::pv) continue;
            e[b] += d.scale * profiles.get(d.kind, d.variant).annual_energy_kwh();
        }
    }
    return e;
}

/// Network re-parameterised to the scenario's equipment level, with the
/// annual energy proxy derived from the assigned devices.
inline GridNetwork scenario_network(const GridNetwork& base, const ScenarioSpec& s, const ProfileSet& profiles) {
    auto net = apply_equipment_level(base, s.level);
    return net.with_annual_energy(annual_energy(net, s, profiles));
}

inline nlohmann::json scenario_to_json(const ScenarioSpec& s) {
    nlohmann::json j;
    j["scenario_id"] = s.scenario_id;
    j["label"] = s.label();
    j["area"] = to_string(s.area);
    j["year"] = s.year;
    j["pathway"] = s.pathway ? std::string(to_string(*s.pathway)) : std::string("CurrentState");
    j["equipment_level"] = to_string(s.level);
    j["seed"] = s.seed;
    j["totals"] = {{"ev", s.totals.ev}, {"heat_pump", s.totals.heat_pump}, {"pv", s.totals.pv},
                   {"public_cp", s.totals.public_cp}};
    auto& ja = j["assignments"] = nlohmann::json::array();
    for (const auto& a : s.assignments) {
        nlohmann::json dev = nlohmann::json::array();
        for (const auto& d : a.devices)
            dev.push_back({{"profile", to_string(d.kind)}, {"variant", d.variant}, {"scale", d.scale}});
        ja.push_back({{"ncp_id", a.ncp_id},
                      {"household_units", a.household_units},
                      {"ev", a.ev},
                      {"heat_pump", a.heat_pump},
                      {"pv", {{"south", a.pv_south}, {"west", a.pv_west}, {"east", a.pv_east}}},
                      {"public_cp", a.public_cp},
                      {"devices", dev}});
    }
    return j;
}

} // namespace lvse
