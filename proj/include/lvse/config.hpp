#pragma once

// Run configuration: a `key = value` text file, `#` starts a comment.
// Relative paths resolve against the config file's directory.

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lvse/error.hpp"
#include "lvse/grid_model.hpp"
#include "lvse/io.hpp"
#include "lvse/measurements.hpp"
#include "lvse/time_grid.hpp"

#ifndef LVSE_DEFAULT_DATA_DIR
#define LVSE_DEFAULT_DATA_DIR "data"
#endif

namespace lvse {

inline const fs::path kDefaultDataDir = LVSE_DEFAULT_DATA_DIR;

struct RunConfig {
    fs::path grid_rural = kDefaultDataDir / "rural_reference.json";
    fs::path grid_urban = kDefaultDataDir / "urban_reference.json";
    fs::path grid_minimal = kDefaultDataDir / "three_bus.json";
    std::optional<fs::path> profile_dir; // empty: synthetic profiles
    std::uint64_t profile_seed = 1;
    std::optional<fs::path> pathway_file; // empty: built-in table
    std::vector<int> scenarios;           // empty: all 26
    std::vector<Quality> levels{Quality::good, Quality::medium, Quality::poor};
    std::uint64_t seed = 7;
    std::size_t steps = kStepsPerYear;
    fs::path output = "out";
    unsigned threads = 0; // 0: all cores

    std::vector<ConstellationKind> constellations{ConstellationKind::K3, ConstellationKind::K2, ConstellationKind::K1};
    std::vector<std::size_t> penetration_rural{0, 8, 16, 32, 90, 109};
    std::vector<std::size_t> penetration_urban{0, 8, 16, 40, 53};
    std::vector<PlacementKind> strategies{PlacementKind::power_first};
    std::vector<std::uint64_t> random_seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    std::size_t periods = 50;
    std::uint64_t noise_seed = 0;

    const std::vector<std::size_t>& penetrations(Area a) const {
        return a == Area::rural ? penetration_rural : penetration_urban;
    }
};

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string item;
    for (char c : v + ",") {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!item.empty()) out.push_back(item);
            item.clear();
        } else {
            item.push_back(c);
        }
    }
    return out;
}

/// Integer list accepting ranges such as `0-9`.
inline std::vector<long long> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<long long> out;
    for (const auto& item : split_list(v)) {
        const auto dash = item.find('-', 1);
        if (dash == std::string::npos) {
            out.push_back(parse_int(item, key));
            continue;
        }
        const auto lo = parse_int(item.substr(0, dash), key), hi = parse_int(item.substr(dash + 1), key);
        if (hi < lo) throw ConfigError(key + ": empty range '" + item + "'");
        for (auto i = lo; i <= hi; ++i) out.push_back(i);
    }
    return out;
}

template <class T>
std::vector<T> non_negative(const std::string& key, const std::vector<long long>& v) {
    std::vector<T> out;
    for (auto x : v) {
        if (x < 0) throw ConfigError(key + ": negative value");
        out.push_back(static_cast<T>(x));
    }
    return out;
}

} // namespace detail

/// Applies one `key = value` setting; `base` anchors relative paths.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value, const fs::path& base = {}) {
    auto path = [&](const std::string& v) {
        fs::path p(v);
        return p.is_relative() && !base.empty() ? base / p : p;
    };
    auto one_int = [&](const std::string& v) {
        const auto x = parse_int(v, key);
        if (x < 0) throw ConfigError(key + " must be non-negative");
        return static_cast<std::uint64_t>(x);
    };
    try {
        if (key == "grid.rural") c.grid_rural = path(value);
        else if (key == "grid.urban") c.grid_urban = path(value);
        else if (key == "grid.minimal") c.grid_minimal = path(value);
        else if (key == "profiles") {
            if (value == "synthetic") c.profile_dir.reset();
            else c.profile_dir = path(value);
        } else if (key == "profile_seed") c.profile_seed = one_int(value);
        else if (key == "pathways") {
            if (value == "builtin") c.pathway_file.reset();
            else c.pathway_file = path(value);
        } else if (key == "scenarios") {
            c.scenarios.clear();
            if (value != "all") {
                for (auto id : detail::parse_int_list(key, value)) {
                    if (id < 1 || id > 26) throw ConfigError("scenario id out of range: " + std::to_string(id));
                    c.scenarios.push_back(static_cast<int>(id));
                }
            }
        } else if (key == "levels") {
            c.levels.clear();
            for (const auto& s : detail::split_list(value)) c.levels.push_back(parse_quality(s));
        } else if (key == "seed") c.seed = one_int(value);
        else if (key == "steps") {
            c.steps = one_int(value);
            if (c.steps == 0 || c.steps > kStepsPerYear) throw ConfigError("steps must lie in [1, 35040]");
        } else if (key == "output") c.output = path(value);
        else if (key == "threads") c.threads = static_cast<unsigned>(one_int(value));
        else if (key == "constellations") {
            c.constellations.clear();
            for (const auto& s : detail::split_list(value)) c.constellations.push_back(parse_constellation(s));
        } else if (key == "penetration.rural") {
            c.penetration_rural = detail::non_negative<std::size_t>(key, detail::parse_int_list(key, value));
        } else if (key == "penetration.urban") {
            c.penetration_urban = detail::non_negative<std::size_t>(key, detail::parse_int_list(key, value));
        } else if (key == "strategies") {
            c.strategies.clear();
            for (const auto& s : detail::split_list(value)) c.strategies.push_back(parse_placement(s));
        } else if (key == "random_seeds") {
            c.random_seeds = detail::non_negative<std::uint64_t>(key, detail::parse_int_list(key, value));
        } else if (key == "periods") c.periods = one_int(value);
        else if (key == "noise_seed") c.noise_seed = one_int(value);
        else throw ConfigError("unknown config key '" + key + "'");
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

inline RunConfig parse_config(std::istream& in, const fs::path& base = {}) {
    RunConfig c;
    std::string line;
    std::set<std::string> seen;
    for (int n = 1; std::getline(in, line); ++n) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(n) + ": expected 'key = value'");
        const auto key = detail::trim(line.substr(0, eq));
        if (!seen.insert(key).second) throw ConfigError("line " + std::to_string(n) + ": duplicate key '" + key + "'");
        apply_setting(c, key, detail::trim(line.substr(eq + 1)), base);
    }
    return c;
}

inline RunConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    return parse_config(in, path.parent_path());
}

/// Checks that referenced inputs exist.
inline void validate_config(const RunConfig& c, bool need_rural, bool need_urban) {
    auto exists = [](const fs::path& p, const char* what) {
        if (!fs::exists(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
    };
    if (need_rural) exists(c.grid_rural, "rural grid file");
    if (need_urban) exists(c.grid_urban, "urban grid file");
    if (c.profile_dir) exists(*c.profile_dir, "profile directory");
    if (c.pathway_file) exists(*c.pathway_file, "pathway table");
    if (c.levels.empty()) throw ConfigError("no equipment level selected");
}

/// Rejects penetration levels above the number of NCP buses.
inline void validate_penetrations(const RunConfig& c, const GridNetwork& net) {
    const auto n_lv = net.ncp_buses().size();
    for (auto n : c.penetrations(net.area()))
        if (n > n_lv)
            throw ConfigError("penetration " + std::to_string(n) + " exceeds the " + std::to_string(n_lv) +
                              " NCP buses of " + std::string(to_string(net.area())) + " grid");
}

} // namespace lvse
