#!/usr/bin/env python3
"""Generate the bundled synthetic reference grids in data/.

The rural and urban networks reproduce the topological statistics of the
reference LV grids (load-bus counts, feeder counts and feeder
sizes, NCP / non-NCP split). Geometry and cable impedances are assumptions:

  * NAYY impedances follow common catalogue values (R'/X' in ohm/km at 20 C):
      4x50  0.642 / 0.083
      4x120 0.253 / 0.080
      4x150 0.206 / 0.080
      4x240 0.125 / 0.080
  * segment lengths are drawn from a fixed-seed uniform distribution.

Run from the repository root:  python3 scripts/gen_reference_grids.py
"""
import json
import random

CABLES = {
    "NAYY 4x50": (0.642, 0.083),
    "NAYY 4x120": (0.253, 0.080),
    "NAYY 4x150": (0.206, 0.080),
    "NAYY 4x240": (0.125, 0.080),
}

LEVELS = {
    "rural": [("good", 400, "NAYY 4x150", 270), ("medium", 250, "NAYY 4x120", 242),
              ("poor", 160, "NAYY 4x50", 142)],
    "urban": [("good", 630, "NAYY 4x240", 357), ("medium", 400, "NAYY 4x150", 270),
              ("poor", 250, "NAYY 4x120", 242)],
}


def equipment_table(area):
    rows = []
    for level, kva, cable, amp in LEVELS[area]:
        r, x = CABLES[cable]
        rows.append({"level": level, "transformer_kva": kva, "cable": cable,
                     "thermal_limit_a": amp, "r_ohm_per_km": r, "x_ohm_per_km": x})
    return rows


def build(name, area, feeder_sizes, n_non_ncp, hh_units, first_len, seg_len, seed):
    rng = random.Random(seed)
    good = LEVELS[area][0]
    r_km, x_km = CABLES[good[2]]
    buses = [{"id": "LV", "kind": "slack", "has_ncp": False, "household_units": 0,
              "annual_energy_kwh": 0.0}]
    branches = []
    feeder_buses = []
    for f, size in enumerate(feeder_sizes, start=1):
        ids = []
        for k in range(1, size + 1):
            bid = f"F{f}B{k:02d}"
            if k == 1:
                parent = "LV"
                length = rng.uniform(*first_len)
            else:
                # Mostly extend the trunk; occasionally branch off an earlier bus.
                if rng.random() < 0.7 or len(ids) < 3:
                    parent = ids[-1]
                else:
                    parent = ids[rng.randrange(max(0, len(ids) - 6), len(ids) - 1)]
                length = rng.uniform(*seg_len)
            ids.append(bid)
            branches.append({"id": f"L{len(branches) + 1:03d}", "from": parent, "to": bid,
                             "length_m": round(length, 1),
                             "r_ohm": round(r_km * length / 1000.0, 6),
                             "x_ohm": round(x_km * length / 1000.0, 6),
                             "thermal_limit_a": good[3]})
        feeder_buses.append(ids)
    all_load = [b for ids in feeder_buses for b in ids]
    # Non-NCP buses: spread over the larger feeders, never the feeder end.
    candidates = [b for ids in feeder_buses if len(ids) >= 5 for b in ids[1:-1]]
    non_ncp = set(rng.sample(candidates, n_non_ncp))
    for b in all_load:
        ncp = b not in non_ncp
        buses.append({"id": b, "kind": "load", "has_ncp": ncp,
                      "household_units": hh_units if ncp else 0,
                      "annual_energy_kwh": 3500.0 * hh_units if ncp else 0.0})
    return {
        "name": name,
        "area": area,
        "nominal_voltage_v": 231.0,
        "buses": buses,
        "branches": branches,
        "transformer": {"rating_kva": good[1], "lv_bus": "LV", "oltc_target_pu": 1.0,
                        "se_slack_voltage_pu": 1.0},
        "equipment_levels": equipment_table(area),
    }


def three_bus():
    r, x = CABLES["NAYY 4x150"]
    return {
        "name": "three-bus chain",
        "area": "rural",
        "nominal_voltage_v": 231.0,
        "buses": [
            {"id": "S", "kind": "slack", "has_ncp": False, "household_units": 0, "annual_energy_kwh": 0.0},
            {"id": "A", "kind": "load", "has_ncp": True, "household_units": 1, "annual_energy_kwh": 3500.0},
            {"id": "B", "kind": "load", "has_ncp": True, "household_units": 1, "annual_energy_kwh": 3500.0},
        ],
        "branches": [
            {"id": "L1", "from": "S", "to": "A", "length_m": 100.0, "r_ohm": 0.0206, "x_ohm": 0.008,
             "thermal_limit_a": 270},
            {"id": "L2", "from": "A", "to": "B", "length_m": 100.0, "r_ohm": 0.0206, "x_ohm": 0.008,
             "thermal_limit_a": 270},
        ],
        "transformer": {"rating_kva": 400, "lv_bus": "S", "oltc_target_pu": 1.0,
                        "se_slack_voltage_pu": 1.0},
        "equipment_levels": equipment_table("rural"),
    }


def main():
    rural = build("synthetic rural reference", "rural", [29, 25, 22, 18, 14, 10, 5, 3, 1],
                  18, 1, (40.0, 90.0), (18.0, 38.0), seed=3)
    urban = build("synthetic urban reference", "urban", [18, 14, 10, 8, 4, 2, 1],
                  4, 6, (25.0, 60.0), (12.0, 30.0), seed=6)
    for fname, doc in (("data/rural_reference.json", rural), ("data/urban_reference.json", urban),
                       ("data/three_bus.json", three_bus())):
        with open(fname, "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")


if __name__ == "__main__":
    main()
