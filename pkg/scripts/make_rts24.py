"""Regenerate src/qcommit/data/rts24.json.

Branch data follow the public IEEE RTS-24 network. Thermal units are the
RTS fleet aggregated per bus and technology into 11 committable units,
with cost, ramp and start-up figures reconstructed from the RTS-96
tables. Load and renewable profiles are synthesized: RTS hourly and
daily load shapes scaled by 0.75, a clear-sky PV curve with seeded
cloud factors, and seeded AR(1) wind. None of it is measured data.

    python3 scripts/make_rts24.py
"""
import json
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "qcommit" / "data" / "rts24.json"
T, DAYS, LOAD_SCALE = 24, 7, 0.75

# from, to, r, x, rateA
BRANCHES = [
    (1, 2, 0.0026, 0.0139, 175), (1, 3, 0.0546, 0.2112, 175), (1, 5, 0.0218, 0.0845, 175),
    (2, 4, 0.0328, 0.1267, 175), (2, 6, 0.0497, 0.1920, 175), (3, 9, 0.0308, 0.1190, 175),
    (3, 24, 0.0023, 0.0839, 400), (4, 9, 0.0268, 0.1037, 175), (5, 10, 0.0228, 0.0883, 175),
    (6, 10, 0.0139, 0.0605, 175), (7, 8, 0.0159, 0.0614, 175), (8, 9, 0.0427, 0.1651, 175),
    (8, 10, 0.0427, 0.1651, 175), (9, 11, 0.0023, 0.0839, 400), (9, 12, 0.0023, 0.0839, 400),
    (10, 11, 0.0023, 0.0839, 400), (10, 12, 0.0023, 0.0839, 400), (11, 13, 0.0061, 0.0476, 500),
    (11, 14, 0.0054, 0.0418, 500), (12, 13, 0.0061, 0.0476, 500), (12, 23, 0.0124, 0.0966, 500),
    (13, 23, 0.0111, 0.0865, 500), (14, 16, 0.0050, 0.0389, 500), (15, 16, 0.0022, 0.0173, 500),
    (15, 21, 0.0063, 0.0490, 500), (15, 21, 0.0063, 0.0490, 500), (15, 24, 0.0067, 0.0519, 500),
    (16, 17, 0.0033, 0.0259, 500), (16, 19, 0.0030, 0.0231, 500), (17, 18, 0.0018, 0.0144, 500),
    (17, 22, 0.0135, 0.1053, 500), (18, 21, 0.0033, 0.0259, 500), (18, 21, 0.0033, 0.0259, 500),
    (19, 20, 0.0051, 0.0396, 500), (19, 20, 0.0051, 0.0396, 500), (20, 23, 0.0028, 0.0216, 500),
    (20, 23, 0.0028, 0.0216, 500), (21, 22, 0.0087, 0.0678, 500),
]

# bus: (Pd, Qd) at annual peak
LOADS = {
    1: (108, 22), 2: (97, 20), 3: (180, 37), 4: (74, 15), 5: (71, 14), 6: (136, 28),
    7: (125, 25), 8: (171, 35), 9: (175, 36), 10: (195, 40), 13: (265, 54), 14: (194, 39),
    15: (317, 64), 16: (100, 20), 18: (333, 68), 19: (181, 37), 20: (128, 26),
}

# name, bus, c_g $/MWh, c_su $, p_min, p_max, ramp MW/h
UNITS = [
    ("coal76x2@1", 1, 13.5, 1500, 30, 152, 240),
    ("coal76x2@2", 2, 13.5, 1500, 30, 152, 240),
    ("oil100x3@7", 7, 46.0, 3000, 75, 300, 420),
    ("oil197x3@13", 13, 44.0, 5000, 207, 591, 540),
    ("coal155@15", 15, 11.0, 3000, 54, 155, 180),
    ("coal155@16", 16, 11.0, 3000, 54, 155, 180),
    ("nuclear400@18", 18, 5.5, 20000, 100, 400, 400),
    ("nuclear400@21", 21, 5.5, 20000, 100, 400, 400),
    ("coal155x2@23", 23, 11.0, 6000, 108, 310, 360),
    ("coal350@23", 23, 10.5, 8000, 140, 350, 240),
    ("oilct12x5@15", 15, 72.0, 100, 12, 60, 60),
]
INITIAL_ON = {"nuclear400@18", "nuclear400@21", "coal350@23", "coal155x2@23", "coal155@15", "coal155@16"}

VPP_BUSES = [3, 5, 6, 8, 9, 14, 17, 20]

# RTS hourly load (% of daily peak) and daily peak (% of weekly peak, Mon..Sun)
WEEKDAY = [67, 63, 60, 59, 59, 60, 74, 86, 95, 96, 96, 95, 95, 95, 93, 94, 99, 100, 100, 96, 91, 83, 73, 63]
WEEKEND = [78, 72, 68, 66, 64, 65, 66, 70, 80, 88, 90, 91, 90, 88, 87, 87, 91, 100, 99, 97, 94, 92, 87, 81]
DAILY = [93, 100, 98, 96, 94, 77, 75]


def load_shape():
    out = []
    for d in range(DAYS):
        hourly = WEEKEND if d >= 5 else WEEKDAY
        out += [h / 100 * DAILY[d] / 100 for h in hourly]
    return np.array(out)


def pv_profile(rng, capacity):
    hours = np.arange(T)
    clear = np.clip(np.sin(np.pi * (hours - 6) / 12), 0, None)
    days = [clear * rng.uniform(0.55, 1.0) for _ in range(DAYS)]
    return np.round(capacity * np.concatenate(days), 1)


def wind_profile(rng, capacity):
    x, out = 0.0, []
    for _ in range(T * DAYS):
        x = 0.9 * x + rng.normal(0, 0.35)
        out.append(capacity / (1 + np.exp(-x)) * 0.8)
    return np.round(np.array(out), 1)


def build():
    rng = np.random.default_rng(24)
    shape = load_shape()
    doc = {
        "meta": {
            "name": "rts24",
            "periods": T,
            "base_mva": 100,
            "description": (
                "IEEE RTS-24 network with 11 aggregated thermal units, 2 PV, 2 wind and 8 VPPs. "
                "Unit economics and all profiles are reconstructions; see scripts/make_rts24.py."
            ),
        },
        "buses": [{"id": b, "voltage_min": 0.9, "voltage_max": 1.1} for b in range(1, 25)],
        "branches": [
            {"from": f, "to": t, "r": r, "x": x, "flow_limit": lim} for f, t, r, x, lim in BRANCHES
        ],
        "units": [
            {
                "name": name, "bus": bus, "c_g": c, "c_su": su, "p_min": lo, "p_max": hi,
                "r_u": ramp, "r_d": -ramp, "initial_status": int(name in INITIAL_ON),
                "power_factor": 0.985,
            }
            for name, bus, c, su, lo, hi, ramp in UNITS
        ],
        "vpps": [{"bus": b, "p_vpp_max": 50, "c_vpp": 60, "power_factor": 1.0} for b in VPP_BUSES],
        "renewables": [
            {"bus": 1, "kind": "pv", "forecast_profile": pv_profile(rng, 150).tolist()},
            {"bus": 22, "kind": "pv", "forecast_profile": pv_profile(rng, 150).tolist()},
            {"bus": 2, "kind": "wind", "forecast_profile": wind_profile(rng, 200).tolist()},
            {"bus": 23, "kind": "wind", "forecast_profile": wind_profile(rng, 200).tolist()},
        ],
        "loads": [
            {
                "bus": b,
                "forecast_profile": np.round(p * LOAD_SCALE * shape, 2).tolist(),
                "power_factor": round(p / float(np.hypot(p, q)), 4),
            }
            for b, (p, q) in LOADS.items()
        ],
        "costs": {"c_ls": 1000, "lambda_v": 10000, "lambda_b": 10000, "c_curt": 0},
    }
    return doc


if __name__ == "__main__":
    OUT.write_text(json.dumps(build(), indent=1) + "\n", encoding="utf-8")
    print(f"wrote {OUT}")
