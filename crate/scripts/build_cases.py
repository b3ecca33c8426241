"""Builds the bundled grid files from the PYPOWER test cases.

    pip install pypower numpy scipy
    python scripts/build_cases.py

Conventional units keep their PYPOWER limits and quadratic costs, which are
replaced by three secant pieces. Loads are scaled to the stated total, wind
farms are added, and line ratings are set from a merit-order DC dispatch at
the nominal forecast (the PYPOWER ratings are unlimited).
"""

import json
import sys
from pathlib import Path

import numpy as np
from pypower.api import case14, case118
from scipy.optimize import linprog

OUT = Path(__file__).resolve().parent.parent / "data"


def ptdf(bus_ids, lines, slack):
    idx = {b: i for i, b in enumerate(bus_ids)}
    nb, nl = len(bus_ids), len(lines)
    a = np.zeros((nl, nb))
    y = np.zeros(nl)
    for k, (f, t, x) in enumerate(lines):
        a[k, idx[f]] = 1.0
        a[k, idx[t]] = -1.0
        y[k] = 1.0 / x
    bbus = a.T @ np.diag(y) @ a
    keep = [i for i in range(nb) if bus_ids[i] != slack]
    inv = np.zeros((nb, nb))
    inv[np.ix_(keep, keep)] = np.linalg.inv(bbus[np.ix_(keep, keep)])
    return np.diag(y) @ a @ inv


def secants(c2, c1, gmax, pieces=3):
    pts = np.linspace(0.0, gmax, pieces + 1)
    return [
        {"slope": round(c2 * (pts[s] + pts[s + 1]) + c1, 6), "intercept": round(-c2 * pts[s] * pts[s + 1], 6)}
        for s in range(pieces)
    ]


def build(case, name, total_load, farm_buses, farm_cap, forecast, rating_margin, rating_floor):
    bus_ids = [int(b) for b in case["bus"][:, 0]]
    slack = int(case["bus"][case["bus"][:, 1] == 3, 0][0])
    load = case["bus"][:, 2].clip(min=0.0)
    load = load * total_load / load.sum()
    lines = [(int(r[0]), int(r[1]), float(r[3])) for r in case["branch"] if r[10] > 0]
    gens = [(int(g[0]), float(g[8])) for g in case["gen"]]
    costs = [(float(c[4]), float(c[5])) for c in case["gencost"]]

    # Merit-order dispatch at the nominal forecast, pieces as epigraphs.
    idx = {b: i for i, b in enumerate(bus_ids)}
    ng = len(gens)
    residual = total_load - forecast * len(farm_buses)
    c = np.r_[np.zeros(ng), np.ones(ng)]
    a_ub, b_ub = [], []
    for j, (bus, gmax) in enumerate(gens):
        for p in secants(costs[j][0], costs[j][1], gmax):
            row = np.zeros(2 * ng)
            row[j] = p["slope"]
            row[ng + j] = -1.0
            a_ub.append(row)
            b_ub.append(-p["intercept"])
    a_eq = [np.r_[np.ones(ng), np.zeros(ng)]]
    bounds = [(0.0, g[1]) for g in gens] + [(None, None)] * ng
    res = linprog(c, A_ub=np.array(a_ub), b_ub=b_ub, A_eq=np.array(a_eq), b_eq=[residual], bounds=bounds)
    assert res.status == 0, res.message
    inj = -load.copy()
    for j, (bus, _) in enumerate(gens):
        inj[idx[bus]] += res.x[j]
    for b in farm_buses:
        inj[idx[b]] += forecast
    flows = ptdf(bus_ids, [(f, t, x) for f, t, x in lines], slack) @ inj
    ratings = np.maximum(rating_margin * np.abs(flows), rating_floor)

    doc = {
        "name": name,
        "slack_bus": slack,
        "buses": [{"id": b, "load": round(float(load[i]), 4)} for i, b in enumerate(bus_ids)],
        "lines": [
            {"id": k + 1, "from": f, "to": t, "reactance": x, "capacity": round(float(ratings[k]), 1)}
            for k, (f, t, x) in enumerate(lines)
        ],
        "generators": [
            {
                "id": j + 1,
                "bus": bus,
                "g_min": 0.0,
                "g_max": gmax,
                "cost_pieces": secants(costs[j][0], costs[j][1], gmax),
                "c_dn": round(0.15 * costs[j][1], 4),
                "c_up": round(0.25 * costs[j][1], 4),
            }
            for j, (bus, gmax) in enumerate(gens)
        ],
        "wind_farms": [{"id": m + 1, "bus": b, "capacity": farm_cap} for m, b in enumerate(farm_buses)],
    }
    path = OUT / f"{name}.json"
    path.write_text(json.dumps(doc, indent=1) + "\n")
    print(f"{path}: {len(bus_ids)} buses, {len(lines)} lines, {ng} units, max |flow| {np.abs(flows).max():.1f} MW")


def main():
    OUT.mkdir(exist_ok=True)
    build(case14(), "case14_wind", 259.0, [4, 9, 13], 60.0, 54.0, 1.6, 40.0)
    build(case118(), "case118_wind", 2286.0, [2, 16, 33, 37, 55, 67, 83, 116], 200.0, 180.0, 1.6, 100.0)


if __name__ == "__main__":
    sys.exit(main())
