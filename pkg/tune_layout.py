"""Scratch: search fixed-layout families against the baseline score bands."""
import numpy as np, time, sys
from dataclasses import replace
from courierlab import scenario, engine, baselines as B
from courierlab.domain import GridType


def core_satellite_layout(width, height, n_center, sat_off, fractions=(0.05, 0.15, 0.80)):
    """Demand disk around the board center; intense cells split between a
    central core (n_center cells) and 4 diagonal satellite pockets."""
    n = width * height
    n_int, n_per, _ = scenario.zone_counts(n, fractions)
    cx, cy = width / 2, height / 2

    def center_dist(g):
        return float(np.hypot(g % width + 0.5 - cx, g // width + 0.5 - cy))

    order = sorted(range(n), key=lambda g: (center_dist(g), g))
    demand = set(order[: n_int + n_per])

    types = [GridType.EMPTY] * n
    core = sorted(demand, key=lambda g: (center_dist(g), g))[:n_center]
    for g in core:
        types[g] = GridType.INTENSE
    n_sat = n_int - n_center
    if n_sat:
        off = sat_off
        sats = [(cx - off, cy - off), (cx + off, cy - off), (cx - off, cy + off), (cx + off, cy + off)]
        per = n_sat // 4
        taken = set(core)
        for hx, hy in sats:
            cells = sorted(
                (g for g in demand if g not in taken),
                key=lambda g: (np.hypot(g % width + 0.5 - hx, g // width + 0.5 - hy), g),
            )[:per]
            for g in cells:
                types[g] = GridType.INTENSE
                taken.add(g)
    for g in demand:
        if types[g] is GridType.EMPTY:
            types[g] = GridType.PERIPHERAL
    return tuple(types)


def show(lay, width=20):
    sym = {GridType.INTENSE: '#', GridType.PERIPHERAL: '+', GridType.EMPTY: '.'}
    for y in range(width - 1, -1, -1):
        print(''.join(sym[lay[y * width + x]] for x in range(width)))


def score(lay, names, seeds):
    out = {n: [] for n in names}
    for s in seeds:
        cfg = replace(scenario.preset('base', seed=1000 + s), fixed_layout=lay)
        inst = scenario.build_instance(cfg)
        for name in names:
            res = engine.run_episode(inst, B.POLICIES[name], seed=s)
            out[name].append(res.score)
    return {n: float(np.mean(v)) for n, v in out.items()}


if __name__ == "__main__":
    seeds = range(5)
    for n_center, sat_off in [(20, 0), (12, 3.5), (8, 3.5), (4, 3.5), (8, 4.2)]:
        lay = core_satellite_layout(20, 20, n_center, sat_off)
        t0 = time.perf_counter()
        m = score(lay, ['random', 'ghav', 'ghep', 'mbm'], seeds)
        print(f"center={n_center} off={sat_off}: R {m['random']:.3f} AV {m['ghav']:.3f} "
              f"EP {m['ghep']:.3f} MBM {m['mbm']:.3f}  [{time.perf_counter()-t0:.0f}s]", flush=True)
