"""Scratch round 2: separate MBM from GHEP while keeping R/AV/EP bands."""
import numpy as np, time
from dataclasses import replace
from courierlab import scenario, engine, baselines as B, routing
from tune_layout import core_satellite_layout, show


def mbm_pairs(snapshot, courier, rng=None):
    """MBM with (grid, patrol) columns: grids shareable across patrols."""
    world = snapshot.world
    rows = [v for v in snapshot.couriers if v.busy_until <= snapshot.now + 20.0]
    if not any(v.id == courier.id for v in rows):
        rows.append(courier)
    rows.sort(key=lambda v: v.id)
    cols = []; col_pos = {}; entries = {}
    for v in rows:
        for g in B._candidate_grids(snapshot, v):
            for patrol in (10, 20, 30):
                price, minutes = routing.estimate_profit_from(
                    v.free_position, v.busy_until, g, patrol, snapshot, v.speed_km_per_min)
                rate = price / minutes if minutes > 0 else 0.0
                key = (g, patrol)
                if key not in col_pos:
                    col_pos[key] = len(cols); cols.append(key)
                entries[(v.id, col_pos[key])] = rate
    if not cols:
        return B.ghep(snapshot, courier)
    n, m = len(rows), len(cols)
    w = np.full((n, m + n), -1.0); w[:, m:] = 0.0
    row_of = {v.id: k for k, v in enumerate(rows)}
    for (cid, j), rate in entries.items():
        w[row_of[cid], j] = rate
    rtc, _u, _v = B._jv_assign(-w)
    me = row_of[courier.id]
    c = int(rtc[me])
    if c < m and w[me, c] > 0:
        g, patrol = cols[c]
        return B._action_for_target(world, world.grid_of_point(courier.position), g, patrol)
    return B.ghep(snapshot, courier)


def score(lay, policies, seeds):
    out = {n: [] for n in policies}
    for s in seeds:
        cfg = replace(scenario.preset('base', seed=1000 + s), fixed_layout=lay)
        inst = scenario.build_instance(cfg)
        for name, fn in policies.items():
            res = engine.run_episode(inst, fn, seed=s)
            out[name].append(res.score)
    return {n: (float(np.mean(v)), float(np.std(v, ddof=1))) for n, v in out.items()}


if __name__ == "__main__":
    seeds = range(6)
    policies = {'random': B.random_policy, 'ghav': B.ghav, 'ghep': B.ghep,
                'mbm': B.mbm, 'mbm_pairs': mbm_pairs}
    for n_center, off in [(12, 3.5), (12, 4.5), (12, 5.5), (16, 4.5)]:
        lay = core_satellite_layout(20, 20, n_center, off)
        t0 = time.perf_counter()
        m = score(lay, policies, seeds)
        line = f"center={n_center} off={off}: " + "  ".join(
            f"{k} {v[0]:.3f}±{v[1]:.3f}" for k, v in m.items())
        print(line + f"  [{time.perf_counter()-t0:.0f}s]", flush=True)
