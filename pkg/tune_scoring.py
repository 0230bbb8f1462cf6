"""Scratch round 3: GHEP/MBM scoring normalization (rate vs absolute)."""
import numpy as np, time
from dataclasses import replace
from courierlab import scenario, engine, baselines as B, routing
from courierlab.domain import action_decode
from tune_layout import core_satellite_layout


def ghep_abs(snapshot, courier, rng=None):
    best_i, best_score = 0, -1.0
    for i, action, target, _travel in B._scan_actions(snapshot, courier):
        price, minutes = routing.estimate_profit_from(
            courier.position, snapshot.now, target, action.patrol_minutes,
            snapshot, courier.speed_km_per_min)
        score = price if minutes > 0 else 0.0
        if score > best_score + 1e-12:
            best_i, best_score = i, score
    return action_decode(best_i)


def make_mbm(weight):
    def policy(snapshot, courier, rng=None):
        world = snapshot.world
        rows = [v for v in snapshot.couriers if v.busy_until <= snapshot.now + 20.0]
        if not any(v.id == courier.id for v in rows):
            rows.append(courier)
        rows.sort(key=lambda v: v.id)
        col_ids = []; col_pos = {}; entries = {}
        for v in rows:
            for g in B._candidate_grids(snapshot, v):
                best = (0.0, 0)
                for patrol in (10, 20, 30):
                    price, minutes = routing.estimate_profit_from(
                        v.free_position, v.busy_until, g, patrol, snapshot, v.speed_km_per_min)
                    s = (price / minutes if minutes > 0 else 0.0) if weight == 'rate' else price
                    if s > best[0] + 1e-12:
                        best = (s, patrol)
                if g not in col_pos:
                    col_pos[g] = len(col_ids); col_ids.append(g)
                entries[(v.id, col_pos[g])] = best
        fallback = B.ghep if weight == 'rate' else ghep_abs
        if not col_ids:
            return fallback(snapshot, courier)
        n, m = len(rows), len(col_ids)
        w = np.full((n, m + n), -1.0); w[:, m:] = 0.0
        row_of = {v.id: k for k, v in enumerate(rows)}
        for (cid, j), (s, _p) in entries.items():
            w[row_of[cid], j] = s
        if n == 1:
            j = int(np.argmax(w[0, :m])); matches = {0: j} if w[0, j] > 0 else {}
        else:
            rtc, _u, _v = B._jv_assign(-w)
            matches = {i: int(c) for i, c in enumerate(rtc) if c < m and w[i, c] > 0}
        me = row_of[courier.id]
        if me in matches:
            j = matches[me]; g = col_ids[j]; _s, patrol = entries[(courier.id, j)]
            return B._action_for_target(world, world.grid_of_point(courier.position), g, patrol)
        return fallback(snapshot, courier)
    return policy


def score(lay, policies, seeds):
    out = {n: [] for n in policies}
    for s in seeds:
        cfg = replace(scenario.preset('base', seed=1000 + s), fixed_layout=lay)
        inst = scenario.build_instance(cfg)
        for name, fn in policies.items():
            res = engine.run_episode(inst, fn, seed=s)
            out[name].append(res.score)
    return out


if __name__ == "__main__":
    seeds = range(8)
    policies = {
        'ghav': B.ghav,
        'ghep_rate': B.ghep,
        'ghep_abs': ghep_abs,
        'mbm_rate': make_mbm('rate'),
        'mbm_abs': make_mbm('abs'),
    }
    for n_center, off in [(20, 0), (12, 3.5)]:
        lay = core_satellite_layout(20, 20, n_center, off)
        t0 = time.perf_counter()
        out = score(lay, policies, seeds)
        av = np.array(out['ghav'])
        print(f"center={n_center} off={off}  [{time.perf_counter()-t0:.0f}s]")
        for name, v in out.items():
            v = np.array(v)
            d = v - av
            print(f"  {name:10s} {v.mean():.3f}±{v.std(ddof=1):.3f}  vs-ghav {d.mean():+.3f}±{d.std(ddof=1)/np.sqrt(len(d)):.3f}")
