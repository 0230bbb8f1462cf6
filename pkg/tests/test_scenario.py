import json
import math
from dataclasses import replace

import numpy as np
import pytest

from courierlab.domain import GridType, Point
from courierlab.scenario import (
    ProblemInstance,
    ScenarioConfig,
    SchemaError,
    apply_dod,
    build_instance,
    canonical_layout,
    generate_instance,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    preset,
    save_instance,
    zone_counts,
)

INTENSE_DAILY = 60 * (0.05 + 0.10 + 0.04 + 0.05)  # 14.4
PERIPHERAL_DAILY = 60 * (0.01 + 0.06 + 0.01 + 0.01 + 0.01 + 0.06 + 0.05 + 0.01)  # 13.2


class TestZones:
    def test_zone_counts_base_world(self):
        assert zone_counts(400) == (20, 60, 320)

    def test_zone_counts_cover_board(self):
        for n in (64, 100, 399, 400):
            assert sum(zone_counts(n)) == n

    def test_canonical_layout_is_stable_and_counted(self):
        a = canonical_layout(20, 20)
        b = canonical_layout(20, 20)
        assert a == b
        assert sum(1 for t in a if t is GridType.INTENSE) == 20
        assert sum(1 for t in a if t is GridType.PERIPHERAL) == 60


class TestGenerate:
    def test_expected_count_base(self):
        cfg = preset("base")
        assert cfg.expected_requests() == pytest.approx(20 * INTENSE_DAILY + 60 * PERIPHERAL_DAILY)
        assert cfg.expected_requests() == pytest.approx(1080.0)

    def test_zero_rates_generate_nothing(self):
        rates = {t: (0.0,) * 8 for t in GridType}
        cfg = ScenarioConfig(rate_matrix=rates, seed=5)
        assert generate_instance(cfg).requests == []

    def test_deterministic_given_seed(self):
        cfg = preset("base", seed=11)
        a = generate_instance(cfg)
        b = generate_instance(cfg)
        assert len(a.requests) == len(b.requests)
        assert all(
            (r1.arrival_time, r1.location, r1.price) == (r2.arrival_time, r2.location, r2.price)
            for r1, r2 in zip(a.requests, b.requests)
        )

    def test_requests_sorted_fields_valid(self):
        cfg = preset("base", seed=3)
        inst = generate_instance(cfg)
        times = [r.arrival_time for r in inst.requests]
        assert times == sorted(times)
        for r in inst.requests:
            assert 0.0 <= r.arrival_time < 480.0
            assert r.earliest == r.arrival_time  # artificial scenarios: dT1 = 0
            assert r.latest - r.earliest == pytest.approx(60.0)
            assert r.service_time in (2.0, 3.0, 4.0)
            assert r.price in (1.0, 2.0, 3.0, 4.0, 5.0)
            # location consistent with the recorded grid
            assert inst.world.grid_of_point(r.location) == r.grid
            assert inst.world.grid_type(r.grid) is not GridType.EMPTY

    def test_statistical_mean_within_three_se(self):
        # Sum of Poisson means is 1080 per instance, variance 1080.
        cfg = preset("base")
        counts = [len(generate_instance(cfg, seed=1000 + k).requests) for k in range(40)]
        se = math.sqrt(1080.0 / 40)
        assert abs(np.mean(counts) - 1080.0) <= 3 * se

    def test_random_grid_frequencies(self):
        cfg = preset("random_grid")
        counts = {t: 0 for t in GridType}
        n_worlds = 30
        for k in range(n_worlds):
            inst = generate_instance(cfg, seed=2000 + k)
            for t in inst.world.grid_types:
                counts[t] += 1
        total = 400 * n_worlds
        for t, p in ((GridType.INTENSE, 0.05), (GridType.PERIPHERAL, 0.15), (GridType.EMPTY, 0.8)):
            sd = math.sqrt(total * p * (1 - p))
            assert abs(counts[t] - total * p) <= 3 * sd


class TestDod:
    def test_dod_one_changes_nothing(self):
        inst = generate_instance(preset("base", seed=4))
        out = apply_dod(inst, 1.0, seed=9)
        assert [r.arrival_time for r in out.requests] == [r.arrival_time for r in inst.requests]

    def test_dod_counts(self):
        inst = generate_instance(preset("base", seed=4))
        n = len(inst.requests)
        out = apply_dod(inst, 0.9, seed=9)
        assert sum(1 for r in out.requests if r.arrival_time == 0.0) == math.ceil(0.1 * n)

    def test_dod_half_of_ten(self):
        inst = generate_instance(preset("base", seed=4))
        ten = ProblemInstance(inst.world, inst.requests[:10], inst.horizon, dict(inst.meta))
        for seed in range(5):
            out = apply_dod(ten, 0.5, seed=seed)
            zeroed = [r for r in out.requests if r.arrival_time == 0.0]
            assert len(zeroed) == 5
            untouched = {r.id: r for r in ten.requests}
            for r in out.requests:
                if r.arrival_time != 0.0:
                    assert r.arrival_time == untouched[r.id].arrival_time

    def test_dod_recomputes_windows(self):
        inst = generate_instance(preset("base", seed=4))
        out = apply_dod(inst, 0.5, seed=1)
        for r in out.requests:
            if r.arrival_time == 0.0:
                assert r.earliest == 0.0
                assert r.latest == pytest.approx(60.0)

    def test_original_untouched(self):
        inst = generate_instance(preset("base", seed=4))
        before = [r.arrival_time for r in inst.requests]
        apply_dod(inst, 0.5, seed=1)
        assert [r.arrival_time for r in inst.requests] == before


class TestPresets:
    def test_table_rows(self):
        assert preset("base").courier_count == 10
        assert preset("base").delta_t2 == 60.0
        assert preset("base").dod == 0.9
        assert preset("base").zone_mode == "fixed"
        assert preset("median").courier_count == 30
        assert preset("large").courier_count == 100
        assert preset("small_tw").delta_t2 == 20.0
        assert preset("low_dyn").dod == 0.5
        assert preset("random_grid").zone_mode == "random"

    def test_desk_preset_scaled(self):
        cfg = preset("desk")
        assert (cfg.width, cfg.height, cfg.courier_count) == (8, 8, 4)
        assert cfg.expected_requests() == pytest.approx(150.0)

    def test_unknown_name(self):
        with pytest.raises(Exception):
            preset("never_heard_of_it")


class TestFiles:
    def test_round_trip(self, tmp_path):
        inst = build_instance(preset("base", seed=6))
        path = tmp_path / "inst.json"
        save_instance(inst, path)
        loaded = load_instance(path)
        assert len(loaded.requests) == len(inst.requests)
        for a, b in zip(inst.requests, loaded.requests):
            assert (a.id, a.arrival_time, a.price, a.grid) == (b.id, b.arrival_time, b.price, b.grid)
            assert a.location == b.location
        assert loaded.world.grid_types == inst.world.grid_types
        assert loaded.meta == inst.meta

    def test_missing_price_names_field(self, tmp_path):
        inst = build_instance(preset("base", seed=6))
        doc = instance_to_dict(inst)
        del doc["requests"][3]["price"]
        with pytest.raises(SchemaError, match=r"requests\[3\]\.price"):
            instance_from_dict(doc)

    def test_hand_written_two_request_file(self, tmp_path):
        doc = {
            "meta": {"scenario": "tiny", "seed": 0},
            "world": {
                "width": 2,
                "height": 2,
                "cell_km": 1.0,
                "grid_types": ["intense", "empty", "empty", "empty"],
                "distance": "euclidean",
            },
            "horizon": 100.0,
            "requests": [
                {"id": 1, "x": 0.5, "y": 0.2, "t": 30.0, "earliest": 30.0,
                 "latest": 90.0, "service": 2.0, "price": 4.0},
                {"id": 0, "x": 0.1, "y": 0.9, "t": 5.0, "earliest": 5.0,
                 "latest": 65.0, "service": 3.0, "price": 2.0},
            ],
        }
        path = tmp_path / "tiny.json"
        path.write_text(json.dumps(doc))
        inst = load_instance(path)
        assert [r.id for r in inst.requests] == [0, 1]  # sorted by arrival
        assert inst.requests[0].arrival_time == 5.0

    def test_bad_zone_name(self):
        doc = {
            "meta": {},
            "world": {"width": 1, "height": 1, "cell_km": 1.0,
                      "grid_types": ["suburban"], "distance": "euclidean"},
            "horizon": 10.0,
            "requests": [],
        }
        with pytest.raises(SchemaError, match="grid_types"):
            instance_from_dict(doc)
