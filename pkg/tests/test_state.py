import numpy as np
import pytest

from courierlab.domain import GridType, GridWorld, Point, Request
from courierlab.engine import CourierView, Snapshot
from courierlab.domain import CourierStatus
from courierlab.state import encode, input_dim, n_channels


def world(width=20, height=20):
    return GridWorld(width=width, height=height,
                     grid_types=(GridType.PERIPHERAL,) * (width * height))


def view(w, cid, gx, gy):
    pos = w.grid_center(w.grid_index(gx, gy))
    return CourierView(
        id=cid, position=pos, grid=w.grid_index(gx, gy), status=CourierStatus.FREE,
        busy_until=0.0, free_position=pos, fleet="fleet", speed_km_per_min=0.5,
    )


def snap(w, pending, couriers, now=0.0):
    return Snapshot(now=now, world=w, horizon=480.0, pending=pending, couriers=couriers)


def req(w, rid, gx, gy, price=3.0, window=60.0):
    loc = Point(gx + 0.5, gy + 0.5)
    return Request(id=rid, location=loc, grid=w.grid_of_point(loc), arrival_time=0.0,
                   earliest=0.0, latest=window, service_time=2.0, price=price)


class TestBasicChannels:
    def test_dims(self):
        assert n_channels("basic") == 4
        assert n_channels("ep") == 8
        assert input_dim("basic") == 4 * 81
        assert input_dim("ep") == 8 * 81
        with pytest.raises(ValueError):
            n_channels("deluxe")

    def test_empty_world_channels(self):
        w = world()
        s = snap(w, [], [view(w, 0, 10, 10)])
        f = encode(s, s.couriers[0], "basic")
        assert f.channels.shape == (4, 9, 9)
        # channel 0 has only the courier itself at the center
        assert f.channels[0, 4, 4] == pytest.approx(1.0)  # 1 courier / fleet 1
        assert f.channels[0].sum() == pytest.approx(1.0)
        assert not f.channels[1].any()
        assert not f.channels[2].any()
        # distance template: zero at center, 1 at the corners, symmetric
        d = f.channels[3]
        assert d[4, 4] == 0.0
        assert d[0, 0] == pytest.approx(1.0)
        assert np.allclose(d, d.T)
        assert np.allclose(d, d[::-1, ::-1])

    def test_own_grid_request_counts(self):
        w = world()
        r = req(w, 0, 10, 10, price=3.0)
        s = snap(w, [r], [view(w, 0, 10, 10)])
        f = encode(s, s.couriers[0], "basic")
        assert f.channels[1, 4, 4] == pytest.approx(1 / 10)  # count normalizer
        assert f.channels[2, 4, 4] == pytest.approx(3 / 30)  # price normalizer

    def test_edge_padding_zeroes_outside(self):
        w = world()
        s = snap(w, [], [view(w, 0, 0, 0)])
        f = encode(s, s.couriers[0], "basic")
        # rows/cols covering negative coordinates are zero in every channel
        assert not f.channels[:, :4, :].any()
        assert not f.channels[:, :, :4].any()

    def test_translation_invariance_in_the_interior(self):
        # couriers far enough apart that neither window sees the other's demand
        w = world()
        couriers = [view(w, 0, 5, 5), view(w, 1, 14, 14)]
        reqs = [req(w, 0, 6, 5), req(w, 1, 15, 14)]  # same offset from each
        s = snap(w, reqs, couriers)
        f0 = encode(s, s.couriers[0], "basic")
        f1 = encode(s, s.couriers[1], "basic")
        assert np.allclose(f0.channels[1:3], f1.channels[1:3])
        assert np.allclose(f0.channels[3], f1.channels[3])

    def test_flattening_order(self):
        w = world()
        s = snap(w, [req(w, 0, 10, 10)], [view(w, 0, 10, 10)])
        f = encode(s, s.couriers[0], "basic")
        flat = f.flat
        assert flat.shape == (324,)
        # channel 1 center cell sits at offset 81 + 4*9 + 4
        assert flat[81 + 40] == f.channels[1, 4, 4]


class TestEpChannels:
    def test_ep_zero_outside_action_window(self):
        w = world()
        # request 3 grids east: inside 9x9 but outside the 5x5 action window
        r = req(w, 0, 13, 10)
        s = snap(w, [r], [view(w, 0, 10, 10)])
        f = encode(s, s.couriers[0], "ep")
        assert not f.channels[4:].any()
        # but it is visible in the count channel
        assert f.channels[1, 4, 7] > 0

    def test_ep_rate_matches_estimator(self):
        from courierlab.routing import estimate_profit_from

        w = world()
        r = req(w, 0, 11, 10, price=5.0)
        s = snap(w, [r], [view(w, 0, 10, 10)])
        f = encode(s, s.couriers[0], "ep")
        me = s.couriers[0]
        price, minutes = estimate_profit_from(
            me.position, 0.0, w.grid_index(11, 10), 10, s, 0.5
        )
        assert f.channels[5, 4, 5] == pytest.approx(price / minutes)
        # patrol-0 channel collects nothing anywhere
        assert not f.channels[4].any()

    def test_ep_nonnegative_and_zero_where_no_demand(self):
        w = world()
        reqs = [req(w, 0, 9, 9), req(w, 1, 11, 11, price=5.0)]
        s = snap(w, reqs, [view(w, 0, 10, 10)])
        f = encode(s, s.couriers[0], "ep")
        assert (f.channels[4:] >= 0).all()
        for dy in range(-2, 3):
            for dx in range(-2, 3):
                cell = (dy + 4, dx + 4)
                if f.channels[1][cell] == 0:
                    assert not f.channels[4:, cell[0], cell[1]].any()
