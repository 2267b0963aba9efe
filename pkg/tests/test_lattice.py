import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from intersection_exponents.lattice import (OccupancyGrid, dense_bytes, intersection_nonempty,
                                            make_grid)

STEPS = [(1, 0), (-1, 0), (0, 1), (0, -1)]


def random_paths(rng, p, m, max_len=60):
    """Random nearest-neighbour paths clipped to {-m..m}^2, one per packet."""
    paths = []
    for _ in range(p):
        x, y = (int(v) for v in rng.integers(-m // 2, m // 2 + 1, size=2))
        path = [(x, y)]
        for _ in range(int(rng.integers(1, max_len))):
            dx, dy = STEPS[int(rng.integers(4))]
            if abs(x + dx) <= m and abs(y + dy) <= m:
                x, y = x + dx, y + dy
            path.append((x, y))
        paths.append(path)
    return paths


def online_verdict(grid, paths, order):
    """Feed visits in the given interleaving; report whether any call completed a mask."""
    cursors = [0] * len(paths)
    hit = False
    for k in order:
        cell = paths[k][cursors[k]]
        cursors[k] += 1
        hit |= grid.record_visit(cell, k)
    return hit


def interleaving(rng, paths):
    order = np.concatenate([np.full(len(pth), k) for k, pth in enumerate(paths)])
    rng.shuffle(order)
    return order.tolist()


@pytest.mark.parametrize("sparse", [False, True])
def test_record_visit_completes_pair(sparse):
    g = OccupancyGrid(3, 2, sparse=sparse)
    assert g.record_visit((0, 0), 0) is False
    assert g.record_visit((0, 0), 1) is True


@pytest.mark.parametrize("sparse", [False, True])
def test_record_visit_idempotent(sparse):
    g = OccupancyGrid(3, 3, sparse=sparse)
    assert g.record_visit((1, -2), 0) is False
    assert g.record_visit((1, -2), 0) is False
    assert g.mask((1, -2)) == 0b001


@pytest.mark.parametrize("sparse", [False, True])
def test_record_visit_third_packet(sparse):
    g = OccupancyGrid(3, 3, sparse=sparse)
    g.record_visit((2, 2), 0)
    g.record_visit((2, 2), 1)
    assert g.record_visit((2, 2), 2) is True
    # already full: a repeat does not "become" full again
    assert g.record_visit((2, 2), 2) is False


def test_record_visit_out_of_bounds():
    g = OccupancyGrid(3, 2)
    with pytest.raises(IndexError):
        g.record_visit((4, 0), 0)
    with pytest.raises(IndexError):
        g.record_visit((0, 0), 2)


def test_intersection_nonempty_examples():
    assert intersection_nonempty([{(0, 0)}, {(0, 0)}])
    assert not intersection_nonempty([{(0, 0)}, {(1, 0)}])
    with pytest.raises(ValueError):
        intersection_nonempty([{(0, 0)}])


@pytest.mark.parametrize("sparse", [False, True])
def test_online_matches_oracle_200_triples(sparse):
    rng = np.random.default_rng(20240601)
    m = 20  # 41 x 41 grid
    hits = 0
    for _ in range(200):
        paths = random_paths(rng, 3, m)
        g = OccupancyGrid(m, 3, sparse=sparse)
        got = online_verdict(g, paths, interleaving(rng, paths))
        want = intersection_nonempty(paths)
        assert got == want
        hits += want
    # the cases must exercise both verdicts
    assert 0 < hits < 200


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2 ** 32 - 1))
def test_online_matches_oracle_property(p, seed):
    rng = np.random.default_rng(seed)
    paths = random_paths(rng, p, 6, max_len=40)
    g = OccupancyGrid(6, p)
    assert online_verdict(g, paths, interleaving(rng, paths)) == intersection_nonempty(paths)


def test_popcount_monotone():
    rng = np.random.default_rng(3)
    g = OccupancyGrid(5, 4)
    before = {}
    for _ in range(500):
        cell = tuple(int(v) for v in rng.integers(-5, 6, size=2))
        g.record_visit(cell, int(rng.integers(4)))
        now = g.nonzero_cells()
        for c, mask in before.items():
            assert now[c] & mask == mask
            assert now[c] <= int(g.full_mask)
        before = now


@pytest.mark.parametrize("sparse", [False, True])
def test_reset_restores_empty(sparse):
    rng = np.random.default_rng(8)
    g = OccupancyGrid(12, 3, sparse=sparse)
    for _ in range(3):
        for _ in range(300):
            cell = tuple(int(v) for v in rng.integers(-12, 13, size=2))
            g.record_visit(cell, int(rng.integers(3)))
        assert g.nonzero_cells()
        g.reset()
        assert g.nonzero_cells() == {}
        if not sparse:
            assert not g.cells.any()


def test_sparse_dense_parity():
    rng = np.random.default_rng(11)
    d, s = OccupancyGrid(9, 3), OccupancyGrid(9, 3, sparse=True)
    for _ in range(1000):
        cell = tuple(int(v) for v in rng.integers(-9, 10, size=2))
        k = int(rng.integers(3))
        assert d.record_visit(cell, k) == s.record_visit(cell, k)
    assert d.nonzero_cells() == s.nonzero_cells()


@pytest.mark.parametrize("sparse", [False, True])
def test_snapshot_restore_roundtrip(sparse):
    rng = np.random.default_rng(5)
    g = OccupancyGrid(10, 2, sparse=sparse)
    for _ in range(200):
        cell = tuple(int(v) for v in rng.integers(-7, 8, size=2))
        g.record_visit(cell, int(rng.integers(2)))
    saved = g.nonzero_cells()
    snap = g.snapshot()
    g.record_visit((9, 9), 0)
    g.record_visit((-10, 3), 1)
    g.restore(snap)
    assert g.nonzero_cells() == saved
    g.reset()
    assert g.nonzero_cells() == {}


def test_memory_footprint():
    assert OccupancyGrid(50, 2).nbytes == 101 ** 2 == dense_bytes(50)


def test_make_grid_budget_selects_sparse():
    assert not make_grid(100, 2, memory_budget=10 ** 6).sparse
    assert make_grid(100, 2, memory_budget=1000).sparse
    assert make_grid(100, 2, force_sparse=True).sparse


def test_grid_argument_validation():
    with pytest.raises(ValueError):
        OccupancyGrid(0, 2)
    with pytest.raises(ValueError):
        OccupancyGrid(5, 9)
