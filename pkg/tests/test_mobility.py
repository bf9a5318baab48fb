"""Mobility generators: determinism, timing, turn statistics, uncertainty."""

import numpy as np
import pytest

from tieralloc import (LTW, LTWEntry, LocationMap, MobilityParams,
                       UncertaintySpec, generate_manhattan,
                       generate_random_waypoint, generate_trajectory,
                       inject_uncertainty, leaf, seq)
from tieralloc.mobility import _walk_steps

GRID = LocationMap(10, 10, 50.0)


def _params(model, **kw):
    defaults = dict(duration_s=600.0, speed_min=1.0, speed_max=10.0,
                    pause_max_s=10.0, seed=3)
    defaults.update(kw)
    return MobilityParams(model=model, **defaults)


# --- generators ---------------------------------------------------------------------

@pytest.mark.parametrize("model", ["random_waypoint", "manhattan"])
def test_trajectories_are_seed_deterministic(model):
    a = generate_trajectory(_params(model), GRID)
    b = generate_trajectory(_params(model), GRID)
    c = generate_trajectory(_params(model, seed=4), GRID)
    assert a.entries == b.entries
    assert a.entries != c.entries


@pytest.mark.parametrize("model", ["random_waypoint", "manhattan"])
def test_dwells_sum_to_duration_and_cells_are_valid(model):
    for seed in range(5):
        traj = generate_trajectory(_params(model, seed=seed, duration_s=300.0), GRID)
        assert traj.duration() == 300.0
        for entry in traj.entries:
            assert 0 <= entry.cell_id < len(GRID)
            assert entry.dwell_s >= 1.0
        # run-length compression leaves no adjacent repeats
        for prev, cur in zip(traj.entries, traj.entries[1:]):
            assert prev.cell_id != cur.cell_id


@pytest.mark.parametrize("model", ["random_waypoint", "manhattan"])
def test_single_cell_grid_yields_one_stationary_entry(model):
    tiny = LocationMap(1, 1, 10.0)
    traj = generate_trajectory(_params(model, duration_s=42.0), tiny)
    assert traj.entries == (traj.entries[0],)
    assert (traj.entries[0].cell_id, traj.entries[0].dwell_s) == (0, 42.0)


def test_walk_steps_cover_the_leg_in_one_second_strides():
    pos = np.array([0.0, 0.0])
    steps = _walk_steps(pos, np.array([10.0, 0.0]), speed=3.0)
    assert [tuple(p) for p in steps] == [(3.0, 0.0), (6.0, 0.0), (9.0, 0.0),
                                         (10.0, 0.0)]
    steps = _walk_steps(pos, np.array([10.0, 0.0]), speed=5.0)
    assert [tuple(p) for p in steps] == [(5.0, 0.0), (10.0, 0.0)]
    # overshoot clamps to the target in a single stride
    steps = _walk_steps(pos, np.array([2.0, 0.0]), speed=9.0)
    assert [tuple(p) for p in steps] == [(2.0, 0.0)]
    assert _walk_steps(pos, np.array([0.0, 0.0]), speed=5.0) == []


def test_manhattan_moves_along_lanes_between_adjacent_cells():
    traj = generate_manhattan(_params("manhattan", duration_s=2000.0), GRID)
    for prev, cur in zip(traj.entries, traj.entries[1:]):
        dc = abs(cur.cell_id % GRID.width - prev.cell_id % GRID.width)
        dr = abs(cur.cell_id // GRID.width - prev.cell_id // GRID.width)
        assert dc + dr == 1


def test_manhattan_interior_turn_frequencies():
    # fixed speed = cell size per second: one intersection decision per step
    grid = LocationMap(12, 12, 10.0)
    counts = {"straight": 0, "left": 0, "right": 0}
    for seed in range(4):
        traj = generate_manhattan(
            MobilityParams("manhattan", duration_s=12000.0, speed_min=10.0,
                           speed_max=10.0, seed=seed), grid)
        cells = [e.cell_id for e in traj.entries]
        rc = [(c % grid.width, c // grid.width) for c in cells]
        for i in range(1, len(rc) - 1):
            col, row = rc[i]
            if not (0 < col < grid.width - 1 and 0 < row < grid.height - 1):
                continue  # boundary decisions are renormalized, skip them
            d_in = (rc[i][0] - rc[i - 1][0], rc[i][1] - rc[i - 1][1])
            d_out = (rc[i + 1][0] - rc[i][0], rc[i + 1][1] - rc[i][1])
            if d_out == d_in:
                counts["straight"] += 1
            elif d_out == (-d_in[1], d_in[0]):
                counts["left"] += 1
            elif d_out == (d_in[1], -d_in[0]):
                counts["right"] += 1
            else:
                raise AssertionError(f"interior u-turn {d_in} -> {d_out}")
    total = sum(counts.values())
    assert total > 10_000
    assert counts["straight"] / total == pytest.approx(0.5, abs=0.05)
    assert counts["left"] / total == pytest.approx(0.25, abs=0.05)
    assert counts["right"] / total == pytest.approx(0.25, abs=0.05)


def test_mobility_params_validation():
    with pytest.raises(ValueError):
        MobilityParams("levy_flight", duration_s=10.0)
    with pytest.raises(ValueError):
        MobilityParams("manhattan", duration_s=0.0)
    with pytest.raises(ValueError):
        MobilityParams("manhattan", duration_s=10.0, speed_min=5.0, speed_max=1.0)
    with pytest.raises(ValueError):
        MobilityParams("manhattan", duration_s=10.0, pause_max_s=-1.0)


# --- prediction uncertainty ---------------------------------------------------------

class _Template:
    """Minimal template stub: a name and a fresh two-step workflow per draw."""

    def __init__(self, name):
        self.name = name

    def instantiate(self, rng):
        return seq(leaf(f"{self.name}_a", 1.0), leaf(f"{self.name}_b", 1.0))


TEMPLATES = [_Template("alpha"), _Template("beta")]


def _ltw(n, template="alpha", cell=0):
    entries = tuple(LTWEntry(cell, 60.0, TEMPLATES[0].instantiate(None),
                             template=template) for _ in range(n))
    return LTW(entries)


def test_zero_rate_returns_the_same_entry_objects():
    ltw = _ltw(8)
    rng = np.random.default_rng(0)
    out = inject_uncertainty(ltw, UncertaintySpec(rate=0.0), GRID, TEMPLATES, rng)
    assert all(a is b for a, b in zip(out.entries, ltw.entries))


def test_full_rate_location_mode_moves_every_entry():
    ltw = _ltw(50, cell=7)
    rng = np.random.default_rng(1)
    out = inject_uncertainty(ltw, UncertaintySpec(rate=1.0, mode="location"),
                             GRID, TEMPLATES, rng)
    for src, dst in zip(ltw.entries, out.entries):
        assert dst.cell_id != src.cell_id
        assert 0 <= dst.cell_id < len(GRID)
        assert dst.workflow is src.workflow  # the requested work is unchanged
        assert dst.template == src.template
        assert dst.window_s == src.window_s


def test_full_rate_service_mode_swaps_to_a_different_template():
    ltw = _ltw(50, template="alpha", cell=3)
    rng = np.random.default_rng(2)
    out = inject_uncertainty(ltw, UncertaintySpec(rate=1.0, mode="service"),
                             GRID, TEMPLATES, rng)
    for src, dst in zip(ltw.entries, out.entries):
        assert dst.cell_id == src.cell_id
        assert dst.template == "beta"
        assert dst.workflow is not src.workflow


def test_full_rate_both_mode_changes_location_or_service():
    ltw = _ltw(60, cell=5)
    rng = np.random.default_rng(3)
    out = inject_uncertainty(ltw, UncertaintySpec(rate=1.0, mode="both"),
                             GRID, TEMPLATES, rng)
    moved = swapped = 0
    for src, dst in zip(ltw.entries, out.entries):
        if dst.cell_id != src.cell_id:
            moved += 1
        elif dst.template != src.template:
            swapped += 1
        else:
            raise AssertionError("entry survived a rate-1.0 rewrite")
    assert moved > 0 and swapped > 0


def test_partial_rate_rewrites_a_binomial_fraction():
    ltw = _ltw(2000, cell=9)
    rng = np.random.default_rng(4)
    out = inject_uncertainty(ltw, UncertaintySpec(rate=0.3, mode="location"),
                             GRID, TEMPLATES, rng)
    changed = sum(1 for a, b in zip(ltw.entries, out.entries) if a is not b)
    assert changed / 2000 == pytest.approx(0.3, abs=0.05)


def test_input_ltw_is_never_modified():
    ltw = _ltw(30, cell=2)
    before = tuple(ltw.entries)
    fields = [(e.cell_id, e.window_s, e.workflow, e.template) for e in ltw.entries]
    rng = np.random.default_rng(5)
    inject_uncertainty(ltw, UncertaintySpec(rate=1.0, mode="both"),
                       GRID, TEMPLATES, rng)
    assert ltw.entries == before
    assert [(e.cell_id, e.window_s, e.workflow, e.template)
            for e in ltw.entries] == fields


def test_uncertainty_spec_validation_and_template_requirement():
    with pytest.raises(ValueError):
        UncertaintySpec(rate=1.5)
    with pytest.raises(ValueError):
        UncertaintySpec(rate=0.5, mode="weather")
    rng = np.random.default_rng(6)
    with pytest.raises(ValueError):
        inject_uncertainty(_ltw(3), UncertaintySpec(rate=0.5), GRID, [], rng)
