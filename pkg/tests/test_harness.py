"""Harness: derived metrics, plan carrying, experiment runs, serialization."""

import csv
import io
import math

import numpy as np
import pytest

from tieralloc import (CSV_COLUMNS, AllocationResult, CapacityLedger,
                       CloudNode, ExecutionPlan, LTW, LTWEntry, LocationMap,
                       MetricsRow, MobileUser, ProfileSet, Scenario,
                       ScenarioError, Service, ServiceDirectory, UserInstance,
                       carry_plans, compute_throughput, compute_two_tier_gain,
                       emit_results, gain_pct, leaf, rows_to_csv,
                       rows_to_table, run_experiment, summarize,
                       trajectory_from_pairs)
from tieralloc.errors import (TooLargeForEnumeration, UndefinedGain,
                              UndefinedThroughput)

LOCAL = "local"
PUBLIC = "public"


# --- derived metrics -------------------------------------------------------------------

def test_throughput_is_achieved_over_optimal():
    assert compute_throughput(0.6, 0.8) == pytest.approx(75.0)
    assert compute_throughput(0.8, 0.8) == pytest.approx(100.0)
    assert compute_throughput(0.9, 0.8) > 100.0  # scoring noise may exceed it
    with pytest.raises(UndefinedThroughput):
        compute_throughput(0.5, 0.0)
    with pytest.raises(UndefinedThroughput):
        compute_throughput(0.5, -1.0)


def test_gain_is_percent_reduction_from_the_baseline():
    assert gain_pct(73.0, 100.0) == pytest.approx(27.0)
    assert gain_pct(100.0, 100.0) == 0.0
    assert gain_pct(120.0, 100.0) == pytest.approx(-20.0)
    with pytest.raises(UndefinedGain):
        gain_pct(5.0, 0.0)


def test_two_tier_gain_covers_the_unfixed_dimensions():
    from tieralloc import QoSTriple as Q
    treat = Q(0.8, 90.0, 950.0)
    base = Q(1.0, 100.0, 1000.0)
    gains = compute_two_tier_gain(treat, base, "delay")
    assert set(gains) == {"price", "power"}
    assert gains["price"] == pytest.approx(20.0)
    assert gains["power"] == pytest.approx(10.0)
    with pytest.raises(ValueError):
        compute_two_tier_gain(treat, base, "cost")


# --- plan carrying ----------------------------------------------------------------------

def _carry_world():
    grid = LocationMap(4, 1, 100.0, wifi={0: 1, 3: 2})
    clouds = {1: CloudNode(1, LOCAL, location=0, capacity=1),
              2: CloudNode(2, LOCAL, location=3, capacity=1),
              9: CloudNode(9, PUBLIC)}
    directory = ServiceDirectory(grid, clouds)
    directory.insert(Service(100, "f", host_cloud=1, compute_ref="local"))
    directory.insert(Service(101, "f", host_cloud=2, compute_ref="local"))
    directory.insert(Service(102, "f", host_cloud=9, compute_ref="public"))
    user = MobileUser(0, trajectory_from_pairs([(0, 60.0)]))
    profiles = ProfileSet.defaults()

    def instance(ltw):
        return UserInstance(user, ltw, directory, profiles, grid)

    return instance


def test_carry_keeps_the_plan_when_prediction_was_exact():
    instance = _carry_world()
    inst = instance(LTW((LTWEntry(0, 60.0, leaf("f", 2048.0)),)))
    plan = ExecutionPlan({(0, 0): 100})
    res = AllocationResult({0: plan}, 1.0, True)
    out = carry_plans(res, {0: inst}, {0: inst}, np.random.default_rng(0), None)
    assert out[0] is plan


def test_carry_keeps_surviving_entries_and_redraws_mispredicted_ones():
    instance = _carry_world()
    shared = leaf("f", 2048.0)
    predicted = instance(LTW((LTWEntry(0, 60.0, shared),
                              LTWEntry(0, 60.0, leaf("f", 2048.0)))))
    true = instance(LTW((LTWEntry(3, 60.0, shared),  # moved, same request
                         LTWEntry(0, 60.0, leaf("f", 1024.0)))))  # new request
    plan = ExecutionPlan({(0, 0): 100, (1, 0): 100})
    ledger = CapacityLedger({1: 1, 2: 1})
    assert ledger.try_admit(1)  # the allocator admitted the predicted plan
    res = AllocationResult({0: plan}, 1.0, True)
    out = carry_plans(res, {0: predicted}, {0: true},
                      np.random.default_rng(1), ledger)
    mapped = out[0]
    assert mapped.assignments[(0, 0)] == 100  # surviving workflow keeps its pick
    redrawn = mapped.assignments[(1, 0)]
    assert redrawn in (100, 101, 102)
    # ledger reflects what actually runs
    used = true.plan_clouds(mapped)
    for cid in (1, 2):
        assert ledger.count(cid) == (1 if cid in used else 0)


def test_carry_redraw_respects_availability_and_survives_full_clouds():
    instance = _carry_world()
    predicted = instance(LTW((LTWEntry(0, 60.0, leaf("f", 2048.0)),)))
    true = instance(LTW((LTWEntry(0, 60.0, leaf("f", 2048.0)),)))
    plan = ExecutionPlan({(0, 0): 102})
    res = AllocationResult({0: plan}, 1.0, True)

    no_local_2 = lambda sid: sid != 101
    out = carry_plans(res, {0: predicted}, {0: true},
                      np.random.default_rng(2), None, no_local_2)
    assert out[0].assignments[(0, 0)] in (100, 102)

    # with everything filtered the request still runs somewhere
    ledger = CapacityLedger({1: 1, 2: 1})
    assert ledger.try_admit(1) and ledger.try_admit(2)  # other users fill up
    nothing = lambda sid: False
    out = carry_plans(res, {0: predicted}, {0: true},
                      np.random.default_rng(3), ledger, nothing)
    assert out[0].assignments[(0, 0)] in (100, 101, 102)


# --- experiment runs ----------------------------------------------------------------------

def _scenario(**kw):
    defaults = dict(scenario_id="unit", grid_width=6, grid_height=6,
                    local_clouds=3, public_instances=1, users=3,
                    workflows_per_user=1, duration_s=120.0,
                    template_mix={"file_sync": 1.0}, repetitions=2, seed=5)
    defaults.update(kw)
    return Scenario(**defaults)


def test_experiment_emits_one_row_per_algorithm_and_repetition():
    rows = run_experiment(_scenario(algorithm="all"))
    assert len(rows) == 2 * 4  # music, rsa, greedy, bruteforce x 2 reps
    by_alg = {}
    for row in rows:
        by_alg.setdefault(row.algorithm, []).append(row)
        assert row.scenario_id == "unit"
        assert (row.users, row.groups, row.seed) == (3, 0, 5)
        assert 0.0 <= row.utility <= 1.0
        assert row.throughput_pct is not None
        assert row.fixed_dimension == ""
    assert sorted(by_alg) == ["bruteforce", "greedy", "music", "rsa"]
    for alg, rs in by_alg.items():
        assert [r.repetition for r in rs] == [0, 1]
    for row in by_alg["bruteforce"]:
        assert row.throughput_pct == pytest.approx(100.0)


def test_experiment_is_byte_reproducible():
    a = rows_to_csv(run_experiment(_scenario(algorithm="music")))
    b = rows_to_csv(run_experiment(_scenario(algorithm="music")))
    assert a == b


def test_enumeration_cap_skips_or_raises_per_request():
    # under "all" an oversized instance silently drops the bruteforce rows
    rows = run_experiment(_scenario(algorithm="all", enumeration_cap=1,
                                    repetitions=1))
    algs = [r.algorithm for r in rows]
    assert "bruteforce" not in algs and "music" in algs
    assert all(r.throughput_pct is None for r in rows)
    # an explicit bruteforce request fails loudly instead
    with pytest.raises(TooLargeForEnumeration):
        run_experiment(_scenario(algorithm="bruteforce", enumeration_cap=1,
                                 repetitions=1))


def test_fixed_dimension_study_reports_gains():
    rows = run_experiment(_scenario(algorithm="music", repetitions=1,
                                    fixed_dimension="delay"))
    assert len(rows) == 1
    row = rows[0]
    assert row.fixed_dimension == "delay"
    assert row.throughput_pct is None
    for val in (row.gain_price_pct, row.gain_power_pct, row.gain_delay_pct):
        assert val is not None and math.isfinite(val)


def test_fixed_dimension_rejects_bruteforce():
    with pytest.raises(ScenarioError, match="bruteforce"):
        run_experiment(_scenario(algorithm="bruteforce",
                                 fixed_dimension="price"))
    with pytest.raises(ScenarioError, match="bruteforce"):
        run_experiment(_scenario(algorithm="all", fixed_dimension="price"))


def test_uncertain_predictions_still_produce_full_rows():
    rows = run_experiment(_scenario(algorithm="greedy", uncertainty_pct=50.0,
                                    repetitions=2))
    assert len(rows) == 2
    for row in rows:
        assert row.uncertainty_pct == 50.0
        assert 0.0 <= row.utility <= 1.0
        assert row.mean_delay_ms > 0.0


# --- serialization ----------------------------------------------------------------------

def _row(**kw):
    defaults = dict(scenario_id="s", algorithm="music", users=5, groups=0,
                    uncertainty_pct=0.0, repetition=0, utility=0.75,
                    throughput_pct=88.5, mean_delay_ms=1234.5678901,
                    mean_power_mj=9.0, mean_price_usd=0.25,
                    gain_price_pct=None, gain_power_pct=None,
                    gain_delay_pct=None, fixed_dimension="", seed=7)
    defaults.update(kw)
    return MetricsRow(**defaults)


def test_record_order_matches_the_schema():
    row = _row()
    record = dict(zip(CSV_COLUMNS, row.as_record()))
    assert record["scenario_id"] == "s"
    assert record["algorithm"] == "music"
    assert record["users"] == 5
    assert record["utility"] == 0.75
    assert record["gain_price_pct"] is None
    assert record["seed"] == 7
    assert len(CSV_COLUMNS) == len(row.as_record()) == 16


def test_csv_fixes_metric_precision_and_blanks_missing_values():
    text = rows_to_csv([_row()])
    lines = text.splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    fields = next(csv.reader(io.StringIO(lines[1])))
    record = dict(zip(CSV_COLUMNS, fields))
    assert record["utility"] == "0.750000"
    assert record["throughput_pct"] == "88.500000"
    assert record["mean_delay_ms"] == "1234.567890"  # six decimals, rounded
    assert record["gain_price_pct"] == ""
    assert record["uncertainty_pct"] == "0"
    assert record["seed"] == "7"
    assert text.endswith("\n") and "\r" not in text


def test_table_rendering_shows_blanks_as_dashes():
    text = rows_to_table([_row(throughput_pct=None)])
    lines = text.splitlines()
    assert lines[0].split()[:2] == ["scenario_id", "algorithm"]
    assert set(lines[1]) <= {"-", " "}
    body = lines[2].split()
    assert "-" in body  # the blank throughput column
    assert "0.750000" in body


def test_emit_results_writes_files_and_rejects_unknown_formats(tmp_path):
    rows = [_row()]
    out = tmp_path / "r.csv"
    text = emit_results(rows, "csv", str(out))
    assert out.read_text() == text == rows_to_csv(rows)
    assert emit_results(rows, "table") == rows_to_table(rows)
    with pytest.raises(ValueError):
        emit_results(rows, "parquet")


def test_summary_means_and_deviations_per_setting():
    rows = [_row(repetition=0, utility=0.4, throughput_pct=None),
            _row(repetition=1, utility=0.6, throughput_pct=90.0),
            _row(algorithm="greedy", utility=0.5, throughput_pct=None)]
    recs = summarize(rows)
    assert len(recs) == 2
    by_alg = {r["algorithm"]: r for r in recs}
    music = by_alg["music"]
    assert music["repetitions"] == 2
    assert music["utility_mean"] == pytest.approx(0.5)
    assert music["utility_std"] == pytest.approx(0.1)
    assert music["throughput_pct_mean"] == pytest.approx(90.0)  # None skipped
    assert by_alg["greedy"]["repetitions"] == 1
    assert "throughput_pct_mean" not in by_alg["greedy"]
