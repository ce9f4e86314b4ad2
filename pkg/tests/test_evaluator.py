from __future__ import annotations

from fractions import Fraction

import pytest
from oracles import band_by_isqrt

from travelsim.evaluator import (Calibration, CalibrationError, Score, band, binary_score, calibrate,
                                 evaluate, level3, score_from_counts)
from travelsim.scenarios import GenParams, generate_task, generate_world
from travelsim.simulator import simulate


def test_full_marks():
    s = score_from_counts(8, 8, 3, 3, 90, 100, 200)
    assert (s.s1, s.s2, s.s3, s.total, s.binary) == (60, 20, 20, 100, True)


def test_half_level1_gates_the_rest():
    s = score_from_counts(3, 6, 2, 2, 0, 10, 20)
    assert (s.s1, s.s2, s.s3, s.total, s.binary) == (30, 0, 0, 30, False)


def test_half_level2_gates_level3():
    s = score_from_counts(4, 4, 1, 2, 0, 10, 20)
    assert (s.s1, s.s2, s.s3) == (60, 10, 0)


def test_level3_midpoint_and_boundaries():
    assert level3(15000, 10000, 20000) == 10
    assert level3(20000, 10000, 20000) == 0
    assert level3(10000, 10000, 20000) == 20
    assert level3(5, 7, 7) == 20 and level3(8, 7, 7) == 0


def test_degenerate_counts():
    assert score_from_counts(0, 0, 0, 0, 0, 1, 2).total == 0
    assert score_from_counts(4, 4, 0, 0, 5, 1, 2).s2 == 20


def test_binary_is_strict():
    assert binary_score(Score(Fraction(60), Fraction(0), Fraction(0)))
    assert not binary_score(Score(Fraction(5999, 100), Fraction(0), Fraction(0)))


def test_band_examples():
    assert band([9000, 11000]) == (9000, 11000)
    assert band([7, 7, 7]) == (7, 7)
    with pytest.raises(CalibrationError):
        band([])


def test_band_matches_integer_square_root_oracle():
    values = [3, 8, 8, 13, 21, 34, 55]
    a, b = band(values)
    oa, ob, _, _ = band_by_isqrt(values)
    assert (a, b) == (oa, ob)


def test_calibration_round_trip_is_exact():
    c = Calibration(Fraction(1, 3), Fraction(7, 2), "cost_cents", (1, 2))
    assert Calibration.from_dict(c.to_dict()) == c
    with pytest.raises(CalibrationError):
        Calibration(Fraction(3), Fraction(2), "cost_cents")


def test_calibrate_logs_valid_samples_and_objective_must_match():
    world = generate_world(GenParams(seed=4))
    task = generate_task(world, 2, 4)
    calib = calibrate(world, task, n=20, seed=1)
    assert calib.sample_size == 20
    assert (calib.a, calib.b) == band(calib.sample_values)
    trace = simulate(world, task, task.witness)
    assert evaluate(trace, task, calib).binary
    other = "total_minutes" if task.objective == "cost_cents" else "cost_cents"
    with pytest.raises(CalibrationError):
        evaluate(trace, task, Calibration(calib.a, calib.b, other))


def test_calibrate_fails_when_sampler_falls_short():
    world = generate_world(GenParams(seed=4))
    task = generate_task(world, 2, 4)
    with pytest.raises(CalibrationError):
        calibrate(world, task, sampler=lambda w, t, n, s: [], n=3)
