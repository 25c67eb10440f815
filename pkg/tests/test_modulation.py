import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from looserope.errors import RangeOutOfBounds, TimestepOutOfRange, ValidationError
from looserope.modulation import (
    ModulationCurve,
    RelaxationSchedule,
    Stage,
    eval_curve,
    identity_curve,
    default_k_curve,
    default_r_curve,
    schedule_params,
)
from oracles import tanh_curve

# frozen from the scalar tanh oracle with the published bounds and steepness
R_AT_1 = 0.9996811320819599
K_AT_1 = 1.3399984403762346


def test_curve_endpoints():
    r, k = default_r_curve(), default_k_curve()
    assert eval_curve(r, 0.0) == pytest.approx(0.825, abs=1e-12)
    assert eval_curve(r, 1.0) == pytest.approx(R_AT_1, abs=1e-12)
    assert eval_curve(k, 0.0) == pytest.approx(0.995, abs=1e-12)
    assert eval_curve(k, 1.0) == pytest.approx(K_AT_1, abs=1e-12)
    assert tanh_curve(1.0, 0.65, 1.0, 3.5) == R_AT_1


def test_identity_curve_is_exactly_one():
    c = identity_curve()
    assert all(c(s) == 1.0 for s in np.linspace(0, 1, 11))


def test_centered_curve_reaches_both_bounds():
    c = default_r_curve(center=0.5)
    assert c(0.5) == pytest.approx(0.825)
    assert c(0.0) < 0.7 and c(1.0) > 0.95


def test_curve_rejects_out_of_range():
    with pytest.raises(RangeOutOfBounds):
        eval_curve(default_r_curve(), 1.2)
    with pytest.raises(ValidationError):
        ModulationCurve(1.0, 0.5, 1.0)
    with pytest.raises(ValidationError):
        ModulationCurve(0.5, 1.0, 0.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_curve_monotone_and_bounded(a, b):
    lo, hi = sorted((a, b))
    for c in (default_r_curve(), default_k_curve()):
        assert c(lo) <= c(hi)
        mid = (c.v_min + c.v_max) / 2
        assert mid - 1e-12 <= c(hi) <= c.v_max
    assert default_r_curve()(hi) <= 1.0


def test_quantized_curve_is_step_function():
    c = default_r_curve(quant_levels=5)
    vals = {c(s) for s in np.linspace(0, 1, 101)}
    assert len(vals) <= 5
    assert c(0.6) == pytest.approx(tanh_curve(0.5, 0.65, 1.0, 3.5))


def test_schedule_table():
    sch = RelaxationSchedule()
    r, k, active = schedule_params(sch, 0)
    assert (r.v_min, k.v_min, k.v_max, active) == (0.65, 0.65, 1.34, True)
    r, k, active = schedule_params(sch, 10)
    assert (r.v_min, k.v_min, k.v_max, active) == (0.9, 0.76, 1.24, True)
    r, k, active = schedule_params(sch, 18)
    assert (r.v_min, k.v_min, k.v_max, active) == (1.0, 0.84, 1.17, True)
    r, k, active = schedule_params(sch, 22)
    assert active is False
    assert r.v_max == 1.0 and r.G == 3.5 and k.G == 6.5


def test_schedule_piecewise_constant_right_continuous():
    sch = RelaxationSchedule()
    lows = [schedule_params(sch, t)[0].v_min for t in range(28)]
    assert lows[:10] == [0.65] * 10
    assert lows[10:18] == [0.9] * 8
    assert lows[18:] == [1.0] * 10
    assert [schedule_params(sch, t)[2] for t in range(28)] == [t < 22 for t in range(28)]


def test_schedule_errors():
    with pytest.raises(TimestepOutOfRange):
        schedule_params(RelaxationSchedule(), 28)
    with pytest.raises(TimestepOutOfRange):
        schedule_params(RelaxationSchedule(), -1)
    with pytest.raises(ValidationError):
        RelaxationSchedule(stages=(Stage(5, 1, 1, 1),))
    with pytest.raises(ValidationError):
        RelaxationSchedule(modulation_window=30)
