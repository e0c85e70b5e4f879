import io
from dataclasses import replace

import numpy as np
import pytest

from hbgfdi import pipeline
from hbgfdi.plantsim import FaultProfile, Trace, default_scenario
from hbgfdi.residuals import (
    ResidualError,
    ThresholdSpec,
    coherence,
    default_thresholds,
    diagnose_quant,
    eval_residuals,
    numeric_derivative,
    quant_isolate,
    write_residual_csv,
)
from profiles import random_nominal


def test_numeric_derivative():
    d = numeric_derivative([0.0, 1.0, 3.0], 0.5)
    assert np.isnan(d[0]) and d[1:].tolist() == [2.0, 4.0]
    with pytest.raises(ResidualError):
        numeric_derivative([1.0], 0.1)


def test_threshold_validation():
    with pytest.raises(ValueError):
        ThresholdSpec({"GARR1": 0.0})
    with pytest.raises(ValueError):
        ThresholdSpec({"GARR1": 0.1}, persistence=0)
    assert default_thresholds().eps == {"GARR1": 0.02, "GARR2": 0.01, "GARR3": 0.01}


def test_coherence_ignores_nan_and_needs_persistence():
    r = {"a": np.array([np.nan, 5, 5, 0, 5, 5, 5]), "b": np.zeros(7)}
    cv = coherence(r, ThresholdSpec({"a": 1.0, "b": 1.0}, 3))
    assert cv[:, 0].tolist() == [0, 0, 0, 0, 0, 0, 1]
    assert not cv[:, 1].any()


def test_recomputed_modes_match_plant(bg, default_run):
    for m in ("a1", "a2"):
        np.testing.assert_array_equal(default_run.modes[m], default_run.trace.modes[m])


def test_missing_signal(analysis):
    tr = Trace(np.arange(3) * 0.1, {"De1": np.zeros(3)}, {})
    with pytest.raises(ResidualError, match="lacks signals"):
        eval_residuals(analysis.garrs, tr, {}, {})


def test_isolation_of_all_zero_vector(analysis):
    with pytest.raises(ValueError, match="all zero"):
        quant_isolate((0, 0, 0), analysis.fsm, {"a1": 1, "a2": 1})


@pytest.mark.parametrize("seed", range(5))
def test_nominal_profiles_are_silent(analysis, seed):
    run = pipeline.run_quant(analysis, random_nominal(100 + seed))
    assert not run.coherence.any()
    assert not run.diagnosis.detected


@pytest.mark.parametrize(
    "target, value, t0, vector, candidates",
    [
        ("R1", 3.0, 6.0, (1, 0, 0), {"R1", "C1"}),
        ("C1", 0.5, 6.0, (1, 0, 0), {"R1", "C1"}),
        ("C2", 0.5, 1.0, (0, 1, 0), {"C2"}),
        ("R23", 5.0, 6.0, (0, 1, 1), {"R23"}),
        ("C3", 0.5, 6.0, (0, 0, 1), {"C3", "R2"}),
        ("R2", 3.0, 6.0, (0, 0, 1), {"C3", "R2"}),
        ("R12", 5.0, 6.0, (1, 1, 0), {"R12"}),
    ],
)
def test_single_fault_isolation(analysis, target, value, t0, vector, candidates):
    sc = replace(default_scenario(), fault=FaultProfile(target, "abrupt", t0=t0, value=value))
    d = pipeline.run_quant(analysis, sc).diagnosis
    assert d.detected and d.detection_time >= t0
    assert d.vector == vector and set(d.candidates) == candidates


def test_r23_fault_stays_hidden_until_its_valve_opens(analysis):
    sc = replace(default_scenario(), fault=FaultProfile("R23", "abrupt", t0=1.0, value=5.0))
    run = pipeline.run_quant(analysis, sc)
    first_a2 = int(np.flatnonzero(run.modes["a2"])[0])
    assert run.diagnosis.detection_index >= first_a2


def test_progressive_fault_is_detected(analysis):
    sc = replace(default_scenario(), fault=FaultProfile("R12", "progressive", t0=3.0, rate=2.0))
    d = pipeline.run_quant(analysis, sc).diagnosis
    assert d.detected and d.detection_time > 3.0 and "R12" in d.candidates


def test_diagnosis_without_detection(analysis):
    t = np.arange(10) * 0.01
    d = diagnose_quant(np.zeros((10, 3), dtype=np.uint8), t, {"a1": np.zeros(10)}, analysis.fsm)
    assert not d.detected and d.candidates == frozenset()


def test_residual_csv_columns(default_run):
    buf = io.StringIO()
    write_residual_csv(default_run.trace, default_run.modes, default_run.residuals, default_run.coherence, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,De1,De2,De3,Qp1,Qp2,alpha1,alpha2,r1,r2,r3,c1,c2,c3"
    assert len(lines) == 1002
    assert lines[1].split(",")[8] == ""  # no derivative at the first sample
