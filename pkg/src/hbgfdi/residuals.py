"""Numeric residual evaluation, thresholding and quantitative isolation."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Optional

import numpy as np

from . import kernels
from .bondgraph import BondGraph
from .fsm import FsmTable, instantiate_mode_fsm
from .garr import GarrSet
from .guards import evaluate_guard
from .plantsim import Trace, write_trace_csv
from .symbolic import Valuation, evaluate, free_symbols


class ResidualError(ValueError):
    pass


@dataclass(frozen=True)
class ThresholdSpec:
    eps: Mapping[str, float]
    persistence: int = 3

    def __post_init__(self):
        if any(not v > 0 for v in self.eps.values()):
            raise ValueError("thresholds must be positive")
        if self.persistence < 1:
            raise ValueError("persistence must be at least 1")


def default_thresholds(persistence: int = 3) -> ThresholdSpec:
    return ThresholdSpec({"GARR1": 0.02, "GARR2": 0.01, "GARR3": 0.01}, persistence)


def numeric_derivative(series, ts: float) -> np.ndarray:
    """Backward difference; sample 0 has no predecessor and is NaN."""
    x = np.asarray(series, dtype=float)
    if x.shape[0] < 2:
        raise ResidualError("numeric derivative needs at least two samples")
    d = np.empty_like(x)
    d[0] = np.nan
    d[1:] = (x[1:] - x[:-1]) / ts
    return d


def recompute_modes(tr: Trace, bg: BondGraph) -> dict[str, np.ndarray]:
    """Mode series from the guards evaluated on the measured signals."""
    out = {}
    for m in bg.mode_signals:
        if m.guard is None:
            if m.name not in tr.modes:
                raise ResidualError(f"external mode {m.name!r} is not in the trace")
            out[m.name] = np.asarray(tr.modes[m.name], dtype=np.int8)
        else:
            out[m.name] = np.asarray(evaluate_guard(m.guard, tr.signals), dtype=np.int8)
    return out


def eval_residuals(
    g: GarrSet, tr: Trace, params: Mapping[str, float], modes: Mapping[str, np.ndarray]
) -> dict[str, np.ndarray]:
    """Residual series per relation; the first sample is NaN (no derivative yet)."""
    needed = set()
    for _, e in g.garrs:
        needed |= free_symbols(e)[2]
    missing = sorted(needed - set(tr.signals))
    if missing:
        raise ResidualError(f"trace lacks signals: {', '.join(missing)}")
    derivs = {name: numeric_derivative(tr.signals[name], tr.ts) for name in needed}
    v = Valuation(params=dict(params), modes=dict(modes), signals=dict(tr.signals), signal_derivs=derivs)
    out = {}
    n = len(tr.t)
    for name, e in g.garrs:
        r = np.broadcast_to(np.asarray(evaluate(e, v), dtype=float), (n,)).copy()
        r[0] = np.nan
        out[name] = r
    return out


def coherence(residuals: Mapping[str, np.ndarray], th: ThresholdSpec) -> np.ndarray:
    """(n, m) 0/1 array: bit i set when |r_i| > eps_i for W consecutive samples."""
    names = list(residuals)
    if not names:
        return np.zeros((0, 0), dtype=np.uint8)
    r = np.stack([np.asarray(residuals[n], dtype=float) for n in names], axis=1)
    eps = np.array([th.eps[n] for n in names])
    with np.errstate(invalid="ignore"):
        exceed = (np.abs(r) > eps).astype(np.uint8)  # NaN compares false
    return kernels.persistence_mask(exceed, th.persistence)


def quant_isolate(cv, f: FsmTable, mode: Mapping[str, int]) -> set[str]:
    cv = tuple(int(b) for b in cv)
    if not any(cv):
        raise ValueError("coherence vector is all zero: no fault detected, nothing to isolate")
    mf = instantiate_mode_fsm(f, mode)
    return {p for p, row in mf.matrix.items() if row == cv}


@dataclass(frozen=True)
class QuantDiagnosis:
    detected: bool
    detection_index: Optional[int]
    detection_time: Optional[float]
    vector: Optional[tuple]
    vector_index: Optional[int]
    mode: Optional[dict]
    candidates: frozenset


def diagnose_quant(
    cv: np.ndarray,
    t: np.ndarray,
    modes: Mapping[str, np.ndarray],
    f: FsmTable,
    hold: int = 5,
) -> QuantDiagnosis:
    """Isolate from the first coherence vector that holds for ``hold`` samples."""
    active = np.flatnonzero(cv.any(axis=1))
    if active.size == 0:
        return QuantDiagnosis(False, None, None, None, None, None, frozenset())
    k_det = int(active[0])
    n = cv.shape[0]
    k_vec = k_det
    for k in range(k_det, n):
        window = cv[k:k + hold]
        if window.shape[0] == hold and window.any() and (window == window[0]).all() and window[0].any():
            k_vec = k
            break
    vec = tuple(int(b) for b in cv[k_vec])
    mode = {m: int(s[k_vec]) for m, s in modes.items()}
    cands = frozenset(quant_isolate(vec, f, mode)) if any(vec) else frozenset()
    return QuantDiagnosis(True, k_det, float(t[k_det]), vec, k_vec, mode, cands)


def write_residual_csv(tr: Trace, modes, residuals, cv, fh) -> None:
    """CSV with columns t, levels, pumps, recomputed modes, residuals and coherence bits."""
    extra = {}
    for i, name in enumerate(residuals, start=1):
        extra[f"r{i}"] = residuals[name]
    for i in range(cv.shape[1]):
        extra[f"c{i + 1}"] = cv[:, i].astype(int)
    write_trace_csv(replace(tr, modes=dict(modes)), fh, extra)
