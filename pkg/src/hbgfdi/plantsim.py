"""Three-tank hybrid plant: fixed-step RK4 with guard-driven valve switching.

Scenario files use one statement per line::

    param R12 1.0
    input Qp1 0 0.61          # signal, breakpoint time, value
    fault abrupt R12 at=1.0 value=5.0
    fault progressive R12 at=1.0 rate=0.5
    fault intermittent R12 on=1.0 off=2.0 period=3.0 value=5.0
    initial De1=0 De2=0 De3=0
    sim t_end=10 ts=0.01 noise=0 seed=42
"""
from __future__ import annotations

import math
import shlex
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Mapping, Optional

import numpy as np

from . import kernels

PARAM_ORDER = ("C1", "C2", "C3", "R1", "R12", "R23", "R2")
INPUTS = ("Qp1", "Qp2")
LEVELS = ("De1", "De2", "De3")


class SimulationError(RuntimeError):
    pass


class ScenarioError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class PlantModel:
    params: Mapping[str, float] = field(default_factory=lambda: {p: 1.0 for p in PARAM_ORDER})
    thresholds: tuple = (0.5, 0.7)  # valve inlet heights; also the guard levels
    h0: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        missing = [p for p in PARAM_ORDER if p not in self.params]
        if missing:
            raise ValueError(f"missing plant parameters: {', '.join(missing)}")
        bad = [p for p in PARAM_ORDER if not self.params[p] > 0]
        if bad:
            raise ValueError(f"plant parameters must be positive: {', '.join(bad)}")


@dataclass(frozen=True)
class InputProfile:
    """Piecewise-constant pump flows, as sorted ``(time, value)`` breakpoints per signal."""

    breakpoints: Mapping[str, tuple] = field(default_factory=dict)

    def __post_init__(self):
        for name, pts in self.breakpoints.items():
            times = [t for t, _ in pts]
            if times != sorted(times):
                raise ValueError(f"breakpoints of {name} must be sorted in time")
            if any(v < 0 for _, v in pts):
                raise ValueError(f"input {name} must be nonnegative")

    def value_at(self, name: str, t):
        pts = self.breakpoints.get(name, ())
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for t0, v in pts:
            out = np.where(t >= t0 - 1e-12, v, out)
        return out


@dataclass(frozen=True)
class FaultProfile:
    target: str
    kind: str  # abrupt | progressive | intermittent
    t0: float = 0.0
    value: float = 0.0
    rate: float = 0.0
    t_on: float = 0.0
    t_off: float = 0.0
    period: float = 0.0

    def __post_init__(self):
        if self.kind not in ("abrupt", "progressive", "intermittent"):
            raise ValueError(f"unknown fault kind {self.kind!r}")
        if self.kind in ("abrupt", "intermittent") and not self.value > 0:
            raise ValueError("faulty parameter value must be positive")
        if self.kind == "intermittent" and not (0 <= self.t_off - self.t_on <= self.period and self.period > 0):
            raise ValueError("intermittent fault needs 0 <= off-on <= period and period > 0")

    def value_at(self, nominal: float, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "abrupt":
            return np.where(t >= self.t0, self.value, nominal)
        if self.kind == "progressive":
            return np.where(t >= self.t0, nominal + self.rate * (t - self.t0), nominal)
        phase = np.mod(t - self.t_on, self.period)
        active = (t >= self.t_on) & (phase < self.t_off - self.t_on)
        return np.where(active, self.value, nominal)


@dataclass(frozen=True)
class Scenario:
    model: PlantModel
    inputs: InputProfile
    fault: Optional[FaultProfile] = None
    t_end: float = 10.0
    ts: float = 0.01
    noise_std: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class Trace:
    t: np.ndarray
    signals: Mapping[str, np.ndarray]
    modes: Mapping[str, np.ndarray]
    levels: Optional[np.ndarray] = None  # noise-free states, (n, 3)

    def __post_init__(self):
        n = len(self.t)
        for name, s in list(self.signals.items()) + list(self.modes.items()):
            if len(s) != n:
                raise ValueError(f"series {name!r} has length {len(s)}, expected {n}")

    @property
    def ts(self) -> float:
        return float(self.t[1] - self.t[0])


def simulate(
    m: PlantModel,
    inputs: InputProfile,
    fault: Optional[FaultProfile] = None,
    t_end: float = 10.0,
    ts: float = 0.01,
    noise_std: float = 0.0,
    seed: int = 0,
) -> Trace:
    if not (ts > 0 and t_end > 0):
        raise ValueError("t_s and t_end must be positive")
    n = int(round(t_end / ts))
    t = np.arange(n + 1) * ts
    tk = t[:-1]
    stage_t = np.stack([tk, tk + 0.5 * ts, tk + ts], axis=1)
    params = np.empty((n, 3, len(PARAM_ORDER)))
    for i, p in enumerate(PARAM_ORDER):
        nominal = float(m.params[p])
        params[:, :, i] = fault.value_at(nominal, stage_t) if fault is not None and fault.target == p else nominal
    if fault is not None and fault.target not in PARAM_ORDER:
        raise ValueError(f"fault target {fault.target!r} is not a plant parameter")
    u = np.stack([inputs.value_at(name, t) for name in INPUTS], axis=1)
    levels, alpha, failed = kernels.integrate_tanks(np.asarray(m.h0, float), params, u[:-1], ts, m.thresholds)
    if failed >= 0:
        raise SimulationError(f"state became non-finite at t={t[failed + 1]:.4g} s; check parameters and inputs")
    measured = levels
    if noise_std > 0:
        rng = np.random.default_rng(seed)
        measured = levels + rng.normal(0.0, noise_std, size=levels.shape)
    signals = {name: measured[:, i].copy() for i, name in enumerate(LEVELS)}
    for i, name in enumerate(INPUTS):
        signals[name] = u[:, i]
    modes = {"a1": alpha[:, 0].astype(np.int8), "a2": alpha[:, 1].astype(np.int8)}
    return Trace(t, signals, modes, levels)


def run_scenario(sc: Scenario) -> Trace:
    return simulate(sc.model, sc.inputs, sc.fault, sc.t_end, sc.ts, sc.noise_std, sc.seed)


# ---------------------------------------------------------------------------
# scenario files

def _kv(parts, allowed, lineno):
    out = {}
    for p in parts:
        if "=" not in p:
            raise ScenarioError(f"expected key=value, got {p!r}", lineno)
        k, v = p.split("=", 1)
        if k not in allowed:
            raise ScenarioError(f"unknown key {k!r}", lineno)
        try:
            out[k] = float(v)
        except ValueError:
            raise ScenarioError(f"expected a number for {k}, got {v!r}", lineno) from None
    return out


def parse_scenario(text: str) -> Scenario:
    params = {p: 1.0 for p in PARAM_ORDER}
    bps: dict[str, list] = {}
    fault = None
    sim = {"t_end": 10.0, "ts": 0.01, "noise": 0.0, "seed": 0.0}
    h0 = [0.0, 0.0, 0.0]
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *args = shlex.split(line)
        try:
            if head == "param":
                if len(args) != 2 or args[0] not in PARAM_ORDER:
                    raise ScenarioError(f"param needs one of {', '.join(PARAM_ORDER)} and a value", lineno)
                params[args[0]] = float(args[1])
            elif head == "input":
                if len(args) != 3 or args[0] not in INPUTS:
                    raise ScenarioError("input needs a signal (Qp1 or Qp2), a time and a value", lineno)
                bps.setdefault(args[0], []).append((float(args[1]), float(args[2])))
            elif head == "fault":
                if len(args) < 2:
                    raise ScenarioError("fault needs a kind and a target", lineno)
                kind, target = args[0], args[1]
                kv = _kv(args[2:], {"at", "value", "rate", "on", "off", "period"}, lineno)
                fault = FaultProfile(
                    target, kind, t0=kv.get("at", 0.0), value=kv.get("value", 0.0), rate=kv.get("rate", 0.0),
                    t_on=kv.get("on", 0.0), t_off=kv.get("off", 0.0), period=kv.get("period", 0.0),
                )
            elif head == "initial":
                kv = _kv(args, set(LEVELS), lineno)
                for i, name in enumerate(LEVELS):
                    h0[i] = kv.get(name, h0[i])
            elif head == "sim":
                sim.update(_kv(args, {"t_end", "ts", "noise", "seed"}, lineno))
            else:
                raise ScenarioError(f"unknown statement {head!r}", lineno)
        except ValueError as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(str(exc), lineno) from None
    try:
        inputs = InputProfile({k: tuple(v) for k, v in bps.items()})
        model = PlantModel(params, h0=tuple(h0))
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    if fault is not None and fault.t0 > sim["t_end"]:
        raise ScenarioError("fault onset lies beyond the simulation horizon")
    return Scenario(model, inputs, fault, sim["t_end"], sim["ts"], sim["noise"], int(sim["seed"]))


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def default_scenario_text() -> str:
    return resources.files("hbgfdi").joinpath("models/default.scn").read_text(encoding="utf-8")


def default_scenario() -> Scenario:
    """Nominal parameters, R12 abruptly 1 -> 5 at t = 1 s, 10 s at 0.01 s.

    Pump 1 starts at t = 1.4 s with 2.0 m^3/s; tank 1 then reaches the valve
    height 0.5 m at t = 1.4 + ln(4/3) = 1.688 s, rising fast enough for the
    faulty valve to show within a few samples of opening.
    """
    return parse_scenario(default_scenario_text())


def constant_input(q1: float, q2: float = 0.0) -> InputProfile:
    return InputProfile({"Qp1": ((0.0, q1),), "Qp2": ((0.0, q2),)})


def single_tank_crossing_time(q: float, level: float, c: float = 1.0, r: float = 1.0) -> float:
    """Closed-form time at which a filling tank ``c h' = q - h/r`` reaches ``level``."""
    if level >= q * r:
        return math.inf
    return -r * c * math.log(1.0 - level / (q * r))


def with_fault(sc: Scenario, fault: Optional[FaultProfile]) -> Scenario:
    return replace(sc, fault=fault)


def write_trace_csv(tr: Trace, fh, extra: Optional[Mapping[str, np.ndarray]] = None) -> None:
    cols = ["t", *LEVELS, *INPUTS, "alpha1", "alpha2"]
    data = [tr.t, *(tr.signals[c] for c in LEVELS), *(tr.signals[c] for c in INPUTS),
            tr.modes["a1"], tr.modes["a2"]]
    if extra:
        cols += list(extra)
        data += list(extra.values())
    fh.write(",".join(cols) + "\n")
    for row in zip(*data):
        fh.write(",".join(_cell(v) for v in row) + "\n")


def _cell(v) -> str:
    if isinstance(v, (np.integer, int)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return ""
    return f"{v:.10g}"
