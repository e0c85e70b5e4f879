"""End-to-end orchestration shared by the CLI, the benchmarks and the tests."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .bondgraph import BondGraph, load_model
from .causality import Dhbg, derive_dhbg, scap_assign
from .fsm import FsmTable, build_symbolic_fsm
from .garr import GarrSet, generate_garrs
from .plantsim import Scenario, Trace, default_scenario, load_scenario, run_scenario
from .qualitative import Hypothesis, default_hypotheses
from .residuals import (
    QuantDiagnosis,
    ThresholdSpec,
    coherence,
    default_thresholds,
    diagnose_quant,
    eval_residuals,
    recompute_modes,
)
from .tcg import Tcg, build_parametrized_tcg

BUILTIN = "builtin:three-tank"


@dataclass(frozen=True)
class Analysis:
    graph: BondGraph
    dhbg: Dhbg
    garrs: GarrSet
    fsm: FsmTable


def parameter_order(bg: BondGraph) -> list[str]:
    return [el.param for el in bg.one_ports if el.param is not None]


def analyze(bg: BondGraph) -> Analysis:
    d = derive_dhbg(bg)
    g = generate_garrs(d)
    return Analysis(bg, d, g, build_symbolic_fsm(g, parameter_order(bg)))


def load(model: str = BUILTIN) -> BondGraph:
    return load_model(model)


def scenario(path: Optional[str] = None) -> Scenario:
    return default_scenario() if path is None else load_scenario(path)


@dataclass(frozen=True)
class QuantRun:
    trace: Trace
    modes: Mapping[str, np.ndarray]
    residuals: Mapping[str, np.ndarray]
    coherence: np.ndarray
    diagnosis: QuantDiagnosis


def run_quant(a: Analysis, sc: Scenario, th: Optional[ThresholdSpec] = None, trace: Optional[Trace] = None) -> QuantRun:
    th = th or default_thresholds()
    tr = trace if trace is not None else run_scenario(sc)
    modes = recompute_modes(tr, a.graph)
    params = {**a.graph.parameters, **{k: v for k, v in sc.model.params.items() if k in a.graph.parameters}}
    res = eval_residuals(a.garrs, tr, params, modes)
    cv = coherence(res, th)
    return QuantRun(tr, modes, res, cv, diagnose_quant(cv, tr.t, modes, a.fsm))


def qualitative_model(bg: BondGraph) -> tuple[Tcg, list[Hypothesis]]:
    """The parametrized TCG (integral causality) and the default hypothesis list."""
    return build_parametrized_tcg(bg, scap_assign(bg, "integral")), default_hypotheses(bg)
