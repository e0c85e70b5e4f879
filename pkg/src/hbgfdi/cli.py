"""Command-line front end. Every subcommand is a thin adapter over the library."""
from __future__ import annotations

import argparse
import io
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from . import pipeline
from .bondgraph import ModelError, parse_model, validate
from .causality import CausalityError, render_dhbg
from .fsm import (
    instantiate_mode_fsm,
    render_fsm,
    render_mode_fsm,
    render_summary,
    summarize_diagnosability,
    standard_modes,
)
from .garr import DerivationError, render_garrs
from .plantsim import ScenarioError, SimulationError, run_scenario, write_trace_csv
from .qualitative import build_qual_fsm, qual_isolate, render_qual_fsm, summarize_qual
from .residuals import ResidualError, ThresholdSpec, write_residual_csv
from .tcg import TcgError, export_dot, export_edge_list, instantiate_mode, render_tcm, to_tcm

DOMAIN_ERRORS = (ModelError, CausalityError, DerivationError, ScenarioError, SimulationError,
                 ResidualError, TcgError, ValueError, KeyError, OSError)


class DomainError(Exception):
    pass


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--model", default=pipeline.BUILTIN, help="model file or builtin:three-tank")
    p.add_argument("--scenario", help="scenario file (default: the shipped three-tank scenario)")
    p.add_argument("--out", default=os.environ.get("HBGFDI_OUT"), help="output directory (env HBGFDI_OUT)")
    p.add_argument("--mode", help="mode vector such as 1,0 or a1=1,a2=0")
    p.add_argument("--format", choices=("text", "csv", "dot", "svg", "machine"), default=None)
    p.add_argument("--seed", type=int, help="noise seed (overrides the scenario)")
    p.add_argument("--eps1", type=float, default=0.02)
    p.add_argument("--eps2", type=float, default=0.01)
    p.add_argument("--eps3", type=float, default=0.01)
    p.add_argument("--persistence", type=int, default=3)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="hbgfdi", description="Hybrid bond graph fault detection and isolation")
    sub = parser.add_subparsers(dest="command", required=True)

    model = sub.add_parser("model", help="model utilities").add_subparsers(dest="action", required=True)
    check = model.add_parser("check", parents=[common], help="parse and validate a model file")
    check.add_argument("path", nargs="?", help="model file (defaults to --model)")

    sub.add_parser("dhbg", parents=[common], help="derive the diagnostic hybrid bond graph")
    garr = sub.add_parser("garr", help="analytical redundancy relations").add_subparsers(dest="action", required=True)
    garr.add_parser("derive", parents=[common], help="derive and print the relations")
    sub.add_parser("fsm", parents=[common], help="fault signature matrix and diagnosability summary")
    sub.add_parser("simulate", parents=[common], help="simulate the plant and write the trace")
    sub.add_parser("residuals", parents=[common], help="evaluate residuals and coherence on a simulated trace")
    diag = sub.add_parser("diagnose", help="fault isolation").add_subparsers(dest="action", required=True)
    diag.add_parser("quant", parents=[common], help="quantitative detection and isolation")
    dq = diag.add_parser("qual", parents=[common], help="qualitative isolation from observed signatures")
    dq.add_argument("--observed", required=True, help="e.g. De1=0+,De2=0-,De3=00")
    tcg = sub.add_parser("tcg", help="temporal causal graph").add_subparsers(dest="action", required=True)
    tcg.add_parser("export", parents=[common], help="export the (mode-instantiated) graph")
    qual = sub.add_parser("qual", help="qualitative tables").add_subparsers(dest="action", required=True)
    qual.add_parser("fsm", parents=[common], help="qualitative fault signature tables")
    sub.add_parser("demo", parents=[common], help="run the clogged-valve scenario end to end")
    return parser


# ---------------------------------------------------------------------------
# helpers

def _parse_mode(text: Optional[str], names: Sequence[str]) -> Optional[dict]:
    if text is None:
        return None
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if all("=" in p for p in parts):
        mode = {k.strip(): int(v) for k, v in (p.split("=", 1) for p in parts)}
    else:
        if len(parts) != len(names):
            raise DomainError(f"--mode needs {len(names)} values for {', '.join(names)}")
        mode = {n: int(v) for n, v in zip(names, parts)}
    if set(mode) != set(names) or any(v not in (0, 1) for v in mode.values()):
        raise DomainError(f"--mode must assign 0 or 1 to each of {', '.join(names)}")
    return mode


def _mode_label(mode: dict) -> str:
    return "(" + ", ".join(f"{k}={v}" for k, v in mode.items()) + ")"


def _out_dir(args) -> Path:
    d = Path(args.out or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _thresholds(args, names) -> ThresholdSpec:
    eps = [args.eps1, args.eps2, args.eps3]
    if len(names) > len(eps):
        raise DomainError("threshold flags cover three relations only")
    return ThresholdSpec(dict(zip(names, eps)), args.persistence)


def _scenario(args):
    sc = pipeline.scenario(args.scenario)
    if args.seed is not None:
        sc = replace(sc, seed=args.seed)
    return sc


def _write_svg(path: Path, run, names) -> None:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise DomainError("SVG output needs matplotlib (pip install 'artifact[plot]')") from None
    plt.rcParams["svg.hashsalt"] = "hbgfdi"
    fig, axes = plt.subplots(len(names), 1, sharex=True, figsize=(7, 2.2 * len(names)))
    for ax, name in zip(axes, names):
        ax.plot(run.trace.t, run.residuals[name], lw=1)
        ax.set_ylabel(name)
    axes[-1].set_xlabel("t [s]")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# ---------------------------------------------------------------------------
# subcommands

def cmd_model_check(args, out) -> int:
    path = args.path or args.model
    if path == pipeline.BUILTIN:
        bg = pipeline.load(path)
    else:
        with open(path, encoding="utf-8") as fh:
            bg = parse_model(fh.read())
    diags = validate(bg)
    if diags:
        raise DomainError("\n".join(diags))
    out.write(f"{bg.name}: ok ({len(bg.one_ports)} elements, {len(bg.sensors)} sensors, "
              f"{len(bg.junctions)} junctions, {len(bg.bonds)} bonds, modes {', '.join(bg.mode_names) or 'none'})\n")
    return 0


def cmd_dhbg(args, out) -> int:
    a = pipeline.analyze(pipeline.load(args.model))
    out.write(render_dhbg(a.dhbg))
    out.write(f"# retained sensor resistors: {', '.join(sorted(a.dhbg.retained_rs)) or 'none'}\n")
    for el, c in sorted(a.dhbg.storage_causality.items()):
        out.write(f"# {el}: {c} causality\n")
    return 0


def cmd_garr(args, out) -> int:
    a = pipeline.analyze(pipeline.load(args.model))
    out.write(render_garrs(a.garrs, "machine" if args.format == "machine" else "text"))
    return 0


def cmd_fsm(args, out) -> int:
    a = pipeline.analyze(pipeline.load(args.model))
    fmt = "csv" if args.format == "csv" else "text"
    mode = _parse_mode(args.mode, list(a.fsm.mode_names))
    if mode is not None:
        out.write(render_mode_fsm(instantiate_mode_fsm(a.fsm, mode), a.fsm.garr_names, fmt))
        return 0
    out.write(render_fsm(a.fsm, fmt))
    if fmt == "text":
        out.write("\n")
        modes = standard_modes(a.fsm.mode_names)
        for i, m in enumerate(modes, start=1):
            out.write(f"mode {i}: {_mode_label(m)}\n")
        out.write("\n")
        out.write(render_summary(summarize_diagnosability(a.fsm, modes)))
    return 0


def cmd_simulate(args, out) -> int:
    tr = run_scenario(_scenario(args))
    if args.out:
        path = _out_dir(args) / "trace.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            write_trace_csv(tr, fh)
        out.write(f"trace written to {path}\n")
    else:
        write_trace_csv(tr, out)
    return 0


def _quant(args):
    a = pipeline.analyze(pipeline.load(args.model))
    sc = _scenario(args)
    run = pipeline.run_quant(a, sc, _thresholds(args, a.garrs.names))
    return a, sc, run


def cmd_residuals(args, out) -> int:
    a, _, run = _quant(args)
    if args.format == "svg":
        path = _out_dir(args) / "residuals.svg"
        _write_svg(path, run, a.garrs.names)
        out.write(f"plot written to {path}\n")
    elif args.out:
        path = _out_dir(args) / "residuals.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            write_residual_csv(run.trace, run.modes, run.residuals, run.coherence, fh)
        out.write(f"residuals written to {path}\n")
    else:
        write_residual_csv(run.trace, run.modes, run.residuals, run.coherence, out)
    return 0


def _report_quant(a, sc, run, out) -> None:
    d = run.diagnosis
    if sc.fault is not None:
        f = sc.fault
        detail = {"abrupt": f"-> {f.value:g} at t={f.t0:g} s", "progressive": f"+{f.rate:g}/s from t={f.t0:g} s",
                  "intermittent": f"= {f.value:g} during [{f.t_on:g}, {f.t_off:g}) every {f.period:g} s"}[f.kind]
        out.write(f"fault: {f.kind} {f.target} {detail}\n")
    t = run.trace.t
    for name, series in run.modes.items():
        rises = [k for k in range(1, len(series)) if series[k] and not series[k - 1]]
        if rises:
            out.write(f"{name} switches 0->1 at t={t[rises[0]]:.2f} s (sample {rises[0]})\n")
    if not d.detected:
        out.write("no fault detected\n")
        return
    out.write(f"detection at t={d.detection_time:.2f} s (sample {d.detection_index})\n")
    out.write(f"coherence vector {list(d.vector)} in mode {_mode_label(d.mode)}\n")
    cands = "{" + ", ".join(sorted(d.candidates)) + "}"
    out.write(f"isolation: {cands}\n" if d.candidates else "isolation: no single-fault explanation\n")


def cmd_diagnose_quant(args, out) -> int:
    a, sc, run = _quant(args)
    _report_quant(a, sc, run, out)
    return 0


def cmd_tcg(args, out) -> int:
    bg = pipeline.load(args.model)
    t, _ = pipeline.qualitative_model(bg)
    mode = _parse_mode(args.mode, bg.mode_names)
    if mode is not None:
        t = instantiate_mode(t, mode)
    fmt = args.format or "dot"
    if fmt == "dot":
        out.write(export_dot(t, bg.name))
    elif fmt == "csv":
        m = to_tcm(t, t.nodes)
        out.write(",".join(["effect\\cause", *m.order]) + "\n")
        for v, row in zip(m.order, m.entries):
            out.write(",".join([v, *row]) + "\n")
    elif fmt == "text":
        out.write(export_edge_list(t))
        out.write("\n")
        out.write(render_tcm(to_tcm(t, t.nodes)))
    else:
        raise DomainError(f"tcg export does not support --format {fmt}")
    return 0


def cmd_qual_fsm(args, out) -> int:
    bg = pipeline.load(args.model)
    t, hyps = pipeline.qualitative_model(bg)
    fmt = "csv" if args.format == "csv" else "text"
    mode = _parse_mode(args.mode, bg.mode_names)
    modes = [mode] if mode is not None else standard_modes(bg.mode_names)
    for i, m in enumerate(modes, start=1):
        label = _mode_label(m) if mode is not None else f"mode {i} {_mode_label(m)}"
        out.write(f"# {label}\n")
        out.write(render_qual_fsm(build_qual_fsm(t, m, hyps), fmt))
        out.write("\n")
    if mode is None:
        out.write(render_summary(summarize_qual(t, modes, hyps), fmt))
    return 0


def cmd_diagnose_qual(args, out) -> int:
    bg = pipeline.load(args.model)
    t, hyps = pipeline.qualitative_model(bg)
    if args.mode is None:
        raise DomainError("diagnose qual needs --mode")
    mode = _parse_mode(args.mode, bg.mode_names)
    observed = {}
    for part in args.observed.split(","):
        if "=" not in part:
            raise DomainError(f"bad observation {part!r}; expected signal=symbols")
        k, v = part.split("=", 1)
        observed[k.strip()] = v.strip()
    cands = qual_isolate(observed, build_qual_fsm(t, mode, hyps))
    ordered = [str(h) for h in hyps if h in cands]
    out.write("candidates: {" + ", ".join(ordered) + "}\n")
    return 0


def cmd_demo(args, out) -> int:
    a, sc, run = _quant(args)
    out.write(f"model {a.graph.name}: {len(a.garrs)} relations, modes {', '.join(a.fsm.mode_names)}\n")
    for name, e in a.garrs.garrs:
        out.write(f"  {name} = {e}\n")
    _report_quant(a, sc, run, out)
    path = _out_dir(args) / "residuals.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        write_residual_csv(run.trace, run.modes, run.residuals, run.coherence, fh)
    out.write(f"residuals written to {path}\n")
    return 0


COMMANDS = {
    ("model", "check"): cmd_model_check,
    ("dhbg", None): cmd_dhbg,
    ("garr", "derive"): cmd_garr,
    ("fsm", None): cmd_fsm,
    ("simulate", None): cmd_simulate,
    ("residuals", None): cmd_residuals,
    ("diagnose", "quant"): cmd_diagnose_quant,
    ("diagnose", "qual"): cmd_diagnose_qual,
    ("tcg", "export"): cmd_tcg,
    ("qual", "fsm"): cmd_qual_fsm,
    ("demo", None): cmd_demo,
}


def run(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handler = COMMANDS[(args.command, getattr(args, "action", None))]
    buf = io.StringIO()
    try:
        code = handler(args, buf)
    except (DomainError, *DOMAIN_ERRORS) as exc:
        out.write(buf.getvalue())
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out.write(buf.getvalue())
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
