"""Command-line entry point.

    bcsgap <subcommand> [--config FILE] [--out DIR] [--format csv|json|both]
                        [--threads N] [--tol-override KEY=VALUE ...]

Every artifact lands in the output directory as ``<subcommand>.csv`` and/or
``<subcommand>.json``.  CSV files start with a ``# config sha256:`` comment
and JSON documents carry a ``config_digest`` field, so outputs can be
matched with the configuration that produced them.  Numbers are written with
12 significant digits; identical configurations give identical files.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import backend, config as config_mod
from .critical import analyze_jump
from .errors import BCSGapError, ConfigError, ConvergenceError, InvariantViolation
from .solver import locate_tc, solve_fixed_point, sweep_temperature
from .thermo import ThermoContext, default_temperatures, thermo_curve

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_INVARIANT = 4

FMT = "%.12g"
SUBCOMMANDS = ("simplified", "tc", "solve", "sweep", "thermo", "jump", "verify")

log = logging.getLogger("bcsgap")


def _num(v):
    return float(FMT % (v + 0.0))


class Writer:
    """Writes artifacts for one run with the digest stamped in."""

    def __init__(self, cfg: config_mod.RunConfig, out_dir: Path, fmt: str):
        self.cfg = cfg
        self.out_dir = out_dir
        self.fmt = fmt
        self.written: List[Path] = []

    @property
    def comment(self) -> str:
        return f"config sha256: {self.cfg.digest}"

    def wants(self, kind: str) -> bool:
        return self.fmt in (kind, "both")

    def path(self, name: str) -> Path:
        p = self.out_dir / name
        self.written.append(p)
        return p

    def table(self, name: str, header: Sequence[str], rows) -> Path:
        p = self.path(name)
        with open(p, "w", newline="\n") as fh:
            fh.write(f"# {self.comment}\n")
            fh.write(",".join(header) + "\n")
            for row in rows:
                # adding 0.0 turns -0.0 into 0.0
                fh.write(",".join(v if isinstance(v, str) else FMT % (v + 0.0) for v in row) + "\n")
        return p

    def document(self, name: str, doc: dict) -> Path:
        p = self.path(name)
        doc = dict(doc, config_digest=self.cfg.digest)
        with open(p, "w", newline="\n") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return p


def _meta(cfg):
    return {"n_nodes": cfg.n_nodes, "mapping": cfg.mapping, "method": cfg.solver.method,
            "solver_tol": cfg.solver.tol, "backend": backend.NAME}


def cmd_simplified(cfg, out: Writer, threads: int) -> int:
    pr = cfg.problem()
    temps = np.linspace(0.0, cfg.T_max_rel * pr.tau2, cfg.n_T)
    rows = [(T, pr.delta1(T), pr.delta2(T)) for T in temps]
    if out.wants("csv"):
        out.table("simplified.csv", ("T", "delta1", "delta2"), rows)
    if out.wants("json"):
        out.document("simplified.json", {
            "u1": float(cfg.kernel.u1), "u2": float(cfg.kernel.u2),
            "tau1": _num(pr.tau1), "tau2": _num(pr.tau2),
            "delta1_0": _num(pr.low.delta0), "delta2_0": _num(pr.high.delta0),
            "T": [_num(r[0]) for r in rows], "delta1": [_num(r[1]) for r in rows],
            "delta2": [_num(r[2]) for r in rows]})
    print(f"tau1={FMT % pr.tau1} tau2={FMT % pr.tau2}")
    return EXIT_OK


def cmd_tc(cfg, out: Writer, threads: int) -> int:
    pr = cfg.problem()
    res = locate_tc(pr, cfg.bisection_rel * pr.tau2, cfg.solver)
    doc = {"tau1": _num(res.tau1), "tau2": _num(res.tau2), "tc": _num(res.tc),
           "bracket": [_num(b) for b in res.bracket], "bisection_steps": len(res.history),
           **_meta(cfg)}
    out.document("tc.json", doc)
    if out.wants("csv"):
        out.table("tc.csv", ("tau1", "tau2", "tc"), [(res.tau1, res.tau2, res.tc)])
    print(f"tau1={FMT % res.tau1} tc={FMT % res.tc} tau2={FMT % res.tau2}")
    return EXIT_OK


def cmd_solve(cfg, out: Writer, threads: int, temperature: Optional[float] = None) -> int:
    pr = cfg.problem()
    T = temperature if temperature is not None else 0.5 * pr.tau1
    sol = solve_fixed_point(pr, T, cfg.solver)
    if out.wants("csv"):
        out.table("solve.csv", ("T", "x", "u"), [(T, x, u) for x, u in zip(pr.nodes, sol.values)])
    if out.wants("json"):
        out.document("solve.json", {
            "T": _num(T), "x_grid": [_num(x) for x in pr.nodes],
            "weights": [_num(w) for w in pr.grid.weights],
            "values": [_num(u) for u in sol.values], "classification": sol.classification,
            "iterations": sol.iterations, "residual": _num(sol.residual),
            "delta1": _num(sol.delta1), "delta2": _num(sol.delta2), "notes": sol.notes,
            **_meta(cfg)})
    print(f"T={FMT % T} {sol.classification} max u={FMT % sol.max_value} "
          f"residual={sol.residual:.2e} iterations={sol.iterations}")
    return EXIT_OK


def cmd_sweep(cfg, out: Writer, threads: int) -> int:
    pr = cfg.problem()
    tc = locate_tc(pr, cfg.bisection_rel * pr.tau2, cfg.solver).tc
    temps = np.linspace(cfg.T_min_rel * pr.tau2, cfg.T_max_rel * pr.tau2, cfg.n_T)
    # independent slices can run concurrently; warm starts are sequential
    surf = sweep_temperature(pr, temps, cfg.solver, tc=tc, warm_start=threads <= 1, threads=threads)
    if out.wants("csv"):
        out.table("sweep.csv", ("T", "x", "u"), surf.csv_rows())
    if out.wants("json"):
        doc = surf.to_dict(FMT)
        doc["metadata"] = {k: (_num(v) if isinstance(v, float) else v) for k, v in doc["metadata"].items()}
        out.document("sweep.json", doc)
    n_sc = sum(not s.is_normal for s in surf.solutions)
    print(f"{len(temps)} slices, {n_sc} superconducting, tc={FMT % tc}")
    return EXIT_OK


def cmd_thermo(cfg, out: Writer, threads: int) -> int:
    pr = cfg.problem()
    tc = locate_tc(pr, cfg.bisection_rel * pr.tau2, cfg.solver).tc
    ctx = ThermoContext(pr, cfg.dos, tc=tc, opts=cfg.solver)
    n_above = max(2, cfg.n_T // 4)
    temps = default_temperatures(tc, cfg.n_T - n_above, n_above, cfg.T_min_rel, cfg.T_max_rel, cfg.h_rel)
    curve = thermo_curve(ctx, temps, h=cfg.h_rel * tc, threads=threads)
    rows = list(curve.rows())
    if out.wants("csv"):
        out.table("thermo.csv", ("T", "omega", "entropy", "cv", "side"), rows)
    if out.wants("json"):
        out.document("thermo.json", {
            "tc": _num(tc), "h": _num(curve.h), "cv_jump": _num(curve.cv_jump),
            "rows": [{"T": _num(T), "omega": _num(o), "entropy": _num(s), "cv": _num(c), "side": sd}
                     for T, o, s, c, sd in rows], **_meta(cfg)})
    print(f"tc={FMT % tc} C_V jump={FMT % curve.cv_jump}")
    return EXIT_OK


def cmd_jump(cfg, out: Writer, threads: int) -> int:
    pr = cfg.problem()
    tc = locate_tc(pr, cfg.bisection_rel * pr.tau2, cfg.solver).tc
    analysis = analyze_jump(pr, tc=tc, offsets=cfg.offsets, opts=cfg.solver, h_rel=cfg.h_rel)
    rep = analysis.report
    doc = rep.to_dict(FMT)
    doc.update(_meta(cfg))
    out.document("jump.json", doc)
    if out.wants("csv"):
        out.table("jump.csv", ("x", "v", "w", "F", "G"), analysis.csv_rows())
    status = EXIT_OK
    if not rep.delta_cv > 0:
        log.error("specific-heat jump %g is not positive", rep.delta_cv)
        status = EXIT_INVARIANT
    print(f"tc={FMT % tc} dCv={FMT % rep.delta_cv} F mismatch={rep.f_mismatch:.2e} "
          f"G mismatch={rep.g_mismatch:.2e}")
    return status


def cmd_verify(cfg, out: Writer, threads: int) -> int:
    from .verification import config_invariants, run_acceptance

    results = run_acceptance() + config_invariants(cfg)
    for r in results:
        print(r.line())
    doc = {"results": [{"key": r.key, "title": r.title, "passed": r.passed, "detail": r.detail}
                       for r in results],
           "passed": all(r.passed for r in results)}
    out.document("verify.json", doc)
    if out.wants("csv"):
        out.table("verify.csv", ("key", "passed", "detail"),
                  [(r.key, "pass" if r.passed else "fail", json.dumps(r.detail)) for r in results])
    failed = [r.key for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} passed" + (f"; failed: {', '.join(failed)}" if failed else ""))
    return EXIT_OK if not failed else EXIT_INVARIANT


COMMANDS = {
    "simplified": cmd_simplified, "tc": cmd_tc, "solve": cmd_solve, "sweep": cmd_sweep,
    "thermo": cmd_thermo, "jump": cmd_jump, "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration (defaults are used if omitted)")
    common.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
    common.add_argument("--format", choices=config_mod.FORMATS, help="artifact format (overrides output.format)")
    common.add_argument("--threads", type=int, default=1, help="worker threads where a command can use them")
    common.add_argument("--tol-override", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config value; a bare key is a physical parameter or tolerances.KEY (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="bcsgap", description="BCS gap equation solver")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simplified": "constant-coupling gaps Delta_1(T), Delta_2(T)",
        "tc": "tau_1, tau_2 and the transition temperature",
        "solve": "gap function at one temperature",
        "sweep": "gap surface over a temperature grid",
        "thermo": "potential, entropy and specific heat across T_c",
        "jump": "critical limits and the specific-heat jump",
        "verify": "acceptance checks plus invariants of the configured kernel",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "solve":
            p.add_argument("--temperature", "-T", type=float, help="temperature (default tau_1 / 2)")
    return parser


def run_subcommand(name: str, cfg: config_mod.RunConfig, out_dir: Optional[Path] = None,
                   fmt: Optional[str] = None, threads: int = 1, **kwargs) -> int:
    """Run one subcommand; returns the exit status."""
    if name not in COMMANDS:
        raise ConfigError(f"unknown subcommand {name!r}")
    if threads < 1:
        raise ConfigError("--threads must be at least 1")
    fmt = fmt or cfg.out_format
    if fmt not in config_mod.FORMATS:
        raise ConfigError(f"format must be one of {config_mod.FORMATS}")
    if out_dir is not None:
        cfg = _with_out_dir(cfg, out_dir)
    writer = Writer(cfg, cfg.ensure_output_dir(), fmt)
    return COMMANDS[name](cfg, writer, threads, **kwargs)


def _with_out_dir(cfg, out_dir):
    from dataclasses import replace

    return replace(cfg, out_dir=Path(out_dir))


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    extra: Dict[str, object] = {}
    if args.command == "solve" and args.temperature is not None:
        extra["temperature"] = args.temperature
    try:
        cfg = config_mod.load(args.config, args.tol_override)
        return run_subcommand(args.command, cfg, args.out, args.format, args.threads, **extra)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except BCSGapError as exc:
        # remaining domain and parameter errors come from bad inputs
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
