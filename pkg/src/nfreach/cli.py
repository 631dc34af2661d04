"""``reach`` command line: run forward, backward or verification analyses from a config."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .backward import BackprojectionResult, estimate_backprojection
from .errors import ConfigInvalid, ReachError, SolverError, UnknownFixture
from .fixtures import FIXTURES, fixture_config
from .forward import ReachSequence, ReachSpec, Solver, propagate
from .partition import (PartitionConfig, Strategy, mc_reach_estimate, propagate_greedy_sim_guided,
                        propagate_uniform)
from .sets import Box, HPolytope, box_hull
from .verify import ReachAvoidSpec, check_reach_avoid, tightness_error

log = logging.getLogger("nfreach")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_UNVERIFIED = 0, 2, 3, 4


@dataclass
class ResultDocument:
    mode: str
    sets: list = field(default_factory=list)
    hulls: list = field(default_factory=list)
    tightness: list | None = None
    verdict: dict | None = None
    backreachable: list | None = None
    timing: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if v is not None}
        return out

    def to_json(self) -> str:
        # float repr round-trips, so identical runs give identical set payloads
        return json.dumps(self.to_dict(), indent=2)


def _set_payload(union) -> list:
    return [cfgmod.set_to_dict(m) for m in union]


class _Timer:
    def __init__(self, sink: dict, name: str):
        self.sink, self.name = sink, name

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.sink[self.name] = self.sink.get(self.name, 0.0) + time.perf_counter() - self.t0


def _forward(cfg: cfgmod.AnalysisConfig, timing: dict) -> ReachSequence:
    p = cfg.partition
    x0 = cfg.set
    with _Timer(timing, "propagate"):
        if p.strategy is Strategy.NONE:
            return propagate(cfg.systems, cfg.net, x0, cfg.horizon, cfg.spec)
        if not isinstance(x0, Box):
            raise ConfigInvalid("set.kind", "partitioners need a box initial set")
        if p.strategy is Strategy.UNIFORM:
            return propagate_uniform(cfg.systems, cfg.net, x0, cfg.horizon, cfg.spec, p)
        return propagate_greedy_sim_guided(cfg.systems, cfg.net, x0, cfg.horizon, cfg.spec, p)


def _metadata(cfg, calls, warnings) -> dict:
    p = cfg.partition
    return {
        "seed": p.seed,
        "solver": cfg.spec.solver.value,
        "bounds": cfg.spec.bounds,
        "partitioner": p.strategy.value,
        "cells": list(p.cells),
        "budget": p.budget,
        "calls": calls,
        "horizon": cfg.horizon,
        "warnings": list(warnings),
    }


def run_forward(cfg: cfgmod.AnalysisConfig, verify: bool = False) -> ResultDocument:
    timing: dict = {}
    seq = _forward(cfg, timing)
    doc = ResultDocument("verify" if verify else "forward", timing=timing)
    doc.sets = [{"timestep": t, "members": _set_payload(u)} for t, u in enumerate(seq.sets)]
    doc.hulls = [cfgmod.set_to_dict(h) for h in seq.hulls()]
    x0 = cfg.set
    if isinstance(x0, Box) and np.all(x0.hi > x0.lo):
        with _Timer(timing, "mc_estimate"):
            mc = mc_reach_estimate(cfg.systems, cfg.net, x0, cfg.horizon, cfg.partition.mc_samples, cfg.partition.seed)
        try:
            doc.tightness = tightness_error(seq, mc)
        except ReachError as e:
            seq.warnings.append(f"tightness unavailable: {e}")
    if verify:
        avoid = cfg.avoid if cfg.avoid_per_step else [list(cfg.avoid)] * (cfg.horizon + 1)
        spec = ReachAvoidSpec(cfg.goal, avoid, cfg.horizon)
        with _Timer(timing, "verify"):
            verdict = check_reach_avoid(seq, spec)
        doc.verdict = {
            "verified": verdict.verified,
            "failures": [
                {"timestep": f.timestep, "kind": f.kind.value, "member": f.member, "avoid_index": f.avoid_index}
                for f in verdict.failures
            ],
        }
    doc.metadata = _metadata(cfg, seq.calls, seq.warnings)
    return doc


def run_backward(cfg: cfgmod.AnalysisConfig) -> ResultDocument:
    timing: dict = {}
    target = cfg.set
    r = cfg.partition.cells or (1,) * target.dim
    with _Timer(timing, "backproject"):
        res: BackprojectionResult = estimate_backprojection(
            cfg.systems, cfg.net, target, cfg.horizon, r, jobs=cfg.partition.jobs
        )
    doc = ResultDocument("backward", timing=timing)
    doc.sets = [{"timestep": -k, "members": _set_payload(u)} for k, u in enumerate(res.sets)]
    doc.hulls = [cfgmod.set_to_dict(u.hull()) if len(u) else None for u in res.sets]
    doc.backreachable = [None if b is None else cfgmod.set_to_dict(b) for b in res.backreachable]
    doc.metadata = _metadata(cfg, len(res.sets) - 1, res.warnings)
    doc.metadata["cells"] = list(r)
    return doc


def run(cfg: cfgmod.AnalysisConfig) -> ResultDocument:
    if cfg.mode == "backward":
        return run_backward(cfg)
    return run_forward(cfg, verify=cfg.mode == "verify")


def write_csv(doc: ResultDocument, path) -> None:
    """Box sequences: ``timestep, dim, lo, hi`` from the per-step hull.
    Polytope members: ``timestep, facet_index, a..., b`` with facets numbered across members."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        boxes = all(m["kind"] == "box" for s in doc.sets for m in s["members"])
        if boxes:
            w.writerow(["timestep", "dim", "lo", "hi"])
            for s, h in zip(doc.sets, doc.hulls):
                if h is None:
                    continue
                for d, (lo, hi) in enumerate(zip(h["lo"], h["hi"])):
                    w.writerow([s["timestep"], d, repr(lo), repr(hi)])
            return
        n = next(len(m["A"][0]) if m["kind"] == "polytope" else len(m["lo"]) for s in doc.sets for m in s["members"])
        w.writerow(["timestep", "facet_index"] + [f"a{k}" for k in range(n)] + ["b"])
        for s in doc.sets:
            idx = 0
            for m in s["members"]:
                P = HPolytope(m["A"], m["b"]) if m["kind"] == "polytope" else cfgmod.parse_set(m)
                if isinstance(P, Box):
                    P = P.to_polytope()
                for a, b in zip(P.A, P.b):
                    w.writerow([s["timestep"], idx] + [repr(float(v)) for v in a] + [repr(float(b))])
                    idx += 1


def _cells(text: str) -> list[int]:
    try:
        cells = [int(k) for k in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cells must be comma-separated integers, got {text!r}") from None
    if any(k < 1 for k in cells):
        raise argparse.ArgumentTypeError("cell counts must be >= 1")
    return cells


def _apply_flags(doc: dict, args) -> dict:
    """Overlay command-line flags onto the raw config before validation."""
    analysis = dict(doc.get("analysis", {}))
    part = dict(analysis.get("partitioner", {}))
    if args.mode:
        analysis["mode"] = args.mode
    if args.horizon is not None:
        analysis["horizon"] = args.horizon
    if args.partitioner:
        part["strategy"] = args.partitioner
    if args.cells is not None:
        part["cells"] = args.cells
        part.setdefault("strategy", "uniform")
    if args.budget is not None:
        part["budget"] = args.budget
    if part:
        analysis["partitioner"] = part
    if args.mc_samples is not None:
        analysis["mc_samples"] = args.mc_samples
    if args.solver:
        analysis["solver"] = args.solver
    if args.facets:
        if args.facets == "identity":
            analysis["facets"] = "identity"
        elif args.facets.startswith("file:"):
            fpath = args.facets[5:]
            try:
                analysis["facets"] = json.loads(Path(fpath).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigInvalid("analysis.facets", f"cannot load facets from {fpath}: {e}") from None
        else:
            raise ConfigInvalid("analysis.facets", "expected 'identity' or 'file:<path>'")
    if args.seed is not None:
        analysis["seed"] = args.seed
    if args.jobs is not None:
        analysis["jobs"] = args.jobs
    return {**doc, "analysis": analysis}


def _analysis_parser(sub, name: str, help: str):
    p = sub.add_parser(name, help=help)
    p.add_argument("--config", required=True)
    if name == "run":
        p.add_argument("--mode", choices=["forward", "backward", "verify"])
    p.add_argument("--horizon", type=int)
    p.add_argument("--partitioner", choices=["none", "uniform", "greedy"])
    p.add_argument("--cells", type=_cells)
    p.add_argument("--budget", type=int)
    p.add_argument("--mc-samples", type=int)
    p.add_argument("--solver", choices=["closed-form", "lp"])
    p.add_argument("--facets")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--csv")
    p.add_argument("--require-verified", action="store_true")
    p.add_argument("-o", "--output", help="result JSON path (stdout when omitted)")
    p.set_defaults(command=name)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reach", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _analysis_parser(sub, "forward", "forward reachable sets")
    _analysis_parser(sub, "backward", "backprojection set under-approximation")
    _analysis_parser(sub, "verify", "reach-avoid verification")
    _analysis_parser(sub, "run", "mode taken from --mode or the config")
    fx = sub.add_parser("fixture", help="write a benchmark config")
    fx.add_argument("name", help=", ".join(sorted(FIXTURES)))
    fx.add_argument("-o", "--output")
    fx.set_defaults(command="fixture")
    return parser


def emit_fixture(name: str, path=None) -> dict:
    doc = fixture_config(name)
    text = json.dumps(doc, indent=2)
    if path:
        Path(path).write_text(text + "\n", encoding="utf-8")
    return doc


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")

    if args.command == "fixture":
        try:
            doc = emit_fixture(args.name, args.output)
        except UnknownFixture as e:
            print(f"error: {e.args[0]}", file=sys.stderr)
            return EXIT_CONFIG
        if not args.output:
            print(json.dumps(doc, indent=2))
        return EXIT_OK

    if args.command != "run":
        args.mode = args.command
    try:
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigInvalid("", f"cannot read {args.config}: {e.strerror}") from None
        except json.JSONDecodeError as e:
            raise ConfigInvalid("", f"invalid JSON at line {e.lineno}: {e.msg}") from None
        cfg = cfgmod.parse(_apply_flags(raw, args))
        if cfg.mode == "verify" and cfg.goal is None:
            raise ConfigInvalid("analysis.goal", "verify mode needs a goal set")
    except ConfigInvalid as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        doc = run(cfg)
    except ConfigInvalid as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as e:
        print(f"solver error during {cfg.mode} analysis: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except ReachError as e:
        print(f"error during {cfg.mode} analysis: {e}", file=sys.stderr)
        return EXIT_SOLVER

    text = doc.to_json()
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    if args.csv:
        write_csv(doc, args.csv)
    if args.require_verified and cfg.mode == "verify" and not doc.verdict["verified"]:
        return EXIT_UNVERIFIED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
