"""Command-line entry point: ``discrete-maa <subcommand> [flags]``.

Subcommands run one stage each and exchange JSON artifacts through the
output directory, so ``explore`` -> ``discretize`` -> ``verify`` -> ``report``
reproduces ``pipeline``. Every successful run writes ``summary.json``.

Exit codes: 0 success, 1 invalid input or usage, 2 solver/pipeline failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .discretizer import MODES, EnumerationResult, designs_csv, enumerate_designs, verify_designs
from .explorer import ExplorationError, explore, optimize
from .geometry import Polytope
from .model import load_model
from .pipeline import (
    PipelineError,
    RunConfig,
    enumeration_doc,
    exploration_doc,
    optimum_doc,
    polytope_doc,
    read_json,
    run_pipeline,
    select_polytope,
    verification_doc,
    write_json,
)
from .report import ReportError, frequency, necessity_flags, render
from .solver import SolverError

log = logging.getLogger("discrete_maa")

SUBCOMMANDS = ("optimize", "explore", "discretize", "verify", "report", "pipeline")
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
DEFAULT_OUT = "maa_out"
META_KEYS = ("names", "budget", "tac_star", "reference")


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="discrete-maa", description="Enumerate discrete near-optimal energy-system designs.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="{" + ",".join(SUBCOMMANDS) + "}",
                                parser_class=_Parser)

    def add(name, help, model=False, polytope=False, designs=False):
        p = sub.add_parser(name, help=help)
        if model:
            p.add_argument("--model", required=True, help="energy-system model JSON")
        if polytope:
            p.add_argument("--polytope", help="polytope JSON (default: OUT/polytope.json)")
        if designs:
            p.add_argument("--designs", help="designs JSON (default: the previous stage's file in OUT)")
        p.add_argument("--config", help="run-configuration JSON")
        p.add_argument("--out", default=DEFAULT_OUT, help=f"output directory (default: {DEFAULT_OUT})")
        p.add_argument("--epsilon", type=float, help="relative cost slack")
        p.add_argument("--delta", type=float, help="exploration stops once the volume gap is at most this")
        p.add_argument("--mode", choices=MODES, help="lattice enumeration mode")
        p.add_argument("--workers", type=int, help="concurrent LP solves (default: CPU count)")
        p.add_argument("--seed", type=int, help="recorded for provenance; all stages are deterministic")
        p.add_argument("--max-directions", type=int, dest="max_directions", help="exploration direction budget")
        return p

    add("optimize", "solve the relaxed and the discrete cost optimum", model=True)
    add("explore", "map the relaxed near-optimal design space", model=True)
    add("discretize", "enumerate lattice designs inside a polytope", polytope=True)
    add("verify", "re-solve operation for each design and keep those within budget", model=True, designs=True)
    add("report", "frequency distributions and necessity flags", designs=True)
    add("pipeline", "run every stage", model=True)
    return parser


def load_config(args) -> RunConfig:
    if args.config:
        doc = json.loads(Path(args.config).read_text())
        config = RunConfig.from_dict(doc)
        if "workers" not in doc and args.workers is None:
            config = config.replace(workers=os.cpu_count() or 1)
    else:
        config = RunConfig(workers=os.cpu_count() or 1)
    return config.replace(epsilon=args.epsilon, delta=args.delta, mode=args.mode, workers=args.workers,
                          seed=args.seed, max_directions=args.max_directions)


def _summary(out: Path, command: str, config: RunConfig, written: list[Path], **fields) -> Path:
    doc = {"command": command, "config": config.to_dict(), **fields}
    doc["artifacts"] = sorted(str(p.relative_to(out)) for p in written) + ["summary.json"]
    return write_json(out / "summary.json", doc)


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ExplorationError, SolverError, ReportError) as exc:
        raise PipelineError(name, exc) from exc


def _input(path, out: Path, default: str) -> Path:
    p = Path(path) if path else out / default
    if not p.is_file():
        raise FileNotFoundError(f"input file not found: {p}")
    return p


def _polytope(doc: dict) -> Polytope:
    for key in ("dim", "A", "b", "steps"):
        if key not in doc:
            raise ValueError(f"polytope file lacks '{key}'")
    A = np.asarray(doc["A"], dtype=float).reshape(-1, int(doc["dim"]))
    norm = np.linalg.norm(A, axis=1)
    return Polytope.from_arrays(A, doc["b"], normalize=not np.allclose(norm, 1.0, rtol=0.0, atol=1e-12))


def _meta(doc: dict, dim: int) -> dict:
    meta = {k: doc.get(k) for k in META_KEYS}
    if meta["names"] is None:
        meta["names"] = [f"x{i}" for i in range(dim)]
    return meta


def cmd_optimize(args, config, out):
    model = load_model(args.model)
    lp, milp = _stage("optimize", optimize, model, config.solver_config())
    doc = optimum_doc(model, lp, milp)
    written = [write_json(out / "optimum.json", doc)]
    print(f"TAC* = {doc['tac_discrete']:.6f}")
    for name, v in zip(doc["names"], doc["discrete_design"]):
        print(f"  {name} = {v:g}")
    return _summary(out, "optimize", config, written, model=model.name, tac_star=doc["tac_discrete"],
                    tac_continuous=doc["tac_continuous"], design=dict(zip(doc["names"], doc["discrete_design"])))


def cmd_explore(args, config, out):
    model = load_model(args.model)
    sc = config.solver_config()
    lp, milp = _stage("optimize", optimize, model, sc)
    report = _stage("explore", explore, model, config.exploration_config(), sc, optima=(lp, milp))
    poly = select_polytope(report, config.hull)
    written = [
        write_json(out / "optimum.json", optimum_doc(model, lp, milp)),
        write_json(out / "exploration.json", exploration_doc(report)),
        write_json(out / "polytope.json", polytope_doc(poly, report, model.capacity_steps, config.hull)),
    ]
    p = out / "exploration_log.jsonl"
    p.write_text(report.log_lines())
    written.append(p)
    print(f"{report.directions_evaluated} directions, gap {report.final_gap:.4f} ({report.stop_reason})")
    return _summary(out, "explore", config, written, model=model.name, tac_star=report.tac_star,
                    budget=report.budget, directions_evaluated=report.directions_evaluated,
                    final_gap=report.final_gap, explored_ratio=report.explored_ratio,
                    stop_reason=report.stop_reason)


def cmd_discretize(args, config, out):
    doc = json.loads(_input(args.polytope, out, "polytope.json").read_text())
    poly = _polytope(doc)
    result = enumerate_designs(poly, doc["steps"], config.mode, config.root_divisions, config.solver_config())
    written = [write_json(out / "enumeration.json", {**result.to_dict(), **_meta(doc, poly.dim)})]
    print(f"{len(result)} lattice designs ({config.mode})")
    return _summary(out, "discretize", config, written, mode=config.mode, enumerated=len(result),
                    counts=result.counts)


def cmd_verify(args, config, out):
    model = load_model(args.model)
    doc = read_json(_input(args.designs, out, "enumeration.json"))
    meta = _meta(doc, model.dim)
    if list(meta["names"]) != model.design_names:
        raise ValueError(f"designs are for components {meta['names']}, model has {model.design_names}")
    if meta["budget"] is None:
        raise ValueError("designs file lacks 'budget'")
    designs = EnumerationResult.from_dict(doc).designs if "mode" in doc else doc["designs"]
    ver = _stage("verify", verify_designs, model, designs, meta["budget"], config.solver_config(), config.workers)
    written = [write_json(out / "verification.json", verification_doc(ver, meta))]
    p = out / "designs.csv"
    p.write_text(designs_csv(model.design_names, ver.designs, ver.tac, meta["tac_star"]))
    written.append(p)
    print(f"{len(ver)} designs within budget, {len(ver.dropped)} dropped")
    return _summary(out, "verify", config, written, model=model.name, budget=meta["budget"],
                    alternatives=len(ver), dropped=len(ver.dropped))


def cmd_report(args, config, out):
    doc = read_json(_input(args.designs, out, "verification.json"))
    if "designs" not in doc:
        raise ValueError("designs file lacks 'designs'")
    dim = len(doc["names"]) if doc.get("names") else np.asarray(doc["designs"]).reshape(len(doc["designs"]), -1).shape[1]
    meta = _meta(doc, dim)
    dist = _stage("report", frequency, doc["designs"], meta["names"], meta["reference"])
    flags = necessity_flags(dist)
    written = render(dist, out / "report")
    written.append(write_json(out / "report" / "flags.json", {"flags": flags, "n_designs": dist.n_designs}))
    for name, flag in flags.items():
        print(f"{name}: {flag}")
    return _summary(out, "report", config, written, n_designs=dist.n_designs, flags=flags)


def cmd_pipeline(args, config, out):
    model = load_model(args.model)
    result = run_pipeline(model, config, out)
    s = result.summary
    print(f"{s['alternatives']} near-optimal designs ({s['enumerated']} enumerated), "
          f"{s['directions_evaluated']} directions, gap {s['final_gap']:.4f}")
    return out / "summary.json"


COMMANDS = {
    "optimize": cmd_optimize,
    "explore": cmd_explore,
    "discretize": cmd_discretize,
    "verify": cmd_verify,
    "report": cmd_report,
    "pipeline": cmd_pipeline,
}


def configure_logging() -> None:
    level = os.environ.get("MAA_LOG", "error").strip().lower()
    if level not in LOG_LEVELS:
        raise UsageError(f"MAA_LOG must be one of {sorted(LOG_LEVELS)}, got {level!r}")
    logging.basicConfig(level=LOG_LEVELS[level], format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr,
                        force=True)


def main(argv=None) -> int:
    try:
        configure_logging()
        args = build_parser().parse_args(argv)
        config = load_config(args)
        out = Path(args.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ValueError(f"cannot create output directory {out}: {exc}") from exc
        COMMANDS[args.command](args, config, out)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except PipelineError as exc:
        print(f"discrete-maa: {exc.stage} failed: {exc.cause}", file=sys.stderr)
        return 2
    except (ExplorationError, SolverError) as exc:
        print(f"discrete-maa: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, TypeError, OSError) as exc:
        msg = f"missing key {exc}" if isinstance(exc, KeyError) else str(exc)
        print(f"discrete-maa: invalid input: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
