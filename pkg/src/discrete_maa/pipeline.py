"""End-to-end run: optimize, explore, enumerate, verify, report.

Every stage writes plain JSON/CSV artifacts so that later stages can be rerun
from disk. Artifacts contain no timestamps or timings; identical inputs give
byte-identical files.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .discretizer import (
    MODES,
    ROOT_DIVISIONS,
    EnumerationResult,
    VerificationResult,
    designs_csv,
    enumerate_designs,
    verify_designs,
)
from .explorer import ANCHORS, ExplorationConfig, ExplorationReport, explore, optimize
from .geometry import Polytope, to_halfspaces
from .model import EnergySystemModel
from .report import FrequencyDistribution, frequency, necessity_flags, render
from .solver import SolverConfig

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
HULLS = ("outer", "inner")


class PipelineError(RuntimeError):
    """A stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class RunConfig:
    """Parameters of a pipeline run (the ``run.json`` / ``--config`` file).

    ``hull`` selects the polytope whose lattice points are enumerated:
    ``outer`` (supporting halfspaces of all probes, contains the whole relaxed
    near-optimal space) or ``inner`` (hull of the probe vertices).
    """

    epsilon: float = 0.01
    delta: float = 0.05
    mode: str = "exact"
    workers: int = 1
    seed: int = 0
    max_directions: int = 2000
    backend: str = "simplex"
    anti_cycling: str = "bland"
    anchor: str = "discrete"
    hull: str = "outer"
    root_divisions: int = ROOT_DIVISIONS

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.hull not in HULLS:
            raise ValueError(f"hull must be one of {HULLS}")
        if self.anchor not in ANCHORS:
            raise ValueError(f"anchor must be one of {ANCHORS}")
        if self.root_divisions < 1:
            raise ValueError("root_divisions must be >= 1")
        # fail early on the rest
        self.exploration_config()
        self.solver_config()

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(doc) - known - {"schema_version", "description", "time"}
        if extra:
            raise ValueError(f"unknown run-config keys: {sorted(extra)}")
        return cls(**{k: v for k, v in doc.items() if k in known})

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **overrides) -> "RunConfig":
        return dataclasses.replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def exploration_config(self) -> ExplorationConfig:
        return ExplorationConfig(
            epsilon=self.epsilon,
            delta=self.delta,
            max_directions=self.max_directions,
            parallel_workers=self.workers,
            anchor=self.anchor,
        )

    def solver_config(self) -> SolverConfig:
        return SolverConfig(backend=self.backend, anti_cycling=self.anti_cycling)


# --- artifact documents ----------------------------------------------------


def _floats(values) -> list[float]:
    return [float(v) for v in np.asarray(values, dtype=float).ravel()]


def _finite(x: float):
    return float(x) if math.isfinite(x) else None


def dump_json(doc: dict) -> str:
    doc = {"schema_version": SCHEMA_VERSION, **doc}
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path: Path, doc: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_json(doc))
    return path


def read_json(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema_version {doc.get('schema_version')!r}")
    return doc


def optimum_doc(model: EnergySystemModel, lp, milp) -> dict:
    n = model.dim
    return {
        "names": model.design_names,
        "tac_continuous": float(lp.objective),
        "tac_discrete": float(milp.objective),
        "continuous_design": _floats(lp.primal[:n]),
        "discrete_design": _floats(milp.primal[:n]),
        "milp_status": milp.status,
        "milp_gap": _finite(milp.gap),
    }


def exploration_doc(report: ExplorationReport) -> dict:
    hull = report.hull
    doc = {
        "names": list(report.design_names),
        "epsilon": report.epsilon,
        "delta": report.delta,
        "anchor": report.anchor,
        "tac_star": report.tac_star,
        "budget": report.budget,
        "tac_continuous": report.tac_continuous,
        "tac_discrete": report.tac_discrete,
        "continuous_optimum": _floats(report.continuous_optimum),
        "discrete_optimum": _floats(report.discrete_optimum),
        "directions_evaluated": report.directions_evaluated,
        "final_gap": report.final_gap,
        "explored_ratio": report.explored_ratio,
        "stop_reason": report.stop_reason,
        "inner_volume": hull.inner_volume,
        "outer_volume": _finite(hull.outer_volume),
        "subspace_dim": None if hull.hull is None else hull.hull.rank,
        "vertices": [_floats(v) for v in hull.vertices],
        "outer": {"A": [_floats(n) for n in hull.outer_normals], "b": _floats(hull.outer_offsets)},
    }
    return doc


def polytope_doc(poly: Polytope, report: ExplorationReport, steps, kind: str) -> dict:
    """Halfspaces handed to the discretizer, with what later stages need."""
    return {
        **poly.to_dict(),
        "kind": kind,
        "names": list(report.design_names),
        "steps": _floats(steps),
        "budget": report.budget,
        "tac_star": report.tac_star,
        "reference": _floats(report.continuous_optimum),
    }


def enumeration_doc(result: EnumerationResult, meta: dict) -> dict:
    return {**result.to_dict(), **{k: meta[k] for k in ("names", "budget", "tac_star", "reference")}}


def verification_doc(ver: VerificationResult, meta: dict) -> dict:
    return {
        **{k: meta[k] for k in ("names", "budget", "tac_star", "reference")},
        "designs": [_floats(d) for d in ver.designs],
        "tac": _floats(ver.tac),
        "dropped": ver.dropped,
    }


def select_polytope(report: ExplorationReport, hull: str) -> Polytope:
    if hull == "inner":
        return to_halfspaces(report.hull)
    return Polytope.from_arrays(report.hull.outer_normals, report.hull.outer_offsets)


@dataclass
class PipelineResult:
    config: RunConfig
    report: ExplorationReport
    polytope: Polytope
    enumeration: EnumerationResult
    verification: VerificationResult
    distribution: FrequencyDistribution | None
    flags: dict
    summary: dict
    artifacts: list = field(default_factory=list)

    @property
    def designs(self) -> np.ndarray:
        return self.verification.designs


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except Exception as exc:  # tag and re-raise
        raise PipelineError(name, exc) from exc


def run_pipeline(model: EnergySystemModel, config: RunConfig | None = None, out=None) -> PipelineResult:
    """Run every stage on ``model``; write artifacts to ``out`` if given.

    An empty alternative set is reported (no distribution, no flags) rather
    than raised.
    """
    config = config or RunConfig()
    sc = config.solver_config()
    out = Path(out) if out is not None else None
    written: list[Path] = []

    lp, milp = _stage("optimize", optimize, model, sc)
    records: list[dict] = []
    report = _stage("explore", explore, model, config.exploration_config(), sc, optima=(lp, milp),
                    on_record=records.append)
    poly = select_polytope(report, config.hull)
    pdoc = polytope_doc(poly, report, model.capacity_steps, config.hull)
    enum = _stage("discretize", enumerate_designs, poly, model.capacity_steps, config.mode,
                  config.root_divisions, sc)
    ver = _stage("verify", verify_designs, model, enum.designs, report.budget, sc, config.workers)
    dist, flags = None, {}
    if len(ver):
        dist = _stage("report", frequency, ver.designs, model.design_names, report.continuous_optimum)
        flags = necessity_flags(dist)

    summary = {
        "command": "pipeline",
        "model": model.name,
        "config": config.to_dict(),
        "tac_star": report.tac_star,
        "budget": report.budget,
        "tac_continuous": report.tac_continuous,
        "tac_discrete": report.tac_discrete,
        "directions_evaluated": report.directions_evaluated,
        "final_gap": report.final_gap,
        "explored_ratio": report.explored_ratio,
        "stop_reason": report.stop_reason,
        "enumerated": len(enum),
        "alternatives": len(ver),
        "dropped": len(ver.dropped),
        "max_tac_ratio": float(ver.tac.max() / report.tac_star) if len(ver) else None,
        "flags": flags,
        "counts": enum.counts,
    }
    if out is not None:
        written += [
            write_json(out / "optimum.json", optimum_doc(model, lp, milp)),
            write_json(out / "exploration.json", exploration_doc(report)),
        ]
        p = out / "exploration_log.jsonl"
        p.write_text(report.log_lines())
        written.append(p)
        written += [
            write_json(out / "polytope.json", pdoc),
            write_json(out / "enumeration.json", enumeration_doc(enum, pdoc)),
            write_json(out / "verification.json", verification_doc(ver, pdoc)),
        ]
        p = out / "designs.csv"
        p.write_text(designs_csv(model.design_names, ver.designs, ver.tac, report.tac_star))
        written.append(p)
        if dist is not None:
            written += _stage("report", render, dist, out / "report")
            written.append(write_json(out / "report" / "flags.json", {"flags": flags, "n_designs": dist.n_designs}))
        summary["artifacts"] = sorted(str(p.relative_to(out)) for p in written) + ["summary.json"]
        written.append(write_json(out / "summary.json", summary))
    return PipelineResult(config, report, poly, enum, ver, dist, flags, summary, written)
