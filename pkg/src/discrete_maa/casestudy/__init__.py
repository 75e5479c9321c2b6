"""Bundled synthetic industrial-site case study and its scripted run.

The bundle holds ``model.json`` (site topology and synthetic data),
``run.json`` (pipeline parameters) and ``manifest.json`` (properties every
run must satisfy). All numbers are synthetic; see the bundle README.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..model import EnergySystemModel, model_from_dict
from ..pipeline import PipelineError, PipelineResult, RunConfig, run_pipeline

BUNDLE_FILES = ("model.json", "run.json", "manifest.json")


class ManifestError(AssertionError):
    pass


@dataclass(frozen=True)
class CaseStudyBundle:
    model: EnergySystemModel
    run: RunConfig
    manifest: dict
    root: Path


def bundle_path() -> Path:
    return Path(str(resources.files(__name__)))


def load_bundle(path=None) -> CaseStudyBundle:
    """Read a bundle directory (the packaged one by default)."""
    root = Path(path) if path is not None else bundle_path()
    missing = [f for f in BUNDLE_FILES if not (root / f).is_file()]
    if missing:
        raise FileNotFoundError(f"case-study bundle {root} lacks {', '.join(missing)}")
    docs = {}
    for f in BUNDLE_FILES:
        try:
            docs[f] = json.loads((root / f).read_text())
        except json.JSONDecodeError as exc:
            raise ValueError(f"{root / f}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return CaseStudyBundle(
        model=model_from_dict(docs["model.json"]),
        run=RunConfig.from_dict(docs["run.json"]),
        manifest=docs["manifest.json"],
        root=root,
    )


def check_manifest(bundle: CaseStudyBundle, result: PipelineResult, flags: bool = True) -> dict[str, bool]:
    """Evaluate the manifest properties; ``flags`` also compares necessity flags."""
    m = bundle.manifest
    model = bundle.model
    ver = result.verification
    tol = m["budget_tolerance"]
    checks = {
        "carriers": sorted(c.id for c in model.carriers) == sorted(m["carriers"]),
        "demand_carriers": sorted(k for k, v in model.demands.items() if any(v)) == sorted(m["demand_carriers"]),
        "nonempty_alternatives": len(ver) > 0,
        "gap_within_delta": result.report.final_gap <= result.config.delta,
        "budget_sound": bool(len(ver) == 0 or (ver.tac <= result.report.budget * (1 + tol)).all()),
    }
    if flags:
        checks["necessity_flags"] = result.flags == m["necessity_flags"]
    return checks


def run_case_study(bundle: CaseStudyBundle | None = None, out=None, check: bool = True, **overrides) -> PipelineResult:
    """Run the bundled pipeline, optionally with run-config overrides.

    With ``check`` the manifest is asserted; necessity flags are compared
    only for the unmodified run configuration.
    """
    bundle = bundle or load_bundle()
    config = bundle.run.replace(**overrides)
    result = run_pipeline(bundle.model, config, out)
    if check:
        checks = check_manifest(bundle, result, flags=config == bundle.run)
        failed = sorted(k for k, ok in checks.items() if not ok)
        if failed:
            raise PipelineError("manifest", ManifestError(f"case-study properties violated: {', '.join(failed)}"))
        result.summary["manifest"] = checks
    return result
