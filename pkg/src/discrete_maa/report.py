"""Per-technology frequency distributions over a set of design alternatives.

One bin per realized lattice value; the reference marker is the optimal
capacity of the relaxed (continuous) design problem.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

ALWAYS = "always_installed"
NEVER = "never_installed"
OPTIONAL = "optional"


class ReportError(ValueError):
    pass


@dataclass(frozen=True)
class ComponentHistogram:
    name: str
    capacities: np.ndarray
    counts: np.ndarray
    reference: float

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.total

    def frequency_at(self, capacity: float) -> float:
        hit = np.isclose(self.capacities, capacity, rtol=0.0, atol=1e-9 * (1.0 + abs(capacity)))
        return float(self.frequencies[hit].sum())


@dataclass(frozen=True)
class FrequencyDistribution:
    components: tuple[ComponentHistogram, ...]
    n_designs: int

    def __getitem__(self, name: str) -> ComponentHistogram:
        for h in self.components:
            if h.name == name:
                return h
        raise KeyError(name)

    @property
    def names(self) -> list[str]:
        return [h.name for h in self.components]

    def to_dict(self) -> dict:
        return {
            "n_designs": self.n_designs,
            "components": [
                {
                    "name": h.name,
                    "reference": float(h.reference) if math.isfinite(h.reference) else None,
                    "capacity": [float(c) for c in h.capacities],
                    "count": [int(c) for c in h.counts],
                    "relative_frequency": [float(f) for f in h.frequencies],
                }
                for h in self.components
            ],
        }


def frequency(designs, names, reference=None) -> FrequencyDistribution:
    """Histogram of installed capacity per component.

    ``designs`` is an ``(n, dim)`` array of lattice designs; ``reference``
    holds the continuous-optimal capacities (NaN when not given).
    """
    designs = np.asarray(designs, dtype=float)
    names = list(names)
    if designs.size == 0:
        raise ReportError("cannot report on an empty set of design alternatives")
    designs = designs.reshape(-1, len(names))
    ref = np.full(len(names), math.nan) if reference is None else np.asarray(reference, dtype=float).ravel()
    if ref.size != len(names):
        raise ValueError("reference and component names differ in length")
    hists = []
    for i, name in enumerate(names):
        values, counts = np.unique(designs[:, i], return_counts=True)
        hists.append(ComponentHistogram(name, values, counts, float(ref[i])))
    return FrequencyDistribution(tuple(hists), len(designs))


def necessity_flags(dist: FrequencyDistribution) -> dict[str, str]:
    """``always_installed`` / ``never_installed`` / ``optional`` per component."""
    flags = {}
    for h in dist.components:
        at_zero = h.frequency_at(0.0)
        if at_zero == 0.0:
            flags[h.name] = ALWAYS
        elif at_zero == 1.0:
            flags[h.name] = NEVER
        else:
            flags[h.name] = OPTIONAL
    return flags


def histogram_csv(h: ComponentHistogram) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["capacity", "count", "relative_frequency"])
    for cap, cnt, f in zip(h.capacities, h.counts, h.frequencies):
        w.writerow([repr(float(cap)), int(cnt), repr(float(f))])
    return out.getvalue()


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def render_svg(dist: FrequencyDistribution) -> str:
    """Small multiples: one bar panel per component, dotted reference line."""
    pw, ph = 260.0, 170.0
    left, right, top, bottom = 36.0, 12.0, 26.0, 30.0
    cols = min(3, len(dist.components))
    rows = -(-len(dist.components) // cols)
    width, height = cols * pw, rows * ph
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" height="{_fmt(height)}" '
        f'viewBox="0 0 {_fmt(width)} {_fmt(height)}" font-family="sans-serif" font-size="10">',
        f'<rect x="0" y="0" width="{_fmt(width)}" height="{_fmt(height)}" fill="white"/>',
    ]
    for i, h in enumerate(dist.components):
        x0 = (i % cols) * pw + left
        y0 = (i // cols) * ph + top
        w = pw - left - right
        hgt = ph - top - bottom
        xs = list(h.capacities)
        if math.isfinite(h.reference):
            xs.append(h.reference)
        lo, hi = min(xs), max(xs)
        gaps = np.diff(h.capacities)
        bar_unit = float(gaps.min()) if gaps.size else max(hi - lo, 1.0)
        lo -= bar_unit / 2
        hi += bar_unit / 2
        span = hi - lo if hi > lo else 1.0

        def sx(v):
            return x0 + (v - lo) / span * w

        bw = max(bar_unit / span * w * 0.8, 1.0)
        out.append(f'<g id="panel-{i}">')
        out.append(f'<text x="{_fmt(x0)}" y="{_fmt(y0 - 10)}" font-weight="bold">{_escape(h.name)}</text>')
        out.append(f'<line x1="{_fmt(x0)}" y1="{_fmt(y0 + hgt)}" x2="{_fmt(x0 + w)}" y2="{_fmt(y0 + hgt)}" stroke="black"/>')
        out.append(f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x0)}" y2="{_fmt(y0 + hgt)}" stroke="black"/>')
        for tick in (0.0, 0.5, 1.0):
            ty = y0 + hgt * (1.0 - tick)
            out.append(f'<text x="{_fmt(x0 - 4)}" y="{_fmt(ty + 3)}" text-anchor="end">{tick:.1f}</text>')
        for cap, f in zip(h.capacities, h.frequencies):
            bh = f * hgt
            out.append(
                f'<rect x="{_fmt(sx(cap) - bw / 2)}" y="{_fmt(y0 + hgt - bh)}" width="{_fmt(bw)}" '
                f'height="{_fmt(bh)}" fill="#4878a8"><title>{float(cap):g}: {float(f):.4f}</title></rect>'
            )
        for v in (h.capacities[0], h.capacities[-1]):
            out.append(f'<text x="{_fmt(sx(v))}" y="{_fmt(y0 + hgt + 14)}" text-anchor="middle">{float(v):g}</text>')
        if math.isfinite(h.reference):
            rx = sx(h.reference)
            out.append(
                f'<line x1="{_fmt(rx)}" y1="{_fmt(y0)}" x2="{_fmt(rx)}" y2="{_fmt(y0 + hgt)}" '
                'stroke="black" stroke-dasharray="2,3" class="reference"/>'
            )
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _file_stem(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name) or "component"


def render(dist: FrequencyDistribution, path) -> list[Path]:
    """Write ``<component>.csv`` files and ``frequency.svg`` into directory ``path``."""
    root = Path(path)
    written = []
    try:
        root.mkdir(parents=True, exist_ok=True)
        for h in dist.components:
            p = root / f"{_file_stem(h.name)}.csv"
            p.write_text(histogram_csv(h))
            written.append(p)
        p = root / "frequency.svg"
        p.write_text(render_svg(dist))
        written.append(p)
    except OSError as exc:
        raise OSError(f"cannot write report to {root}: {exc}") from exc
    return written
