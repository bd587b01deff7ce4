"""Figure rendering over the optimizer's CSV outputs.

Rendering is strictly read-only over the CSVs.  A referenced column that
is missing is a hard error naming the column; an input with no data rows
is a hard error rather than an empty image.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("sigma-trace", "delta-sigma", "kappa-sweep", "comparison")


class SchemaError(ValueError):
    """A required CSV column is absent."""


class NoDataError(ValueError):
    """The CSV has a header but no rows."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple[Path, ...]
    output: Path

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.inputs:
            raise ValueError("at least one input CSV is required")


@dataclass
class RenderResult:
    """What was drawn; carries the annotated composite-score minimum."""

    output: Path
    kind: str
    annotations: dict = field(default_factory=dict)


def read_csv(path: Path, required: list[str]) -> dict[str, list[str]]:
    """Load a CSV as named columns, enforcing presence and non-emptiness."""
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise NoDataError(f"{path}: no data") from None
        rows = list(reader)
    for name in required:
        if name not in header:
            raise SchemaError(f"{path}: missing column {name!r}")
    if not rows:
        raise NoDataError(f"{path}: no data")
    index = {name: header.index(name) for name in header}
    return {name: [row[index[name]] for row in rows] for name in header}


def floats(columns: dict[str, list[str]], name: str) -> np.ndarray:
    return np.array([float(v) for v in columns[name]])


def _label_for(path: Path) -> str:
    return path.stem.removeprefix("trace-")


def _render_sigma_trace(spec: FigureSpec, ax) -> dict:
    for path in spec.inputs:
        cols = read_csv(path, ["g", "sigma_pre_correction", "sigma_post_correction"])
        g = floats(cols, "g")
        ax.plot(g, floats(cols, "sigma_post_correction"), label=_label_for(path))
        ax.plot(g, floats(cols, "sigma_pre_correction"), linestyle="--", alpha=0.5)
    ax.set_xlabel("g (generation)")
    ax.set_ylabel("sigma (post-correction solid, pre dashed)")
    ax.set_yscale("log")
    return {}


def _render_delta_sigma(spec: FigureSpec, ax) -> dict:
    for path in spec.inputs:
        cols = read_csv(path, ["g", "sigma_post_correction"])
        g = floats(cols, "g")
        sigma = floats(cols, "sigma_post_correction")
        if len(sigma) < 2:
            raise NoDataError(f"{path}: need at least two generations for differences")
        ax.plot(g[1:], np.diff(sigma), label=_label_for(path))
    ax.axhline(0.0, color="black", linewidth=0.6)
    ax.set_xlabel("g (generation)")
    ax.set_ylabel("delta sigma per generation")
    return {}


def _render_kappa_sweep(spec: FigureSpec, ax) -> dict:
    if len(spec.inputs) != 1:
        raise ValueError("kappa-sweep takes exactly one sweep CSV")
    cols = read_csv(
        spec.inputs[0],
        ["kappa", "mean_cpu_seconds", "mean_gap", "mean_f_N", "s_f"],
    )
    kappa = floats(cols, "kappa")
    order = np.argsort(kappa)
    kappa = kappa[order]
    series = {
        "mean_cpu_seconds": "D",
        "mean_gap": "*",
        "mean_f_N": "o",
        "s_f": "s",
    }
    for name, marker in series.items():
        ax.plot(kappa, floats(cols, name)[order], marker=marker, linestyle=":",
                label=name)
    s_f = floats(cols, "s_f")[order]
    best = int(np.argmin(s_f))
    ax.annotate(
        f"min s_f at kappa={kappa[best]:g}",
        xy=(kappa[best], s_f[best]),
        xytext=(kappa[best], s_f[best] * 1.15 + 1.0),
        arrowprops={"arrowstyle": "->"},
    )
    ax.set_xlabel("kappa (correction scale)")
    ax.set_ylabel("per-kappa mean metric")
    return {"argmin_kappa": float(kappa[best])}


def _render_comparison(spec: FigureSpec, ax) -> dict:
    if len(spec.inputs) != 1:
        raise ValueError("comparison takes exactly one runs CSV")
    cols = read_csv(spec.inputs[0], ["algorithm", "seed", "cpu_seconds", "val", "f_N"])
    algorithms = sorted(set(cols["algorithm"]))
    for algorithm in algorithms:
        idx = [i for i, a in enumerate(cols["algorithm"]) if a == algorithm]
        seeds = np.array([int(cols["seed"][i]) for i in idx])
        order = np.argsort(seeds)
        vals = np.array([float(cols["val"][i]) for i in idx])[order]
        fns = np.array([float(cols["f_N"][i]) for i in idx])[order]
        ax.plot(seeds[order], vals, marker="o", linestyle=":",
                label=f"{algorithm} val")
        ax.plot(seeds[order], fns, marker="*", linestyle=":",
                label=f"{algorithm} f_N")
    ax.set_xlabel("seed (run)")
    ax.set_ylabel("best value found / evaluations per generation")
    return {"algorithms": algorithms}


_RENDERERS = {
    "sigma-trace": _render_sigma_trace,
    "delta-sigma": _render_delta_sigma,
    "kappa-sweep": _render_kappa_sweep,
    "comparison": _render_comparison,
}


def render(spec: FigureSpec) -> RenderResult:
    """Render one figure; returns the output path and any annotations."""
    fig, ax = plt.subplots(figsize=(8, 5))
    try:
        annotations = _RENDERERS[spec.kind](spec, ax)
        ax.legend(fontsize=8)
        ax.set_title(spec.kind)
        fig.tight_layout()
        spec.output.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(spec.output, dpi=120, metadata={"Software": "psaes-plots"})
    finally:
        plt.close(fig)
    return RenderResult(output=spec.output, kind=spec.kind, annotations=annotations)
