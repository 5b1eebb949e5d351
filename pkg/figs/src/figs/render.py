"""Deterministic rendering of the five figure kinds.

Every figure is drawn with a pinned style (sizes, fonts, salt for SVG
ids, no date metadata), so re-rendering the same inputs reproduces the
output files byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .loader import InputError, RunArtifact, check_same_run_family, load_artifact

KINDS = ("trace", "amplitude", "error", "sensitivity", "clusters")

_STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "font.family": "DejaVu Sans",
    "font.size": 10,
    "svg.hashsalt": "figs",
    "axes.grid": True,
    "grid.alpha": 0.3,
}

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd",
           "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f")


@dataclass
class FigureSpec:
    """What to draw: input manifests, figure kind, labels, output path."""

    inputs: list[str]
    kind: str
    output: str
    title: str = ""
    labels: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise InputError(f"unknown figure kind {self.kind!r}; "
                             f"expected one of {KINDS}")
        if not self.inputs:
            raise InputError("at least one input manifest is required")


def _ok_rows(table: dict[str, list[float]]) -> dict[str, np.ndarray]:
    """Drop failed rows: they carry empty (NaN-parsed) amplitude cells."""
    arrays = {k: np.asarray(v, dtype=float) for k, v in table.items()
              if k != "status"}
    if "amplitude" in arrays:
        mask = ~np.isnan(arrays["amplitude"])
        arrays = {k: v[mask] for k, v in arrays.items()}
    return arrays


def _save(fig, output: str) -> list[str]:
    written = []
    for ext in ("svg", "png"):
        path = f"{output}.{ext}"
        metadata = {"Date": None} if ext == "svg" else {"Software": "figs"}
        fig.savefig(path, metadata=metadata)
        written.append(path)
    plt.close(fig)
    return written


def _draw_trace(arts: list[RunArtifact], spec: FigureSpec, ax) -> None:
    table = arts[0].table()
    if "t" not in table:
        raise InputError("trace input has no time column")
    t = np.asarray(table["t"])
    drawn = 0
    for i, name in enumerate(k for k in table if k in ("x",)
                             or k.startswith("delta_")):
        ax.plot(t, table[name], lw=0.9, color=_COLORS[i % len(_COLORS)],
                label=name)
        drawn += 1
    if drawn == 0:
        raise InputError("trace input has no displacement columns")
    ax.axhline(0.0, color="black", lw=0.6)
    ax.set_xlabel(spec.labels.get("x", "time (s)"))
    ax.set_ylabel(spec.labels.get("y", "displacement (nm)"))
    if drawn > 1:
        ax.legend(fontsize=7, ncol=2)


def _draw_amplitude(arts: list[RunArtifact], spec: FigureSpec, ax) -> None:
    sweeps = [a for a in arts if a.command == "sweep"]
    reports = [a for a in arts if a.command == "analyze"]
    if not sweeps:
        raise InputError("amplitude figure needs at least one sweep manifest")
    for i, art in enumerate(sweeps):
        rows = _ok_rows(art.table())
        engine = art.manifest.get("config", {}).get("engine", {}).get("kind", "run")
        ax.plot(rows["delta"], rows["amplitude"], "o-", ms=4,
                color=_COLORS[i], label=f"measured ({engine})")
    if reports:
        curve = np.asarray(reports[0].report()["amplitude_curve"], dtype=float)
        order = np.argsort(curve[:, 0])
        ax.plot(curve[order, 0], curve[order, 1], "--", color="black",
                label="theory")
    ax.set_xlabel(spec.labels.get("x", "relative distance to onset"))
    ax.set_ylabel(spec.labels.get("y", "amplitude (nm)"))
    ax.legend(fontsize=8)


def _draw_error(arts: list[RunArtifact], spec: FigureSpec, ax) -> None:
    sweeps = [a for a in arts if a.command == "sweep"]
    reports = [a for a in arts if a.command == "analyze"]
    if len(sweeps) < 2 or not reports:
        raise InputError("error figure needs two sweeps (reference last) "
                         "and an analyze report")
    theory = dict(np.asarray(reports[0].report()["amplitude_curve"],
                             dtype=float))
    ref_rows = _ok_rows(sweeps[-1].table())
    ref = dict(zip(ref_rows["delta"], ref_rows["amplitude"]))

    def relerr_curve(values: dict) -> tuple[np.ndarray, np.ndarray]:
        ds = sorted(set(values) & set(ref))
        errs = [abs(values[d] - ref[d]) / ref[d] for d in ds]
        return np.asarray(ds), np.asarray(errs)

    ds, errs = relerr_curve(theory)
    if len(ds) == 0:
        raise InputError("no overlapping delta values between inputs")
    ax.plot(ds, errs, "o-", color=_COLORS[1], label="theory vs reference")
    for i, art in enumerate(sweeps[:-1]):
        rows = _ok_rows(art.table())
        vals = dict(zip(rows["delta"], rows["amplitude"]))
        ds2, errs2 = relerr_curve(vals)
        engine = art.manifest.get("config", {}).get("engine", {}).get("kind", "run")
        ax.plot(ds2, errs2, "s-", color=_COLORS[0],
                label=f"{engine} vs reference")
    ax.set_xlabel(spec.labels.get("x", "relative distance to onset"))
    ax.set_ylabel(spec.labels.get("y", "relative amplitude error"))
    ax.legend(fontsize=8)


def _draw_sensitivity(arts: list[RunArtifact], spec: FigureSpec, axes) -> None:
    table = _ok_rows(arts[0].table())
    names = [k for k in table if k not in ("amplitude", "frequency")]
    if not names or "amplitude" not in table:
        raise InputError("sensitivity input lacks scan columns")
    xname = names[0]
    ax_amp, ax_freq = axes
    ax_amp.plot(table[xname], table["amplitude"], "o-", color=_COLORS[0])
    ax_amp.set_ylabel("amplitude (nm)")
    ax_freq.plot(table[xname], table["frequency"], "o-", color=_COLORS[1])
    ax_freq.set_ylabel("frequency (Hz)")
    ax_freq.set_xlabel(spec.labels.get("x", xname))


def _draw_clusters(arts: list[RunArtifact], spec: FigureSpec, ax) -> None:
    art = arts[0]
    table = art.table()
    doc = art.report()
    if not doc.get("oscillating", False):
        raise InputError("cluster input did not oscillate")
    clusters = doc["clusters"]
    group_of = {}
    for gi, members in enumerate(clusters):
        for m in members:
            group_of[m] = gi
    t = np.asarray(table["t"])
    n0 = int(0.75 * len(t))
    names = sorted((k for k in table if k.startswith("delta_")),
                   key=lambda s: int(s.split("_")[1]))
    cols = [np.asarray(table[n]) for n in names]
    cols.append(-np.sum(cols, axis=0))  # last pair from the zero-sum rule
    for i, col in enumerate(cols):
        gi = group_of.get(i + 1, 0)
        ax.plot(t[n0:], col[n0:], lw=0.9,
                color=_COLORS[gi % len(_COLORS)], label=f"pair {i + 1}")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("relative displacement (nm)")
    ax.legend(fontsize=6, ncol=4)


def render(spec: FigureSpec) -> list[str]:
    """Render one figure; returns the written file paths (.svg and .png).

    Inputs must exist, parse, and share the same parameter hash.
    """
    arts = [load_artifact(path) for path in spec.inputs]
    check_same_run_family(arts)
    with plt.rc_context(_STYLE):
        if spec.kind == "sensitivity":
            fig, axes = plt.subplots(2, 1, sharex=True)
            _draw_sensitivity(arts, spec, axes)
        else:
            fig, ax = plt.subplots()
            draw = {"trace": _draw_trace, "amplitude": _draw_amplitude,
                    "error": _draw_error, "clusters": _draw_clusters}[spec.kind]
            draw(arts, spec, ax)
        if spec.title:
            fig.suptitle(spec.title)
        fig.tight_layout()
        return _save(fig, spec.output)
