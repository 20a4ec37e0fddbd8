"""Figure rendering with a pinned style; writes both PNG and SVG."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import CsvArtifact, SchemaError, read_artifact

STYLE = {
    "figure.figsize": (6.0, 4.2),
    "figure.dpi": 120,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "plotkit",
}
THRESHOLD_LINE_GID = "t-alg-line"


def _outputs(out_path: str) -> list[str]:
    base, ext = os.path.splitext(out_path)
    if ext.lower() not in (".png", ".svg"):
        raise ValueError(f"output must end in .png or .svg, got {out_path!r}")
    return [base + ".png", base + ".svg"]


def _save(fig, out_path: str) -> list[str]:
    paths = _outputs(out_path)
    for path in paths:
        # a fixed Date keeps the SVG byte-stable across reruns
        fig.savefig(path, metadata={"Date": None} if path.endswith(".svg") else None)
    plt.close(fig)
    return paths


def render_curve(csv_path: str, out_path: str) -> dict:
    """MSE-vs-t/n panel: one band per estimator, threshold line at t_alg/n."""
    art = read_artifact(csv_path)
    if not art.schema.startswith(("mse-curve/", "oracle-phase/")):
        raise SchemaError(f"expected an mse-curve artifact, got schema {art.schema!r}")
    if "t_alg" not in art.meta:
        raise SchemaError("artifact is missing the t_alg metadata entry")
    n = int(art.config()["n"])
    t_alg = float(art.meta["t_alg"])
    estimators = sorted({r["estimator_id"] for r in art.rows})
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for est in estimators:
            rows = [r for r in art.rows if r["estimator_id"] == est]
            rows.sort(key=lambda r: float(r["t"]))
            x = np.array([float(r["t"]) for r in rows]) / n
            mean = np.array([float(r["mse_mean"]) for r in rows])
            se = np.array([float(r["mse_stderr"]) for r in rows])
            (line,) = ax.plot(x, mean, marker="o", markersize=3, label=est)
            ax.fill_between(x, mean - 2 * se, mean + 2 * se,
                            color=line.get_color(), alpha=0.2, linewidth=0)
        vline = ax.axvline(t_alg / n, color="black", linestyle="--", linewidth=1)
        vline.set_gid(THRESHOLD_LINE_GID)
        ax.set_xscale("log")
        ax.set_xlabel("t / n")
        ax.set_ylabel("mean squared error")
        ax.legend(loc="best")
        paths = _save(fig, out_path)
    return {"estimators": estimators, "records": len(art.rows), "outputs": paths}


def render_histogram(csv_path: str, out_path: str, bins: int = 40) -> dict:
    """Histogram of generated-sample Frobenius norms."""
    art = read_artifact(csv_path)
    if not art.schema.startswith("generate/"):
        raise SchemaError(f"expected a generate artifact, got schema {art.schema!r}")
    norms = art.floats("fro_norm")
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        counts, _, _ = ax.hist(norms, bins=bins, range=(0.0, max(1.05, max(norms))))
        ax.set_xlabel("Frobenius norm of generated sample")
        ax.set_ylabel("count")
        if "w1_lower_bound" in art.meta:
            ax.set_title(f"W1 lower bound vs target: {float(art.meta['w1_lower_bound']):.3f}")
        paths = _save(fig, out_path)
    return {"records": len(norms), "bin_counts": [int(c) for c in counts], "outputs": paths}
