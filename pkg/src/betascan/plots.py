"""Figure rendering for CLI reports.

Each renderer takes already-computed report data and writes one PNG next to
the delimited output. Figures are deterministic: fixed size and dpi, no
timestamps, metadata stripped.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "save_beta_scales_figure",
    "save_dini_figure",
    "save_classify_figure",
    "save_tsp_figure",
    "save_ccbp_figure",
    "save_sample_figure",
    "save_check_figure",
]

_FIGSIZE = (6.0, 4.0)
_DPI = 110
_META = {"Software": None}  # keep PNG bytes identical across runs


def _finalize(fig, path):
    fig.tight_layout()
    fig.savefig(Path(path), dpi=_DPI, metadata=_META)
    plt.close(fig)


def save_beta_scales_figure(rows: List[dict], path):
    """log-log beta vs scale, one line per (center, form)."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    series: Dict[tuple, List[tuple]] = {}
    for r in rows:
        series.setdefault((r["center_id"], r["form"]), []).append((r["scale"], r["value"]))
    for (cid, form), pts in sorted(series.items()):
        pts.sort(reverse=True)
        s = np.array([p[0] for p in pts])
        v = np.array([max(p[1], 1e-16) for p in pts])
        ax.loglog(s, v, marker="o", ms=3, lw=1, label=f"center {cid} ({form})")
    ax.set_xlabel("scale r")
    ax.set_ylabel("beta")
    ax.grid(True, which="both", alpha=0.3)
    if len(series) <= 12:
        ax.legend(fontsize=7)
    _finalize(fig, path)


def save_dini_figure(rows: List[dict], path):
    """Partial sums of squared betas against scale (semilog-x, inverted)."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    series: Dict[int, List[tuple]] = {}
    for r in rows:
        series.setdefault(r["center_id"], []).append((r["scale"], r["partial_sum"]))
    for cid, pts in sorted(series.items()):
        pts.sort(reverse=True)
        ax.semilogx([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3, lw=1,
                    label=f"center {cid}")
    ax.invert_xaxis()
    ax.set_xlabel("scale r (shrinking)")
    ax.set_ylabel("partial sum of beta^2")
    ax.grid(True, which="both", alpha=0.3)
    if len(series) <= 12:
        ax.legend(fontsize=7)
    _finalize(fig, path)


def save_classify_figure(points: np.ndarray, labels: Sequence[str], path):
    """Sample scatter colored by verdict (first two coordinates)."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    colors = {"tangent": "tab:blue", "non_tangent": "tab:red", "undecided": "tab:gray"}
    labels = np.asarray(labels)
    for lab, col in colors.items():
        mask = labels == lab
        if mask.any():
            ax.scatter(points[mask, 0], points[mask, 1], s=8, c=col, label=lab)
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    _finalize(fig, path)


def save_tsp_figure(per_level: Dict[int, float], diam: float, path):
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ks = sorted(per_level)
    ax.bar([str(k) for k in ks], [per_level[k] for k in ks], color="tab:blue")
    ax.set_xlabel("cube level k")
    ax.set_ylabel("sum of beta^2 diam(Q)")
    ax.set_title(f"diam(E) = {diam:.4g}")
    ax.grid(True, axis="y", alpha=0.3)
    _finalize(fig, path)


def save_ccbp_figure(condition_worst: Dict[str, float], epsilon: float,
                     eps_by_level: Dict[int, float], path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.0, 4.0))
    names = sorted(condition_worst)
    ax1.bar(names, [condition_worst[n] for n in names], color="tab:blue")
    ax1.axhline(epsilon, color="tab:red", lw=1, ls="--", label="epsilon")
    ax1.set_ylabel("worst value")
    ax1.tick_params(axis="x", rotation=45)
    ax1.legend(fontsize=8)
    if eps_by_level:
        ks = sorted(eps_by_level)
        ax2.semilogy(ks, [max(eps_by_level[k], 1e-16) for k in ks], marker="o")
        ax2.set_xlabel("level k")
        ax2.set_ylabel("max eps_k over probes")
        ax2.grid(True, which="both", alpha=0.3)
    _finalize(fig, path)


def save_sample_figure(points: np.ndarray, path):
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.scatter(points[:, 0], points[:, 1], s=4, c="tab:blue")
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(True, alpha=0.3)
    _finalize(fig, path)


def save_check_figure(lemma_margins: Dict[str, List[float]], path):
    """Per-lemma distribution of lhs/rhs margins (<= 1 passes)."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    names = sorted(lemma_margins)
    data = [lemma_margins[n] for n in names]
    ax.boxplot(data, tick_labels=names)
    ax.axhline(1.0, color="tab:red", lw=1, ls="--")
    ax.set_ylabel("lhs / (rhs * (1 + slack))")
    ax.tick_params(axis="x", rotation=30)
    ax.grid(True, axis="y", alpha=0.3)
    _finalize(fig, path)
