"""Synthetic ground-truth generators and bit-exact sample I/O.

Each generator emits a deterministic sample with covering radius <= h together
with per-point tangency labels from calculus (the test oracle for the
classifier). Files are UTF-8 CSV with 17-significant-digit decimals, which
round-trips float64 exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .content import PointSample
from .errors import InputError
from .geometry import AffinePlane

__all__ = [
    "GroundTruth",
    "gen_synthetic",
    "save_sample",
    "load_sample",
    "save_ground_truth",
    "load_ground_truth",
    "GRAPH_CATALOG",
]

LABEL_TANGENT = "tangent"
LABEL_NON_TANGENT = "non_tangent"
LABEL_BOUNDARY = "boundary"


@dataclass(frozen=True)
class GroundTruth:
    """Per-point tangency labels with planes where defined."""

    labels: tuple  # of str
    planes: tuple  # of Optional[AffinePlane], aligned with labels
    generator: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if len(self.labels) != len(self.planes):
            raise InputError("labels and planes must be aligned")
        for lab, pl in zip(self.labels, self.planes):
            if lab not in (LABEL_TANGENT, LABEL_NON_TANGENT, LABEL_BOUNDARY):
                raise InputError(f"unknown label {lab!r}")
            if (lab == LABEL_TANGENT) != (pl is not None):
                raise InputError("plane present iff label is tangent")

    def __len__(self):
        return len(self.labels)

    def tangent_mask(self) -> np.ndarray:
        return np.array([lab == LABEL_TANGENT for lab in self.labels])


# graph function catalog: name -> (f, f'); the coefficient scales the height
GRAPH_CATALOG = {
    "linear": (lambda x, a: a * x, lambda x, a: a * np.ones_like(x)),
    "parabola": (lambda x, a: a * x**2, lambda x, a: 2 * a * x),
    "abs32": (lambda x, a: a * np.abs(x) ** 1.5, lambda x, a: 1.5 * a * np.sign(x) * np.sqrt(np.abs(x))),
    "sin": (lambda x, a: a * np.sin(x), lambda x, a: a * np.cos(x)),
}


def _graph_points(fname: str, coeff: float, half_width: float, h: float):
    if fname not in GRAPH_CATALOG:
        raise InputError(f"unknown graph function {fname!r}; catalog: {sorted(GRAPH_CATALOG)}")
    f, fp = GRAPH_CATALOG[fname]
    probe = np.linspace(-half_width, half_width, 4097)
    max_slope = float(np.abs(fp(probe, coeff)).max())
    step = h / math.sqrt(1.0 + max_slope**2)
    count = int(math.ceil(2 * half_width / step)) + 1
    x = np.linspace(-half_width, half_width, count)
    pts = np.stack([x, f(x, coeff)], axis=1)
    slopes = fp(x, coeff)
    return x, pts, slopes


def _tangent_line(point, slope) -> AffinePlane:
    direction = np.array([1.0, float(slope)])
    return AffinePlane.from_spanning(point, direction[None, :])


def _boundary_mask(x: np.ndarray, margin_frac: float) -> np.ndarray:
    lo, hi = x.min(), x.max()
    margin = margin_frac * (hi - lo)
    return (x < lo + margin) | (x > hi - margin)


def gen_synthetic(kind: str, params: Optional[dict] = None, h: float = 1e-3, seed: int = 0):
    """Deterministic sample + ground truth for one of the fixed generators.

    kinds: graph (function from GRAPH_CATALOG), corner, circle, cantor4, koch,
    spiral. Covering radius of the emitted sample is <= h.
    """
    if not h > 0:
        raise InputError(f"h must be positive, got {h}")
    params = dict(params or {})
    if kind == "graph":
        return _gen_graph(params, h, seed)
    if kind == "corner":
        return _gen_corner(params, h, seed)
    if kind == "circle":
        return _gen_circle(params, h, seed)
    if kind == "cantor4":
        return _gen_cantor4(params, h, seed)
    if kind == "koch":
        return _gen_koch(params, h, seed)
    if kind == "spiral":
        return _gen_spiral(params, h, seed)
    raise InputError(f"unknown generator kind {kind!r}")


def _gen_graph(params, h, seed):
    fname = params.pop("function", "parabola")
    coeff = float(params.pop("coeff", 0.5))
    half_width = float(params.pop("half_width", 1.0))
    boundary_frac = float(params.pop("boundary_frac", 0.02))
    _check_consumed(params, "graph")
    x, pts, slopes = _graph_points(fname, coeff, half_width, h)
    boundary = _boundary_mask(x, boundary_frac)
    labels, planes = [], []
    for i in range(len(x)):
        if boundary[i]:
            labels.append(LABEL_BOUNDARY)
            planes.append(None)
        else:
            labels.append(LABEL_TANGENT)
            planes.append(_tangent_line(pts[i], slopes[i]))
    sample = PointSample(pts, 1, resolution_h=h, metadata={"kind": "graph", "function": fname})
    truth = GroundTruth(
        tuple(labels), tuple(planes), "graph",
        {"function": fname, "coeff": coeff, "half_width": half_width, "h": h}, seed,
    )
    return sample, truth


def _gen_corner(params, h, seed):
    slope = float(params.pop("slope", 1.0))
    half_width = float(params.pop("half_width", 1.0))
    boundary_frac = float(params.pop("boundary_frac", 0.02))
    _check_consumed(params, "corner")
    step = h / math.sqrt(1.0 + slope**2)
    count = int(math.ceil(half_width / step))
    # symmetric sample containing the apex exactly
    x = np.concatenate([-np.linspace(half_width, 0, count, endpoint=False), [0.0],
                        np.linspace(half_width, 0, count, endpoint=False)[::-1]])
    pts = np.stack([x, slope * np.abs(x)], axis=1)
    boundary = _boundary_mask(x, boundary_frac)
    labels, planes = [], []
    for i in range(len(x)):
        if x[i] == 0.0:
            labels.append(LABEL_NON_TANGENT)
            planes.append(None)
        elif boundary[i]:
            labels.append(LABEL_BOUNDARY)
            planes.append(None)
        else:
            labels.append(LABEL_TANGENT)
            planes.append(_tangent_line(pts[i], slope * np.sign(x[i])))
    sample = PointSample(pts, 1, resolution_h=h, metadata={"kind": "corner"})
    truth = GroundTruth(tuple(labels), tuple(planes), "corner",
                        {"slope": slope, "half_width": half_width, "h": h}, seed)
    return sample, truth


def _gen_circle(params, h, seed):
    radius = float(params.pop("radius", 1.0))
    _check_consumed(params, "circle")
    count = int(math.ceil(2 * math.pi / (2 * math.asin(min(h / (2 * radius), 1.0)))))
    theta = np.arange(count) * (2 * math.pi / count)
    pts = radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    planes = tuple(
        AffinePlane.from_spanning(pts[i], np.array([[-math.sin(theta[i]), math.cos(theta[i])]]))
        for i in range(count)
    )
    sample = PointSample(pts, 1, resolution_h=h, metadata={"kind": "circle"})
    truth = GroundTruth((LABEL_TANGENT,) * count, planes, "circle",
                        {"radius": radius, "h": h}, seed)
    return sample, truth


def _gen_cantor4(params, h, seed):
    generation = int(params.pop("generation", 6))
    _check_consumed(params, "cantor4")
    if generation < 1:
        raise InputError("cantor4 generation must be >= 1")
    if h < 4.0**-generation:
        raise InputError(
            f"cantor4 at generation {generation} has resolution {4.0**-generation:.3g}; h too small"
        )
    corners = np.array([[0.0, 0.0]])
    side = 1.0
    for _ in range(generation):
        offs = np.array([[0.0, 0.0], [0.0, 3.0], [3.0, 0.0], [3.0, 3.0]]) * (side / 4)
        corners = (corners[:, None, :] + offs[None, :, :]).reshape(-1, 2)
        side /= 4
    pts = corners + side / 2
    sample = PointSample(pts, 1, resolution_h=4.0**-generation,
                         metadata={"kind": "cantor4", "generation": generation})
    truth = GroundTruth((LABEL_NON_TANGENT,) * len(pts), (None,) * len(pts), "cantor4",
                        {"generation": generation, "h": h}, seed)
    return sample, truth


def _koch_vertices(generation: int) -> np.ndarray:
    rot = np.array([[0.5, -math.sqrt(3) / 2], [math.sqrt(3) / 2, 0.5]])
    pts = np.array([[0.0, 0.0], [1.0, 0.0]])
    for _ in range(generation):
        out = [pts[0]]
        for a, b in zip(pts[:-1], pts[1:]):
            v = (b - a) / 3
            p1 = a + v
            p2 = p1 + rot @ v
            p3 = a + 2 * v
            out.extend([p1, p2, p3, b])
        pts = np.array(out)
    return pts


def _gen_koch(params, h, seed):
    generation = int(params.pop("generation", 4))
    _check_consumed(params, "koch")
    if generation < 0:
        raise InputError("koch generation must be >= 0")
    verts = _koch_vertices(generation)
    seg = 3.0**-generation
    if h < seg:
        # refine segments so consecutive points are within h
        per = int(math.ceil(seg / h))
        chunks = []
        for a, b in zip(verts[:-1], verts[1:]):
            t = np.arange(per) / per
            chunks.append(a[None, :] + t[:, None] * (b - a)[None, :])
        chunks.append(verts[-1:])
        pts = np.concatenate(chunks)
        res = seg / per
    else:
        pts = verts
        res = seg
    sample = PointSample(pts, 1, resolution_h=res,
                         metadata={"kind": "koch", "generation": generation})
    truth = GroundTruth((LABEL_NON_TANGENT,) * len(pts), (None,) * len(pts), "koch",
                        {"generation": generation, "h": h}, seed)
    return sample, truth


def _gen_spiral(params, h, seed):
    growth = float(params.pop("growth", 0.2))
    r_outer = float(params.pop("r_outer", 1.0))
    r_inner = float(params.pop("r_inner", 20 * h))
    _check_consumed(params, "spiral")
    if not 0 < r_inner < r_outer:
        raise InputError("spiral needs 0 < r_inner < r_outer")
    # logarithmic spiral r = r_outer * exp(growth * theta), theta <= 0
    pts = [np.zeros(2)]
    labels = [LABEL_NON_TANGENT]
    planes = [None]
    theta = 0.0
    speed = math.sqrt(1.0 + growth**2)
    while True:
        r = r_outer * math.exp(growth * theta)
        if r < r_inner:
            break
        pts.append(np.array([r * math.cos(theta), r * math.sin(theta)]))
        # unit tangent of (r cos, r sin) with r' = growth * r
        tx = growth * math.cos(theta) - math.sin(theta)
        ty = growth * math.sin(theta) + math.cos(theta)
        planes.append(AffinePlane.from_spanning(pts[-1], np.array([[tx, ty]])))
        labels.append(LABEL_TANGENT)
        theta -= h / (r * speed)
    sample = PointSample(np.array(pts), 1, resolution_h=h, metadata={"kind": "spiral"})
    truth = GroundTruth(tuple(labels), tuple(planes), "spiral",
                        {"growth": growth, "r_outer": r_outer, "r_inner": r_inner, "h": h}, seed)
    return sample, truth


def _check_consumed(params: dict, kind: str):
    if params:
        raise InputError(f"unknown parameters for {kind}: {sorted(params)}")


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def save_sample(sample: PointSample, path):
    """`# betascan v1 n=<n> d=<d> h=<h>` header, then one comma-separated point per line."""
    path = Path(path)
    lines = [f"# betascan v1 n={sample.n} d={sample.intrinsic_d} h={_fmt(sample.resolution_h)}"]
    for row in sample.points:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_sample(path) -> PointSample:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise InputError(f"{path}: empty file")
    parts = lines[0].strip().split()
    if (
        len(parts) != 6
        or parts[:3] != ["#", "betascan", "v1"]
        or not parts[3].startswith("n=")
        or not parts[4].startswith("d=")
        or not parts[5].startswith("h=")
    ):
        raise InputError(f"{path}:1: bad header {lines[0]!r}")
    try:
        n = int(parts[3][2:])
        d = int(parts[4][2:])
        h = float(parts[5][2:])
    except ValueError as exc:
        raise InputError(f"{path}:1: bad header fields: {exc}") from exc
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != n:
            raise InputError(f"{path}:{lineno}: expected {n} coordinates, got {len(fields)}")
        try:
            rows.append([float(f) for f in fields])
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: bad coordinate: {exc}") from exc
    pts = np.array(rows, dtype=float) if rows else np.empty((0, n))
    return PointSample(pts, d, resolution_h=h, ambient_n=n, metadata={"source": str(path)})


def save_ground_truth(truth: GroundTruth, path, n: Optional[int] = None):
    """Parallel CSV: label[,base...,frame row-major...] per point."""
    path = Path(path)
    if n is None:
        for pl in truth.planes:
            if pl is not None:
                n = pl.n
                break
        else:
            raise InputError("cannot infer ambient dimension; pass n")
    lines = [f"# betascan-truth v1 n={n} generator={truth.generator} seed={truth.seed}"]
    for lab, pl in zip(truth.labels, truth.planes):
        if pl is None:
            lines.append(lab)
        else:
            nums = list(pl.base) + list(pl.frame.ravel())
            lines.append(lab + "," + ",".join(_fmt(v) for v in nums))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_ground_truth(path) -> GroundTruth:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("# betascan-truth v1"):
        raise InputError(f"{path}:1: bad ground-truth header")
    header = dict(kv.split("=", 1) for kv in lines[0].split()[3:])
    n = int(header["n"])
    labels, planes = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        fields = line.split(",")
        lab = fields[0]
        if lab == LABEL_TANGENT:
            nums = [float(f) for f in fields[1:]]
            if (len(nums) - n) % n != 0 or len(nums) < 2 * n:
                raise InputError(f"{path}:{lineno}: bad plane row")
            base = np.array(nums[:n])
            frame = np.array(nums[n:]).reshape(-1, n)
            planes.append(AffinePlane(base, frame))
        else:
            if len(fields) != 1:
                raise InputError(f"{path}:{lineno}: label {lab!r} takes no plane")
            planes.append(None)
        labels.append(lab)
    return GroundTruth(tuple(labels), tuple(planes), header.get("generator", "file"),
                       {"path": str(path)}, int(header.get("seed", 0)))
