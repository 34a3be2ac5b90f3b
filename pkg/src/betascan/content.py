"""Hausdorff-content estimation on finite samples.

The d-dimensional content of a point set is estimated by a dynamic program
over shifted dyadic grids: cost(Q) = min(diam(Q)^d, sum of children costs),
with recursion stopped at a mesh floor where cost = diam(Q)^d. The estimate is
an upper bound on the content of the sample and lies within a dimensional
factor of the optimum over dyadic-cube covers.

The same machinery evaluates p-Choquet integrals exactly: the integrand
H({f > t}) is piecewise constant in t for a finite sample, and the contents of
the nested level sets are obtained in one incremental pass (points inserted in
decreasing order of f, each insertion updating one leaf-to-root path).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InputError, NumericalError

__all__ = [
    "PointSample",
    "ContentEstimate",
    "DyadicGrid",
    "RegularityReport",
    "hausdorff_content",
    "choquet_integral",
    "check_lower_regularity",
    "content_at_mesh",
    "LAMBDA_RESOLUTION",
]

# Scales below LAMBDA_RESOLUTION * resolution_h measure discretization, not the set.
LAMBDA_RESOLUTION = 20.0


@dataclass(frozen=True)
class PointSample:
    """Finite point set standing for a set E at resolution h.

    resolution_h is the guaranteed covering radius of the sample with respect
    to the idealized set (0 if unknown). metadata carries free-form provenance.
    """

    points: np.ndarray  # (m, n) float64
    intrinsic_d: int
    resolution_h: float = 0.0
    ambient_n: Optional[int] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.size == 0:
            n = self.ambient_n
            if n is None:
                raise InputError("empty sample needs an explicit ambient_n")
            pts = pts.reshape(0, n)
        n = pts.shape[1]
        if self.ambient_n is not None and self.ambient_n != n:
            raise InputError(f"ambient_n={self.ambient_n} but points have dimension {n}")
        if pts.size and not np.all(np.isfinite(pts)):
            raise InputError("sample contains non-finite coordinates")
        if not (1 <= self.intrinsic_d < n):
            raise InputError(
                f"intrinsic dimension must satisfy 1 <= d < n, got d={self.intrinsic_d}, n={n}"
            )
        if self.resolution_h < 0:
            raise InputError("resolution_h must be >= 0")
        pts = np.array(pts, dtype=float)
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "ambient_n", n)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.ambient_n

    @property
    def d(self) -> int:
        return self.intrinsic_d

    def restrict(self, mask_or_indices) -> "PointSample":
        """Sub-sample with the same d/h/metadata."""
        return PointSample(
            self.points[mask_or_indices],
            self.intrinsic_d,
            self.resolution_h,
            ambient_n=self.ambient_n,
            metadata=dict(self.metadata),
        )

    def clip_to_ball(self, center, radius: float) -> "PointSample":
        center = np.asarray(center, dtype=float)
        if len(self) == 0:
            return self
        mask = np.linalg.norm(self.points - center, axis=1) <= radius
        return self.restrict(mask)

    def diameter(self) -> float:
        return _diameter(self.points)


def _diameter(pts: np.ndarray) -> float:
    """Exact diameter via convex hull, with a degenerate-geometry fallback."""
    m = pts.shape[0]
    if m < 2:
        return 0.0
    if m <= 512:
        d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        return float(np.sqrt(d2.max()))
    try:
        from scipy.spatial import ConvexHull

        hull = pts[ConvexHull(pts).vertices]
        d2 = ((hull[:, None, :] - hull[None, :, :]) ** 2).sum(axis=2)
        return float(np.sqrt(d2.max()))
    except Exception:
        # degenerate (collinear / coplanar) input: extent along principal axes
        c = pts.mean(axis=0)
        _, _, vt = np.linalg.svd(pts - c, full_matrices=False)
        proj = (pts - c) @ vt.T
        return float(np.linalg.norm(proj.max(axis=0) - proj.min(axis=0)))


@dataclass(frozen=True)
class DyadicGrid:
    """Dyadic cube lattice: level-l cubes have side leaf_side * 2^l, anchored at origin."""

    origin: np.ndarray
    leaf_side: float
    levels: int

    def __post_init__(self):
        if not self.leaf_side > 0:
            raise InputError("grid leaf_side must be positive")
        if self.levels < 0:
            raise InputError("grid levels must be >= 0")
        o = np.array(np.asarray(self.origin, dtype=float))
        o.flags.writeable = False
        object.__setattr__(self, "origin", o)


@dataclass(frozen=True)
class ContentEstimate:
    """Estimated H^d_infty value (length^d units) plus the grid that produced it."""

    value: float
    method: str  # "adaptive_dp" | "single_scale"
    grid_shift: np.ndarray
    mesh_floor: float

    def __post_init__(self):
        if self.value < 0:
            raise InputError("content estimate must be >= 0")
        if not self.mesh_floor > 0:
            raise InputError("mesh_floor must be positive")
        s = np.array(np.asarray(self.grid_shift, dtype=float))
        s.flags.writeable = False
        object.__setattr__(self, "grid_shift", s)


# ---------------------------------------------------------------------------
# dyadic tree structure + incremental nested-content kernel
# ---------------------------------------------------------------------------

_USE_NUMBA = os.environ.get("BETASCAN_NO_NUMBA", "") == ""

if _USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        _USE_NUMBA = False

if _USE_NUMBA:

    @njit(cache=True, nogil=True)
    def _insert_totals_kernel(point_node, node_offsets, diam_pows, order, cost, child_sum):
        levels_plus1, m = point_node.shape
        top = levels_plus1 - 1
        totals = np.empty(m + 1, dtype=np.float64)
        total = 0.0
        totals[0] = 0.0
        for step in range(m):
            i = order[step]
            nd = point_node[0, i] + node_offsets[0]
            if cost[nd] == 0.0:
                delta = diam_pows[0]
                cost[nd] = delta
                reached_top = top == 0
                l = 1
                while l <= top:
                    nd2 = point_node[l, i] + node_offsets[l]
                    s = child_sum[nd2] + delta
                    child_sum[nd2] = s
                    old = cost[nd2]
                    new = s if s < diam_pows[l] else diam_pows[l]
                    cost[nd2] = new
                    delta = new - old
                    if l == top:
                        reached_top = True
                        break
                    if delta == 0.0:
                        break
                    l += 1
                if reached_top:
                    total += delta
            totals[step + 1] = total
        return totals

else:  # pragma: no cover - exercised only when numba is disabled

    def _insert_totals_kernel(point_node, node_offsets, diam_pows, order, cost, child_sum):
        levels_plus1, m = point_node.shape
        top = levels_plus1 - 1
        totals = np.empty(m + 1, dtype=np.float64)
        total = 0.0
        totals[0] = 0.0
        for step in range(m):
            i = order[step]
            nd = point_node[0, i] + node_offsets[0]
            if cost[nd] == 0.0:
                delta = diam_pows[0]
                cost[nd] = delta
                reached_top = top == 0
                l = 1
                while l <= top:
                    nd2 = point_node[l, i] + node_offsets[l]
                    s = child_sum[nd2] + delta
                    child_sum[nd2] = s
                    old = cost[nd2]
                    new = s if s < diam_pows[l] else diam_pows[l]
                    cost[nd2] = new
                    delta = new - old
                    if l == top:
                        reached_top = True
                        break
                    if delta == 0.0:
                        break
                    l += 1
                if reached_top:
                    total += delta
            totals[step + 1] = total
        return totals


class ContentTree:
    """Per-(point set, grid) dyadic structure supporting incremental content sums.

    nested_totals(order) returns the DP content of the first j inserted points
    for every prefix j, in O(m * levels); full_content() is the value with all
    points inserted.
    """

    def __init__(self, pts: np.ndarray, d: int, grid: DyadicGrid):
        self.d = d
        self.grid = grid
        m, n = pts.shape
        self.m = m
        idx = np.floor((pts - grid.origin) / grid.leaf_side).astype(np.int64)
        levels = grid.levels
        point_node = np.empty((levels + 1, m), dtype=np.int64)
        counts = []
        uniq, inv = np.unique(idx, axis=0, return_inverse=True)
        point_node[0] = inv.ravel()
        counts.append(len(uniq))
        for l in range(1, levels + 1):
            uniq, inv = np.unique(np.floor_divide(uniq, 2), axis=0, return_inverse=True)
            point_node[l] = inv.ravel()[point_node[l - 1]]
            counts.append(len(uniq))
        self.point_node = point_node
        self.node_offsets = np.concatenate([[0], np.cumsum(counts)])[: levels + 1].astype(np.int64)
        self.total_nodes = int(np.sum(counts))
        side = grid.leaf_side
        diam_pows = np.empty(levels + 1)
        root_n = np.sqrt(n)
        for l in range(levels + 1):
            diam_pows[l] = (root_n * side) ** d
            side *= 2.0
        self.diam_pows = diam_pows
        self._cost = np.zeros(self.total_nodes)
        self._child_sum = np.zeros(self.total_nodes)

    def nested_totals(self, order: np.ndarray) -> np.ndarray:
        self._cost[:] = 0.0
        self._child_sum[:] = 0.0
        return _insert_totals_kernel(
            self.point_node,
            self.node_offsets,
            self.diam_pows,
            np.asarray(order, dtype=np.int64),
            self._cost,
            self._child_sum,
        )

    def full_content(self) -> float:
        if self.m == 0:
            return 0.0
        return float(self.nested_totals(np.arange(self.m))[-1])


def _data_grid(pts: np.ndarray, mesh_floor: float, shift_frac: np.ndarray) -> DyadicGrid:
    """Data-anchored grid: root cube covers the bounding box, origin dithered by shift_frac.

    The construction is covariant under dilation of (points, mesh_floor), which
    gives the exact content scaling law for a fixed shift fraction.
    """
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    extent = float((hi - lo).max())
    levels = max(int(np.ceil(np.log2((extent + mesh_floor) / mesh_floor))), 1)
    root = mesh_floor * 2.0**levels
    slack = root - (hi - lo)
    origin = lo - shift_frac * slack
    return DyadicGrid(origin, mesh_floor, levels)


def _resolve_mesh_floor(sample: PointSample, mesh_floor: Optional[float]) -> float:
    if mesh_floor is None:
        if sample.resolution_h > 0:
            return 2.0 * sample.resolution_h
        raise InputError("mesh_floor is required when the sample has unknown resolution")
    if mesh_floor <= 0:
        raise InputError(f"mesh_floor must be positive, got {mesh_floor}")
    if sample.resolution_h > 0 and mesh_floor < sample.resolution_h:
        raise InputError(
            f"mesh_floor {mesh_floor} below sample resolution {sample.resolution_h}; "
            "content below sample resolution is meaningless"
        )
    return float(mesh_floor)


def _shift_fractions(n: int, shifts: int, seed: int) -> np.ndarray:
    if shifts < 1:
        raise InputError("shifts must be >= 1")
    fracs = np.zeros((shifts, n))
    if shifts > 1:
        rng = np.random.default_rng(seed)
        fracs[1:] = rng.random((shifts - 1, n))
    return fracs


def hausdorff_content(
    sample: PointSample,
    d: Optional[int] = None,
    mesh_floor: Optional[float] = None,
    shifts: int = 4,
    seed: int = 0,
    grid: Optional[DyadicGrid] = None,
) -> ContentEstimate:
    """Adaptive dyadic estimate of H^d_infty of the sample.

    Minimum over `shifts` shifted data-anchored grids of the cube DP; pass an
    explicit `grid` to pin the lattice (needed when comparing contents of
    related sets, e.g. for monotonicity or subadditivity).
    """
    d = sample.intrinsic_d if d is None else d
    if d < 1:
        raise InputError(f"content dimension must be >= 1, got {d}")
    pts = sample.points
    if len(pts) == 0:
        return ContentEstimate(0.0, "adaptive_dp", np.zeros(sample.n), mesh_floor or 1.0)
    mesh_floor = _resolve_mesh_floor(sample, mesh_floor)
    if grid is not None:
        tree = ContentTree(pts, d, grid)
        return ContentEstimate(tree.full_content(), "adaptive_dp", np.zeros(sample.n), mesh_floor)
    best = np.inf
    best_shift = np.zeros(sample.n)
    for frac in _shift_fractions(sample.n, shifts, seed):
        g = _data_grid(pts, mesh_floor, frac)
        value = ContentTree(pts, d, g).full_content()
        if value < best:
            best = value
            best_shift = pts.min(axis=0) - g.origin
    return ContentEstimate(float(best), "adaptive_dp", best_shift, mesh_floor)


def content_at_mesh(
    sample: PointSample,
    d: Optional[int] = None,
    mesh: Optional[float] = None,
    shifts: int = 4,
    seed: int = 0,
) -> ContentEstimate:
    """Single-scale diagnostic H^d_mesh: occupied-cube count times diam^d at one mesh."""
    d = sample.intrinsic_d if d is None else d
    pts = sample.points
    if len(pts) == 0:
        return ContentEstimate(0.0, "single_scale", np.zeros(sample.n), mesh or 1.0)
    mesh = _resolve_mesh_floor(sample, mesh)
    best = np.inf
    best_shift = np.zeros(sample.n)
    for frac in _shift_fractions(sample.n, shifts, seed):
        origin = pts.min(axis=0) - frac * mesh
        idx = np.floor((pts - origin) / mesh).astype(np.int64)
        count = len(np.unique(idx, axis=0))
        value = count * (np.sqrt(sample.n) * mesh) ** d
        if value < best:
            best = value
            best_shift = frac * mesh
    return ContentEstimate(float(best), "single_scale", best_shift, mesh)


def choquet_integral(
    sample: PointSample,
    f: Sequence[float],
    d: Optional[int] = None,
    p: float = 1.0,
    mesh_floor: Optional[float] = None,
    shifts: int = 4,
    seed: int = 0,
    grid: Optional[DyadicGrid] = None,
) -> float:
    """Exact layer-cake evaluation of the p-Choquet integral of f over the sample.

    With t_1 < ... < t_m the distinct values of f and H_i the content of the
    level set {f > t_i}, returns sum_i H_i (t_{i+1}^p - t_i^p) / p. All level
    sets share one grid (anchored on the full sample) so the piecewise-constant
    integrand is evaluated consistently; min over `shifts` grids.
    """
    d = sample.intrinsic_d if d is None else d
    f = np.asarray(f, dtype=float)
    if f.shape != (len(sample),):
        raise InputError(f"f must have one value per point, got shape {f.shape}")
    if f.size and (not np.all(np.isfinite(f)) or f.min() < 0):
        raise InputError("f values must be finite and >= 0")
    if p < 1:
        raise InputError(f"Choquet exponent p must be >= 1, got {p}")
    if len(sample) == 0 or not np.any(f > 0):
        return 0.0
    mesh_floor = _resolve_mesh_floor(sample, mesh_floor)
    order = np.argsort(-f, kind="stable")
    fs = f[order]
    if grid is not None:
        return _choquet_on_grid(sample.points, d, p, fs, order, grid)
    best = np.inf
    for frac in _shift_fractions(sample.n, shifts, seed):
        g = _data_grid(sample.points, mesh_floor, frac)
        best = min(best, _choquet_on_grid(sample.points, d, p, fs, order, g))
    return float(best)


def _choquet_on_grid(pts, d, p, f_desc, order, grid: DyadicGrid) -> float:
    totals = ContentTree(pts, d, grid).nested_totals(order)
    m = len(f_desc)
    vals_asc = np.unique(f_desc)
    # H({f > t}) = content of the points inserted first, i.e. totals[#{f > t}]
    counts_gt = m - np.searchsorted(f_desc[::-1], vals_asc, side="right")
    if vals_asc[0] > 0.0:
        thresholds = np.concatenate([[0.0], vals_asc])
        counts = np.concatenate([[m], counts_gt])
    else:
        thresholds = vals_asc
        counts = counts_gt
    h = totals[counts]
    # integrate the piecewise-constant integrand over [t_i, t_{i+1}); the level
    # set above the largest value is empty and contributes nothing
    return float(np.sum(h[:-1] * (thresholds[1:] ** p - thresholds[:-1] ** p)) / p)


@dataclass(frozen=True)
class RegularityReport:
    """Per-(center, scale) lower-content-regularity results."""

    centers: np.ndarray  # (k, n)
    scales: np.ndarray  # (s,)
    ratios: np.ndarray  # (k, s) content / r^d
    c0: float
    passed: np.ndarray  # (k, s) bool
    dropped_scales: np.ndarray

    @property
    def all_passed(self) -> bool:
        return bool(self.passed.all())

    @property
    def worst_constant(self) -> float:
        return float(self.ratios.min())


def check_lower_regularity(
    sample: PointSample,
    d: Optional[int] = None,
    c0: float = 0.1,
    scale_range: Optional[Sequence[float]] = None,
    n_centers: int = 16,
    seed: int = 0,
    mesh_floor: Optional[float] = None,
    lam: float = LAMBDA_RESOLUTION,
) -> RegularityReport:
    """Check H^d_infty(E ∩ B(x, r)) >= c0 r^d over sampled centers and scales.

    Scales below lam * resolution_h are dropped (measuring there reflects the
    discretization, not the set); if none survive a diagnostic error is raised.
    """
    d = sample.intrinsic_d if d is None else d
    if len(sample) == 0:
        raise InputError("cannot check regularity of an empty sample")
    if scale_range is None:
        diam = sample.diameter()
        scale_range = [diam / 2**j for j in range(1, 6)]
    scales = np.asarray(sorted(scale_range, reverse=True), dtype=float)
    cut = lam * sample.resolution_h
    keep = scales >= cut
    dropped = scales[~keep]
    scales = scales[keep]
    if scales.size == 0:
        raise NumericalError(
            f"no scales survive the resolution cut {cut:.3g}; sample too coarse for this check"
        )
    rng = np.random.default_rng(seed)
    k = min(n_centers, len(sample))
    centers = sample.points[rng.choice(len(sample), size=k, replace=False)]
    ratios = np.empty((k, scales.size))
    for i, c in enumerate(centers):
        for j, r in enumerate(scales):
            local = sample.clip_to_ball(c, r)
            est = hausdorff_content(local, d, mesh_floor=mesh_floor, shifts=2, seed=seed)
            ratios[i, j] = est.value / r**d
    passed = ratios >= c0
    return RegularityReport(centers, scales, ratios, c0, passed, dropped)
