"""Exact primitive geometry: affine planes, balls, cones, projections, and the
normalized local Hausdorff distance between point sets.

Points are plain float64 numpy arrays of shape (n,); batched operations accept
(m, n) arrays. All container types are immutable after construction and every
operation is pure, so values can be shared freely across threads.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InputError

__all__ = [
    "Ball",
    "AffinePlane",
    "Cone",
    "dist_point_plane",
    "project_plane",
    "in_cone",
    "local_hausdorff_distance",
    "plane_local_hausdorff",
]

# Frame vectors must be orthonormal to within this after construction.
ORTHO_TOL = 1e-12


def _as_points(x, name: str = "points") -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise InputError(f"{name} must be a vector or an (m, n) array, got shape {a.shape}")
    if a.size and not np.all(np.isfinite(a)):
        raise InputError(f"{name} contains non-finite coordinates")
    return a


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Ball:
    """Open ball B(center, radius); sample intersections are taken with <= radius."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        if c.ndim != 1 or c.size < 1:
            raise InputError("ball center must be a vector")
        if not np.all(np.isfinite(c)):
            raise InputError("ball center has non-finite coordinates")
        if not (self.radius > 0 and np.isfinite(self.radius)):
            raise InputError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", _readonly(c))
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def n(self) -> int:
        return self.center.size

    def scaled(self, factor: float) -> "Ball":
        """Concentric ball with radius multiplied by `factor` (the paper's lambda*B)."""
        return Ball(self.center, self.radius * factor)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = _as_points(pts)
        return np.linalg.norm(pts - self.center, axis=1) <= self.radius


def _orthonormalize(vectors: np.ndarray) -> np.ndarray:
    """Stabilized orthonormalization of row vectors; raises if rank-deficient.

    Uses QR with a deterministic sign fix (positive diagonal of R) so
    construction is reproducible.
    """
    v = np.asarray(vectors, dtype=float)
    if v.ndim != 2:
        raise InputError("frame must be a (d, n) array of row vectors")
    d, n = v.shape
    q, r = np.linalg.qr(v.T)  # q: (n, d)
    diag = np.diag(r)
    if np.any(np.abs(diag) < 1e-13 * max(1.0, np.abs(diag).max(initial=0.0))):
        raise InputError("spanning vectors are linearly dependent")
    signs = np.sign(diag)
    signs[signs == 0] = 1.0
    return (q * signs).T


@dataclass(frozen=True)
class AffinePlane:
    """Affine d-plane in R^n: base point plus d orthonormal row directions.

    Raw spanning vectors are re-orthonormalized at construction; downstream
    distance formulas assume exact frames.
    """

    base: np.ndarray
    frame: np.ndarray  # (d, n), orthonormal rows

    def __post_init__(self):
        base = np.asarray(self.base, dtype=float)
        frame = np.asarray(self.frame, dtype=float)
        if base.ndim != 1:
            raise InputError("plane base must be a vector")
        if frame.ndim != 2 or frame.shape[1] != base.size:
            raise InputError(
                f"frame shape {frame.shape} incompatible with base dimension {base.size}"
            )
        d, n = frame.shape
        if not (1 <= d < n):
            raise InputError(f"plane dimension must satisfy 1 <= d < n, got d={d}, n={n}")
        if not (np.all(np.isfinite(base)) and np.all(np.isfinite(frame))):
            raise InputError("plane has non-finite entries")
        gram = frame @ frame.T
        if not np.allclose(gram, np.eye(d), atol=ORTHO_TOL):
            frame = _orthonormalize(frame)
        object.__setattr__(self, "base", _readonly(base))
        object.__setattr__(self, "frame", _readonly(frame))

    @classmethod
    def from_spanning(cls, base, vectors) -> "AffinePlane":
        return cls(np.asarray(base, dtype=float), _orthonormalize(np.asarray(vectors, dtype=float)))

    @classmethod
    def span_axes(cls, base, axes, n: Optional[int] = None) -> "AffinePlane":
        """Plane through `base` spanned by coordinate axes (convenience for tests)."""
        base = np.asarray(base, dtype=float)
        n = base.size if n is None else n
        frame = np.zeros((len(axes), n))
        for row, ax in enumerate(axes):
            frame[row, ax] = 1.0
        return cls(base, frame)

    @property
    def d(self) -> int:
        return self.frame.shape[0]

    @property
    def n(self) -> int:
        return self.frame.shape[1]

    def project(self, x) -> np.ndarray:
        """Orthogonal projection of one point or an (m, n) batch onto the plane."""
        pts = _as_points(x, "x")
        if pts.shape[1] != self.n:
            raise InputError(f"point dimension {pts.shape[1]} != plane ambient dimension {self.n}")
        rel = pts - self.base
        proj = self.base + (rel @ self.frame.T) @ self.frame
        return proj[0] if np.asarray(x).ndim == 1 else proj

    def distance(self, x) -> np.ndarray:
        """|x - projection| for one point or an (m, n) batch."""
        pts = _as_points(x, "x")
        if pts.shape[1] != self.n:
            raise InputError(f"point dimension {pts.shape[1]} != plane ambient dimension {self.n}")
        rel = pts - self.base
        tang = (rel @ self.frame.T) @ self.frame
        dist = np.linalg.norm(rel - tang, axis=1)
        return float(dist[0]) if np.asarray(x).ndim == 1 else dist

    def translated_through(self, point) -> "AffinePlane":
        """Parallel plane containing `point` (the paper's P_{j,k} from L_{j,k})."""
        return AffinePlane(np.asarray(point, dtype=float), self.frame)


@dataclass(frozen=True)
class Cone:
    """Two-sided cone X(apex, V, theta) or its perpendicular variant X(apex, V^perp, theta).

    variant "toward_V" collects directions within angle theta of the subspace V
    (dist(x-a, V) < sin(theta)|x-a|); "toward_V_perp" collects directions within
    (pi/2 - theta) of V^perp (dist(x-a, V^perp) < cos(theta)|x-a|). An optional
    radius intersects with B(apex, radius). The apex itself is inside by
    convention (the strict inequality is vacuous there).
    """

    apex: np.ndarray
    plane_directions: np.ndarray  # (d, n) orthonormal rows spanning V
    half_angle: float
    variant: str = "toward_V"
    radius: Optional[float] = None

    def __post_init__(self):
        apex = np.asarray(self.apex, dtype=float)
        dirs = np.asarray(self.plane_directions, dtype=float)
        if dirs.ndim != 2 or dirs.shape[1] != apex.size:
            raise InputError("cone plane_directions incompatible with apex dimension")
        gram = dirs @ dirs.T
        if not np.allclose(gram, np.eye(dirs.shape[0]), atol=ORTHO_TOL):
            dirs = _orthonormalize(dirs)
        if not (0.0 < self.half_angle < np.pi / 2):
            raise InputError(f"cone half_angle must lie in (0, pi/2), got {self.half_angle}")
        if self.variant not in ("toward_V", "toward_V_perp"):
            raise InputError(f"unknown cone variant {self.variant!r}")
        if self.radius is not None and not self.radius > 0:
            raise InputError(f"cone radius must be positive, got {self.radius}")
        object.__setattr__(self, "apex", _readonly(apex))
        object.__setattr__(self, "plane_directions", _readonly(dirs))
        object.__setattr__(self, "half_angle", float(self.half_angle))

    @property
    def n(self) -> int:
        return self.apex.size

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized membership for an (m, n) batch."""
        pts = _as_points(pts)
        if pts.shape[1] != self.n:
            raise InputError(f"point dimension {pts.shape[1]} != cone ambient dimension {self.n}")
        rel = pts - self.apex
        norm = np.linalg.norm(rel, axis=1)
        along_v = np.linalg.norm(rel @ self.plane_directions.T, axis=1)
        if self.variant == "toward_V":
            # dist(rel, V) = |rel - Pi_V rel|
            perp = np.sqrt(np.maximum(norm**2 - along_v**2, 0.0))
            inside = perp < np.sin(self.half_angle) * norm
        else:
            # dist(rel, V^perp) = |Pi_V rel|
            inside = along_v < np.cos(self.half_angle) * norm
        inside |= norm == 0.0  # apex convention
        if self.radius is not None:
            inside &= norm < self.radius
        return inside


def dist_point_plane(x, plane: AffinePlane) -> float:
    """Distance from x to its orthogonal projection on the plane."""
    return plane.distance(np.asarray(x, dtype=float))


def project_plane(x, plane: AffinePlane) -> np.ndarray:
    """Orthogonal projection of x onto the plane."""
    return plane.project(np.asarray(x, dtype=float))


def in_cone(x, cone: Cone) -> bool:
    """Membership of a single point in a cone (apex included by convention)."""
    return bool(cone.contains(np.asarray(x, dtype=float)[None, :])[0])


def local_hausdorff_distance(e_points, f_points, x, r: float) -> float:
    """Normalized local Hausdorff distance d_{x,r}(E, F) between two point sets.

    Returns (1/r) * max(sup_{y in E, |y-x|<=r} dist(y, F), sup over F side).
    A supremum over an empty intersection contributes 0; if both intersections
    are empty the result is 0 and a RuntimeWarning is emitted.
    """
    if not r > 0:
        raise InputError(f"radius must be positive, got {r}")
    x = np.asarray(x, dtype=float)
    e = _as_points(e_points, "E") if np.asarray(e_points).size else np.empty((0, x.size))
    f = _as_points(f_points, "F") if np.asarray(f_points).size else np.empty((0, x.size))
    e_in = e[np.linalg.norm(e - x, axis=1) <= r] if len(e) else e
    f_in = f[np.linalg.norm(f - x, axis=1) <= r] if len(f) else f
    if len(e_in) == 0 and len(f_in) == 0:
        warnings.warn("both sets miss B(x, r); d_{x,r} defined as 0", RuntimeWarning)
        return 0.0
    sup_e = _sup_dist_to_set(e_in, f) if len(e_in) else 0.0
    sup_f = _sup_dist_to_set(f_in, e) if len(f_in) else 0.0
    return max(sup_e, sup_f) / r


def plane_local_hausdorff(
    p: AffinePlane, q: AffinePlane, x, r: float, grid_per_axis: int = 32
) -> float:
    """d_{x,r} between two affine d-planes via dense deterministic plane samples.

    Each plane is sampled on a grid_per_axis^d grid of its disc within B(x, r)
    (empty when the plane misses the ball); distances to the *other plane* are
    exact, so only the supremum location is discretized.
    """
    if not r > 0:
        raise InputError(f"radius must be positive, got {r}")
    x = np.asarray(x, dtype=float)

    def side(a: AffinePlane, b: AffinePlane) -> float:
        gap = a.distance(x)
        if gap >= r:
            return 0.0
        rho = np.sqrt(r * r - gap * gap)
        axes = np.linspace(-rho, rho, grid_per_axis)
        grids = np.meshgrid(*([axes] * a.d), indexing="ij")
        coords = np.stack([g.ravel() for g in grids], axis=1)
        coords = coords[np.einsum("ij,ij->i", coords, coords) <= rho * rho]
        pts = a.project(x) + coords @ a.frame
        return float(b.distance(pts).max()) if len(pts) else 0.0

    return max(side(p, q), side(q, p)) / r


def _sup_dist_to_set(pts: np.ndarray, other: np.ndarray) -> float:
    if len(other) == 0:
        return 0.0
    # chunked nearest-neighbor sweep; sample sizes stay modest in practice
    best = 0.0
    chunk = 2048
    for lo in range(0, len(pts), chunk):
        block = pts[lo : lo + chunk]
        d2 = ((block[:, None, :] - other[None, :, :]) ** 2).sum(axis=2)
        best = max(best, float(np.sqrt(d2.min(axis=1)).max()))
    return best
