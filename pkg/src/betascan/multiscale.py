"""Multiscale decompositions: Christ-cube hierarchies on samples, Whitney
decompositions of complements, and the bubble/fiber constructions used to
localize error terms.

Christ cubes are built from nested maximal nets: the coarsest net is grown
greedily over the sample in a seeded shuffled order, and each finer net starts
from the coarser one, so every level is a maximal delta^k-separated net of the
sample and the nets are nested. Cube membership follows nearest-center chains
from the finest level, which makes the per-level member sets an exact
partition with structural nesting.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .content import LAMBDA_RESOLUTION, PointSample
from .errors import InputError
from .geometry import Cone

__all__ = [
    "ChristCube",
    "CubeTree",
    "WhitneyCube",
    "build_christ_cubes",
    "whitney_decompose",
    "bubble_region",
    "cylinder_fibers",
    "greedy_net",
]


def _repair_center_balls(pts, nets, assign, delta, k_min, a0, max_passes: int = 3):
    """Restore the interior-ball witness: each cube gets a member within
    a0*delta^k of its center with no foreign member that close to it.

    Accumulated chain drift can push a cube boundary deep into a neighbor's
    natural zone, leaving foreign points arbitrarily close to a center. The
    repair re-parents whole offending child cubes (which preserves nesting and
    keeps the level-k coverage bound: the child's members lie within their own
    coverage radius of a center near the boundary), with a pointwise move as
    the finest-level fallback. Coarse levels are repaired first; a few passes
    settle interactions.
    """
    from scipy.spatial import cKDTree

    levels, m = assign.shape
    finest = levels - 1
    kd_all = cKDTree(pts)
    net_sets = [set(net.tolist()) for net in nets]

    def witness_ok(li, c, radius):
        members = np.flatnonzero(assign[li] == c)
        near = members[np.linalg.norm(pts[members] - pts[c], axis=1) <= radius + 1e-15]
        member_set = set(members.tolist())
        for s in near:
            nb = kd_all.query_ball_point(pts[s], radius * (1 - 1e-12))
            if all(j in member_set for j in nb):
                return True
        return False

    def reroot(idx_array, li, c):
        """Attach points to c's chain at levels <= li (coarser rows follow c)."""
        for lj in range(li, -1, -1):
            assign[lj, idx_array] = assign[lj, c]

    for _pass in range(max_passes):
        dirty = False
        for li in range(levels):
            scale = delta ** (k_min + li)
            radius = a0 * scale
            cov_cap = scale / (1.0 - delta)
            for c in nets[li].tolist():
                for _attempt in range(16):
                    if witness_ok(li, c, radius):
                        break
                    # nearest foreign point inside the center's ball
                    nb = np.asarray(kd_all.query_ball_point(pts[c], radius * (1 - 1e-12)))
                    foreign = nb[assign[li, nb] != c]
                    if foreign.size == 0:
                        break
                    q = int(foreign[np.argmin(np.linalg.norm(pts[foreign] - pts[c], axis=1))])
                    moved = False
                    if li < finest:
                        dcube = int(assign[li + 1, q])
                        # never re-parent a cube whose center is itself a
                        # level-li net point (it anchors its own li-cube)
                        if dcube not in net_sets[li]:
                            dmem = np.flatnonzero(assign[li + 1] == dcube)
                            if np.linalg.norm(pts[dmem] - pts[c], axis=1).max() <= cov_cap:
                                reroot(dmem, li, c)
                                dirty = moved = True
                    if not moved:
                        # move the single point; its finer rows follow the
                        # nearest finest-level descendant of (li, c)
                        if q in net_sets[finest]:
                            break
                        desc = nets[finest][assign[li, nets[finest]] == c]
                        u = int(desc[np.argmin(np.linalg.norm(pts[desc] - pts[q], axis=1))])
                        if np.linalg.norm(pts[u] - pts[q]) <= 4 * delta ** (k_min + finest):
                            assign[:, q] = assign[:, u]
                            dirty = True
                        else:
                            break
        if not dirty:
            break


def greedy_net(points: np.ndarray, radius: float, order: np.ndarray,
               seeds: Optional[np.ndarray] = None) -> np.ndarray:
    """Indices of a maximal `radius`-separated subset, grown greedily in `order`.

    `seeds` (indices) are inserted first, so passing a coarser net yields a
    nested refinement. Uses integer cell hashing; cost O(m * 3^n).
    """
    m, n = points.shape
    cell_size = radius
    buckets: Dict[tuple, List[int]] = {}
    chosen: List[int] = []
    r2 = radius * radius

    def cell_of(p):
        return tuple((p // cell_size).astype(np.int64))

    def far_enough(p) -> bool:
        base = (p // cell_size).astype(np.int64)
        for off in np.ndindex(*(3,) * n):
            key = tuple(base + np.array(off) - 1)
            for j in buckets.get(key, ()):
                dp = points[j] - p
                if dp @ dp < r2:
                    return False
        return True

    def insert(i):
        chosen.append(i)
        buckets.setdefault(cell_of(points[i]), []).append(i)

    if seeds is not None:
        for i in seeds:
            insert(int(i))
    for i in order:
        i = int(i)
        if far_enough(points[i]):
            insert(i)
    return np.array(chosen, dtype=np.int64)


@dataclass
class ChristCube:
    """One cube: (scale k, index j), its center (a sample point), and members."""

    id: Tuple[int, int]
    center: np.ndarray
    center_index: int
    scale_k: int
    ell: float
    members: np.ndarray  # sample point indices
    parent: Optional[Tuple[int, int]] = None
    children: List[Tuple[int, int]] = field(default_factory=list)

    def diameter(self, points: np.ndarray) -> float:
        from .content import _diameter

        return _diameter(points[self.members])


@dataclass
class CubeTree:
    """Christ-cube hierarchy over a sample: levels k_min (coarsest) .. k_max."""

    sample: PointSample
    delta: float
    k_min: int
    k_max: int
    cubes: Dict[Tuple[int, int], ChristCube]
    c1: float  # recorded diameter constant: diam(Q) <= c1 * delta^k
    a0: float  # recorded center-ball constant
    seed: int

    def level(self, k: int) -> List[ChristCube]:
        return [c for (kk, j), c in sorted(self.cubes.items()) if kk == k]

    def levels(self) -> range:
        return range(self.k_min, self.k_max + 1)

    def scale(self, k: int) -> float:
        return self.delta**k

    def all_cubes(self) -> List[ChristCube]:
        return [self.cubes[key] for key in sorted(self.cubes)]

    def to_json_dict(self) -> dict:
        return {
            "delta": self.delta,
            "k_min": self.k_min,
            "k_max": self.k_max,
            "c1": self.c1,
            "a0": self.a0,
            "seed": self.seed,
            "cubes": [
                {
                    "id": list(c.id),
                    "center": [float(v) for v in c.center],
                    "scale_k": c.scale_k,
                    "ell": c.ell,
                    "n_members": int(len(c.members)),
                    "parent": list(c.parent) if c.parent else None,
                    "children": [list(ch) for ch in c.children],
                }
                for c in self.all_cubes()
            ],
        }

    def save_json(self, path):
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n")


def build_christ_cubes(
    sample: PointSample,
    delta: float = 0.5,
    k_min: Optional[int] = None,
    k_max: Optional[int] = None,
    seed: int = 0,
    lam: float = LAMBDA_RESOLUTION,
) -> CubeTree:
    """Christ-cube hierarchy: per level k, centers form a maximal delta^k-net.

    Scale range defaults to [ceil(log_delta diam(E)), finest level with
    delta^k >= lam * resolution_h]. Points are processed in a fixed shuffled
    order under the recorded seed; maximality then determines the nets.
    """
    if not 0 < delta <= 0.5:
        raise InputError(f"delta must lie in (0, 1/2], got {delta}")
    pts = sample.points
    m = len(pts)
    if m == 0:
        raise InputError("cannot build cubes over an empty sample")
    diam = sample.diameter()
    cut = max(lam * sample.resolution_h, 1e-308)
    if k_min is None:
        # coarsest scale: smallest delta^k still covering the whole sample
        k_min = 0 if diam == 0 else int(math.floor(math.log(diam) / math.log(delta)))
        while delta**k_min < diam:
            k_min -= 1
    if k_max is None:
        k_max = k_min
        while delta ** (k_max + 1) >= cut:
            k_max += 1
    if k_max < k_min:
        raise InputError(f"empty scale range: k_min={k_min} > k_max={k_max}")
    if sample.resolution_h > 0 and delta**k_max < lam * sample.resolution_h:
        raise InputError(
            f"finest scale delta^{k_max}={delta**k_max:.3g} is below the resolution cut "
            f"{lam * sample.resolution_h:.3g}"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(m)

    nets: List[np.ndarray] = []
    prev = None
    for k in range(k_min, k_max + 1):
        net = greedy_net(pts, delta**k, order, seeds=prev)
        nets.append(net)
        prev = net

    # chain assignment: nearest finest center, then nearest coarser net point
    levels = k_max - k_min + 1
    from scipy.spatial import cKDTree

    trees = [cKDTree(pts[net]) for net in nets]
    assign = np.empty((levels, m), dtype=np.int64)  # center *sample index* per level
    finest = levels - 1
    assign[finest] = nets[finest][trees[finest].query(pts)[1]]
    for li in range(finest - 1, -1, -1):
        # each level-(li+1) center hops to its nearest level-li net point
        hop = nets[li][trees[li].query(pts[nets[li + 1]])[1]]
        hop_of = dict(zip(nets[li + 1].tolist(), hop.tolist()))
        assign[li] = np.array([hop_of[c] for c in assign[li + 1]], dtype=np.int64)
    _repair_center_balls(pts, nets, assign, delta, k_min, a0=0.25)

    cubes: Dict[Tuple[int, int], ChristCube] = {}
    index_of: List[Dict[int, int]] = []
    for li, k in enumerate(range(k_min, k_max + 1)):
        level_index: Dict[int, int] = {}
        for j, ci in enumerate(nets[li].tolist()):
            level_index[ci] = j
            cubes[(k, j)] = ChristCube(
                id=(k, j),
                center=pts[ci],
                center_index=ci,
                scale_k=k,
                ell=delta**k,
                members=np.empty(0, dtype=np.int64),
            )
        index_of.append(level_index)
    for li, k in enumerate(range(k_min, k_max + 1)):
        level_index = index_of[li]
        groups: Dict[int, List[int]] = {}
        for i in range(m):
            groups.setdefault(int(assign[li, i]), []).append(i)
        for ci, mem in groups.items():
            cubes[(k, level_index[ci])].members = np.array(mem, dtype=np.int64)
        if li > 0:
            parent_index = index_of[li - 1]
            for ci, j in level_index.items():
                pk = int(assign[li - 1, ci])
                pid = (k - 1, parent_index[pk])
                cubes[(k, j)].parent = pid
                cubes[pid].children.append((k, j))
    c1 = 2.0 / (1.0 - delta)
    return CubeTree(sample, delta, k_min, k_max, cubes, c1=c1, a0=0.25, seed=seed)


@dataclass(frozen=True)
class WhitneyCube:
    """Axis-aligned cube with side comparable to its distance from F."""

    corner: np.ndarray  # lower corner
    side: float
    dist_to_f: float

    def center(self) -> np.ndarray:
        return self.corner + self.side / 2

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        lo = self.corner
        hi = self.corner + self.side
        return np.all((pts >= lo) & (pts < hi), axis=1)


def _box_dist(corner: np.ndarray, side: float, f_points: np.ndarray) -> float:
    lo = corner
    hi = corner + side
    clamped = np.clip(f_points, lo, hi)
    d = np.linalg.norm(f_points - clamped, axis=1)
    return float(d.min())


def whitney_decompose(
    f_points: np.ndarray,
    bbox: Tuple[np.ndarray, float],
    a: float = 4.0,
    min_side: Optional[float] = None,
) -> List[WhitneyCube]:
    """Dyadic cubes with disjoint interiors covering bbox minus a collar of F,
    each satisfying side/A <= dist(Q, F) <= A * side exactly.

    bbox is (lower corner, side). Splitting below `min_side` stops and the
    unresolved collar cubes are discarded (default min_side = bbox side / 2^14).
    """
    f_points = np.atleast_2d(np.asarray(f_points, dtype=float))
    if f_points.size == 0:
        raise InputError("whitney_decompose requires a nonempty F")
    m = f_points.shape[1]
    corner0, side0 = np.asarray(bbox[0], dtype=float), float(bbox[1])
    if corner0.size != m:
        raise InputError("bbox dimension does not match F")
    if min_side is None:
        min_side = side0 / 2.0**14
    keep_c = (a - 2.0 * math.sqrt(m)) / 2.0
    if keep_c < 1.0 / a:
        raise InputError(f"comparability constant A={a} too small for dimension {m}")
    out: List[WhitneyCube] = []
    stack = [(corner0, side0)]
    offsets = np.array(list(np.ndindex(*(2,) * m)), dtype=float)
    while stack:
        corner, side = stack.pop()
        dist = _box_dist(corner, side, f_points)
        if dist >= keep_c * side:
            out.append(WhitneyCube(corner, side, dist))
        elif side / 2 >= min_side:
            half = side / 2
            for off in offsets:
                stack.append((corner + off * half, half))
    out.sort(key=lambda c: (c.side, tuple(c.corner)))
    return out


def bubble_region(
    sample: PointSample,
    k_indices: Sequence[int],
    cone_template: Cone,
    q0_ball,
) -> np.ndarray:
    """Indices of sample points inside 2*Q0_ball but outside every perpendicular
    cone X(x, V^perp, theta, r) anchored at the points of K.

    The cones share (plane_directions, half_angle, radius) across K — one
    width bucket. Empty K returns everything in 2*Q0_ball with a warning.
    """
    import warnings

    pts = sample.points
    big = q0_ball.scaled(2.0)
    in_ball = np.flatnonzero(np.linalg.norm(pts - big.center, axis=1) <= big.radius)
    k_indices = np.asarray(list(k_indices), dtype=np.int64)
    if k_indices.size == 0:
        warnings.warn("bubble_region with empty K returns all of E ∩ 2Q0", RuntimeWarning)
        return in_ball
    v = cone_template.plane_directions
    cos_t = math.cos(cone_template.half_angle)
    radius = cone_template.radius
    keep = np.ones(in_ball.size, dtype=bool)
    cand = pts[in_ball]
    for ki in k_indices:
        apex = pts[int(ki)]
        rel = cand - apex
        norm = np.linalg.norm(rel, axis=1)
        along = np.linalg.norm(rel @ v.T, axis=1)
        inside = along < cos_t * norm
        inside |= norm == 0.0
        if radius is not None:
            inside &= norm < radius
        keep &= ~inside
        if not keep.any():
            break
    return in_ball[keep]


def cylinder_fibers(
    whitney_cube: WhitneyCube,
    bubble_indices: np.ndarray,
    sample: PointSample,
    plane_directions: np.ndarray,
) -> np.ndarray:
    """Bubble points whose projection onto the bucket plane's R^d lands in S.

    The ambient splitting R^d x R^{n-d} is fixed by `plane_directions`
    (orthonormal rows spanning the bucket's V).
    """
    bubble_indices = np.asarray(bubble_indices, dtype=np.int64)
    if bubble_indices.size == 0:
        return bubble_indices
    coords = sample.points[bubble_indices] @ np.asarray(plane_directions, dtype=float).T
    mask = whitney_cube.contains(coords)
    return bubble_indices[mask]
