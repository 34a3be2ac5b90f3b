"""Tangent-point analysis: flatness profiles, Dini square sums over geometric
scale ladders, tangency classification, cone-point partitioning, Lipschitz
extension, and the traveling-salesman square sum for 1-dimensional samples.

A point is classified tangent when its sup-flatness at the finest scales is
small and the tail of its Dini sum of squared content-betas has converged;
non-tangent when flatness stays bounded below or the partial sums keep
growing. The scale ladder is r_k = r0 * base^{-k} (base 10 by default),
truncated at LAMBDA_RESOLUTION times the sample resolution.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .beta import BetaValue, OptimizerSettings, beta_infty, beta_objective_at_plane, beta_p
from .content import LAMBDA_RESOLUTION, PointSample, hausdorff_content, _diameter
from .errors import InputError, NumericalError
from .geometry import AffinePlane, Ball, Cone

__all__ = [
    "BetaProfile",
    "TangentVerdict",
    "ClassifyThresholds",
    "flatness_profile",
    "dini_profile",
    "sum_integral_comparability",
    "classify_tangent",
    "approx_tangent_ratio",
    "partition_cone_points",
    "ConePartition",
    "lipschitz_extend",
    "jones_tsp_sum",
    "scale_ladder",
    "grassmannian_net",
]


@dataclass(frozen=True)
class BetaProfile:
    """Per-scale beta values at one center with cumulative squared sums."""

    center: np.ndarray
    scales: Tuple[float, ...]  # strictly decreasing
    betas: Tuple[BetaValue, ...]
    partial_sums: Tuple[float, ...]
    truncation_scale: float
    form: str
    p: Optional[float] = None
    base: float = 10.0

    def __post_init__(self):
        s = np.asarray(self.scales)
        if len(s) and np.any(np.diff(s) >= 0):
            raise InputError("profile scales must be strictly decreasing")
        if np.any(np.asarray(self.scales) < self.truncation_scale * (1 - 1e-12)):
            raise InputError("profile contains scales below its truncation")
        if len(self.partial_sums) and np.any(np.diff(self.partial_sums) < -1e-15):
            raise InputError("partial sums must be nondecreasing")

    @property
    def values(self) -> np.ndarray:
        return np.array([b.value for b in self.betas])

    def tail_increment(self, scales_back: int = 3) -> float:
        """Sum of squared betas over the finest `scales_back` scales."""
        v = self.values
        return float(np.sum(v[-scales_back:] ** 2)) if len(v) else 0.0

    def last_decade_increment(self) -> float:
        """Sum of squared betas over scales within a factor 10 of the finest."""
        if not self.scales:
            return 0.0
        r_min = self.scales[-1]
        v = self.values
        mask = np.asarray(self.scales) < 10.0 * r_min * (1 + 1e-12)
        return float(np.sum(v[mask] ** 2))

    def growth_slope(self) -> float:
        """Least-squares slope of ln(partial_sum_k) against ln(k).

        ~1 when increments stay bounded below (sums grow linearly per scale
        index), ~0 for convergent sums. Zero profile gives 0.
        """
        s = np.asarray(self.partial_sums)
        k = np.arange(1, len(s) + 1, dtype=float)
        good = s > 0
        if good.sum() < 2:
            return 0.0
        x = np.log(k[good])
        y = np.log(s[good])
        x = x - x.mean()
        denom = float(x @ x)
        if denom == 0.0:
            return 0.0
        return float(x @ (y - y.mean()) / denom)


def scale_ladder(r0: float, base: float, truncation: float, max_scales: int = 64) -> List[float]:
    """r_k = r0 * base^{-k} down to (and not below) the truncation scale."""
    if not (r0 > 0 and base > 1):
        raise InputError("scale ladder needs r0 > 0 and base > 1")
    out = []
    r = r0
    while r >= truncation * (1 - 1e-12) and len(out) < max_scales:
        out.append(r)
        r = r / base
    return out


def _truncation(sample: PointSample, lam: float) -> float:
    return lam * sample.resolution_h if sample.resolution_h > 0 else 0.0


def flatness_profile(
    sample: PointSample,
    x,
    scales: Sequence[float],
    d: Optional[int] = None,
    settings: OptimizerSettings = OptimizerSettings(),
    lam: float = LAMBDA_RESOLUTION,
) -> Tuple[BetaProfile, Optional[AffinePlane]]:
    """Sup-beta flatness at each scale, plus the best single candidate tangent
    plane across the three finest scales (scored by its worst sup-ratio there).
    """
    d = sample.intrinsic_d if d is None else d
    x = np.asarray(x, dtype=float)
    cut = _truncation(sample, lam)
    usable = sorted([s for s in scales if s >= cut], reverse=True)
    dropped = sorted(set(float(s) for s in scales) - set(usable))
    if dropped:
        warnings.warn(f"dropped {len(dropped)} scales below truncation {cut:.3g}", RuntimeWarning)
    if not usable:
        raise InputError("no usable scales above the truncation")
    betas = [beta_infty(sample, Ball(x, t), d, settings) for t in usable]
    vals = np.array([b.value for b in betas])
    sums = tuple(np.cumsum(vals**2).tolist())
    profile = BetaProfile(x, tuple(usable), tuple(betas), sums, cut, "sup", None,
                          base=usable[0] / usable[1] if len(usable) > 1 else 10.0)
    finest = betas[-3:]
    best_plane, best_score = None, math.inf
    for cand in finest:
        score = max(
            beta_objective_at_plane(sample, Ball(x, t), cand.plane, d) for t in usable[-3:]
        )
        if score < best_score:
            best_score, best_plane = score, cand.plane
    return profile, best_plane


def dini_profile(
    sample: PointSample,
    x,
    d: Optional[int] = None,
    p: float = 1.0,
    base: float = 10.0,
    r0: float = 1.0,
    settings: OptimizerSettings = OptimizerSettings(),
    lam: float = LAMBDA_RESOLUTION,
    p_range_override: bool = False,
) -> BetaProfile:
    """Content-beta profile over r_k = r0 * base^{-k} with partial square sums.

    For d >= 3 the admissible exponents are 1 <= p < 2d/(d-2); out-of-range p
    raises unless p_range_override is set, in which case it warns.
    """
    d = sample.intrinsic_d if d is None else d
    _enforce_p_range(d, p, p_range_override)
    x = np.asarray(x, dtype=float)
    cut = _truncation(sample, lam)
    scales = scale_ladder(r0, base, max(cut, 1e-300))
    if len(scales) < 3:
        raise NumericalError(
            f"only {len(scales)} usable scales between r0={r0} and truncation {cut:.3g}; need >= 3"
        )
    betas = [beta_p(sample, Ball(x, t), d, p, settings) for t in scales]
    vals = np.array([b.value for b in betas])
    sums = tuple(np.cumsum(vals**2).tolist())
    return BetaProfile(x, tuple(scales), tuple(betas), sums, cut, "content_p", p, base)


def _enforce_p_range(d: int, p: float, override: bool):
    if p < 1:
        raise InputError(f"p must be >= 1, got {p}")
    if d >= 3 and p >= 2 * d / (d - 2):
        msg = f"p={p} outside the admissible range [1, {2*d/(d-2):.3g}) for d={d}"
        if not override:
            raise InputError(msg)
        warnings.warn(msg + " (override in effect)", RuntimeWarning)


def sum_integral_comparability(
    profile: BetaProfile,
    sample: PointSample,
    p: Optional[float] = None,
    d: Optional[int] = None,
    nodes_per_step: int = 3,
    settings: OptimizerSettings = OptimizerSettings(),
) -> dict:
    """Discrete Dini sum against the quadrature estimate of the integral
    of beta(x,t)^2 dt/t, with the discretization bound
    sum_k beta(r_k)^2 <= (base^{2(d+p)} / ln base) * integral.

    Fresh betas are evaluated at `nodes_per_step` intermediate scales per
    ladder step; the trapezoid rule runs in log t.
    """
    if len(profile.scales) < 5:
        raise InputError("comparability check needs a profile with >= 5 scales")
    d = sample.intrinsic_d if d is None else d
    p = profile.p if p is None else p
    if p is None:
        raise InputError("content-beta profile required")
    x = profile.center
    base = profile.base
    vals = profile.values
    # quadrature nodes: profile scales plus intermediates, log-spaced
    ts: List[float] = []
    bs: List[float] = []
    for j in range(len(profile.scales) - 1):
        hi, lo = profile.scales[j], profile.scales[j + 1]
        ts.append(hi)
        bs.append(vals[j])
        for i in range(1, nodes_per_step + 1):
            t = hi * (lo / hi) ** (i / (nodes_per_step + 1))
            ts.append(t)
            bs.append(beta_p(sample, Ball(x, t), d, p, settings).value)
    ts.append(profile.scales[-1])
    bs.append(vals[-1])
    u = np.log(np.asarray(ts))
    y = np.asarray(bs) ** 2
    integral = float(np.trapezoid(y[::-1], u[::-1]))
    ladder_sum = float(np.sum(vals[1:] ** 2))  # k >= 1: scales paired with [r_k, r_{k-1}]
    bound_const = base ** (2 * (d + p)) / math.log(base)
    return {
        "sum": ladder_sum,
        "integral_estimate": integral,
        "ratio": ladder_sum / integral if integral > 0 else 0.0,
        "bound": bound_const,
        "passed": ladder_sum <= bound_const * integral * 1.1 + 1e-15,
    }


@dataclass(frozen=True)
class ClassifyThresholds:
    theta_tol: float = 0.05
    tau_tol: float = 0.01
    theta_floor: float = 0.2
    slope_floor: float = 0.5


@dataclass(frozen=True)
class TangentVerdict:
    label: str  # tangent | non_tangent | undecided
    dini_tail: float
    flatness_final: float
    slope: float
    plane: Optional[AffinePlane] = None


def classify_tangent(
    flatness: BetaProfile,
    dini: BetaProfile,
    thresholds: ClassifyThresholds = ClassifyThresholds(),
    plane: Optional[AffinePlane] = None,
) -> TangentVerdict:
    """Decision rule over the two profiles.

    non_tangent when flatness stays above theta_floor at the three finest
    scales or the Dini partial sums keep growing (slope >= slope_floor);
    tangent when flatness at the three finest scales is below theta_tol and
    the Dini tail is below tau_tol; otherwise undecided. Checking the
    tolerance-free non_tangent branch first keeps the monotonicity property:
    shrinking theta_tol/tau_tol can only move labels tangent -> undecided.
    """
    if not np.allclose(flatness.center, dini.center):
        raise InputError("profiles must share their center")
    flat_vals = flatness.values
    finest = flat_vals[-3:]
    tail = dini.tail_increment(3)
    slope = dini.growth_slope()
    if (len(finest) and finest.min() > thresholds.theta_floor) or slope >= thresholds.slope_floor:
        label = "non_tangent"
    elif len(finest) and finest.max() < thresholds.theta_tol and tail < thresholds.tau_tol:
        label = "tangent"
    else:
        label = "undecided"
    return TangentVerdict(
        label=label,
        dini_tail=tail,
        flatness_final=float(flat_vals[-1]) if len(flat_vals) else 0.0,
        slope=slope,
        plane=plane if label == "tangent" else None,
    )


def approx_tangent_ratio(
    sample: PointSample,
    a,
    plane: AffinePlane,
    s: float,
    r: float,
    d: Optional[int] = None,
    mesh_floor: Optional[float] = None,
) -> float:
    """Content of E ∩ B(a,r) outside the cone X(a, V, arcsin s), normalized by r^d.

    Content stands in for measure, which the lower-regularity setting
    justifies; the substitution is recorded in the return metadata of the CLI.
    """
    d = sample.intrinsic_d if d is None else d
    if not 0 < s < 1:
        raise InputError(f"cone parameter s must lie in (0,1), got {s}")
    a = np.asarray(a, dtype=float)
    if plane.distance(a) > max(1e-9, 2 * sample.resolution_h):
        raise InputError("plane must pass through the base point")
    cone = Cone(a, plane.frame, math.asin(s), "toward_V")
    local = sample.clip_to_ball(a, r)
    if len(local) == 0:
        return 0.0
    outside = local.points[~cone.contains(local.points)]
    if len(outside) == 0:
        return 0.0
    rest = PointSample(outside, d, sample.resolution_h, ambient_n=sample.n)
    mesh = mesh_floor if mesh_floor is not None else (
        2 * sample.resolution_h if sample.resolution_h > 0 else r / 2**12
    )
    return hausdorff_content(rest, d, mesh_floor=mesh, shifts=2).value / r**d


# ---------------------------------------------------------------------------
# cone-point partitioning
# ---------------------------------------------------------------------------


def grassmannian_net(n: int, d: int, size: int, seed: int = 0) -> List[np.ndarray]:
    """Deterministic finite net of d-planes in R^n (orthonormal row frames).

    n=2,d=1 uses evenly spaced directions; n=3 uses a Fibonacci hemisphere
    (directions for d=1, normals for d=2); other (n,d) draw seeded Gaussian
    frames. A finite stand-in for the dense countable family.
    """
    frames: List[np.ndarray] = []
    if n == 2 and d == 1:
        for i in range(size):
            a = math.pi * i / size
            frames.append(np.array([[math.cos(a), math.sin(a)]]))
        return frames
    if n == 3 and d in (1, 2):
        golden = (1 + math.sqrt(5)) / 2
        for i in range(size):
            z = (i + 0.5) / size  # hemisphere
            rho = math.sqrt(1 - z * z)
            phi = 2 * math.pi * i / golden
            v = np.array([rho * math.cos(phi), rho * math.sin(phi), z])
            if d == 1:
                frames.append(v[None, :])
            else:
                frames.append(_orthonormal_complement(v))
        return frames
    rng = np.random.default_rng(seed)
    for _ in range(size):
        g = rng.standard_normal((n, d))
        q, _ = np.linalg.qr(g)
        frames.append(q.T[:d])
    return frames


def _orthonormal_complement(v: np.ndarray) -> np.ndarray:
    n = v.size
    basis = np.eye(n)
    idx = int(np.argmin(np.abs(v)))
    u1 = basis[idx] - v * v[idx]
    u1 /= np.linalg.norm(u1)
    if n == 3:
        u2 = np.cross(v, u1)
        return np.stack([u1, u2])
    raise InputError("complement helper supports n=3 only")


def _plane_angle(frame_a: np.ndarray, frame_b: np.ndarray) -> float:
    """Largest principal angle between the spans of two orthonormal frames."""
    sv = np.linalg.svd(frame_a @ frame_b.T, compute_uv=False)
    return float(math.acos(min(1.0, max(-1.0, sv.min() if sv.size else 0.0))))


@dataclass(frozen=True)
class ConePartition:
    """Bucket assignment (plane index, angle index, radius index) per tangent point."""

    buckets: dict  # (ni, ki, li) -> list of point indices
    flagged: tuple  # point indices with no admissible triple
    plane_net: tuple
    angle_net: tuple
    radius_net: tuple


def partition_cone_points(
    sample: PointSample,
    tangent_indices: Sequence[int],
    tangent_planes: Sequence[AffinePlane],
    plane_net_size: Optional[int] = None,
    angle_net: Optional[Sequence[float]] = None,
    radius_net: Optional[Sequence[float]] = None,
    seed: int = 0,
) -> ConePartition:
    """Assign each tangent point the first (net plane, theta, radius) triple whose
    perpendicular cone X(x, V_perp, theta, r) contains no other sample point.

    Net planes are tried in order of angular distance to the point's own
    tangent plane, angles descending, radii descending, so flat samples land in
    the bucket of the nearest net plane with the widest, largest cone.
    """
    n, d = sample.n, sample.intrinsic_d
    if plane_net_size is None:
        plane_net_size = 32 if n == 2 else 128
    planes = grassmannian_net(n, d, plane_net_size, seed)
    if angle_net is None:
        angle_net = [(math.pi / 2) * k / 9 for k in range(1, 9)]
    if radius_net is None:
        diam = sample.diameter()
        radius_net = [diam / 2**j for j in range(8)]
    angle_net = sorted(angle_net)
    radius_net = sorted(radius_net)
    if not (len(planes) and len(angle_net) and len(radius_net)):
        raise InputError("empty net supplied to partition_cone_points")
    tangent_indices = [int(i) for i in tangent_indices]
    if len(tangent_indices) != len(tangent_planes):
        raise InputError("tangent indices and planes must be aligned")
    pts = sample.points
    buckets: dict = {}
    flagged: List[int] = []
    cos_thetas = np.cos(np.asarray(angle_net))
    for idx, own_plane in zip(tangent_indices, tangent_planes):
        x = pts[idx]
        rel = np.delete(pts, idx, axis=0) - x
        norms = np.linalg.norm(rel, axis=1)
        order = np.argsort([_plane_angle(own_plane.frame, f) for f in planes], kind="stable")
        found = None
        for ni in order:
            v = planes[ni]
            along = np.linalg.norm(rel @ v.T, axis=1)
            with np.errstate(invalid="ignore", divide="ignore"):
                q = np.where(norms > 0, along / norms, 1.0)
            # point blocks (theta, r) iff q < cos(theta) and |rel| < r
            sort_r = np.argsort(norms, kind="stable")
            qmin_prefix = np.minimum.accumulate(q[sort_r]) if len(q) else np.array([])
            for ki in range(len(angle_net) - 1, -1, -1):  # theta descending
                for li in range(len(radius_net) - 1, -1, -1):  # radius descending
                    r = radius_net[li]
                    cnt = int(np.searchsorted(norms[sort_r], r, side="left"))
                    qmin = qmin_prefix[cnt - 1] if cnt > 0 else 1.0
                    if qmin >= cos_thetas[ki]:
                        found = (int(ni), ki, li)
                        break
                if found:
                    break
            if found:
                break
        if found is None:
            flagged.append(idx)
        else:
            buckets.setdefault(found, []).append(idx)
    return ConePartition(
        buckets, tuple(flagged), tuple(planes), tuple(angle_net), tuple(radius_net)
    )


# ---------------------------------------------------------------------------
# Lipschitz extension and the TSP sum
# ---------------------------------------------------------------------------


def lipschitz_extend(
    anchors: np.ndarray,
    values: np.ndarray,
    lip: float,
    query,
) -> np.ndarray:
    """Coordinatewise inf-convolution extension F_j(x) = min_a (v_aj + lip |x-a|).

    `anchors` is (k, d), `values` is (k, n-d). Data must be lip-Lipschitz per
    coordinate pair; the first witness pair is reported otherwise. Restriction
    to the anchors reproduces the data exactly; the extension is globally
    sqrt(n-d)*lip Lipschitz.
    """
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if len(anchors) != len(values):
        raise InputError("anchors and values must be aligned")
    if len(anchors) == 0:
        raise InputError("lipschitz_extend needs at least one anchor")
    if lip <= 0:
        raise InputError("lip must be positive")
    gaps = np.linalg.norm(anchors[:, None, :] - anchors[None, :, :], axis=2)
    for j in range(values.shape[1]):
        diff = np.abs(values[:, j][:, None] - values[:, j][None, :])
        bad = diff > lip * gaps + 1e-12
        if bad.any():
            a, b = np.argwhere(bad)[0]
            raise InputError(
                f"data not {lip}-Lipschitz in coordinate {j}: witness pair ({a}, {b}) "
                f"with |dv|={diff[a, b]:.6g} > lip*|da|={lip * gaps[a, b]:.6g}"
            )
    query = np.asarray(query, dtype=float)
    single = query.ndim == 1
    qs = np.atleast_2d(query)
    if qs.shape[1] != anchors.shape[1]:
        raise InputError(
            f"query dimension {qs.shape[1]} != anchor dimension {anchors.shape[1]}"
        )
    dist = np.linalg.norm(qs[:, None, :] - anchors[None, :, :], axis=2)  # (q, k)
    out = (values[None, :, :] + lip * dist[:, :, None]).min(axis=1)
    return out[0] if single else out


def jones_tsp_sum(
    sample: PointSample,
    tree,
    settings: OptimizerSettings = OptimizerSettings(),
) -> dict:
    """diam(E) + sum over cubes of beta_infty(3 B_Q)^2 diam(Q), d = 1 only.

    3 B_Q = B(x_Q, 3 C1 ell(Q)) realizes the classical 3Q inflation; every
    built cube meets the sample by construction.
    """
    if sample.intrinsic_d != 1:
        raise InputError("the traveling-salesman sum is defined for d = 1")
    diam = sample.diameter()
    total = 0.0
    per_level: dict = {}
    cubes_out = []
    for cube in tree.all_cubes():
        ball = Ball(cube.center, 3.0 * tree.c1 * cube.ell)
        b = beta_infty(sample, ball, 1, settings)
        cube_diam = cube.diameter(sample.points)
        contrib = b.value**2 * cube_diam
        total += contrib
        per_level[cube.scale_k] = per_level.get(cube.scale_k, 0.0) + contrib
        cubes_out.append(
            {"k": cube.scale_k, "j": cube.id[1], "ell": cube.ell, "diam": cube_diam,
             "beta": b.value, "contribution": contrib}
        )
    return {
        "sum": diam + total,
        "diam": diam,
        "beta_part": total,
        "per_level": per_level,
        "cubes": cubes_out,
    }
