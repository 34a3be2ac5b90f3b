"""Command-line surface: gen, beta, dini, classify, tsp, ccbp, check.

Every command writes deterministic CSV/JSON artifacts plus a manifest
capturing the full configuration (tolerances, seeds, versions) into --out;
figures are rendered alongside unless --no-figures. Exit codes: 0 ok,
1 check-suite failure, 2 input error, 3 numerical failure; on error a
machine-readable JSON object goes to stderr.

BETASCAN_THREADS caps parallelism over centers (default 1, serial).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .beta import OptimizerSettings, beta_infty, beta_p
from .checks import LEMMA_213_CONSTANT, LEMMA_43_CONSTANT, run_lemma_suite
from .ccbp import build_ccbp, ccbp_summability, validate_ccbp
from .content import LAMBDA_RESOLUTION, PointSample
from .datasets import gen_synthetic, load_ground_truth, load_sample, save_ground_truth, save_sample
from .errors import InputError, NumericalError
from .geometry import Ball
from .multiscale import build_christ_cubes
from .tangent import (
    ClassifyThresholds,
    classify_tangent,
    dini_profile,
    flatness_profile,
    jones_tsp_sum,
    scale_ladder,
)

__all__ = ["main"]


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _thread_count() -> int:
    raw = os.environ.get("BETASCAN_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise InputError(f"BETASCAN_THREADS must be an integer, got {raw!r}")


def _pmap(fn, items: Sequence):
    workers = _thread_count()
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _write_csv(path: Path, header: List[str], rows: List[List]):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, (int, float, np.floating, np.integer))
                              else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_manifest(outdir: Path, command: str, config: dict, extra: Optional[dict] = None):
    manifest = {
        "command": command,
        "config": config,
        "versions": {
            "betascan": __version__,
            "numpy": np.__version__,
            "python": ".".join(map(str, sys.version_info[:3])),
        },
    }
    if extra:
        manifest["results"] = extra
    (outdir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n",
        encoding="utf-8",
    )


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


@dataclass
class RunConfig:
    """Resolved configuration for one command; everything lands in the manifest."""

    command: str
    input: Optional[str]
    gen: Optional[str]
    gen_params: dict
    h: float
    d: Optional[int]
    p: float
    base: float
    r0: float
    lam: float
    seed: int
    out: str
    centers: int
    explicit_centers: List[List[float]]
    figures: bool
    epsilon: float
    k_max: int
    delta: float
    instances: int
    allow_p_out_of_range: bool
    thresholds: dict = field(default_factory=lambda: asdict(ClassifyThresholds()))
    optimizer: dict = field(default_factory=lambda: asdict(OptimizerSettings()))
    lambda_resolution_default: float = LAMBDA_RESOLUTION


def _build_config(args, command: str) -> RunConfig:
    params = {}
    for kv in args.param or []:
        if "=" not in kv:
            raise InputError(f"--param expects key=value, got {kv!r}")
        key, val = kv.split("=", 1)
        try:
            params[key] = json.loads(val)
        except json.JSONDecodeError:
            params[key] = val
    explicit = []
    for c in args.center or []:
        explicit.append([float(v) for v in c.split(",")])
    return RunConfig(
        command=command,
        input=args.input,
        gen=args.gen,
        gen_params=params,
        h=args.h,
        d=args.d,
        p=args.p,
        base=args.base,
        r0=args.r0,
        lam=getattr(args, "lam"),
        seed=args.seed,
        out=args.out,
        centers=args.centers,
        explicit_centers=explicit,
        figures=not args.no_figures,
        epsilon=args.epsilon,
        k_max=args.k_max,
        delta=args.delta,
        instances=args.instances,
        allow_p_out_of_range=args.allow_p_out_of_range,
    )


def _load_data(cfg: RunConfig):
    if (cfg.input is None) == (cfg.gen is None):
        raise InputError("exactly one of --input or --gen is required")
    if cfg.input is not None:
        path = Path(cfg.input)
        if not path.exists():
            raise InputError(f"input file not found: {path}")
        sample = load_sample(path)
        truth_path = path.with_name(path.stem + "_truth" + path.suffix)
        truth = load_ground_truth(truth_path) if truth_path.exists() else None
        return sample, truth
    sample, truth = gen_synthetic(cfg.gen, dict(cfg.gen_params), h=cfg.h, seed=cfg.seed)
    return sample, truth


def _pick_centers(cfg: RunConfig, sample: PointSample) -> List[Tuple[int, np.ndarray]]:
    if cfg.explicit_centers:
        return [(i, np.asarray(c, dtype=float)) for i, c in enumerate(cfg.explicit_centers)]
    rng = np.random.default_rng(cfg.seed)
    k = min(cfg.centers, len(sample))
    idx = np.sort(rng.choice(len(sample), size=k, replace=False))
    return [(int(i), sample.points[i]) for i in idx]


def _p_range_check(cfg: RunConfig, d: int):
    if d >= 3 and cfg.p >= 2 * d / (d - 2) and not cfg.allow_p_out_of_range:
        raise InputError(
            f"p={cfg.p} outside the admissible range [1, {2*d/(d-2):.3g}) for d={d}; "
            "pass --allow-p-out-of-range to proceed"
        )
    if d >= 3 and cfg.p >= 2 * d / (d - 2):
        print(f"warning: p={cfg.p} outside the admissible range for d={d}", file=sys.stderr)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_gen(cfg: RunConfig) -> int:
    if cfg.gen is None:
        raise InputError("gen requires --gen <kind>")
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    sample, truth = gen_synthetic(cfg.gen, dict(cfg.gen_params), h=cfg.h, seed=cfg.seed)
    save_sample(sample, outdir / "sample.csv")
    save_ground_truth(truth, outdir / "sample_truth.csv", n=sample.n)
    if cfg.figures:
        from .plots import save_sample_figure

        save_sample_figure(sample.points, outdir / "sample.png")
    _write_manifest(outdir, "gen", asdict(cfg), {"points": len(sample), "n": sample.n})
    return 0


def cmd_beta(cfg: RunConfig, form: str = "both") -> int:
    sample, _ = _load_data(cfg)
    d = cfg.d if cfg.d is not None else sample.intrinsic_d
    _p_range_check(cfg, d)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    cut = cfg.lam * sample.resolution_h
    scales = scale_ladder(cfg.r0, cfg.base, max(cut, 1e-300))
    if not scales:
        raise NumericalError(f"no scales in the ladder above the resolution cut {cut:.3g}")
    centers = _pick_centers(cfg, sample)
    settings = OptimizerSettings()

    def one(center):
        cid, x = center
        out = []
        for t in scales:
            ball = Ball(x, t)
            if form in ("sup", "both"):
                out.append((cid, x, t, "sup", math.nan, beta_infty(sample, ball, d, settings)))
            if form in ("content_p", "both"):
                out.append((cid, x, t, "content_p", cfg.p, beta_p(sample, ball, d, cfg.p, settings)))
        return out

    rows = []
    fig_rows = []
    n = sample.n
    for chunk in _pmap(one, centers):
        for cid, x, t, fm, p, bv in chunk:
            row = [cid, t, fm, p, bv.value, int(bv.converged), bv.n_evals]
            row += list(x) + list(bv.plane.base) + list(bv.plane.frame.ravel())
            rows.append(row)
            fig_rows.append({"center_id": cid, "scale": t, "form": fm, "value": bv.value})
    header = ["center_id", "scale", "form", "p", "value", "converged", "n_evals"]
    header += [f"center_{i}" for i in range(n)]
    header += [f"plane_base_{i}" for i in range(n)]
    header += [f"plane_frame_{i}_{j}" for i in range(d) for j in range(n)]
    _write_csv(outdir / "beta.csv", header, rows)
    if cfg.figures:
        from .plots import save_beta_scales_figure

        save_beta_scales_figure(fig_rows, outdir / "beta.png")
    _write_manifest(outdir, "beta", asdict(cfg), {"scales": scales, "n_centers": len(centers)})
    return 0


def cmd_dini(cfg: RunConfig) -> int:
    sample, _ = _load_data(cfg)
    d = cfg.d if cfg.d is not None else sample.intrinsic_d
    _p_range_check(cfg, d)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    centers = _pick_centers(cfg, sample)
    settings = OptimizerSettings()

    def one(center):
        cid, x = center
        return cid, dini_profile(sample, x, d, cfg.p, cfg.base, cfg.r0, settings,
                                 cfg.lam, cfg.allow_p_out_of_range)

    rows, fig_rows = [], []
    for cid, prof in _pmap(one, centers):
        for t, b, s in zip(prof.scales, prof.values, prof.partial_sums):
            rows.append([cid, t, b, s])
            fig_rows.append({"center_id": cid, "scale": t, "partial_sum": s})
    _write_csv(outdir / "dini.csv", ["center_id", "scale", "beta", "partial_sum"], rows)
    if cfg.figures:
        from .plots import save_dini_figure

        save_dini_figure(fig_rows, outdir / "dini.png")
    _write_manifest(outdir, "dini", asdict(cfg), {"n_centers": len(centers)})
    return 0


def cmd_classify(cfg: RunConfig) -> int:
    sample, truth = _load_data(cfg)
    d = cfg.d if cfg.d is not None else sample.intrinsic_d
    _p_range_check(cfg, d)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    centers = _pick_centers(cfg, sample)
    settings = OptimizerSettings()
    thresholds = ClassifyThresholds()
    cut = cfg.lam * sample.resolution_h
    scales = scale_ladder(cfg.r0, cfg.base, max(cut, 1e-300))
    if len(scales) < 3:
        raise NumericalError(f"ladder from r0={cfg.r0} has {len(scales)} scales; need >= 3")

    def one(center):
        cid, x = center
        flat, plane = flatness_profile(sample, x, scales, d, settings, cfg.lam)
        dini = dini_profile(sample, x, d, cfg.p, cfg.base, cfg.r0, settings,
                            cfg.lam, cfg.allow_p_out_of_range)
        verdict = classify_tangent(flat, dini, thresholds, plane)
        return cid, x, verdict

    rows = []
    labels = []
    pts_used = []
    for cid, x, v in _pmap(one, centers):
        rows.append([cid, v.label, v.dini_tail, v.flatness_final, v.slope] + list(x))
        labels.append(v.label)
        pts_used.append(x)
    header = ["center_id", "label", "dini_tail", "flatness_final", "slope"]
    header += [f"center_{i}" for i in range(sample.n)]
    _write_csv(outdir / "verdicts.csv", header, rows)
    results = {"labels": {lab: labels.count(lab) for lab in set(labels)},
               "metadata": {"content_for_measure": "H^d_infty substituted for H^d per the "
                                                   "lower-regular equivalence"}}
    if truth is not None and not cfg.explicit_centers:
        agree = total = 0
        for row, lab in zip(rows, labels):
            true_lab = truth.labels[row[0]]
            if true_lab == "boundary":
                continue
            total += 1
            if lab == true_lab:
                agree += 1
        results["truth_agreement"] = {"agree": agree, "total": total,
                                      "rate": agree / total if total else math.nan}
    if cfg.figures:
        from .plots import save_classify_figure

        save_classify_figure(np.array(pts_used), labels, outdir / "classify.png")
    _write_manifest(outdir, "classify", asdict(cfg), results)
    return 0


def cmd_tsp(cfg: RunConfig) -> int:
    sample, _ = _load_data(cfg)
    if sample.intrinsic_d != 1:
        raise InputError("tsp requires a d=1 sample")
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    tree = build_christ_cubes(sample, cfg.delta, seed=cfg.seed, lam=cfg.lam)
    res = jones_tsp_sum(sample, tree)
    rows = [[c["k"], c["j"], c["ell"], c["diam"], c["beta"], c["contribution"]]
            for c in res["cubes"]]
    _write_csv(outdir / "tsp.csv", ["k", "j", "ell", "diam", "beta_3q", "contribution"], rows)
    tree.save_json(outdir / "cubes.json")
    if cfg.figures:
        from .plots import save_tsp_figure

        save_tsp_figure(res["per_level"], res["diam"], outdir / "tsp.png")
    _write_manifest(outdir, "tsp", asdict(cfg),
                    {"sum": res["sum"], "diam": res["diam"], "beta_part": res["beta_part"],
                     "per_level": {str(k): v for k, v in res["per_level"].items()}})
    return 0


def cmd_ccbp(cfg: RunConfig) -> int:
    sample, _ = _load_data(cfg)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    pts = sample.points
    # normalize into the unit ball with a sample point at the origin
    centroid = pts.mean(axis=0)
    pivot = pts[int(np.argmin(np.linalg.norm(pts - centroid, axis=1)))]
    shifted = pts - pivot
    scale = 1.0 / max(np.linalg.norm(shifted, axis=1).max(), 1e-300)
    normalized = PointSample(shifted * scale, sample.intrinsic_d,
                             sample.resolution_h * scale, metadata=dict(sample.metadata))
    collection = build_ccbp(normalized, cfg.d, cfg.p, cfg.epsilon, cfg.k_max, cfg.seed)
    report = validate_ccbp(collection)
    rng = np.random.default_rng(cfg.seed)
    probe_idx = np.sort(rng.choice(len(normalized), size=min(cfg.centers, len(normalized)),
                                   replace=False))
    summ = ccbp_summability(collection, normalized.points[probe_idx])
    cond_rows = [[name, r.worst, r.threshold, int(r.passed), str(r.witness)]
                 for name, r in sorted(report.conditions.items())]
    _write_csv(outdir / "ccbp_conditions.csv",
               ["condition", "worst", "threshold", "passed", "witness"], cond_rows)
    eps_rows = [[pi, k, eps] for (pi, k), eps in sorted(summ.eps_table.items())]
    _write_csv(outdir / "ccbp_eps.csv", ["probe", "k", "eps_k"], eps_rows)
    payload = {
        "epsilon": cfg.epsilon,
        "normalization": {"pivot": pivot.tolist(), "scale": scale},
        "conditions": {name: {"worst": r.worst, "threshold": r.threshold,
                              "passed": r.passed, "witness": r.witness}
                       for name, r in report.conditions.items()},
        "summability": {"sup_sum": summ.sup_sum,
                        "per_probe": {str(k): v for k, v in summ.per_probe.items()},
                        "flagged": list(summ.flagged)},
        "all_conditions_passed": report.all_passed,
    }
    (outdir / "ccbp_report.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n",
        encoding="utf-8",
    )
    if cfg.figures:
        from .plots import save_ccbp_figure

        eps_by_level: dict = {}
        for (pi, k), eps in summ.eps_table.items():
            eps_by_level[k] = max(eps_by_level.get(k, 0.0), eps)
        save_ccbp_figure({n: r.worst for n, r in report.conditions.items()},
                         cfg.epsilon, eps_by_level, outdir / "ccbp.png")
    _write_manifest(outdir, "ccbp", asdict(cfg), {"all_passed": report.all_passed,
                                                  "sup_sum": summ.sup_sum})
    return 0


def cmd_check(cfg: RunConfig) -> int:
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    result = run_lemma_suite(per_combo=cfg.instances, seed=cfg.seed)
    rows = [[r["lemma"], r["n"], r["d"], r["instance"], r["lhs"], r["rhs"],
             "pass" if r["passed"] else ("unverifiable" if r["passed"] is None else "FAIL")]
            for r in result.rows]
    _write_csv(outdir / "check.csv", ["lemma", "n", "d", "instance", "lhs", "rhs", "status"], rows)
    if cfg.figures:
        from .plots import save_check_figure

        save_check_figure(result.margins_by_lemma(), outdir / "check.png")
    _write_manifest(outdir, "check", asdict(cfg), {
        "all_passed": result.all_passed,
        "n_rows": len(result.rows),
        "n_unverifiable": result.n_unverifiable,
        "fitted_constants": result.fitted,
        "recorded_bounds": {"2.13": LEMMA_213_CONSTANT, "4.3": LEMMA_43_CONSTANT},
    })
    return 0 if result.all_passed else 1


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="betascan",
        description="Multiscale flatness (beta-number) analysis of point samples.",
    )
    parser.add_argument("--version", action="version", version=f"betascan {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="sample CSV (betascan v1 format)")
    common.add_argument("--gen", help="synthetic generator kind",
                        choices=["graph", "corner", "circle", "cantor4", "koch", "spiral"])
    common.add_argument("--param", action="append", metavar="K=V",
                        help="generator parameter (repeatable)")
    common.add_argument("--h", type=float, default=1e-3, help="generator resolution")
    common.add_argument("--d", type=int, default=None, help="target dimension override")
    common.add_argument("--p", type=float, default=1.0, help="content-beta exponent")
    common.add_argument("--base", type=float, default=10.0, help="scale ladder base")
    common.add_argument("--r0", type=float, default=1.0, help="coarsest ladder scale")
    common.add_argument("--lambda", dest="lam", type=float, default=LAMBDA_RESOLUTION,
                        help="resolution cut multiplier")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--centers", type=int, default=8,
                        help="number of seeded sample centers/probes")
    common.add_argument("--center", action="append", metavar="X,Y,...",
                        help="explicit center coordinates (repeatable)")
    common.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    common.add_argument("--epsilon", type=float, default=0.1, help="CCBP coherence threshold")
    common.add_argument("--k-max", type=int, default=2, help="finest CCBP level")
    common.add_argument("--delta", type=float, default=0.5, help="Christ-cube scale ratio")
    common.add_argument("--instances", type=int, default=12,
                        help="check-suite instances per (n, d) combination")
    common.add_argument("--allow-p-out-of-range", action="store_true",
                        help="warn instead of failing on an inadmissible p")
    for name, help_text in [
        ("gen", "write a synthetic sample + ground truth"),
        ("beta", "per-ball beta table over a scale ladder"),
        ("dini", "Dini profiles (content-beta squares and partial sums)"),
        ("classify", "tangent / non-tangent verdicts per center"),
        ("tsp", "traveling-salesman square sum over Christ cubes (d=1)"),
        ("ccbp", "build + validate a coherent collection of balls and planes"),
        ("check", "run the lemma property suite"),
    ]:
        sp = sub.add_parser(name, parents=[common], help=help_text)
        if name == "beta":
            sp.add_argument("--form", choices=["sup", "content_p", "both"], default="both")
    return parser


_COMMANDS = {
    "gen": cmd_gen,
    "dini": cmd_dini,
    "classify": cmd_classify,
    "tsp": cmd_tsp,
    "ccbp": cmd_ccbp,
    "check": cmd_check,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _make_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _build_config(args, args.command)
        if args.command == "beta":
            code = cmd_beta(cfg, form=args.form)
        else:
            code = _COMMANDS[args.command](cfg)
        return code
    except InputError as exc:
        _emit_error("input", exc)
        return 2
    except NumericalError as exc:
        _emit_error("numerical", exc)
        return 3
    except Exception as exc:  # unexpected failures are numerical per contract
        _emit_error("numerical", exc)
        return 3


def _emit_error(kind: str, exc: Exception):
    payload = {"error": {"type": kind, "message": str(exc), "class": type(exc).__name__}}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
