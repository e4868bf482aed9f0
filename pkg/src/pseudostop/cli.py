"""Command-line pipeline: corrupt -> run -> stop -> eval, plus extras.

Subcommands:
  corrupt       corrupt an image and write an observation directory
  run           run the surrogate reconstructor over an observation
  stop          score stopping criteria on a trajectory bundle
  eval          aggregate reports into a gap table, re-deriving gaps
  sweep-lambda  pick a quadratic-penalty weight by cross-channel scoring
  verify        run the empirical check suite

Exit codes: 0 success, 2 usage error, 3 data error (unreadable inputs,
contract violations), 4 check failure (verify or eval found a problem).

8-bit images (PNG and friends) are mapped to [0, 1] by dividing by 255;
.npy files are taken as-is with layout (H, W), (H, W, C), or (C, H, W).
All outputs are deterministic given the same inputs and seeds.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bundle import (
    BundleMeta,
    bundle_image,
    read_bundle,
    read_observation,
    write_bundle,
    write_observation,
)
from .core import ImageTensor, Trajectory, mse, psnr
from .criteria import (
    ValidationCurve,
    acr_curve,
    acr_mse_curve,
    csr_curve,
    mr_curve,
    oracle_report,
    primary_view,
    select,
    sure_curve,
    wmv_curve,
)
from .errors import ConfigError, MetadataError, PseudostopError, ProvenanceError
from .noise import FAMILIES, NoiseSpec, corrupt, make_aux_pair, sample_mask
from .regparam import LambdaGrid, oracle_lambda, select_lambda
from .surrogate import SurrogateConfig, run_augmented, run_masked, run_plain
from .verify import SUITE, run_suite

CRITERIA = ("csr", "mr", "acr", "acr-mse", "wmv", "sure")


def load_image(path: str | Path) -> ImageTensor:
    """Read a PNG (or any 8-bit raster) as [0, 1], or a .npy array."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"no such image: {path}")
    if path.suffix == ".npy":
        arr = np.load(path)
        if arr.ndim == 2:
            arr = arr[None]
        elif arr.ndim == 3 and arr.shape[-1] in (1, 3, 4) and arr.shape[0] not in (1, 3, 4):
            arr = np.moveaxis(arr, -1, 0)
        if arr.ndim != 3:
            raise ConfigError(f"unsupported array shape {arr.shape}")
        if arr.shape[0] == 4:
            arr = arr[:3]
        return ImageTensor(np.ascontiguousarray(arr, dtype=np.float64))
    from PIL import Image

    with Image.open(path) as img:
        arr = np.asarray(img, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        arr = arr[None]
    else:
        arr = np.moveaxis(arr, -1, 0)[:3]
    return ImageTensor(np.ascontiguousarray(arr))


def _dump_json(path: str | Path | None, obj: dict) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _write_curve_csv(path: Path, curve: ValidationCurve) -> None:
    lines = ["iteration,value"]
    lines += [f"{it},{val!r}" for it, val in zip(curve.iterations, curve.values)]
    path.write_text("\n".join(lines) + "\n")


def cmd_corrupt(args) -> int:
    clean = load_image(args.infile)
    spec = NoiseSpec(args.family, args.level)
    y = corrupt(clean, spec, args.seed)
    write_observation(y, args.family, args.level, args.seed, args.out, clean=clean)
    return 0


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    cfg_path = Path(path)
    if not cfg_path.is_file():
        raise ConfigError(f"no such config: {cfg_path}")
    return json.loads(cfg_path.read_text())


def cmd_run(args) -> int:
    y, clean, obs = read_observation(args.infile)
    raw = _load_config(args.config)
    cfg = SurrogateConfig(
        step=raw.get("step", SurrogateConfig.step),
        iterations=raw.get("iterations", SurrogateConfig.iterations),
        stride=raw.get("stride", SurrogateConfig.stride),
        bandwidth=raw.get("bandwidth"),
        bandwidth_frac=raw.get("bandwidth_frac", SurrogateConfig.bandwidth_frac),
        mode=args.mode,
    )
    noise = obs["noise"]
    meta = BundleMeta(
        y=y,
        noise_family=noise["family"],
        noise_level=noise["level"],
        noise_seed=noise["seed"],
        clean=clean,
    )
    if args.mode == "plain":
        traj = run_plain(y, cfg)
    elif args.mode == "masked":
        seed = raw.get("mask_seed", (noise["seed"] or 0) + 1)
        mask = sample_mask(y.height, y.width, raw.get("p_keep", 0.98), seed)
        traj = run_masked(y, mask, cfg)
    elif args.mode == "augmented":
        spec = NoiseSpec(noise["family"], noise["level"])
        base = noise["seed"] or 0
        seeds = tuple(raw.get("aux_seeds", (base + 1, base + 2)))
        taus = raw.get("aux_taus")
        taus = tuple(taus) if taus is not None else None
        y1, y2 = make_aux_pair(y, spec, seeds, taus=taus)
        traj = run_augmented(y, y1, cfg)
        level = taus if taus is not None else (spec.aux_level, spec.aux_level)
        meta.y1, meta.y2 = y1, y2
        meta.aux_taus = (level[0], level[1])
        meta.aux_seeds = (seeds[0], seeds[1])
    else:
        raise ConfigError(f"unknown mode {args.mode!r}")
    write_bundle(traj, meta, args.out)
    return 0


def _criterion_curve(
    name: str,
    traj: Trajectory,
    manifest: dict,
    bundle_path: str,
    window_iterations: int,
    burn_in_frac: float,
) -> tuple[ValidationCurve, Trajectory, dict]:
    """Build the requested curve; returns (curve, scored trajectory, extras).

    On augmented bundles, criteria other than the auxiliary-residual pair
    score the primary half of the channels.
    """
    y = bundle_image(bundle_path, manifest, "y")
    scored = primary_view(traj) if traj.mode == "augmented" else traj
    extras: dict = {}
    if name == "csr":
        pair, curve = csr_curve(scored, y)
        extras["pair"] = list(pair)
        return curve, scored, extras
    if name == "mr":
        if traj.mode != "masked" or traj.mask is None:
            raise ProvenanceError("mr scores only masked runs (mask contract)")
        return mr_curve(traj, y, traj.mask), traj, extras
    if name in ("acr", "acr-mse"):
        if traj.mode != "augmented":
            raise ProvenanceError(f"{name} scores only augmented runs")
        y2 = bundle_image(bundle_path, manifest, "y2")
        if name == "acr":
            burn_in = int(burn_in_frac * len(traj.frames))
            extras["burn_in"] = burn_in
            return acr_curve(traj, y2, burn_in=burn_in), scored, extras
        return acr_mse_curve(traj, y2), scored, extras
    if name == "wmv":
        stride = traj.iterations[1] - traj.iterations[0] if len(traj.iterations) > 1 else 1
        window = max(1, min(window_iterations // stride, len(scored.frames)))
        extras["window"] = window
        return wmv_curve(scored, window=window), scored, extras
    if name == "sure":
        noise = manifest["noise"]
        if noise["family"] != "gaussian":
            raise MetadataError("sure needs additive Gaussian noise")
        if traj.mode == "augmented":
            raise MetadataError("sure needs a plain or masked run with divergence")
        return sure_curve(traj, y, noise["level"]), traj, extras
    raise ConfigError(f"unknown criterion {name!r}")


def cmd_stop(args) -> int:
    names = [c.strip() for c in args.criteria.split(",") if c.strip()]
    for name in names:
        if name not in CRITERIA:
            raise ConfigError(f"unknown criterion {name!r}; choose from {', '.join(CRITERIA)}")
    traj, manifest = read_bundle(args.bundle)
    try:
        clean = bundle_image(args.bundle, manifest, "clean")
    except PseudostopError:
        clean = None

    curves_dir = Path(args.curves_dir) if args.curves_dir else None
    if curves_dir:
        curves_dir.mkdir(parents=True, exist_ok=True)

    criteria: dict[str, dict] = {}
    for name in names:
        curve, scored, extras = _criterion_curve(
            name, traj, manifest, args.bundle, args.window, args.burn_in_frac
        )
        entry = {"criterion": name, **extras}
        if clean is not None:
            ref = clean if scored.channels == clean.channels else None
            if ref is None:
                entry["selected_iteration"] = select(curve)
            else:
                report = oracle_report(scored, ref, curve, name)
                entry.update(
                    selected_iteration=report.selected_iteration,
                    selected_psnr=report.selected_psnr,
                    oracle_iteration=report.oracle_iteration,
                    oracle_psnr=report.oracle_psnr,
                    gap_db=report.gap_db,
                )
        else:
            entry["selected_iteration"] = select(curve)
        criteria[name] = entry
        if curves_dir:
            _write_curve_csv(curves_dir / f"{name}.csv", curve)

    _dump_json(
        args.out,
        {
            "bundle": str(Path(args.bundle)),
            "window": args.window,
            "burn_in_frac": args.burn_in_frac,
            "criteria": criteria,
        },
    )
    return 0


def cmd_eval(args) -> int:
    override = load_image(args.clean) if args.clean else None
    gaps: dict[str, list[float]] = {}
    for report_path in args.reports:
        report = json.loads(Path(report_path).read_text())
        traj, manifest = read_bundle(report["bundle"])
        try:
            clean = bundle_image(report["bundle"], manifest, "clean")
        except PseudostopError:
            clean = override
        if clean is None:
            raise ConfigError(f"no clean reference for {report_path}; pass --clean")
        scored_all = primary_view(traj) if traj.mode == "augmented" else traj
        psnrs = [psnr(mse(f, clean), clean.peak) for f in scored_all.frames]
        best = max(psnrs)
        for name, entry in report["criteria"].items():
            if "gap_db" not in entry:
                continue
            idx = scored_all.iterations.index(entry["selected_iteration"])
            recomputed = best - psnrs[idx]
            if abs(recomputed - entry["gap_db"]) > 1e-9:
                print(
                    f"gap mismatch for {name} in {report_path}: "
                    f"report {entry['gap_db']!r}, recomputed {recomputed!r}",
                    file=sys.stderr,
                )
                return 4
            gaps.setdefault(name, []).append(recomputed)

    lines = ["criterion,mean_gap_db,std_gap_db,count"]
    for name in sorted(gaps):
        vals = np.asarray(gaps[name])
        std = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        lines.append(f"{name},{float(vals.mean())!r},{std!r},{len(vals)}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _parse_grid(spec: str | None) -> LambdaGrid:
    if spec is None:
        return LambdaGrid.log_default()
    try:
        lo, hi, count = spec.split(":")
        return LambdaGrid.log_default(int(count), float(lo), float(hi))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad grid spec {spec!r}; expected lo:hi:count") from exc


def cmd_sweep_lambda(args) -> int:
    y = load_image(args.infile)
    grid = _parse_grid(args.grid_spec)
    pair, lam, curve = select_lambda(y, grid)
    oracle_scores = None
    lam_star = None
    if args.clean:
        clean = load_image(args.clean)
        lam_star, oracle_scores = oracle_lambda(y, clean, pair[0], grid)
    lines = ["lambda,pseudo_score,oracle_score"]
    for k, (weight, score) in enumerate(zip(curve.lambdas, curve.pseudo)):
        tail = f"{oracle_scores[k]!r}" if oracle_scores is not None else ""
        lines.append(f"{weight!r},{score!r},{tail}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        summary = f"pair={pair[0]},{pair[1]} lambda={lam!r}"
        if lam_star is not None:
            summary += f" oracle_lambda={lam_star!r}"
        print(summary)
    else:
        sys.stdout.write(text)
    return 0


def cmd_verify(args) -> int:
    if args.suite != "all" and args.suite not in SUITE:
        raise ConfigError(f"unknown check {args.suite!r}; choose from {', '.join(SUITE)}")
    names = None if args.suite == "all" else (args.suite,)
    reports = run_suite(master_seed=args.seed, names=names)
    _dump_json(args.out, {"checks": [r.as_dict() for r in reports]})
    return 0 if all(r.passed for r in reports) else 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pseudostop",
        description="Pseudo-reference early stopping for iterative image reconstruction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corrupt", help="corrupt an image into an observation directory")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--family", choices=FAMILIES, required=True)
    p.add_argument("--level", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("run", help="run the surrogate reconstructor over an observation")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--mode", choices=("plain", "masked", "augmented"), default="plain")
    p.add_argument("--config", help="JSON file overriding surrogate and mode parameters")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("stop", help="score stopping criteria on a trajectory bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--criteria", default="csr", help=f"comma list from {','.join(CRITERIA)}")
    p.add_argument("--window", type=int, default=1000, help="variance window, in iterations")
    p.add_argument("--burn-in-frac", type=float, default=0.05)
    p.add_argument("--out", help="report JSON path (default stdout)")
    p.add_argument("--curves-dir", help="write per-criterion curves as CSV here")
    p.set_defaults(func=cmd_stop)

    p = sub.add_parser("eval", help="aggregate stop reports into a gap table")
    p.add_argument("--reports", nargs="+", required=True)
    p.add_argument("--clean", help="clean image for bundles that lack one")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-lambda", help="select a quadratic-penalty weight")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--grid-spec", help="lo:hi:count, log-spaced (default 1e-3:1e2:40)")
    p.add_argument("--clean", help="clean image for an oracle comparison")
    p.add_argument("--out", help="JSON path (default stdout)")
    p.set_defaults(func=cmd_sweep_lambda)

    p = sub.add_parser("verify", help="run the empirical check suite")
    p.add_argument("--suite", default="all", help=f"one of all, {', '.join(SUITE)}")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", help="JSON path (default stdout)")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except PseudostopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc!r}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
