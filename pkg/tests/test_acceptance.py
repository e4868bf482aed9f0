"""Acceptance gate: one test per shipped guarantee, one PASS/FAIL line each.

Every test measures the quantity the guarantee bounds, prints a single
line with the observed constants (visible under pytest -s; repeated in
the assertion message on failure), and enforces the runtime budget the
guarantee ships with.
"""

import json
import math
import time

import numpy as np
import pytest

from pseudostop.bundle import BundleMeta, bundle_image, read_bundle, write_bundle
from pseudostop.cli import main as cli_main
from pseudostop.core import (
    ImageTensor,
    Trajectory,
    dft2,
    mse,
    psnr,
    spectral_mean_frequency,
)
from pseudostop.errors import CorruptBundleError
from pseudostop.noise import NoiseSpec, corrupt, sample_mask
from pseudostop.regparam import LambdaGrid, oracle_lambda, select_lambda, tikhonov_denoise
from pseudostop.scenes import synthetic_gray, synthetic_rgb
from pseudostop.surrogate import SurrogateConfig, run_masked, run_plain
from pseudostop.criteria import sure_curve
from pseudostop.verify import (
    RATIO_WINDOW,
    check_alpha_star,
    check_mask_theorem,
    check_operator_theorem,
    check_single_reference,
    stopping_quality,
)


def _line(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def _wave(h: int, w: int, u: int, v: int) -> np.ndarray:
    a = np.arange(h)[:, None]
    b = np.arange(w)[None, :]
    return np.cos(2.0 * np.pi * (u * a / h + v * b / w))


# ---------------------------------------------------------------------------
# 1. transform oracle


def test_transform_matches_direct_summation():
    start = time.monotonic()
    rng = np.random.default_rng(101)
    worst_rms = 0.0
    worst_parseval = 0.0
    for _ in range(20):
        h, w = (int(x) for x in rng.integers(1, 9, size=2))
        plane = rng.standard_normal((h, w))
        direct = np.zeros((h, w), dtype=complex)
        for u in range(h):
            for v in range(w):
                acc = 0.0 + 0.0j
                for a in range(h):
                    for b in range(w):
                        acc += plane[a, b] * np.exp(-2j * np.pi * (u * a / h + v * b / w))
                direct[u, v] = acc
        spectrum = dft2(plane)
        worst_rms = max(worst_rms, float(np.sqrt(np.mean(np.abs(spectrum - direct) ** 2))))
        lhs = float(np.sum(plane * plane))
        rhs = float(np.sum(np.abs(spectrum) ** 2)) / (h * w)
        worst_parseval = max(worst_parseval, abs(lhs - rhs) / abs(lhs))
    elapsed = time.monotonic() - start
    ok = worst_rms <= 1e-9 and worst_parseval <= 1e-6 and elapsed < 1.0
    _line(
        "transform-oracle",
        ok,
        f"20 planes, worst_rms={worst_rms:.2e} (<=1e-9), "
        f"worst_parseval={worst_parseval:.2e} (<=1e-6), elapsed={elapsed:.2f}s (<1s)",
    )


# ---------------------------------------------------------------------------
# 2. spectral score reference points


def test_spectral_score_reference_points():
    h, w = 16, 16
    constant = spectral_mean_frequency(ImageTensor(np.full((1, h, w), 0.7)))
    single = spectral_mean_frequency(ImageTensor(_wave(h, w, 1, 0)[None]))
    mix = spectral_mean_frequency(ImageTensor((_wave(h, w, 1, 0) + _wave(h, w, 0, 2))[None]))
    errs = (abs(constant - 0.0), abs(single - 1.0), abs(mix - 2.5))
    ok = all(e <= 1e-9 for e in errs)
    _line(
        "spectral-score",
        ok,
        f"constant={constant!r}, single={single!r}, mix={mix!r} "
        f"(targets 0, 1, 2.5, each to 1e-9)",
    )


# ---------------------------------------------------------------------------
# 3. blend-weight toy model


def test_blend_weight_model_on_random_pairs():
    start = time.monotonic()
    rng = np.random.default_rng(103)
    worst_alpha = 0.0
    worst_ratio = 0.0
    ok = True
    for _ in range(10):
        s = float(rng.uniform(0.005, 0.5))
        eta = float(rng.uniform(0.05, 0.6))
        report = check_alpha_star(shared_energy=s, eta_std=eta)
        ok = ok and report.passed
        worst_alpha = max(
            worst_alpha, abs(report.metrics["alpha_brute"] - report.metrics["alpha_formula"])
        )
        for m, ratio in report.metrics["excess_ratios"].items():
            worst_ratio = max(worst_ratio, abs(ratio - (int(m) + 1)) / (int(m) + 1))
    elapsed = time.monotonic() - start
    ok = ok and elapsed < 1.0
    _line(
        "blend-weight-model",
        ok,
        f"10 pairs, worst_alpha_offset={worst_alpha:.2e} (<=grid step 5e-4), "
        f"worst_ratio_err={worst_ratio:.2e} (<=1e-2), elapsed={elapsed:.2f}s (<1s)",
    )


# ---------------------------------------------------------------------------
# 4. single-reference concentration rate


def test_single_reference_concentration_rate():
    start = time.monotonic()
    report = check_single_reference()
    elapsed = time.monotonic() - start
    (ratio,) = report.metrics["ratios"]
    ok = report.passed and elapsed < 60.0
    _line(
        "single-reference-scaling",
        ok,
        f"50 trials, D(1e3)/D(1e5)={ratio:.2f} (in {list(RATIO_WINDOW)}), "
        f"elapsed={elapsed:.1f}s (<60s)",
    )


# ---------------------------------------------------------------------------
# 5. held-out deviation and insensitivity


def test_masked_holdout_deviation_and_insensitivity():
    start = time.monotonic()
    report = check_mask_theorem()

    clean = synthetic_rgb(24, 24, 105)
    y = corrupt(clean, NoiseSpec("gaussian", 0.26), 106)
    mask = sample_mask(24, 24, 0.9, 107)
    cfg = SurrogateConfig(iterations=200, stride=50)
    base = run_masked(y, mask, cfg).stacked()
    eps = 1e-4
    sens = 0.0
    for i, j in np.argwhere(mask.held_out_bool)[:3]:
        bumped = y.copy()
        bumped.data[0, i, j] += eps
        moved = run_masked(bumped, mask, cfg).stacked()
        sens = max(sens, float(np.max(np.abs(moved - base))) / eps)
    elapsed = time.monotonic() - start

    ok = report.passed and sens <= 1e-8 and elapsed < 60.0
    _line(
        "masked-holdout",
        ok,
        f"noiseless_dev={report.metrics['noiseless_deviation']!r} (==0), "
        f"m-ratio={report.metrics['ratio']:.2f} (in {list(RATIO_WINDOW)}), "
        f"held_out_sensitivity={sens:.2e} (<=1e-8), elapsed={elapsed:.1f}s (<60s)",
    )


# ---------------------------------------------------------------------------
# 6. measurement-operator reductions


def test_measurement_operator_reductions():
    start = time.monotonic()
    report = check_operator_theorem()
    elapsed = time.monotonic() - start
    m = report.metrics
    _line(
        "measurement-operators",
        report.passed,
        f"identity_bitwise={m['identity_bitwise']}, mask_bitwise={m['mask_bitwise']}, "
        f"near_oracle={m['near_oracle']}/10, elapsed={elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# 7. unbiased risk estimate


def test_unbiased_risk_estimate():
    start = time.monotonic()
    sigma = 0.26
    clean = synthetic_gray(32, 32, 51)
    cfg = SurrogateConfig(iterations=100, stride=20)
    spec = NoiseSpec("gaussian", sigma)
    draws = 200
    diffs = np.empty((draws, 5))
    for k in range(draws):
        y = corrupt(clean, spec, 1000 + k)
        traj = run_plain(y, cfg)
        curve = sure_curve(traj, y, sigma)
        for t in range(5):
            diffs[k, t] = curve.values[t] - mse(traj.frames[t], clean)
    mean = diffs.mean(axis=0)
    se = diffs.std(axis=0, ddof=1) / math.sqrt(draws)
    worst = float(np.max(np.abs(mean) / (3.0 * se)))
    elapsed = time.monotonic() - start
    ok = worst <= 1.0 and elapsed < 120.0
    _line(
        "unbiased-risk",
        ok,
        f"200 draws x 5 checkpoints, worst |mean|/(3 SE)={worst:.2f} (<=1), "
        f"elapsed={elapsed:.1f}s (<120s)",
    )


# ---------------------------------------------------------------------------
# 8. stopping quality on shared scenes


def test_stopping_quality_gaps():
    start = time.monotonic()
    out = stopping_quality()
    elapsed = time.monotonic() - start
    gap = out["mean_gap"]
    ok = (
        out["interior"] >= 9
        and gap["csr"] <= 0.5
        and gap["acr"] <= 0.5
        and gap["mr"] <= 0.7
        and gap["csr"] < gap["wmv"]
        and gap["acr"] < gap["wmv"]
        and gap["mr"] < gap["wmv"]
        and elapsed < 300.0
    )
    _line(
        "stopping-quality",
        ok,
        f"interior={out['interior']}/10 (>=9), mean gaps dB: "
        f"csr={gap['csr']:.3f} (<=0.5), acr={gap['acr']:.3f} (<=0.5), "
        f"mr={gap['mr']:.3f} (<=0.7), wmv={gap['wmv']:.3f} (each rule < wmv), "
        f"elapsed={elapsed:.0f}s (<300s)",
    )


# ---------------------------------------------------------------------------
# 9. quadratic-penalty selection


def _descend(y: np.ndarray, lam: float, tol=1e-10) -> np.ndarray:
    x = y.copy()
    step = 1.0 / (1.0 + 8.0 * lam)
    for _ in range(200_000):
        gu, gv = np.roll(x, -1, 0) - x, np.roll(x, -1, 1) - x
        div = (gu - np.roll(gu, 1, 0)) + (gv - np.roll(gv, 1, 1))
        g = (x - y) - lam * div
        if float(np.max(np.abs(g))) < tol:
            break
        x = x - step * g
    return x


def test_quadratic_penalty_selection():
    start = time.monotonic()
    rng = np.random.default_rng(109)
    plane = rng.random((12, 12))
    solver_err = max(
        float(np.max(np.abs(tikhonov_denoise(plane, lam) - _descend(plane, lam))))
        for lam in (0.1, 0.5, 2.0)
    )

    grid = LambdaGrid.log_default()
    sigma = 25.0 / 255.0
    worst_steps = 0
    for k in range(5):
        clean = synthetic_rgb(64, 64, 23 + k)
        y = corrupt(clean, NoiseSpec("gaussian", sigma), 229 + k)
        pair, lam, _ = select_lambda(y, grid)
        lam_star, _ = oracle_lambda(y, clean, pair[0], grid)
        steps = abs(grid.values.index(lam) - grid.values.index(lam_star))
        worst_steps = max(worst_steps, steps)
    elapsed = time.monotonic() - start
    ok = solver_err <= 1e-6 and worst_steps <= 1 and elapsed < 60.0
    _line(
        "penalty-selection",
        ok,
        f"closed_vs_iterative={solver_err:.2e} (<=1e-6), "
        f"5 scenes at sigma=25/255, worst grid distance={worst_steps} (<=1 log step), "
        f"elapsed={elapsed:.1f}s (<60s)",
    )


# ---------------------------------------------------------------------------
# 10. bundle round trip and full pipeline


def test_bundle_round_trip_and_cli_pipeline(tmp_path):
    start = time.monotonic()

    rng = np.random.default_rng(110)
    frames = [ImageTensor(rng.random((3, 8, 8)).astype(np.float32)) for _ in range(4)]
    traj = Trajectory(frames, [10, 20, 30, 40], divergence=[0.1, 0.2, 0.3, 0.4])
    meta = BundleMeta(
        y=ImageTensor(rng.random((3, 8, 8)).astype(np.float32)),
        noise_family="gaussian",
        noise_level=0.26,
    )
    path = write_bundle(traj, meta, tmp_path / "roundtrip")
    loaded, _ = read_bundle(path)
    bitwise = all(
        np.array_equal(a.data, b.data) for a, b in zip(loaded.frames, traj.frames)
    ) and loaded.iterations == traj.iterations

    blob = bytearray((path / "frames.bin").read_bytes())
    blob[5] ^= 0x01
    (path / "frames.bin").write_bytes(bytes(blob))
    with pytest.raises(CorruptBundleError):
        read_bundle(path)

    image = tmp_path / "scene.npy"
    np.save(image, synthetic_rgb(64, 64, 111).data)
    obs = tmp_path / "obs"
    assert cli_main([
        "corrupt", "--in", str(image), "--family", "gaussian",
        "--level", "0.26", "--seed", "5", "--out", str(obs),
    ]) == 0

    reports = []
    for mode, criteria in (("plain", "csr,wmv,sure"), ("masked", "mr"), ("augmented", "acr")):
        bundle = tmp_path / f"bundle-{mode}"
        report = tmp_path / f"report-{mode}.json"
        assert cli_main(["run", "--in", str(obs), "--mode", mode, "--out", str(bundle)]) == 0
        assert cli_main([
            "stop", "--bundle", str(bundle), "--criteria", criteria, "--out", str(report),
        ]) == 0
        reports.append(report)
    eval_ok = (
        cli_main(
            ["eval", "--reports"]
            + [str(r) for r in reports]
            + ["--out", str(tmp_path / "gaps.csv")]
        )
        == 0
    )

    report = json.loads(reports[0].read_text())
    traj, manifest = read_bundle(tmp_path / "bundle-plain")
    clean = bundle_image(tmp_path / "bundle-plain", manifest, "clean")
    psnrs = [psnr(mse(f, clean), clean.peak) for f in traj.frames]
    recompute_err = 0.0
    for entry in report["criteria"].values():
        idx = traj.iterations.index(entry["selected_iteration"])
        recompute_err = max(
            recompute_err, abs((max(psnrs) - psnrs[idx]) - entry["gap_db"])
        )
    elapsed = time.monotonic() - start

    ok = bitwise and eval_ok and recompute_err <= 1e-9 and elapsed < 60.0
    _line(
        "bundle-pipeline",
        ok,
        f"round_trip_bitwise={bitwise}, corruption detected, eval_ok={eval_ok}, "
        f"gap_recompute_err={recompute_err:.1e} (<=1e-9), elapsed={elapsed:.1f}s (<60s)",
    )
