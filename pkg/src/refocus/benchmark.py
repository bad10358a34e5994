"""Benchmark harness: renders generated scenes against the reference
renderer and reports PSNR/SSIM/wall time per method and blur level, plus a
disparity-corruption sweep. Reports are written as JSON, CSV, an aligned
text table, and matplotlib figures."""

from __future__ import annotations

import csv
import json
import time
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .fusion import RenderRequest, render
from .metrics import psnr, ssim
from .multiscale import CoreConfig, NR_MODES
from .oracle import DEFAULT_SAMPLES, TwoPlaneScene, generate_scene, render_oracle
from .raster import RenderParams, dilate, erode, gaussian_blur

LEVEL_K = {1: 10.0, 2: 20.0, 3: 30.0, 4: 40.0, 5: 50.0}
CORRUPTION_KINDS = ("blur", "dilate", "erode")


def corrupt_disparity(D, kind: str, level: int) -> np.ndarray:
    """Degrade a disparity map: blur uses sigma = level, dilation and
    erosion use a (2*level+1) square kernel."""
    if level not in (1, 2, 3, 4, 5):
        raise ValueError(f"corruption level must be 1..5, got {level}")
    if kind == "blur":
        return gaussian_blur(D, float(level))
    if kind == "dilate":
        return dilate(D, 2 * level + 1)
    if kind == "erode":
        return erode(D, 2 * level + 1)
    raise ValueError(f"unknown corruption kind {kind!r}, expected one of {CORRUPTION_KINDS}")


def method_request(method: str, image, disparity, params: RenderParams,
                   R_hat: float = 10.0) -> RenderRequest:
    """Build a render request from a benchmark method name.

    Names: "hybrid", "classical", "neural", or "neural-<mode>" with one of
    the ablation modes (full, sfuse, clip, noclip, bilinear).
    """
    if method == "hybrid":
        return RenderRequest(image, disparity, params, CoreConfig(R_hat=R_hat), "hybrid")
    if method == "classical":
        return RenderRequest(image, disparity, params, CoreConfig(R_hat=R_hat), "classical_only")
    if method == "neural":
        return RenderRequest(image, disparity, params, CoreConfig(R_hat=R_hat), "neural_only")
    if method.startswith("neural-"):
        mode = method.split("-", 1)[1]
        if mode not in NR_MODES:
            raise ValueError(f"unknown ablation mode {mode!r}")
        return RenderRequest(image, disparity, params,
                             CoreConfig.from_mode(mode, R_hat=R_hat), "neural_only")
    raise ValueError(f"unknown method {method!r}")


def benchmark_scenes(count: int, width: int = 256, height: int = 256,
                     seed: int = 0, min_gap: float = 0.0) -> list[TwoPlaneScene]:
    """Deterministic scene suite; min_gap keeps only scenes whose disparity
    separation is at least that large (the source benchmark's full-range
    disparities always engage range reduction, so suites for the multi-scale
    ablations should too)."""
    scenes = []
    s = seed
    while len(scenes) < count:
        scene = generate_scene(s, width, height)
        s += 1
        if scene.d_fg - scene.d_bg >= min_gap:
            scenes.append(scene)
    return scenes


def run_benchmark(scenes, methods, levels, out_dir=None, gamma: float = 2.2,
                  samples: int = DEFAULT_SAMPLES, refocus: str = "background") -> dict:
    """Render every (scene, method, level) and score against the reference.

    refocus = "background" focuses each scene's background plane (the hard
    case for pixel scattering); "median" uses the median scene disparity.
    Returns the report dict; writes files when out_dir is given.
    """
    rows = []
    for level in levels:
        K = LEVEL_K[level]
        for si, scene in enumerate(scenes):
            d_f = scene.d_bg if refocus == "background" else float(np.median(scene.disparity()))
            params = RenderParams(K=K, d_f=d_f, gamma=gamma)
            truth = render_oracle(scene, params, samples)
            image = scene.composite()
            disparity = scene.disparity()
            for method in methods:
                req = method_request(method, image, disparity, params)
                t0 = time.perf_counter()
                result = render(req)
                dt = time.perf_counter() - t0
                rows.append({"scene": si, "method": method, "level": level,
                             "psnr": psnr(result.image, truth),
                             "ssim": ssim(result.image, truth),
                             "seconds": dt})
    report = {"kind": "benchmark", "levels": list(levels), "methods": list(methods),
              "scene_count": len(scenes), "rows": rows,
              "summary": _summarize(rows, key=("method", "level"))}
    if out_dir is not None:
        write_benchmark_report(report, out_dir)
    return report


def run_corruption(scenes, kinds=CORRUPTION_KINDS, levels=(1, 2, 3, 4, 5),
                   K: float = 30.0, method: str = "hybrid", out_dir=None,
                   gamma: float = 2.2, samples: int = DEFAULT_SAMPLES) -> dict:
    """Score one method on corrupted disparity maps against clean references."""
    rows = []
    for si, scene in enumerate(scenes):
        d_f = scene.d_bg
        params = RenderParams(K=K, d_f=d_f, gamma=gamma)
        truth = render_oracle(scene, params, samples)
        image = scene.composite()
        disparity = scene.disparity()
        for kind in kinds:
            for level in levels:
                corrupted = corrupt_disparity(disparity, kind, level)
                req = method_request(method, image, corrupted, params)
                result = render(req)
                rows.append({"scene": si, "kind": kind, "level": level,
                             "psnr": psnr(result.image, truth)})
    report = {"kind": "corruption", "K": K, "method": method, "levels": list(levels),
              "kinds": list(kinds), "scene_count": len(scenes), "rows": rows,
              "summary": _summarize(rows, key=("kind", "level"))}
    if out_dir is not None:
        write_corruption_report(report, out_dir)
    return report


def _summarize(rows, key) -> dict:
    groups: dict = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in key), []).append(row)
    out = {}
    for gkey, grows in sorted(groups.items(), key=str):
        stats = {}
        for metric in ("psnr", "ssim", "seconds"):
            vals = [r[metric] for r in grows if metric in r]
            if vals:
                stats[f"{metric}_mean"] = float(np.mean(vals))
        out["/".join(str(k) for k in gkey)] = stats
    return out


def _write_rows_csv(path, rows):
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def write_benchmark_report(report: dict, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "benchmark.json", "w") as f:
        json.dump(report, f, indent=2)
    _write_rows_csv(out_dir / "benchmark.csv", report["rows"])

    levels = report["levels"]
    lines = [f"{'method':<18}" + "".join(f"  Level {lv}: PSNR   SSIM    Time(s)" for lv in levels)]
    for method in report["methods"]:
        cells = []
        for lv in levels:
            s = report["summary"][f"{method}/{lv}"]
            cells.append(f"  {s['psnr_mean']:14.2f} {s['ssim_mean']:.4f} {s['seconds_mean']:8.3f}")
        lines.append(f"{method:<18}" + "".join(cells))
    (out_dir / "benchmark.txt").write_text("\n".join(lines) + "\n")

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for method in report["methods"]:
        ps = [report["summary"][f"{method}/{lv}"]["psnr_mean"] for lv in levels]
        ts = [report["summary"][f"{method}/{lv}"]["seconds_mean"] for lv in levels]
        axes[0].plot(levels, ps, marker="o", label=method)
        axes[1].plot(levels, ts, marker="o", label=method)
    axes[0].set_xlabel("blur level")
    axes[0].set_ylabel("PSNR (dB)")
    axes[1].set_xlabel("blur level")
    axes[1].set_ylabel("wall time (s)")
    for ax in axes:
        ax.grid(True, alpha=0.3)
        ax.legend()
    fig.tight_layout()
    fig.savefig(out_dir / "benchmark.png", dpi=130)
    plt.close(fig)


def write_corruption_report(report: dict, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "corruption.json", "w") as f:
        json.dump(report, f, indent=2)
    _write_rows_csv(out_dir / "corruption.csv", report["rows"])

    levels = report["levels"]
    lines = [f"{'kind':<10}" + "".join(f"  L{lv} PSNR" for lv in levels)]
    for kind in report["kinds"]:
        cells = [f"  {report['summary'][f'{kind}/{lv}']['psnr_mean']:7.2f}" for lv in levels]
        lines.append(f"{kind:<10}" + "".join(cells))
    (out_dir / "corruption.txt").write_text("\n".join(lines) + "\n")

    fig, ax = plt.subplots(figsize=(6, 4))
    for kind in report["kinds"]:
        ps = [report["summary"][f"{kind}/{lv}"]["psnr_mean"] for lv in levels]
        ax.plot(levels, ps, marker="o", label=kind)
    ax.set_xlabel("corruption level")
    ax.set_ylabel("PSNR (dB)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_dir / "corruption.png", dpi=130)
    plt.close(fig)
