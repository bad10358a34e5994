"""Command-line interface: render, errormap, dataset, benchmark, corruption, serve."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import benchmark as bench
from .errormap import (DEFAULT_TAU_D, alpha_beta, boundary_field, error_map_improved)
from .fusion import RenderRequest, focus_from_point, render
from .multiscale import NR_MODES, CoreConfig
from .oracle import DatasetSpec, generate_dataset
from .raster import (ApertureSpec, RenderParams, load_disparity, load_image,
                     normalize_disparity, resize_bilinear, save_image, write_pfm)

MODE_NAMES = {"hybrid": "hybrid", "classical": "classical_only", "neural": "neural_only"}


def _parse_focus(value: str, disparity: np.ndarray) -> float:
    """--focus is either a refocused disparity in [0, 1] or an 'x,y' image
    point resolved through the median-window protocol."""
    if "," in value:
        x_s, y_s = value.split(",", 1)
        return focus_from_point(disparity, int(x_s), int(y_s))
    d_f = float(value)
    if not 0.0 <= d_f <= 1.0:
        raise ValueError(f"--focus disparity must be in [0, 1], got {d_f}")
    return d_f


def _load_inputs(args):
    image = load_image(args.image)
    disparity = normalize_disparity(load_disparity(args.disparity))
    if disparity.shape != image.shape[:2]:
        disparity = resize_bilinear(disparity, image.shape[1], image.shape[0])
    return image, disparity


def cmd_render(args) -> int:
    image, disparity = _load_inputs(args)
    d_f = _parse_focus(args.focus, disparity)
    params = RenderParams(K=args.K, d_f=d_f, gamma=args.gamma,
                          aperture=ApertureSpec(args.blades, args.rotation))
    cfg = CoreConfig.from_mode(args.nr_mode)
    result = render(RenderRequest(image, disparity, params, cfg, MODE_NAMES[args.mode]))
    out = Path(args.out)
    save_image(out, np.clip(result.image, 0.0, 1.0))
    if args.dump_intermediates:
        stem = out.with_suffix("")
        if result.classical is not None:
            save_image(f"{stem}_classical.png", np.clip(result.classical, 0, 1))
        if result.neural is not None:
            save_image(f"{stem}_neural.png", np.clip(result.neural, 0, 1))
        write_pfm(f"{stem}_errormap.pfm", result.error_map)
        save_image(f"{stem}_errormap.png",
                   np.repeat(result.error_map[:, :, None], 3, axis=2))
    print(f"wrote {out} (d_f={d_f:.4f})")
    return 0


def cmd_errormap(args) -> int:
    disparity = normalize_disparity(load_disparity(args.disparity))
    d_f = _parse_focus(args.focus, disparity)
    params = RenderParams(K=args.K, d_f=d_f)
    radius = max(1, int(np.ceil(params.K)) + 1)
    field = boundary_field(disparity, tau_d=args.tau_d, search_radius=radius)
    alpha, beta = alpha_beta(field, disparity, params)
    E = error_map_improved(alpha, beta)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    write_pfm(f"{prefix}_e.pfm", E)
    write_pfm(f"{prefix}_alpha.pfm", np.minimum(alpha, 1e6))
    write_pfm(f"{prefix}_beta.pfm", beta)
    save_image(f"{prefix}_e.png", np.repeat(E[:, :, None], 3, axis=2))
    print(f"wrote {prefix}_e.pfm, _alpha.pfm, _beta.pfm, _e.png")
    return 0


def cmd_dataset(args) -> int:
    spec = DatasetSpec(scene_count=args.scenes,
                       K_grid=tuple(args.k_grid), d_f_grid=tuple(args.df_grid),
                       gamma_grid=tuple(args.gamma_grid), seed=args.seed)
    manifest = generate_dataset(spec, args.out, width=args.width, height=args.height,
                                samples=args.samples)
    n = sum(len(s["bokeh"]) for s in manifest["scenes"])
    print(f"wrote {len(manifest['scenes'])} scenes, {n} bokeh images to {args.out}")
    return 0


def cmd_benchmark(args) -> int:
    scenes = bench.benchmark_scenes(args.scenes, args.size, args.size,
                                    seed=args.seed, min_gap=args.min_gap)
    report = bench.run_benchmark(scenes, args.methods, args.levels, out_dir=args.out,
                                 samples=args.samples)
    for key, stats in report["summary"].items():
        print(f"{key}: psnr {stats['psnr_mean']:.2f} ssim {stats['ssim_mean']:.4f} "
              f"time {stats['seconds_mean']:.2f}s")
    return 0


def cmd_corruption(args) -> int:
    scenes = bench.benchmark_scenes(args.scenes, args.size, args.size, seed=args.seed)
    report = bench.run_corruption(scenes, K=args.K, method=args.method, out_dir=args.out,
                                  samples=args.samples)
    for key, stats in report["summary"].items():
        print(f"{key}: psnr {stats['psnr_mean']:.2f}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    ui_dir = Path(args.ui_dir) if args.ui_dir else Path("frontend/dist")
    app = create_app(ui_dir=str(ui_dir) if ui_dir.is_dir() else None)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="refocus",
                                description="Hybrid depth-of-field rendering from an image and a disparity map")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("render", help="render a bokeh image")
    r.add_argument("--image", required=True)
    r.add_argument("--disparity", required=True)
    r.add_argument("--K", type=float, required=True, help="blur scale in pixels per unit disparity")
    r.add_argument("--focus", required=True, help="refocused disparity in [0,1] or an 'x,y' point")
    r.add_argument("--gamma", type=float, default=2.2)
    r.add_argument("--blades", type=int, default=0, help="aperture blade count, 0 = circle")
    r.add_argument("--rotation", type=float, default=0.0, help="aperture rotation in radians")
    r.add_argument("--mode", choices=sorted(MODE_NAMES), default="hybrid")
    r.add_argument("--nr-mode", choices=NR_MODES, default="full")
    r.add_argument("--out", required=True)
    r.add_argument("--dump-intermediates", action="store_true")
    r.set_defaults(func=cmd_render)

    e = sub.add_parser("errormap", help="dump error map and boundary variables")
    e.add_argument("--disparity", required=True)
    e.add_argument("--K", type=float, required=True)
    e.add_argument("--focus", required=True)
    e.add_argument("--tau-d", type=float, default=DEFAULT_TAU_D)
    e.add_argument("--out-prefix", required=True)
    e.set_defaults(func=cmd_errormap)

    d = sub.add_parser("dataset", help="generate a synthetic two-plane dataset")
    d.add_argument("--out", required=True)
    d.add_argument("--scenes", type=int, default=2)
    d.add_argument("--width", type=int, default=256)
    d.add_argument("--height", type=int, default=256)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--samples", type=int, default=256)
    d.add_argument("--k-grid", type=float, nargs="+", default=[12.0, 24.0])
    d.add_argument("--df-grid", type=float, nargs="+",
                   default=[round(0.05 * i, 2) for i in range(1, 21)])
    d.add_argument("--gamma-grid", type=float, nargs="+", default=[1, 2, 3, 4, 5])
    d.set_defaults(func=cmd_dataset)

    b = sub.add_parser("benchmark", help="score methods against the reference renderer")
    b.add_argument("--out", required=True)
    b.add_argument("--scenes", type=int, default=10)
    b.add_argument("--size", type=int, default=256)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--min-gap", type=float, default=0.0)
    b.add_argument("--samples", type=int, default=256)
    b.add_argument("--levels", type=int, nargs="+", default=[1, 3, 5])
    b.add_argument("--methods", nargs="+", default=["hybrid", "classical", "neural"])
    b.set_defaults(func=cmd_benchmark)

    c = sub.add_parser("corruption", help="disparity corruption sweep")
    c.add_argument("--out", required=True)
    c.add_argument("--scenes", type=int, default=10)
    c.add_argument("--size", type=int, default=128)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--K", type=float, default=30.0)
    c.add_argument("--method", default="hybrid")
    c.add_argument("--samples", type=int, default=256)
    c.set_defaults(func=cmd_corruption)

    s = sub.add_parser("serve", help="run the HTTP rendering service")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8000)
    s.add_argument("--ui-dir", default=None, help="static web UI directory (default: frontend/dist if present)")
    s.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
