"""Command-line entry points.

Subcommands: enhance, degrade, evaluate, build-profile, selftest.  Exit
codes: 0 success, 1 configuration error, 2 I/O error, 3 numerical failure,
4 self-test failure.  Every writing command drops a ``manifest.cfg`` next
to its outputs that echoes the fully resolved configuration; re-running
with ``--config manifest.cfg`` reproduces the run bit for bit.
"""

from __future__ import annotations

import argparse
import csv
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from . import frameio, intra, metrics, quality
from .config import ConfigError, RunConfig, apply_overrides, parse_config, render_config
from .degrade import degrade_sequence
from .frameio import FrameIOError, read_sequence, write_sequence
from .pipeline import enhance_sequence
from .selftest import run_selftest
from .solver import NumericalError

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_NUMERICAL = 3
EXIT_SELFTEST = 4


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; route that through the
    # config-error path instead
    def error(self, message: str) -> None:  # type: ignore[override]
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="relight", description="Low-light video enhancement toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="config file (key = value sections)")
        p.add_argument("--seed", type=int, help="base RNG seed")
        p.add_argument("--threads", type=int, help="worker threads (never changes results)")

    p = sub.add_parser("enhance", help="enhance a low-light sequence")
    common(p)
    p.add_argument("--input", required=True, help="input sequence (dir or .y4m)")
    p.add_argument("--output", required=True, help="output directory (or .y4m path)")
    p.add_argument("--format", choices=frameio.FORMATS, help="output container")
    p.add_argument("--reference", help="clean reference for metrics")
    p.add_argument("--profile", help="illumination profile file")
    p.add_argument("--model", help="quality model file")
    p.add_argument("--stages", type=int, help="number of unrolled stages")
    p.add_argument("--omega", type=float, help="noise-mask width")

    p = sub.add_parser("degrade", help="apply the synthetic low-light model")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--format", choices=frameio.FORMATS)
    p.add_argument("--gain", type=float, help="attenuation in (0, 1]")
    p.add_argument("--shot", type=float, help="signal-dependent noise coefficient")
    p.add_argument("--read", type=float, help="read-noise sigma")
    p.add_argument("--quantize", action="store_true", default=None, help="round to the 8-bit grid")

    p = sub.add_parser("evaluate", help="compute metrics for a sequence")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--reference", help="clean reference sequence")
    p.add_argument("--output", help="CSV report path (default: report to stdout only)")

    p = sub.add_parser("build-profile", help="learn an illumination profile from footage")
    common(p)
    p.add_argument("--corpus", required=True, help="directory or .y4m of well-exposed frames")
    p.add_argument("--out", required=True, help="profile file to write")

    p = sub.add_parser("selftest", help="run the bundled acceptance checks")
    common(p)
    p.add_argument("--model", help="quality model file to exercise")
    p.add_argument("--profile", help="illumination profile file to exercise")
    p.add_argument("--only", help="comma-separated check name filter")
    return parser


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = parse_config(args.config) if args.config else RunConfig()
    overrides = {}
    for key in (
        "seed", "threads", "stages", "omega", "gain", "shot", "read", "quantize",
    ):
        if hasattr(args, key):
            overrides[key] = getattr(args, key)
    return apply_overrides(cfg, overrides)


def _write_manifest(directory: Path, cfg: RunConfig) -> None:
    try:
        version = metadata.version("relight")
    except metadata.PackageNotFoundError:
        version = "unknown"
    header = (
        f"# relight {version}, numpy {np.__version__}\n"
        f"# reproduce with: --config <this file>\n"
    )
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "manifest.cfg").write_text(header + render_config(cfg))


def _load_profile(path: str | None) -> intra.IlluminationProfile:
    if path is None:
        return intra.default_profile()
    if not Path(path).exists():
        raise FrameIOError(f"missing profile file {path}")
    try:
        return intra.load_profile(path)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _load_model(path: str | None) -> quality.QualityModel:
    if path is None:
        return quality.default_model()
    if not Path(path).exists():
        raise FrameIOError(f"missing quality model file {path}")
    try:
        return quality.load_model(path)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _out_dir(output: str, fmt: str) -> Path:
    path = Path(output)
    return path.parent if fmt == "y4m" else path


def _cmd_enhance(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    seq = read_sequence(args.input)
    profile = _load_profile(args.profile)
    model = _load_model(args.model)
    fmt = args.format or ("y4m" if str(args.output).endswith(".y4m") else "png_seq")
    telemetry: list[tuple[int, int, int, float, float]] = []
    out, _selections = enhance_sequence(seq, cfg.pipeline(), profile, model, telemetry=telemetry)
    written = write_sequence(out, args.output, fmt)
    try:
        out_dir = _out_dir(args.output, fmt)
        _write_manifest(out_dir, cfg)
        with open(out_dir / "telemetry.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frame", "stage", "inner_iter", "r_s", "r_t"])
            for row in telemetry:
                writer.writerow([row[0], row[1], row[2], f"{row[3]:.6e}", f"{row[4]:.6e}"])
        reference = read_sequence(args.reference) if args.reference else None
        rep = metrics.report(out, reference)
        metrics.write_report(rep, out_dir / "metrics.csv")
    except Exception:
        for p in written:
            p.unlink(missing_ok=True)
        raise
    if rep.mean_psnr is not None:
        print(f"psnr {rep.mean_psnr:.4f} ssim {rep.mean_ssim:.4f} warp {rep.warp:.4f} mabd {rep.mabd:.4f}")
    else:
        print(f"warp {rep.warp:.4f} mabd {rep.mabd:.4f}")
    return EXIT_OK


def _cmd_degrade(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    seq = read_sequence(args.input)
    out = degrade_sequence(seq, cfg.degrade_params())
    fmt = args.format or ("y4m" if str(args.output).endswith(".y4m") else "png_seq")
    write_sequence(out, args.output, fmt)
    _write_manifest(_out_dir(args.output, fmt), cfg)
    return EXIT_OK


def _cmd_evaluate(args: argparse.Namespace) -> int:
    seq = read_sequence(args.input)
    reference = read_sequence(args.reference) if args.reference else None
    rep = metrics.report(seq, reference)
    if args.output:
        metrics.write_report(rep, args.output)
    if rep.mean_psnr is not None:
        print(f"psnr {rep.mean_psnr:.4f} ssim {rep.mean_ssim:.4f} warp {rep.warp:.4f} mabd {rep.mabd:.4f}")
    else:
        print(f"warp {rep.warp:.4f} mabd {rep.mabd:.4f}")
    return EXIT_OK


def _cmd_build_profile(args: argparse.Namespace) -> int:
    seq = read_sequence(args.corpus)
    profile = intra.build_profile(seq.frames)
    intra.save_profile(profile, args.out)
    print(f"profile of {len(seq)} frames -> {args.out}")
    return EXIT_OK


def _cmd_selftest(args: argparse.Namespace) -> int:
    only = args.only.split(",") if args.only else None
    results = run_selftest(only=only, model_path=args.model, profile_path=args.profile)
    failed = 0
    for res in results:
        tag = "PASS" if res.ok else "FAIL"
        print(f"{tag}: {res.name} - {res.detail}")
        failed += 0 if res.ok else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_SELFTEST


_COMMANDS = {
    "enhance": _cmd_enhance,
    "degrade": _cmd_degrade,
    "evaluate": _cmd_evaluate,
    "build-profile": _cmd_build_profile,
    "selftest": _cmd_selftest,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FrameIOError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
