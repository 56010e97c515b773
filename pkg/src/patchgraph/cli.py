"""Command-line entry point: ``patchgraph {train,translate,graph-spectral,pool-attn,gradcheck}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import checkpoint
from .analysis import image_attention, image_spectrum
from .config import TrainConfig, load_config
from .errors import CheckpointError, ConfigError, NumericalError, PatchGraphError
from .gradcheck import run_gradcheck
from .imageio import ImageFormatError, read_ppm, write_pgm, write_ppm
from .model import PatchGraphModel
from .spectral import emit_eigenmaps, heatmap
from .training import train, translate

log = logging.getLogger("patchgraph")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_CHECK_FAILED = 0, 2, 3, 1


class UsageError(Exception):
    """Bad input from the user: missing file, malformed image, bad config."""


def _resolve_config(args, near=None):
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    elif near is not None and (Path(near).parent / "config.txt").exists():
        cfg = load_config(Path(near).parent / "config.txt")
    else:
        cfg = TrainConfig()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(model_seed=args.seed, data_seed=args.seed)
    return cfg.validate()


def _require(path, what):
    if not Path(path).exists():
        raise UsageError(f"{what} not found: {path}")


def _load(args):
    _require(args.checkpoint, "checkpoint")
    cfg = _resolve_config(args, near=args.checkpoint)
    model = PatchGraphModel(cfg)
    model.load_state_dict(checkpoint.load(args.checkpoint))
    return model


def _read_image(path, model):
    _require(path, "image")
    image = read_ppm(path)
    size = model.config.image_size
    if image.shape[1] % 4 or image.shape[2] % 4:
        raise UsageError(f"{path}: image {image.shape[2]}x{image.shape[1]} "
                         f"is not divisible by 4 (trained at {size}x{size})")
    return image


def cmd_train(args):
    cfg = _resolve_config(args)
    done = train(cfg, args.out, progress=_progress(cfg))
    print(f"wrote {done.checkpoint_path}")
    return EXIT_OK


def _progress(cfg):
    def report(row):
        if row["step"] % max(cfg.log_interval, 100) == 0:
            log.info("step %d total %.4f gnn_p0 %.4f", row["step"], row["total"],
                     row["loss_gnn_p0"])
    return report


def cmd_translate(args):
    model = _load(args)
    write_ppm(args.out, translate(model, _read_image(args.inp, model)))
    return EXIT_OK


def _write_map_csv(path, indices, grid, values):
    h, w = grid
    rows, cols = np.divmod(np.asarray(indices), w)
    lines = ["index,grid_row,grid_col,value"]
    lines += [f"{i},{r},{c},{v:.17g}" for i, r, c, v in zip(indices, rows, cols, values)]
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_graph_spectral(args):
    model = _load(args)
    image = _read_image(args.inp, model)
    spectrum = image_spectrum(model, image, args.layer, args.threshold, args.seed or 0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["rank,eigenvalue"] + [f"{i},{lam:.17g}"
                                   for i, lam in enumerate(spectrum.result.eigenvalues)]
    (out / "spectrum.csv").write_text("\n".join(lines) + "\n")
    for path in emit_eigenmaps(spectrum.result, spectrum.indices, spectrum.grid, out, k=args.k):
        print(path)
    return EXIT_OK


def cmd_pool_attn(args):
    model = _load(args)
    if not model.config.pooling_levels:
        raise UsageError("checkpoint was trained without pooling (pooling_levels = 0)")
    image = _read_image(args.inp, model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for maps in image_attention(model, image, args.seed or 0):
        for tag, values in (("in", maps.attn_in), ("out", maps.attn_out)):
            stem = out / f"attn_{tag}_layer{maps.layer}"
            _write_map_csv(stem.with_suffix(".csv"), maps.indices, maps.grid, values)
            write_pgm(stem.with_suffix(".pgm"), heatmap(values, maps.indices, maps.grid))
            print(stem.with_suffix(".csv"))
    return EXIT_OK


def cmd_gradcheck(args):
    cfg = _resolve_config(args)
    report = run_gradcheck(cfg, eps=args.eps, samples=args.samples, seed=args.seed or 0)
    ok = True
    for group, err in report.items():
        passed = err < args.tolerance
        ok &= passed
        print(f"{group:5s} worst relative error {err:.3e}  {'ok' if passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="patchgraph", formatter_class=fmt,
                                     description="Patch-graph contrastive image translation.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", formatter_class=fmt, help="train a model")
    p.add_argument("--config", help="key = value config file (defaults when omitted)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override model and data seeds")
    p.set_defaults(func=cmd_train)

    def checkpoint_args(p):
        p.add_argument("--checkpoint", required=True, help="checkpoint file")
        p.add_argument("--config", default=None,
                       help="architecture config (default: config.txt beside the checkpoint)")
        p.add_argument("--seed", type=int, default=None, help="patch sampling seed")

    p = sub.add_parser("translate", formatter_class=fmt, help="translate one PPM image")
    checkpoint_args(p)
    p.add_argument("--in", dest="inp", required=True, help="input PPM")
    p.add_argument("--out", required=True, help="output PPM")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("graph-spectral", formatter_class=fmt,
                       help="Laplacian eigenmaps of the patch adjacency")
    checkpoint_args(p)
    p.add_argument("--in", dest="inp", required=True, help="input PPM")
    p.add_argument("--layer", type=int, choices=(0, 1, 2), default=0, help="encoder tap")
    p.add_argument("--k", type=int, default=3, help="number of eigenmaps")
    p.add_argument("--threshold", type=float, default=None,
                   help="cosine threshold (default: the model's)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_graph_spectral)

    p = sub.add_parser("pool-attn", formatter_class=fmt, help="pooled attention heatmaps")
    checkpoint_args(p)
    p.add_argument("--in", dest="inp", required=True, help="input PPM")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_pool_attn)

    p = sub.add_parser("gradcheck", formatter_class=fmt,
                       help="finite-difference check of every parameter group")
    p.add_argument("--config", default=None, help="config file (defaults when omitted)")
    p.add_argument("--tolerance", type=float, default=1e-4, help="max relative error")
    p.add_argument("--eps", type=float, default=1e-6, help="central difference step")
    p.add_argument("--samples", type=int, default=6, help="entries checked per tensor")
    p.add_argument("--seed", type=int, default=None, help="model/entry seed")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ImageFormatError as exc:
        print(f"error: malformed image: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"error: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (CheckpointError, PatchGraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
