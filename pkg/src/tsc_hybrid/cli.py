"""``tsc`` command line: ``run`` a model matrix, ``grid`` search Inception, ``report`` a results dir.

Every flag can also be given in a ``key=value`` file passed with ``--config``;
keys use the flag name without leading dashes (``batch-size`` or ``batch_size``).
Flags on the command line win over the file.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .backbone import BackboneConfig
from .encoders import FAMILIES, EncoderConfig, InvalidConfigError
from .experiment import MODES, ExperimentSpec, emit_reports, grid_search, read_results_csv, run_matrix
from .trainer import TrainConfig


def _csv(cast):
    def parse(text: str):
        return [cast(x) for x in str(text).split(",") if x.strip()]

    parse.__name__ = f"{cast.__name__}_list"
    return parse


def _families(text: str) -> list[str]:
    names = list(FAMILIES) if text == "all" else _csv(str)(text)
    bad = [n for n in names if n not in FAMILIES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown encoder family {bad[0]!r}; choose from {', '.join(FAMILIES)}")
    return names


def _modes(text: str) -> list[str]:
    names = list(MODES) if text == "both" else _csv(str)(text)
    bad = [n for n in names if n not in MODES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown mode {bad[0]!r}; choose plain, hybrid or both")
    return names


def read_config_file(path) -> dict[str, str]:
    """``key=value`` lines; blank lines and ``#`` comments are ignored."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.lstrip("-").replace("-", "_")] = value
    return values


def _add_common(p: argparse.ArgumentParser, grid: bool) -> None:
    p.add_argument("--config", type=Path, help="key=value file mirroring these flags")
    p.add_argument("--data-dir", type=Path, default=Path("data"))
    p.add_argument("--datasets", type=_csv(str), default=None, help="comma-separated dataset names")
    p.add_argument("--mode", type=_modes, default=["hybrid"] if grid else ["plain"],
                   help="plain, hybrid, both, or a comma list")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--precision", choices=("float32", "float64"), default="float32")
    p.add_argument("--out", type=Path, default=Path("results"))
    p.add_argument("--workers", type=int, default=None, help="parallel runs (default: TSC_THREADS or 1)")
    p.add_argument("--no-znorm", action="store_true", help="skip per-series z-normalization")

    enc = p.add_argument_group("encoder")
    enc.add_argument("--hidden", type=int, default=128, help="latent width (hybrid runs use the backbone width)")
    enc.add_argument("--mlp-widths", type=_csv(int), default=[256, 256])
    enc.add_argument("--cnn-channels", type=_csv(int), default=[128, 256, 128])
    enc.add_argument("--resnet-channels", type=_csv(int), default=[128, 256, 128])
    enc.add_argument("--depth", type=int, default=6, help="number of Inception modules")
    enc.add_argument("--transformer-layers", type=int, default=2)
    enc.add_argument("--patch-len", type=int, default=8)
    if not grid:
        enc.add_argument("--n-kernels", type=int, default=3)
        enc.add_argument("--kernel-size", type=int, default=8)

    bb = p.add_argument_group("backbone")
    bb.add_argument("--bb-layers", type=int, default=4)
    bb.add_argument("--bb-hidden", type=int, default=128)
    bb.add_argument("--bb-heads", type=int, default=4)
    bb.add_argument("--max-len", type=int, default=256)
    bb.add_argument("--prompt-len", type=int, default=8)
    bb.add_argument("--bb-seed", type=int, default=0)
    bb.add_argument("--bb-weights", type=Path, default=None, help="checkpoint to load into the backbone")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsc", description=__doc__.splitlines()[0])
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("-v", "--verbose", action="store_true", help="log each finished run")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[shared], help="train every (dataset, encoder, mode) combination")
    _add_common(run, grid=False)
    run.add_argument("--encoder", type=_families, default=["inception"], help="family, comma list, or 'all'")
    run.add_argument("--lr", type=float, default=1e-3)

    grid = sub.add_parser("grid", parents=[shared], help="Inception lr x n_kernels x kernel-size sweep")
    _add_common(grid, grid=True)
    grid.add_argument("--lrs", type=_csv(float), default=[1e-3, 1e-4, 1e-5])
    grid.add_argument("--nkernels", type=_csv(int), default=[3, 4, 5, 6])
    grid.add_argument("--ksizes", type=_csv(int), default=[8, 16])

    report = sub.add_parser("report", parents=[shared], help="rebuild results.md from results.csv and print it")
    report.add_argument("--in", dest="indir", type=Path, required=True)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None) is None:
        return args
    # second pass: config values become defaults so explicit flags still override them
    sub = parser._subparsers._group_actions[0].choices[args.command]
    values = read_config_file(args.config)
    known = {a.dest: a for a in sub._actions}
    unknown = sorted(set(values) - set(known))
    if unknown:
        parser.error(f"{args.config}: unknown keys {', '.join(unknown)}")
    defaults = {}
    for key, text in values.items():
        action = known[key]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = text.lower() in ("1", "true", "yes", "on")
        else:
            defaults[key] = action.type(text) if action.type else text
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def spec_from_args(args) -> ExperimentSpec:
    if not args.datasets:
        raise InvalidConfigError("datasets", "pass --datasets a,b,...")
    grid = args.command == "grid"
    encoder = EncoderConfig(
        family="inception",
        hidden=args.hidden,
        mlp_widths=tuple(args.mlp_widths),
        cnn_channels=tuple(args.cnn_channels),
        resnet_channels=tuple(args.resnet_channels),
        depth=args.depth,
        layers=args.transformer_layers,
        patch_len=args.patch_len,
        **({} if grid else {"n_kernels": args.n_kernels, "kernel_size": args.kernel_size}),
    )
    backbone = BackboneConfig(layers=args.bb_layers, hidden=args.bb_hidden, heads=args.bb_heads,
                              max_len=args.max_len, prompt_len=args.prompt_len, seed=args.bb_seed).validate()
    train = TrainConfig(lr=args.lrs[0] if grid else args.lr, epochs=args.epochs,
                        batch_size=args.batch_size, seed=args.seed, precision=args.precision)
    spec = ExperimentSpec(
        data_dir=args.data_dir,
        datasets=list(args.datasets),
        families=["inception"] if grid else list(args.encoder),
        modes=list(args.mode),
        train=train,
        encoder=encoder,
        backbone=backbone,
        out_dir=args.out,
        seed=args.seed,
        normalize=not args.no_znorm,
        backbone_weights=args.bb_weights,
        workers=args.workers,
    )
    if grid:
        spec.lrs, spec.n_kernels, spec.ksizes = args.lrs, args.nkernels, args.ksizes
    return spec


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        if args.command == "report":
            table = read_results_csv(args.indir / "results.csv")
            _, md = emit_reports(table, args.indir)
            sys.stdout.write(md.read_text())
            return 0
        spec = spec_from_args(args)
        table = grid_search(spec) if args.command == "grid" else run_matrix(spec)
    except (InvalidConfigError, FileNotFoundError, ValueError, OSError) as exc:
        print(f"tsc: error: {exc}", file=sys.stderr)
        return 2
    failed = sum(r.status == "error" for r in table.rows)
    print(f"{len(table)} runs recorded in {spec.out_dir / 'results.csv'} ({failed} failed)")
    return 1 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
