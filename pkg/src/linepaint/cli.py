"""Command-line entrypoint.

Subcommands: forge, pretrain-f1, pretrain-f2, train, colorize, fid, serve.
Exit codes: 0 success, 2 bad arguments or inputs, 3 model load failure,
4 image decode failure.  Every command appends one record to a runs.jsonl
manifest next to its outputs, and output files are written atomically.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

from . import __version__

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MODEL = 3
EXIT_DECODE = 4

DEFAULT_BIND = "127.0.0.1:8313"


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _write_bytes_atomic(path: Path, payload: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json_atomic(path: Path, payload: dict) -> None:
    _write_bytes_atomic(path, json.dumps(payload, indent=2).encode())


def append_run_manifest(directory, command: str, config: dict,
                        inputs: list[str], outputs: list[str],
                        seed: int | None = None) -> None:
    """One append-only line per run: what ran, on what, producing what."""
    record = {
        "command": command,
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "version": __version__,
        "seed": seed,
        "config_sha256": hashlib.sha256(
            json.dumps(config, sort_keys=True, default=str).encode()).hexdigest(),
        "inputs": inputs,
        "outputs": outputs,
    }
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "runs.jsonl", "a") as fh:
        fh.write(json.dumps(record) + "\n")


# ------------------------------------------------------------------ commands


def cmd_forge(args) -> int:
    from .forge import forge_directory

    if not Path(args.input).is_dir():
        return _fail(EXIT_USAGE, f"input directory {args.input} does not exist")
    try:
        manifest = forge_directory(args.input, args.output, side=args.side, seed=args.seed)
    except ValueError as err:
        return _fail(EXIT_USAGE, str(err))
    append_run_manifest(args.output, "forge",
                        {"side": args.side, "seed": args.seed},
                        inputs=[args.input], outputs=[args.output],
                        seed=args.seed)
    print(f"forged {len(manifest['files'])} pairs into {args.output}")
    return EXIT_OK


def _load_corpus(directory: str):
    from .forge import load_forged_pairs

    try:
        return load_forged_pairs(directory)
    except (OSError, ValueError, KeyError) as err:
        raise SystemExit(_fail(EXIT_USAGE, f"cannot read forged corpus {directory}: {err}"))


def cmd_pretrain(args, kind: str) -> int:
    from .extractors import (LocalFeatureConfig, LocalFeatureNet,
                             PerceptualConfig, PerceptualFeatureNet,
                             PretrainConfig, derive_tags, pretrain_f1,
                             pretrain_f2, save_extractor_checkpoint)

    pairs = _load_corpus(args.corpus)
    config = PretrainConfig(epochs=args.epochs, seed=args.seed,
                            min_corpus=args.min_corpus)
    try:
        if kind == "f1":
            net = LocalFeatureNet(LocalFeatureConfig(
                base_width=args.width, out_channels=args.features))
            samples = [(p["line"], derive_tags(p["color"], p["line"])) for p in pairs]
            net, manifest = pretrain_f1(samples, config, net=net)
        else:
            net = PerceptualFeatureNet(PerceptualConfig(
                base_width=args.width, out_channels=args.features))
            net, manifest = pretrain_f2([p["color"] for p in pairs], config, net=net)
    except ValueError as err:
        return _fail(EXIT_USAGE, str(err))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=out.parent, prefix=f".{out.name}.")
    os.close(fd)
    save_extractor_checkpoint(net, tmp)
    os.replace(tmp, out)
    append_run_manifest(out.parent, f"pretrain-{kind}",
                        {"epochs": args.epochs, "width": args.width,
                         "features": args.features},
                        inputs=[args.corpus], outputs=[str(out)], seed=args.seed)
    print(f"saved {kind} checkpoint to {out} "
          f"(final train loss {manifest['train_loss'][-1]:.4f})")
    return EXIT_OK


def cmd_train(args) -> int:
    from .extractors import load_extractor_checkpoint
    from .training import Trainer, TrainConfig, TrainingAborted

    overrides = {}
    if args.config:
        try:
            with open(args.config) as fh:
                overrides = json.load(fh)
        except (OSError, json.JSONDecodeError) as err:
            return _fail(EXIT_USAGE, f"cannot read config {args.config}: {err}")
    for key, value in (("seed", args.seed), ("total_iterations", args.iterations),
                       ("batch_size", args.batch_size),
                       ("checkpoint_every", args.checkpoint_every)):
        if value is not None:
            overrides[key] = value

    dataset = _load_corpus(args.data)
    if args.resume:
        try:
            trainer = Trainer.resume(args.resume, dataset, out_dir=args.out)
        except FileNotFoundError:
            return _fail(EXIT_MODEL, f"checkpoint {args.resume} does not exist")
        except (ValueError, RuntimeError, KeyError) as err:
            return _fail(EXIT_MODEL, f"cannot resume from {args.resume}: {err}")
    else:
        if not (args.f1 and args.f2):
            return _fail(EXIT_USAGE, "--f1 and --f2 checkpoints are required "
                                     "unless resuming")
        try:
            config = TrainConfig.from_dict(overrides)
        except (ValueError, TypeError) as err:
            return _fail(EXIT_USAGE, f"bad training config: {err}")
        try:
            f1 = load_extractor_checkpoint(args.f1, "f1")
            f2 = load_extractor_checkpoint(args.f2, "f2")
        except FileNotFoundError as err:
            return _fail(EXIT_MODEL, f"extractor checkpoint missing: {err}")
        except (ValueError, RuntimeError) as err:
            return _fail(EXIT_MODEL, str(err))
        try:
            trainer = Trainer(config, dataset, f1, f2, out_dir=args.out)
        except ValueError as err:
            return _fail(EXIT_USAGE, str(err))

    append_run_manifest(args.out, "train", trainer.config.to_dict(),
                        inputs=[args.data] + [p for p in (args.f1, args.f2, args.resume) if p],
                        outputs=[args.out], seed=trainer.config.seed)
    try:
        final = trainer.fit()
    except TrainingAborted as err:
        return _fail(1, f"training aborted: {err}")
    print(f"finished at iteration {trainer.iteration}; final checkpoint {final}")
    return EXIT_OK


def cmd_colorize(args) -> int:
    from .inference import (DecodeFailure, DimensionMismatch, ImageTooLarge,
                            colorize_bytes, load_gan_checkpoint)

    try:
        model = load_gan_checkpoint(args.checkpoint)
    except FileNotFoundError:
        return _fail(EXIT_MODEL, f"checkpoint {args.checkpoint} does not exist")
    except (ValueError, RuntimeError, KeyError, EOFError) as err:
        return _fail(EXIT_MODEL, f"cannot load checkpoint {args.checkpoint}: {err}")

    try:
        line_png = Path(args.line_art).read_bytes()
        strokes_png = Path(args.strokes).read_bytes() if args.strokes else None
    except OSError as err:
        return _fail(EXIT_DECODE, f"cannot read input image: {err}")

    try:
        png, meta = colorize_bytes(model, line_png, strokes_png, max_side=args.max_side)
    except DecodeFailure as err:
        return _fail(EXIT_DECODE, str(err))
    except (DimensionMismatch, ImageTooLarge) as err:
        return _fail(EXIT_USAGE, str(err))

    out = Path(args.out)
    _write_bytes_atomic(out, png)
    append_run_manifest(out.parent, "colorize",
                        {"checkpoint": args.checkpoint, "max_side": args.max_side},
                        inputs=[args.line_art] + ([args.strokes] if args.strokes else []),
                        outputs=[str(out)])
    print(f"wrote {out} ({meta['width']}x{meta['height']}, "
          f"{meta['elapsed_ms']:.1f} ms, model {meta['model_id']})")
    return EXIT_OK


def cmd_fid(args) -> int:
    from .evaluation import GreyEmbeddingAdapter, fid_between_sets
    from .extractors import load_extractor_checkpoint
    from .images import load_illustration

    if args.embed == "external":
        return _fail(EXIT_USAGE, "external embeddings are not bundled; "
                                 "use --embed f1 or f2")
    if not args.extractor:
        return _fail(EXIT_USAGE, "--extractor checkpoint is required")
    try:
        net = load_extractor_checkpoint(args.extractor, args.embed)
    except FileNotFoundError:
        return _fail(EXIT_MODEL, f"extractor {args.extractor} does not exist")
    except (ValueError, RuntimeError) as err:
        return _fail(EXIT_MODEL, f"cannot load extractor {args.extractor}: {err}")
    if args.embed == "f1":
        net = GreyEmbeddingAdapter(net)

    def load_set(directory):
        files = sorted(Path(directory).glob("*.png"))
        if not files:
            raise ValueError(f"no PNG files in {directory}")
        return [load_illustration(f) for f in files]

    try:
        images_a = load_set(args.set_a)
        images_b = load_set(args.set_b)
        result = fid_between_sets(images_a, images_b, net)
    except (OSError, ValueError) as err:
        return _fail(EXIT_USAGE, str(err))

    report = result.to_dict()
    report["set_a"] = str(args.set_a)
    report["set_b"] = str(args.set_b)
    out = Path(args.out)
    _write_json_atomic(out, report)
    append_run_manifest(out.parent, "fid", {"embed": args.embed},
                        inputs=[args.set_a, args.set_b, args.extractor],
                        outputs=[str(out)])
    print(f"fid = {result.value:.6f} ({result.embed_tag})")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    bind = args.bind or os.environ.get("BIND_ADDR", DEFAULT_BIND)
    host, _, port_text = bind.rpartition(":")
    if not host or not port_text.isdigit():
        return _fail(EXIT_USAGE, f"--bind must look like HOST:PORT, got {bind!r}")
    app = create_app(model_dir=args.models, max_side=args.max_side)
    uvicorn.run(app, host=host, port=int(port_text), log_level="info")
    return EXIT_OK


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linepaint",
        description="Stroke-guided line-art colorization toolkit.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("forge", help="render synthetic line arts from illustrations")
    p.add_argument("--input", required=True, help="directory of illustrations")
    p.add_argument("--output", required=True, help="directory for forged pairs")
    p.add_argument("--side", type=int, default=128, help="training crop side")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_forge)

    for kind in ("f1", "f2"):
        p = sub.add_parser(f"pretrain-{kind}",
                           help=f"pretrain the {'local-feature' if kind == 'f1' else 'perceptual'} extractor")
        p.add_argument("--corpus", required=True, help="forged-pairs directory")
        p.add_argument("--out", required=True, help="checkpoint file to write")
        p.add_argument("--epochs", type=int, default=8)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--width", type=int, default=32 if kind == "f1" else 64,
                       help="first-stage channel width")
        p.add_argument("--features", type=int, default=128, help="output channels")
        p.add_argument("--min-corpus", type=int, default=200,
                       help="refuse corpora smaller than this")
        p.set_defaults(func=lambda a, k=kind: cmd_pretrain(a, k))

    p = sub.add_parser("train", help="run adversarial training")
    p.add_argument("--config", help="JSON training config (flags override keys)")
    p.add_argument("--data", required=True, help="forged-pairs directory")
    p.add_argument("--out", required=True, help="run directory for checkpoints/metrics")
    p.add_argument("--f1", help="local-feature extractor checkpoint")
    p.add_argument("--f2", help="perceptual extractor checkpoint")
    p.add_argument("--resume", help="continue from a training checkpoint")
    p.add_argument("--seed", type=int)
    p.add_argument("--iterations", type=int, help="override total_iterations")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--checkpoint-every", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("colorize", help="colorize one line art file")
    p.add_argument("line_art", help="input line-art PNG")
    p.add_argument("--strokes", help="RGBA stroke PNG of the same size")
    p.add_argument("--checkpoint", required=True, help="trained model checkpoint")
    p.add_argument("--out", required=True, help="output PNG path")
    p.add_argument("--max-side", type=int, default=1024)
    p.set_defaults(func=cmd_colorize)

    p = sub.add_parser("fid", help="Fréchet distance between two image sets")
    p.add_argument("--set-a", required=True)
    p.add_argument("--set-b", required=True)
    p.add_argument("--embed", choices=("f1", "f2", "external"), default="f2")
    p.add_argument("--extractor", help="extractor checkpoint for the embedding")
    p.add_argument("--out", required=True, help="JSON report path")
    p.set_defaults(func=cmd_fid)

    p = sub.add_parser("serve", help="run the HTTP inference service")
    p.add_argument("--models", default=os.environ.get("MODEL_DIR", "models"),
                   help="checkpoint directory (env MODEL_DIR)")
    p.add_argument("--bind", help=f"HOST:PORT (env BIND_ADDR, default {DEFAULT_BIND})")
    p.add_argument("--max-side", type=int, default=None,
                   help="largest accepted image side (env MAX_SIDE)")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
