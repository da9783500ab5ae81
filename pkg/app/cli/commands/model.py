"""config / decode / synth / gradcheck"""
import argparse
import logging

from pydantic import ValidationError

from app.checkpoint import load_checkpoint
from app.cli.commands.common import add_model_args, emit, load_config_file, positive_int, resolve_model
from app.config import settings
from app.encoder import build, config_error_from_validation, decode_features
from app.errors import EXIT_RUNTIME
from app.features import read_features, write_features
from app.services.config_service import config_service
from app.schemas import SyntheticTask
from app.services.verification_service import verification_service
from app.training.synthetic import gen_synthetic

logger = logging.getLogger(__name__)


def cmd_config(args: argparse.Namespace) -> int:
    if args.config:
        parsed = load_config_file(args)
        if args.preset:
            parsed.model = {"preset": args.preset}
        emit(config_service.dump(parsed), args.output)
    else:
        emit(config_service.dump_model(resolve_model(args)), args.output)
    return 0


def cmd_decode(args: argparse.Namespace) -> int:
    model = load_checkpoint(args.checkpoint)
    features = read_features(args.input)
    tokens = decode_features(model, features)
    emit(" ".join(str(t) for t in tokens), args.output)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    task = load_config_file(args).task
    updates = {k: v for k, v in (("label_length", args.length), ("noise", args.noise)) if v is not None}
    if args.seed is not None:
        updates["seed"] = args.seed
    try:
        task = SyntheticTask(**{**task.model_dump(), **updates})
    except ValidationError as e:
        raise config_error_from_validation(e) from e
    features, labels = gen_synthetic(task, 1)[0]
    write_features(args.output, features)
    print(" ".join(str(label) for label in labels))
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    model = build(resolve_model(args), seed=args.seed)
    result = verification_service.model_gradcheck(model, frames=args.frames, seed=args.seed,
                                                  max_coords=args.max_coords)
    emit(f"checked {result.checked} coordinates, max relative error {result.max_rel_error:.3e}")
    if not result.passed(args.rtol):
        worst = max(result.per_input, key=result.per_input.get)
        emit(f"FAILED: worst parameter {worst} ({result.per_input[worst]:.3e})")
        return EXIT_RUNTIME
    return 0


def register(subparsers) -> None:
    p = subparsers.add_parser("config", help="print an expanded preset or config file as YAML")
    add_model_args(p)
    p.add_argument("--output", help="write to this file instead of stdout")
    p.set_defaults(handler=cmd_config)

    p = subparsers.add_parser("decode", help="greedy CTC decode of a feature file")
    p.add_argument("--checkpoint", required=True, help="checkpoint file")
    p.add_argument("--input", required=True, help="feature file (16-byte header + float64 frames)")
    p.add_argument("--output", help="write token ids to this file instead of stdout")
    p.set_defaults(handler=cmd_decode)

    p = subparsers.add_parser("synth", help="write one synthetic copy-task example as a feature file")
    p.add_argument("--config", default=None, help="YAML config file providing the task section")
    p.add_argument("--length", type=positive_int, default=None, help="label length")
    p.add_argument("--noise", type=float, default=None, help="Gaussian noise level")
    p.add_argument("--seed", type=int, default=None, help="random seed")
    p.add_argument("--output", required=True, help="feature file to write")
    p.set_defaults(handler=cmd_synth)

    p = subparsers.add_parser("gradcheck", help="finite-difference check of a whole model")
    add_model_args(p, default_preset="toy")
    p.add_argument("--frames", type=positive_int, default=12, help="input frames (default 12)")
    p.add_argument("--max-coords", type=positive_int, default=5, help="sampled coordinates per parameter (default 5)")
    p.add_argument("--rtol", type=float, default=settings.GRADCHECK_RTOL, help="relative error bound")
    p.add_argument("--seed", type=int, default=settings.DEFAULT_SEED, help="random seed")
    p.set_defaults(handler=cmd_gradcheck)
