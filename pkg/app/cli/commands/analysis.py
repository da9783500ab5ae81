"""flops / ablation / params / profile"""
import argparse
import json
import logging

import numpy as np

from app.checkpoint import load_checkpoint
from app.cli.commands.common import (
    add_model_args,
    emit,
    emit_json,
    int_list,
    positive_float,
    positive_int,
    resolve_model,
)
from app.config import settings
from app.encoder import build, count_params
from app.services.flops_service import flops_service
from app.services.redundancy_service import redundancy_service
from app.services.report_service import report_service

logger = logging.getLogger(__name__)


def cmd_flops(args: argparse.Namespace) -> int:
    config = resolve_model(args)
    report = flops_service.count_flops(config, args.seconds, args.frame_ms)
    emit(report_service.flops(report, breakdown=args.breakdown), args.output)
    emit_json(report, args.json)
    return 0


def cmd_ablation(args: argparse.Namespace) -> int:
    rows = flops_service.ablation_ladder(args.size, args.seconds, skip_variant=args.skip_variant)
    emit(report_service.ladder(rows, args.size, args.seconds), args.output)
    if args.json:
        emit(json.dumps([json.loads(r.model_dump_json()) for r in rows], indent=2) + "\n", args.json)
    return 0


def cmd_params(args: argparse.Namespace) -> int:
    config = resolve_model(args)
    report = count_params(config)
    name = args.preset or (args.config or args.default_preset)
    emit(report_service.params(report, name), args.output)
    emit_json(report, args.json)
    return 0


def cmd_profile(args: argparse.Namespace) -> int:
    if args.checkpoint:
        model = load_checkpoint(args.checkpoint)
    else:
        model = build(resolve_model(args), seed=args.seed)
    rng = np.random.default_rng(args.seed)
    dims = model.config.input_feature_dim
    inputs = [rng.standard_normal((args.frames, dims)) for _ in range(args.inputs)]
    profile = redundancy_service.redundancy_profile(model, inputs, args.distances)
    emit(report_service.profile(profile), args.output)
    emit_json(profile, args.json)
    return 0


def register(subparsers) -> None:
    p = subparsers.add_parser("flops", help="analytic FLOPs report for a configuration")
    add_model_args(p, default_preset="squeezeformer-xs")
    p.add_argument("--seconds", type=positive_float, default=30.0, help="input duration in seconds (default 30)")
    p.add_argument("--frame-ms", type=positive_float, default=10.0, help="input frame hop in ms (default 10)")
    p.add_argument("--breakdown", action="store_true", help="print one line per module entry")
    p.add_argument("--output", help="write the text report to this file instead of stdout")
    p.add_argument("--json", help="also write the machine-readable report to this file")
    p.set_defaults(handler=cmd_flops)

    p = subparsers.add_parser("ablation", help="cumulative design-change ladder (params, GFLOPs)")
    p.add_argument("--size", choices=["s", "m", "l"], default="m", help="model size tier (default m)")
    p.add_argument("--seconds", type=positive_float, default=30.0, help="input duration in seconds (default 30)")
    p.add_argument("--skip-variant", action="store_true", help="append a row for the final model without the U-Net skip")
    p.add_argument("--output", help="write the table to this file instead of stdout")
    p.add_argument("--json", help="also write the rows as JSON to this file")
    p.set_defaults(handler=cmd_ablation)

    p = subparsers.add_parser("params", help="parameter count with per-module breakdown")
    add_model_args(p, default_preset="squeezeformer-xs")
    p.add_argument("--output", help="write the text report to this file instead of stdout")
    p.add_argument("--json", help="also write the breakdown as JSON to this file")
    p.set_defaults(handler=cmd_params)

    p = subparsers.add_parser("profile", help="cosine-similarity redundancy profile of block outputs")
    add_model_args(p)
    p.add_argument("--checkpoint", help="profile a trained checkpoint instead of a fresh model")
    p.add_argument("--inputs", type=positive_int, default=10, help="number of random inputs (default 10)")
    p.add_argument("--frames", type=positive_int, default=200, help="frames per random input (default 200)")
    p.add_argument("--distances", type=int_list, default=[1, 2, 3, 4], help="comma-separated distances")
    p.add_argument("--seed", type=int, default=settings.DEFAULT_SEED, help="seed for inputs and initialization")
    p.add_argument("--output", help="write the columnar profile to this file instead of stdout")
    p.add_argument("--json", help="also write the profile as JSON to this file")
    p.set_defaults(handler=cmd_profile)
