"""train / schedule"""
import argparse
import logging

from pydantic import BaseModel, ValidationError

from app.checkpoint import save_checkpoint
from app.cli.commands.common import (
    add_model_args,
    emit,
    load_config_file,
    positive_float,
    positive_int,
    require,
    resolve_model,
)
from app.encoder import build, config_error_from_validation
from app.schemas import ScheduleParams
from app.services.training_service import training_service
from app.training.augment import recipe_augment
from app.training.schedule import recipe_schedule, sample_curve

logger = logging.getLogger(__name__)


def _override(section: BaseModel, **updates) -> BaseModel:
    """命令行参数覆盖配置文件中的同名字段（None 表示未指定）"""
    changes = {k: v for k, v in updates.items() if v is not None}
    if not changes:
        return section
    try:
        return type(section)(**{**section.model_dump(), **changes})
    except ValidationError as e:
        raise config_error_from_validation(e) from e


def _schedule(args: argparse.Namespace, base: ScheduleParams) -> ScheduleParams:
    return _override(
        base,
        lr_peak=args.lr_peak,
        warmup_steps=args.warmup,
        peak_steps=args.peak_steps,
        decay=args.decay,
    )


def cmd_train(args: argparse.Namespace) -> int:
    parsed = load_config_file(args)
    config = resolve_model(args)
    task = _override(parsed.task, seed=args.seed)
    params = _override(
        parsed.train,
        steps=args.steps,
        batch_size=args.batch_size,
        eval_every=args.eval_every,
        checkpoint_every=args.checkpoint_every,
        seed=args.seed,
        spec_augment=True if args.spec_augment or args.augment_recipe else None,
    )
    require(not params.checkpoint_every or bool(args.checkpoint_dir),
            "--checkpoint-every needs --checkpoint-dir")
    schedule = _schedule(args, parsed.schedule)
    augment = recipe_augment(args.augment_recipe, parsed.augment) if args.augment_recipe else parsed.augment

    model = build(config, seed=params.seed)
    logger.info(f"training {model.num_parameters()} parameters for {params.steps} steps")
    records = training_service.train(
        model,
        task,
        schedule,
        optimizer=parsed.optimizer,
        params=params,
        augment=augment,
        log_path=args.log,
        checkpoint_dir=args.checkpoint_dir,
    )
    if args.checkpoint:
        save_checkpoint(args.checkpoint, model)

    evaluated = [r for r in records if r.accuracy is not None]
    if evaluated:
        last = evaluated[-1]
        emit(f"step {last.step}: loss {last.loss:.4f}, accuracy {last.accuracy:.4f}")
    else:
        emit("no training steps run")
    return 0


def cmd_schedule(args: argparse.Namespace) -> int:
    if args.size:
        require(args.steps_per_epoch is not None and args.steps_per_epoch > 0,
                "--size needs a positive --steps-per-epoch")
        base = recipe_schedule(args.size, args.steps_per_epoch)
    else:
        base = load_config_file(args).schedule
    schedule = _schedule(args, base)
    lines = ["step,lr"] + [f"{t},{value:.8e}" for t, value in sample_curve(schedule, args.steps, args.every)]
    emit("\n".join(lines) + "\n", args.output)
    return 0


def _schedule_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lr-peak", type=float, default=None, help="peak learning rate")
    p.add_argument("--warmup", type=int, default=None, help="warmup steps (T_0)")
    p.add_argument("--peak-steps", type=int, default=None, help="plateau steps at the peak (T_peak)")
    p.add_argument("--decay", type=positive_float, default=None, help="decay exponent d")


def register(subparsers) -> None:
    p = subparsers.add_parser("train", help="train an encoder on the synthetic copy task")
    add_model_args(p)
    p.add_argument("--task", choices=["copy"], default="copy", help="synthetic task (default copy)")
    p.add_argument("--steps", type=int, default=None, help="optimizer steps")
    p.add_argument("--batch-size", type=positive_int, default=None, help="examples per step")
    p.add_argument("--eval-every", type=positive_int, default=None, help="evaluate every N steps")
    p.add_argument("--seed", type=int, default=None, help="seed for data, init and dropout")
    _schedule_args(p)
    p.add_argument("--spec-augment", action="store_true", help="apply SpecAugment masks to training inputs")
    p.add_argument("--augment-recipe", default=None, metavar="PRESET",
                   help="take the time-mask count from the recipe of a named preset (implies --spec-augment)")
    p.add_argument("--log", default=None, help="JSON-lines training log")
    p.add_argument("--checkpoint", default=None, help="write the final model here")
    p.add_argument("--checkpoint-dir", default=None, help="directory for periodic checkpoints")
    p.add_argument("--checkpoint-every", type=int, default=None, help="periodic checkpoint interval in steps")
    p.set_defaults(handler=cmd_train)

    p = subparsers.add_parser("schedule", help="sample the learning-rate schedule as step,lr rows")
    p.add_argument("--config", default=None, help="YAML config file providing the schedule section")
    p.add_argument("--size", choices=["s", "m", "l"], default=None,
                   help="use the recipe schedule of this size tier")
    p.add_argument("--steps-per-epoch", type=int, default=None, help="needed with --size")
    p.add_argument("--steps", type=int, default=1000, help="last step to sample (default 1000)")
    p.add_argument("--every", type=positive_int, default=10, help="sampling interval (default 10)")
    _schedule_args(p)
    p.add_argument("--output", help="write the rows to this file instead of stdout")
    p.set_defaults(handler=cmd_schedule)
