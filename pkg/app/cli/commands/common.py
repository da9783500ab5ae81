import argparse
import logging
import os
import sys
from typing import List, Optional

from pydantic import BaseModel

from app.encoder import named_config, preset_names
from app.errors import UsageError
from app.schemas import CliConfigFile, ModelConfig
from app.services.config_service import config_service

logger = logging.getLogger(__name__)


def add_model_args(parser: argparse.ArgumentParser, default_preset: Optional[str] = "tiny") -> None:
    parser.add_argument("--preset", default=None,
                        help=f"named configuration ({', '.join(preset_names())}); default {default_preset}")
    parser.add_argument("--config", default=None, help="YAML config file; --preset overrides its model.preset")
    parser.set_defaults(default_preset=default_preset)


def load_config_file(args: argparse.Namespace) -> CliConfigFile:
    if args.config:
        return config_service.load(args.config)
    return CliConfigFile()


def resolve_model(args: argparse.Namespace) -> ModelConfig:
    if args.config:
        parsed = config_service.load(args.config)
        return config_service.resolve_model(parsed.model, preset=args.preset)
    return named_config(args.preset or args.default_preset)


def positive_float(value: str) -> float:
    number = float(value)
    if number <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return number


def positive_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected an integer, got {value}") from e
    if number <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return number


def int_list(value: str) -> List[int]:
    try:
        items = [int(v) for v in value.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value}") from e
    if not items:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return items


def emit(text: str, path: Optional[str] = None) -> None:
    """写到文件或 stdout"""
    if path:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        logger.info(f"written {path}")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def emit_json(model: BaseModel, path: Optional[str]) -> None:
    if path:
        emit(model.model_dump_json(indent=2) + "\n", path)


def require(condition: bool, message: str) -> None:
    if not condition:
        raise UsageError(message)
