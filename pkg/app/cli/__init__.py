"""
命令行入口

各命令组在 app/cli/commands/ 下各自 register(subparsers)，这里汇总并统一分发：
库内异常转换成对应的退出码，信息写到 stderr。
"""
import argparse
import logging
import sys
from typing import List, Optional

from app.cli.commands import analysis, model, training
from app.errors import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, SqueezeError

logger = logging.getLogger(__name__)


class CliParser(argparse.ArgumentParser):
    """参数错误时以退出码 1 结束"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> CliParser:
    parser = CliParser(
        prog="squeezeformer",
        description="Squeezeformer / Conformer encoder toolkit: cost model, training and analysis",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command", parser_class=CliParser)
    subparsers.required = True
    for group in (analysis, model, training):
        group.register(subparsers)
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # --help 返回 0，参数错误返回 EXIT_USAGE
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    try:
        result = args.handler(args)
        return EXIT_OK if result is None else int(result)
    except SqueezeError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
