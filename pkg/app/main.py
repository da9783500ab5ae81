"""
程序入口：python -m app.main <command> [options]
"""
import logging
import sys

from app.cli import run
from app.config import settings


def main() -> int:
    logging.basicConfig(level=settings.LOG_LEVEL, format=settings.LOG_FORMAT, stream=sys.stderr)
    return run()


if __name__ == "__main__":
    sys.exit(main())
