"""
文本报告渲染（Jinja2 模板，位于 app/templates）
"""
import logging
import os
from typing import List

from jinja2 import Environment, FileSystemLoader, StrictUndefined

from app.schemas import FlopsReport, LadderRow, ParamReport, RedundancyProfile
from app.services.flops_service import direction

logger = logging.getLogger(__name__)

TEMPLATE_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), "templates")


class ReportService:
    def __init__(self, directory: str = TEMPLATE_DIR):
        self.env = Environment(
            loader=FileSystemLoader(directory),
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
            undefined=StrictUndefined,
        )

    def render(self, template: str, **context) -> str:
        return self.env.get_template(template).render(**context)

    def flops(self, report: FlopsReport, breakdown: bool = False) -> str:
        return self.render(
            "flops.txt.j2",
            input_seconds=report.input_seconds,
            frame_ms=report.frame_ms,
            frames=report.frames,
            entries=report.entries,
            total_macs=report.total_macs,
            total_flops=report.total_flops,
            gflops=report.gflops,
            breakdown=breakdown,
        )

    def ladder(self, rows: List[LadderRow], size: str, seconds: float) -> str:
        directions = ["-"] + [direction(a.gflops, b.gflops) for a, b in zip(rows, rows[1:])]
        return self.render(
            "ladder.txt.j2",
            rows=rows,
            size=size,
            seconds=seconds,
            directions=directions,
            show_reference=any(r.reference_gflops is not None for r in rows),
        )

    def params(self, report: ParamReport, name: str) -> str:
        return self.render("params.txt.j2", name=name, breakdown=report.breakdown, total=report.total)

    def profile(self, profile: RedundancyProfile) -> str:
        return self.render(
            "profile.txt.j2",
            samples=profile.samples,
            skipped=profile.skipped,
            similarities=profile.similarities,
            rates_ms=profile.rates_ms,
            distances=profile.distances,
        )


report_service = ReportService()
