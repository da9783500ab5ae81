"""
解析式 FLOPs 模型

MAC 记 2 FLOPs，偏置不计；LayerNorm / BatchNorm / 激活 / softmax / 残差加法
按 app.constants.costs 中的逐元素常数计入。每一级的帧数按 block 的采样率取。
"""
import logging
from typing import Dict, List, Optional, Tuple

from app.config import settings
from app.constants import costs
from app.constants.presets import LADDER_REFERENCE_M, LADDER_STEPS, TIERS
from app.encoder import count_params, named_config
from app.errors import ConfigError
from app.nn.blocks import ceil_half
from app.schemas import FlopsEntry, FlopsReport, LadderRow, ModelConfig, StageFrames

logger = logging.getLogger(__name__)


class _Ledger:
    def __init__(self):
        self.entries: List[FlopsEntry] = []

    def add(self, path: str, macs: int, extra: int = 0) -> None:
        self.entries.append(FlopsEntry(path=path, macs=int(macs), flops=int(costs.FLOPS_PER_MAC * macs + extra)))


class FlopsService:
    """FLOPs 统计与各项削减比例的计算"""

    def frames_for(self, input_seconds: float, frame_ms: float = 10.0) -> int:
        if input_seconds <= 0:
            raise ConfigError(f"input duration must be positive, got {input_seconds}", field="seconds")
        if frame_ms <= 0:
            raise ConfigError(f"frame length must be positive, got {frame_ms}", field="frame_ms")
        return max(1, int(round(input_seconds * 1000.0 / frame_ms)))

    # ---- 各模块 ----
    def _subsampling(self, ledger: _Ledger, cfg: ModelConfig, frames: int) -> None:
        C = cfg.dim
        t1, f1 = ceil_half(frames), ceil_half(cfg.input_feature_dim)
        t2, f2 = ceil_half(t1), ceil_half(f1)
        ledger.add("subsampling.conv1", t1 * f1 * 9 * C, costs.RELU * t1 * f1 * C)
        if cfg.subsampling == "vanilla":
            ledger.add("subsampling.conv2", t2 * f2 * 9 * C * C, costs.RELU * t2 * f2 * C)
        else:
            ledger.add("subsampling.conv2", t2 * f2 * 9 * C + t2 * f2 * C * C, costs.RELU * t2 * f2 * C)
        ledger.add("subsampling.projection", t2 * (f2 * C) * C)

    def _ffn(self, ledger: _Ledger, path: str, cfg: ModelConfig, T: int) -> None:
        C, hidden = cfg.dim, cfg.dim * cfg.ffn_expansion
        ledger.add(path, 2 * T * C * hidden, costs.SWISH * T * hidden)

    def _mha(self, ledger: _Ledger, path: str, cfg: ModelConfig, T: int) -> None:
        C = cfg.dim
        ledger.add(f"{path}.projections", 4 * T * C * C)
        if cfg.positional == "relative":
            # 约定见 costs：位置投影不计，位置分数计 T x T 项
            score_macs = 3 * T * T * C
        else:
            score_macs = 2 * T * T * C
        ledger.add(f"{path}.scores", score_macs, costs.SOFTMAX * cfg.heads * T * T)

    def _conv(self, ledger: _Ledger, path: str, cfg: ModelConfig, T: int) -> None:
        C, k = cfg.dim, cfg.conv_kernel
        expanded = C * cfg.conv_expansion
        if cfg.conv_activation == "glu":
            inner, gate = expanded // 2, costs.GLU * T * (expanded // 2)
        elif cfg.conv_activation == "swish":
            inner, gate = expanded, costs.SWISH * T * expanded
        else:
            inner, gate = expanded, 0
        macs = T * C * expanded + T * k * inner + T * inner * C
        extra = gate + costs.BATCH_NORM * T * inner + costs.SWISH * T * inner
        ledger.add(path, macs, extra)

    def _norms(self, ledger: _Ledger, path: str, cfg: ModelConfig, T: int) -> None:
        C = cfg.dim
        extra = 4 * (costs.LAYER_NORM * T * C + costs.RESIDUAL_ADD * T * C)
        if cfg.norm_scheme == "pre+post":
            extra += costs.LAYER_NORM * T * C
        elif cfg.norm_scheme == "scaled-post":
            extra += 4 * costs.SCALING * T * C
        ledger.add(path, 0, extra)

    def _block(self, ledger: _Ledger, index: int, cfg: ModelConfig, T: int) -> None:
        prefix = f"blocks.{index}"
        order = ["ffn1", "mha", "conv", "ffn2"] if cfg.block_structure == "fmcf-macaron" else ["mha", "ffn1", "conv", "ffn2"]
        for name in order:
            path = f"{prefix}.{name}"
            if name == "mha":
                self._mha(ledger, path, cfg, T)
            elif name == "conv":
                self._conv(ledger, path, cfg, T)
            else:
                self._ffn(ledger, path, cfg, T)
        self._norms(ledger, f"{prefix}.norm", cfg, T)

    # ---- 总计 ----
    def count_flops(self, config: ModelConfig, input_seconds: float, frame_ms: float = 10.0) -> FlopsReport:
        frames = self.frames_for(input_seconds, frame_ms)
        T = ceil_half(ceil_half(frames))
        T_half = ceil_half(T)
        C = config.dim
        ledger = _Ledger()

        self._subsampling(ledger, config, frames)
        if config.positional == "absolute":
            ledger.add("positional", 0, costs.POSITION_ADD * T * C)
        for i, rate in enumerate(config.block_rates()):
            self._block(ledger, i, config, T_half if rate == 80 else T)
        if config.unet:
            ledger.add("resampler.down", T_half * 3 * C + T_half * C * C)
            ledger.add("resampler.up", T * C * C, costs.RESIDUAL_ADD * T * C if config.unet_skip else 0)
        ledger.add("head", T * C * config.num_classes)

        report = FlopsReport(
            schema_version=settings.FLOPS_SCHEMA_VERSION,
            config=config,
            input_seconds=input_seconds,
            frame_ms=frame_ms,
            frames=StageFrames(input=frames, subsampled=T, reduced=T_half if config.unet else None),
            entries=ledger.entries,
            total_macs=sum(e.macs for e in ledger.entries),
            total_flops=sum(e.flops for e in ledger.entries),
        )
        logger.debug(f"count_flops: {report.gflops:.2f} GFLOPs for {input_seconds}s")
        return report

    def span_blocks(self, config: ModelConfig) -> List[int]:
        """U-Net 以 80ms 运行的 block 下标（0 起），即第 D+1 到第 N-1 个"""
        d = config.downsample_index
        return list(range(d, config.num_blocks - 1))

    def attention_block_reduction(self, config: ModelConfig, input_seconds: float = 30.0) -> float:
        """降采样区间内 block 的 FLOPs：无 U-Net / 有 U-Net"""
        plain = self.count_flops(config.model_copy(update={"unet": False}), input_seconds)
        unet = self.count_flops(config.model_copy(update={"unet": True}), input_seconds)
        span = self.span_blocks(config)
        if not span:
            return 1.0
        plain_sum = sum(plain.total_for(f"blocks.{i}") for i in span)
        unet_sum = sum(unet.total_for(f"blocks.{i}") for i in span)
        return plain_sum / unet_sum

    def unet_total_reduction(self, config: ModelConfig, input_seconds: float = 30.0) -> float:
        plain = self.count_flops(config.model_copy(update={"unet": False}), input_seconds).total_flops
        unet = self.count_flops(config.model_copy(update={"unet": True}), input_seconds).total_flops
        return 1.0 - unet / plain

    def subsampling_share(self, config: ModelConfig, input_seconds: float = 30.0) -> float:
        report = self.count_flops(config, input_seconds)
        return report.total_for("subsampling") / report.total_flops

    def dw_subsampling_saving(self, config: ModelConfig, input_seconds: float = 30.0) -> float:
        """把第二层子采样卷积换成深度可分离后省下的 FLOPs，占 config 总量的比例"""
        vanilla = self.count_flops(config.model_copy(update={"subsampling": "vanilla"}), input_seconds)
        dw = self.count_flops(config.model_copy(update={"subsampling": "depthwise-separable"}), input_seconds)
        saved = vanilla.total_for("subsampling") - dw.total_for("subsampling")
        return saved / self.count_flops(config, input_seconds).total_flops

    # ---- 消融阶梯 ----
    def ladder_configs(self, size: str) -> List[Tuple[str, ModelConfig]]:
        if size not in TIERS:
            raise ConfigError(f"unknown size '{size}', expected one of {sorted(TIERS)}", field="size")
        config = named_config(TIERS[size][0])
        rows = []
        for change, update in LADDER_STEPS:
            config = config.model_copy(update=update)
            rows.append((change, config))
        return rows

    def ablation_ladder(self, size: str = "m", input_seconds: float = 30.0,
                        skip_variant: bool = False) -> List[LadderRow]:
        """skip_variant=True 时在末尾追加一行：最终配置去掉 U-Net 跳连"""
        rows: List[LadderRow] = []
        for i, (change, config) in enumerate(self.ladder_configs(size)):
            reference: Optional[Tuple[float, float]] = LADDER_REFERENCE_M[i] if size == "m" else None
            rows.append(LadderRow(
                design_change=change,
                config=config,
                params=count_params(config).total,
                gflops=self.count_flops(config, input_seconds).gflops,
                reference_params_m=reference[0] if reference else None,
                reference_gflops=reference[1] if reference else None,
            ))
        if skip_variant:
            config = rows[-1].config.model_copy(update={"unet_skip": False})
            rows.append(LadderRow(
                design_change="- U-Net skip",
                config=config,
                params=count_params(config).total,
                gflops=self.count_flops(config, input_seconds).gflops,
            ))
        return rows


def direction(before: float, after: float) -> str:
    """相对变化小于阈值记为 flat"""
    change = (after - before) / before
    if abs(change) < costs.FLAT_THRESHOLD:
        return "flat"
    return "increase" if change > 0 else "decrease"


def breakdown_by_module(report: FlopsReport) -> Dict[str, int]:
    """按模块类别汇总（subsampling / ffn / mha / conv / norm / resampler / head）"""
    totals: Dict[str, int] = {}
    for entry in report.entries:
        parts = entry.path.split(".")
        key = parts[2] if parts[0] == "blocks" else parts[0]
        key = "ffn" if key.startswith("ffn") else key
        totals[key] = totals.get(key, 0) + entry.flops
    return totals


flops_service = FlopsService()
