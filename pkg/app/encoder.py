"""
编码器组装

subsampling -> (绝对位置编码) -> N 个 block（U-Net 在第 D 个 block 后降采样、
在最后一个 block 前上采样并跳连）-> 线性 CTC 头（最后一个类别是 blank）。
"""
import copy
import logging
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from pydantic import ValidationError

from app.autograd import Tensor, as_tensor, no_grad
from app.constants.presets import (
    CONFORMER_TOGGLES,
    SMALL_PRESETS,
    SQUEEZEFORMER_TOGGLES,
    PRESET_DOWNSAMPLE_AFTER,
    PRESET_SHAPES,
)
from app.errors import ConfigError, ShapeError
from app.nn.attention import MultiHeadAttention, sinusoid_table
from app.nn.blocks import (
    ConvModule,
    FeedForwardModule,
    ResidualUnit,
    SubsamplingBlock,
    TemporalResampler,
    ceil_half,
    downsample,
    merge_scaling,
    upsample,
)
from app.nn.layers import LayerNorm, Linear
from app.nn.module import Module
from app.schemas import ModelConfig, ParamReport

logger = logging.getLogger(__name__)

FeatureInput = Union[Tensor, np.ndarray]


# ---------------------------------------------------------------------------
# 预设
# ---------------------------------------------------------------------------

def preset_names() -> List[str]:
    return list(PRESET_SHAPES) + list(SMALL_PRESETS)


def named_config(name: str, **overrides) -> ModelConfig:
    """按名称展开预设，overrides 覆盖其中的字段"""
    key = name.lower()
    if key in PRESET_SHAPES:
        layers, dim, heads, squeeze = PRESET_SHAPES[key]
        fields: Dict[str, object] = dict(SQUEEZEFORMER_TOGGLES if squeeze else CONFORMER_TOGGLES)
        fields.update(num_blocks=layers, dim=dim, heads=heads, downsample_after_block=PRESET_DOWNSAMPLE_AFTER)
    elif key in SMALL_PRESETS:
        fields = dict(SQUEEZEFORMER_TOGGLES)
        fields.update(SMALL_PRESETS[key])
    else:
        raise ConfigError(f"unknown preset '{name}', expected one of {preset_names()}", field="preset")
    fields.update(overrides)
    try:
        return ModelConfig(**fields)
    except ValidationError as exc:
        raise config_error_from_validation(exc) from exc


def config_error_from_validation(exc: ValidationError) -> ConfigError:
    first = exc.errors()[0]
    loc = ".".join(str(part) for part in first.get("loc", ()))
    message = first.get("msg", str(exc))
    # model_validator 的错误没有 loc，字段名写在消息里
    if not loc and ": " in message:
        loc = message.split(": ", 1)[0].replace("Value error, ", "")
    return ConfigError(message, field=loc or None)


# ---------------------------------------------------------------------------
# 模型
# ---------------------------------------------------------------------------

class EncoderBlock(Module):
    """一个 block 的四个残差单元，顺序由 block_structure 决定"""

    def __init__(self, config: ModelConfig, rng: np.random.Generator, rate_ms: int = 40):
        super().__init__()
        self.rate_ms = rate_ms
        self.structure = config.block_structure
        C = config.dim
        macaron = config.block_structure == "fmcf-macaron"
        ffn_weight = 0.5 if macaron else 1.0

        def unit(body: Module, r: float) -> ResidualUnit:
            return ResidualUnit(body, C, config.norm_scheme, r, config.dropout, config.layer_norm_eps)

        def ffn() -> FeedForwardModule:
            return FeedForwardModule(C, config.ffn_expansion, rng, config.dropout)

        def mha() -> MultiHeadAttention:
            return MultiHeadAttention(C, config.heads, rng, config.positional, config.attention_dropout)

        def conv() -> ConvModule:
            return ConvModule(
                C, config.conv_kernel, rng, config.conv_activation, config.conv_expansion,
                config.batch_norm_eps, config.batch_norm_momentum,
            )

        # 创建顺序即执行顺序，保证同一 seed 下参数初始化确定
        if macaron:
            self.ffn1 = unit(ffn(), ffn_weight)
            self.mha = unit(mha(), 1.0)
            self.conv = unit(conv(), 1.0)
            self.ffn2 = unit(ffn(), ffn_weight)
            self.order = ["ffn1", "mha", "conv", "ffn2"]
        else:
            self.mha = unit(mha(), 1.0)
            self.ffn1 = unit(ffn(), ffn_weight)
            self.conv = unit(conv(), 1.0)
            self.ffn2 = unit(ffn(), ffn_weight)
            self.order = ["mha", "ffn1", "conv", "ffn2"]
        if config.norm_scheme == "pre+post":
            self.final_norm = LayerNorm(C, config.layer_norm_eps)

    def units(self) -> List[ResidualUnit]:
        return [getattr(self, name) for name in self.order]

    def forward(self, x: Tensor, training: bool, rng: Optional[np.random.Generator] = None) -> Tensor:
        for unit in self.units():
            x = unit.forward(x, training, rng)
        if "final_norm" in self._modules:
            x = self.final_norm.forward(x)
        return x


class EncoderModel(Module):
    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        super().__init__()
        object.__setattr__(self, "config", config)
        self.subsampling = SubsamplingBlock(config.input_feature_dim, config.dim, rng, config.subsampling)
        self.blocks: List[EncoderBlock] = []
        for i, rate in enumerate(config.block_rates()):
            block = EncoderBlock(config, rng, rate)
            self.add_module(f"blocks.{i}", block)
            self.blocks.append(block)
        if config.unet:
            self.resampler = TemporalResampler(config.dim, rng)
        self.head = Linear(config.dim, config.num_classes, rng)

    @property
    def rates_ms(self) -> List[int]:
        return [block.rate_ms for block in self.blocks]

    def forward(
        self,
        features: FeatureInput,
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
        return_hidden: bool = False,
    ):
        """
        features: [T, F]，返回 logits [ceil(T/4), vocab+1]

        return_hidden=True 时额外返回 {"input": 子采样输出, "block1": ..., ...}
        """
        cfg = self.config
        x = as_tensor(features)
        if x.ndim != 2 or x.shape[1] != cfg.input_feature_dim:
            raise ShapeError(f"expected features [T, {cfg.input_feature_dim}], got {x.shape}")
        h = self.subsampling.forward(x)
        if cfg.positional == "absolute":
            h = h + Tensor(sinusoid_table(np.arange(h.shape[0]), cfg.dim))
        hidden: Dict[str, Tensor] = {"input": h}

        skip: Optional[Tensor] = None
        n = len(self.blocks)
        d = cfg.downsample_index if cfg.unet else None
        for i, block in enumerate(self.blocks, start=1):
            if cfg.unet and i == n and skip is not None:
                h = upsample(h, skip, self.resampler, add_skip=cfg.unet_skip)
            h = block.forward(h, training, rng)
            hidden[f"block{i}"] = h
            if cfg.unet and i == d:
                h, skip = downsample(h, self.resampler)

        logits = self.head.forward(h)
        if return_hidden:
            return logits, hidden
        return logits

    def scaling_pairs(self):
        """(Scaling, 其后直接作用的线性层列表)"""
        for block in self.blocks:
            for unit in block.units():
                if "scaling" in unit._modules:
                    yield unit.scaling, unit.body.input_linears()


def build(config: ModelConfig, seed: int = 0) -> EncoderModel:
    """按 seed 确定性地初始化模型；配置不变式在这里再检查一次"""
    problems = config.invariant_violations()
    if problems:
        field, message = problems[0]
        raise ConfigError(message, field=field)
    model = EncoderModel(config, np.random.default_rng(seed))
    logger.info(
        f"built encoder: {config.num_blocks} blocks, dim {config.dim}, "
        f"{model.num_parameters()} parameters"
    )
    return model


def forward(m: EncoderModel, features: FeatureInput, training: bool = False,
            rng: Optional[np.random.Generator] = None) -> Tensor:
    return m.forward(features, training, rng)


def output_length(frames: int) -> int:
    return ceil_half(ceil_half(frames))


def merge_scalings(model: EncoderModel) -> EncoderModel:
    """返回推理副本：每个 Scaling 并入后续线性层并重置为恒等"""
    merged = copy.deepcopy(model)
    count = 0
    for scaling, linears in merged.scaling_pairs():
        for linear in linears:
            bias = linear.bias.data if linear.bias is not None else None
            w, b = merge_scaling(scaling, linear.weight.data, bias)
            linear.weight.data[...] = w
            linear.bias.data[...] = b
        scaling.reset()
        count += 1
    logger.info(f"merged {count} scaling layers")
    return merged


def ctc_greedy_decode(logits: FeatureInput, blank: Optional[int] = None) -> List[int]:
    """逐帧 argmax，合并相邻重复，去掉 blank（默认最后一个类别）"""
    data = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    blank = data.shape[-1] - 1 if blank is None else blank
    return collapse_path(np.argmax(data, axis=-1).tolist(), blank)


def collapse_path(path: Sequence[int], blank: int) -> List[int]:
    tokens: List[int] = []
    previous = None
    for label in path:
        if label != previous and label != blank:
            tokens.append(int(label))
        previous = label
    return tokens


def decode_features(model: EncoderModel, features: FeatureInput) -> List[int]:
    with no_grad():
        return ctc_greedy_decode(model.forward(features, training=False))


# ---------------------------------------------------------------------------
# 参数量
# ---------------------------------------------------------------------------

def _conv_module_params(cfg: ModelConfig) -> int:
    C, k = cfg.dim, cfg.conv_kernel
    expanded = C * cfg.conv_expansion
    inner = expanded // 2 if cfg.conv_activation == "glu" else expanded
    pointwise1 = C * expanded + expanded
    depthwise = k * inner + inner
    batch_norm = 2 * inner
    pointwise2 = inner * C + C
    return pointwise1 + depthwise + batch_norm + pointwise2


def _mha_params(cfg: ModelConfig) -> int:
    C = cfg.dim
    projections = 4 * (C * C + C)
    if cfg.positional == "relative":
        return projections + C * C + 2 * C
    return projections


def _subsampling_params(cfg: ModelConfig) -> int:
    C = cfg.dim
    f_out = ceil_half(ceil_half(cfg.input_feature_dim))
    conv1 = 9 * C + C
    if cfg.subsampling == "vanilla":
        conv2 = 9 * C * C + C
    else:
        conv2 = (9 * C + C) + (C * C + C)
    return conv1 + conv2 + f_out * C * C + C


def count_params(config: ModelConfig) -> ParamReport:
    """解析式参数量，与实例化后的模型逐个标量一致"""
    C = config.dim
    ffn = C * C * config.ffn_expansion * 2 + C * config.ffn_expansion + C
    norms_per_block = 4 * 2 * C
    if config.norm_scheme == "pre+post":
        norms_per_block += 2 * C
    elif config.norm_scheme == "scaled-post":
        norms_per_block += 4 * 2 * C
    N = config.num_blocks
    breakdown = {
        "subsampling": _subsampling_params(config),
        "blocks.ffn": N * 2 * ffn,
        "blocks.mha": N * _mha_params(config),
        "blocks.conv": N * _conv_module_params(config),
        "blocks.norm": N * norms_per_block,
        "resampler": (4 * C + C * C + C) + (C * C + C) if config.unet else 0,
        "head": C * config.num_classes + config.num_classes,
    }
    return ParamReport(total=sum(breakdown.values()), breakdown=breakdown)
