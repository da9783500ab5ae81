"""
Pydantic 数据模型

模型结构、训练、数据增强、FLOPs 报告等的结构化定义。
所有配置类 extra="forbid"：未知字段直接拒绝。
"""
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

BlockStructure = Literal["fmcf-macaron", "mf-cf"]
NormScheme = Literal["pre+post", "scaled-post", "post", "pre"]
ConvActivation = Literal["glu", "swish", "none"]
PositionalScheme = Literal["relative", "absolute"]
SubsamplingKind = Literal["vanilla", "depthwise-separable"]


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelConfig(StrictModel):
    num_blocks: int = Field(16, ge=1)
    dim: int = Field(144, ge=1)
    heads: int = Field(4, ge=1)
    conv_kernel: int = Field(31, ge=1)
    ffn_expansion: int = Field(4, ge=1)
    conv_expansion: int = Field(2, ge=1)
    block_structure: BlockStructure = "mf-cf"
    norm_scheme: NormScheme = "scaled-post"
    conv_activation: ConvActivation = "swish"
    positional: PositionalScheme = "relative"
    unet: bool = True
    unet_skip: bool = True
    downsample_after_block: Optional[int] = None
    subsampling: SubsamplingKind = "depthwise-separable"
    input_feature_dim: int = Field(80, ge=1)
    vocab_size: int = Field(128, ge=1)
    dropout: float = Field(0.1, ge=0.0, lt=1.0)
    attention_dropout: float = Field(0.1, ge=0.0, lt=1.0)
    layer_norm_eps: float = Field(1e-5, gt=0.0)
    batch_norm_eps: float = Field(1e-5, gt=0.0)
    batch_norm_momentum: float = Field(0.1, gt=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_invariants(self) -> "ModelConfig":
        problems = self.invariant_violations()
        if problems:
            field, message = problems[0]
            raise ValueError(f"{field}: {message}")
        return self

    def invariant_violations(self) -> List[Tuple[str, str]]:
        """返回 (字段, 说明) 列表；build() 也会重新检查一次"""
        problems: List[Tuple[str, str]] = []
        if self.dim % self.heads != 0:
            problems.append(("heads", f"dim {self.dim} is not divisible by heads {self.heads}"))
        if self.conv_kernel % 2 == 0:
            problems.append(("conv_kernel", f"kernel size must be odd, got {self.conv_kernel}"))
        if self.unet:
            d = self.downsample_index
            if not 1 <= d < self.num_blocks:
                problems.append((
                    "downsample_after_block",
                    f"must satisfy 1 <= D < num_blocks ({self.num_blocks}), got {d}",
                ))
        return problems

    @property
    def downsample_index(self) -> int:
        """U-Net 下采样位置 D：未显式给出时按 7/16 的比例取整"""
        if self.downsample_after_block is not None:
            return self.downsample_after_block
        return max(1, round(7 * self.num_blocks / 16))

    @property
    def head_dim(self) -> int:
        return self.dim // self.heads

    @property
    def num_classes(self) -> int:
        # 最后一个类别是 CTC blank
        return self.vocab_size + 1

    def block_rates(self) -> List[int]:
        """每个 block 的帧率（毫秒）"""
        if not self.unet:
            return [40] * self.num_blocks
        d = self.downsample_index
        return [40 if (i <= d or i == self.num_blocks) else 80 for i in range(1, self.num_blocks + 1)]


class ScheduleParams(StrictModel):
    lr_peak: float = Field(2e-3, ge=0.0)
    warmup_steps: int = Field(100, gt=0, alias="T_0")
    peak_steps: int = Field(0, ge=0, alias="T_peak")
    decay: float = Field(1.0, gt=0.0, alias="d")

    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class OptimizerParams(StrictModel):
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.98, ge=0.0, lt=1.0)
    eps: float = Field(1e-9, gt=0.0)
    weight_decay: float = Field(5e-4, ge=0.0)


class SpecAugmentParams(StrictModel):
    freq_masks: int = Field(2, ge=0)
    freq_width: int = Field(27, ge=0)
    time_masks: int = Field(5, ge=0)
    time_mask_ratio: float = Field(0.05, ge=0.0, le=1.0)


class SyntheticTask(StrictModel):
    kind: Literal["copy"] = "copy"
    vocab_size: int = Field(8, ge=2)
    label_length: int = Field(6, ge=1)
    upsample: int = Field(4, ge=1)
    noise: float = Field(0.1, ge=0.0)
    feature_dim: int = Field(16, ge=1)
    allow_repeats: bool = False
    seed: int = 0

    @model_validator(mode="after")
    def _check_feature_dim(self) -> "SyntheticTask":
        if self.feature_dim < self.vocab_size:
            raise ValueError(
                f"feature_dim: must be >= vocab_size ({self.vocab_size}), got {self.feature_dim}"
            )
        return self


class TrainParams(StrictModel):
    steps: int = Field(2000, ge=0)
    batch_size: int = Field(8, ge=1)
    eval_every: int = Field(100, ge=1)
    eval_size: int = Field(32, ge=1)
    checkpoint_every: int = Field(0, ge=0)
    max_grad_norm: Optional[float] = Field(5.0, gt=0.0)
    spec_augment: bool = False
    seed: int = 0


class CliConfigFile(StrictModel):
    model: Dict[str, object] = Field(default_factory=lambda: {"preset": "tiny"})
    schedule: ScheduleParams = Field(default_factory=ScheduleParams)
    optimizer: OptimizerParams = Field(default_factory=OptimizerParams)
    augment: SpecAugmentParams = Field(default_factory=SpecAugmentParams)
    task: SyntheticTask = Field(default_factory=SyntheticTask)
    train: TrainParams = Field(default_factory=TrainParams)


# ---------------------------------------------------------------------------
# 报告
# ---------------------------------------------------------------------------

class FlopsEntry(BaseModel):
    path: str
    macs: int
    flops: int


class StageFrames(BaseModel):
    input: int
    subsampled: int
    reduced: Optional[int] = None


class FlopsReport(BaseModel):
    schema_version: int
    config: ModelConfig
    input_seconds: float
    frame_ms: float
    frames: StageFrames
    entries: List[FlopsEntry]
    total_macs: int
    total_flops: int

    @property
    def gflops(self) -> float:
        return self.total_flops / 1e9

    def total_for(self, prefix: str) -> int:
        return sum(e.flops for e in self.entries if e.path == prefix or e.path.startswith(prefix + "."))


class ParamReport(BaseModel):
    total: int
    breakdown: Dict[str, int]

    @property
    def millions(self) -> float:
        return self.total / 1e6


class LadderRow(BaseModel):
    design_change: str
    config: ModelConfig
    params: int
    gflops: float
    reference_params_m: Optional[float] = None
    reference_gflops: Optional[float] = None


class RedundancyProfile(BaseModel):
    schema_version: int
    distances: List[int]
    # stage 名称（input, block1, ...）-> 每个距离的平均余弦相似度
    similarities: Dict[str, List[float]]
    rates_ms: Dict[str, int]
    samples: int
    skipped: int


class TrainRecord(BaseModel):
    step: int
    lr: float
    loss: float
    accuracy: Optional[float] = None
