# 模型预设与参考数值

from typing import Dict, List, Tuple

# Conformer 基线与 Squeezeformer 的结构开关
CONFORMER_TOGGLES: Dict[str, object] = {
    "block_structure": "fmcf-macaron",
    "norm_scheme": "pre+post",
    "conv_activation": "glu",
    "unet": False,
    "subsampling": "vanilla",
}

SQUEEZEFORMER_TOGGLES: Dict[str, object] = {
    "block_structure": "mf-cf",
    "norm_scheme": "scaled-post",
    "conv_activation": "swish",
    "unet": True,
    "subsampling": "depthwise-separable",
}

# U-Net 下采样统一放在第 7 个 block 之后
PRESET_DOWNSAMPLE_AFTER = 7

# (层数, 维度, 头数, 是否 Squeezeformer)
PRESET_SHAPES: Dict[str, Tuple[int, int, int, bool]] = {
    "conformer-ctc-s": (16, 144, 4, False),
    "squeezeformer-xs": (16, 144, 4, True),
    "squeezeformer-s": (18, 196, 4, True),
    "conformer-ctc-m": (16, 256, 4, False),
    "squeezeformer-sm": (16, 256, 4, True),
    "squeezeformer-m": (20, 324, 4, True),
    "conformer-ctc-l": (18, 512, 8, False),
    "squeezeformer-ml": (18, 512, 8, True),
    "squeezeformer-l": (22, 640, 8, True),
}

# 参考数值：(参数量 M, 30 秒输入 GFLOPs)
PRESET_REFERENCE: Dict[str, Tuple[float, float]] = {
    "conformer-ctc-s": (8.7, 26.2),
    "squeezeformer-xs": (9.0, 15.8),
    "squeezeformer-s": (18.6, 26.3),
    "conformer-ctc-m": (27.4, 71.7),
    "squeezeformer-sm": (28.2, 42.7),
    "squeezeformer-m": (55.6, 72.0),
    "conformer-ctc-l": (121.5, 280.6),
    "squeezeformer-ml": (125.1, 169.2),
    "squeezeformer-l": (236.3, 277.9),
}

# 同档位对比：档位 -> (Conformer 基线, 对应的 Squeezeformer)
TIERS: Dict[str, Tuple[str, List[str]]] = {
    "s": ("conformer-ctc-s", ["squeezeformer-xs", "squeezeformer-s"]),
    "m": ("conformer-ctc-m", ["squeezeformer-sm", "squeezeformer-m"]),
    "l": ("conformer-ctc-l", ["squeezeformer-ml", "squeezeformer-l"]),
}

# 消融阶梯：每一行只在上一行基础上改变一个开关
LADDER_STEPS: List[Tuple[str, Dict[str, object]]] = [
    ("baseline", {}),
    ("+ Temporal U-Net", {"unet": True, "downsample_after_block": PRESET_DOWNSAMPLE_AFTER}),
    ("+ Transformer-style block", {"block_structure": "mf-cf"}),
    ("+ Unified activations", {"conv_activation": "swish"}),
    ("+ Simplified LayerNorm", {"norm_scheme": "scaled-post"}),
    ("+ DW sep. subsampling", {"subsampling": "depthwise-separable"}),
]

# 只有 M 档有公开的逐行参考：(参数量 M, GFLOPs)
LADDER_REFERENCE_M: List[Tuple[float, float]] = [
    (27.4, 71.7),
    (27.5, 57.0),
    (27.5, 57.0),
    (28.7, 58.4),
    (28.7, 58.4),
    (28.2, 42.7),
]

# 训练配方
PEAK_LR: Dict[str, float] = {"s": 2e-3, "m": 1.5e-3, "l": 1e-3}
WARMUP_EPOCHS = 20
PEAK_EPOCHS = 160
DECAY_RATE = 1.0

TIME_MASKS: Dict[str, int] = {
    "conformer-ctc-s": 5,
    "squeezeformer-xs": 5,
    "squeezeformer-s": 5,
    "conformer-ctc-m": 5,
    "squeezeformer-sm": 5,
    "squeezeformer-m": 7,
    "conformer-ctc-l": 10,
    "squeezeformer-ml": 10,
    "squeezeformer-l": 10,
}

# 桌面规模的小模型，其余字段取 Squeezeformer 默认值
SMALL_PRESETS: Dict[str, Dict[str, object]] = {
    "tiny": {
        "num_blocks": 2, "dim": 32, "heads": 4, "conv_kernel": 7, "ffn_expansion": 4,
        "downsample_after_block": 1, "input_feature_dim": 16, "vocab_size": 8,
        "dropout": 0.0, "attention_dropout": 0.0,
    },
    "toy": {
        "num_blocks": 2, "dim": 8, "heads": 2, "conv_kernel": 3, "ffn_expansion": 2,
        "downsample_after_block": 1, "input_feature_dim": 8, "vocab_size": 4,
        "dropout": 0.0, "attention_dropout": 0.0,
    },
}
