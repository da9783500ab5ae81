from app.nn.attention import MultiHeadAttention
from app.nn.blocks import (
    ConvModule,
    FeedForwardModule,
    ResidualUnit,
    SubsamplingBlock,
    TemporalResampler,
    conv_module_forward,
    downsample,
    ffn_forward,
    merge_scaling,
    mha_forward,
    scaled_postln_wrap,
    subsample_forward,
    upsample,
)
from app.nn.layers import BatchNorm, Conv2d, DepthwiseConv1d, LayerNorm, Linear, PointwiseConv1d, Scaling
from app.nn.module import Module
