"""squeezeformer：Squeezeformer / Conformer 编码器工具包"""
