"""
整模型有限差分梯度检查

损失取 CTC(log_softmax(forward(x)))，在训练模式下前向（BatchNorm 用当前统计量），
对每个参数张量抽样若干坐标。
"""
import logging
from typing import Optional

import numpy as np

from app.autograd import GradcheckResult, gradcheck, ops
from app.encoder import EncoderModel, output_length
from app.training.ctc import ctc_loss

logger = logging.getLogger(__name__)


class VerificationService:
    def model_gradcheck(
        self,
        model: EncoderModel,
        frames: int = 12,
        seed: int = 0,
        max_coords: Optional[int] = 5,
    ) -> GradcheckResult:
        cfg = model.config
        rng = np.random.default_rng(seed)
        features = rng.standard_normal((frames, cfg.input_feature_dim))
        length = max(1, min(output_length(frames) - 1, cfg.vocab_size))
        # 相邻标签互不相同，保证可行对齐
        target = [i % cfg.vocab_size for i in range(length)]

        # 每次前向用同一 seed 的新生成器，各次求值的 dropout 掩码一致
        def loss_fn():
            logits = model.forward(features, training=True, rng=np.random.default_rng(seed))
            return ctc_loss(ops.log_softmax(logits, axis=-1), target)

        names, params = zip(*model.named_parameters())
        result = gradcheck(loss_fn, list(params), names=list(names), max_coords=max_coords, seed=seed)
        logger.info(f"model gradcheck: {result.checked} coords, max rel err {result.max_rel_error:.3e}")
        return result


verification_service = VerificationService()
