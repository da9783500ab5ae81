"""
训练循环

每一步：取一批新合成样本 -> 逐条前向得到 log-softmax -> CTC 损失取平均 ->
反向 -> 梯度裁剪 -> AdamW。按 eval_every 在固定评估集上做贪心解码统计准确率，
按 checkpoint_every 写检查点；每步一条 JSON 记录写入日志文件。
"""
import logging
import math
import os
from typing import List, Optional

import numpy as np

from app.autograd import backward, no_grad, ops
from app.checkpoint import save_checkpoint
from app.encoder import EncoderModel, ctc_greedy_decode
from app.errors import ConfigError, TrainingDivergedError
from app.schemas import (
    OptimizerParams,
    ScheduleParams,
    SpecAugmentParams,
    SyntheticTask,
    TrainParams,
    TrainRecord,
)
from app.training.augment import spec_augment
from app.training.ctc import ctc_loss
from app.training.metrics import token_accuracy
from app.training.optim import AdamW, clip_grad_norm
from app.training.schedule import lr as schedule_lr
from app.training.synthetic import Example, gen_synthetic, stream_batches

logger = logging.getLogger(__name__)


class TrainingService:
    def evaluate(self, model: EncoderModel, dataset: List[Example]) -> float:
        """贪心解码的平均 token 准确率"""
        total = 0.0
        with no_grad():
            for features, labels in dataset:
                hypothesis = ctc_greedy_decode(model.forward(features, training=False))
                total += token_accuracy(hypothesis, labels)
        return total / len(dataset)

    def train(
        self,
        model: EncoderModel,
        task: SyntheticTask,
        schedule: ScheduleParams,
        optimizer: Optional[OptimizerParams] = None,
        params: Optional[TrainParams] = None,
        augment: Optional[SpecAugmentParams] = None,
        log_path: Optional[str] = None,
        checkpoint_dir: Optional[str] = None,
    ) -> List[TrainRecord]:
        params = params or TrainParams()
        cfg = model.config
        if cfg.vocab_size != task.vocab_size:
            raise ConfigError(
                f"model vocab {cfg.vocab_size} does not match task vocab {task.vocab_size}", field="vocab_size"
            )
        if cfg.input_feature_dim != task.feature_dim:
            raise ConfigError(
                f"model expects {cfg.input_feature_dim} feature dims, task produces {task.feature_dim}",
                field="feature_dim",
            )

        opt = AdamW(model.parameters(), optimizer)
        rng = np.random.default_rng(params.seed)
        batches = stream_batches(task, params.batch_size, seed=task.seed)
        eval_set = gen_synthetic(task, params.eval_size, seed=task.seed + 1)
        augment = augment or SpecAugmentParams()

        log_file = None
        if log_path:
            directory = os.path.dirname(log_path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            log_file = open(log_path, "w", encoding="utf-8")

        records: List[TrainRecord] = []
        try:
            for step in range(1, params.steps + 1):
                rate = schedule_lr(step, schedule)
                batch = next(batches)
                model.train()
                opt.zero_grad()
                losses = []
                for features, labels in batch:
                    if params.spec_augment:
                        features = spec_augment(features, augment, rng=rng)
                    logits = model.forward(features, training=True, rng=rng)
                    losses.append(ctc_loss(ops.log_softmax(logits, axis=-1), labels))
                loss = ops.scale(ops.add_n(losses), 1.0 / len(losses))
                value = loss.item()
                if not math.isfinite(value):
                    raise TrainingDivergedError(step, value)
                backward(loss, opt.params)
                if params.max_grad_norm:
                    clip_grad_norm(opt.params, params.max_grad_norm)
                opt.step(rate)

                accuracy = None
                if step % params.eval_every == 0 or step == params.steps:
                    model.eval()
                    accuracy = self.evaluate(model, eval_set)
                    logger.info(f"step {step}: loss={value:.4f} lr={rate:.2e} accuracy={accuracy:.3f}")
                record = TrainRecord(step=step, lr=rate, loss=value, accuracy=accuracy)
                records.append(record)
                if log_file:
                    log_file.write(record.model_dump_json() + "\n")
                if checkpoint_dir and params.checkpoint_every and step % params.checkpoint_every == 0:
                    save_checkpoint(os.path.join(checkpoint_dir, f"step{step:06d}.ckpt"), model)
        finally:
            if log_file:
                log_file.close()
            model.eval()
        return records


training_service = TrainingService()
