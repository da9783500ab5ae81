"""
时间冗余分析

对子采样输出和每个 block 的输出，计算相隔 d 帧的两个嵌入向量的余弦相似度，
对所有位置、所有输入取平均。U-Net 降采样区间内的 block 在 80ms 帧上计算。
"""
import logging
from typing import Dict, List, Sequence

import numpy as np

from app.autograd import no_grad
from app.config import settings
from app.encoder import EncoderModel, FeatureInput, output_length
from app.errors import ConfigError
from app.schemas import RedundancyProfile

logger = logging.getLogger(__name__)


def cosine_by_distance(frames: np.ndarray, distance: int) -> np.ndarray:
    """frames [T, C] 中每对 (i, i+distance) 的余弦相似度"""
    a, b = frames[:-distance], frames[distance:]
    dots = (a * b).sum(axis=1)
    norms = np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
    return np.clip(dots / np.maximum(norms, 1e-12), -1.0, 1.0)


class RedundancyService:
    def redundancy_profile(
        self,
        model: EncoderModel,
        inputs: Sequence[FeatureInput],
        distances: Sequence[int] = (1, 2, 3, 4),
    ) -> RedundancyProfile:
        distances = [int(d) for d in distances]
        if not distances or min(distances) < 1:
            raise ConfigError(f"distances must be positive integers, got {distances}", field="distances")
        if not inputs:
            raise ConfigError("at least one input is required", field="inputs")

        sums: Dict[str, np.ndarray] = {}
        counts: Dict[str, np.ndarray] = {}
        skipped = 0
        longest = max(distances)
        for features in inputs:
            frames = np.asarray(getattr(features, "data", features)).shape[0]
            # 以最短的一级（80ms）为准，保证每一级都能取到最大距离
            shortest = output_length(frames)
            if model.config.unet:
                shortest = -(-shortest // 2)
            if shortest <= longest:
                skipped += 1
                continue
            with no_grad():
                _, hidden = model.forward(features, training=False, return_hidden=True)
            for stage, tensor in hidden.items():
                if stage not in sums:
                    sums[stage] = np.zeros(len(distances))
                    counts[stage] = np.zeros(len(distances))
                for j, d in enumerate(distances):
                    sims = cosine_by_distance(tensor.data, d)
                    sums[stage][j] += sims.sum()
                    counts[stage][j] += sims.size

        if skipped:
            logger.warning(f"{skipped} input(s) shorter than distance {longest} after subsampling were skipped")
        similarities = {
            stage: [float(s / c) if c else float("nan") for s, c in zip(sums[stage], counts[stage])]
            for stage in sums
        }
        rates = {"input": 40}
        rates.update({f"block{i}": r for i, r in enumerate(model.rates_ms, start=1)})
        return RedundancyProfile(
            schema_version=settings.PROFILE_SCHEMA_VERSION,
            distances=distances,
            similarities=similarities,
            rates_ms={k: v for k, v in rates.items() if k in similarities},
            samples=len(inputs) - skipped,
            skipped=skipped,
        )

    def profile_rows(self, profile: RedundancyProfile) -> List[str]:
        """列式文本：stage distance similarity"""
        rows = []
        for stage, values in profile.similarities.items():
            for d, v in zip(profile.distances, values):
                rows.append(f"{stage} {d} {v:.6f}")
        return rows


redundancy_service = RedundancyService()
