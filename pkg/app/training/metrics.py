from typing import Sequence


def edit_distance(a: Sequence[int], b: Sequence[int]) -> int:
    """Levenshtein 距离"""
    previous = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        current = [i] + [0] * len(b)
        for j, y in enumerate(b, start=1):
            current[j] = min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (x != y))
        previous = current
    return previous[-1]


def token_accuracy(hypothesis: Sequence[int], target: Sequence[int]) -> float:
    """max(0, 1 - edit / |target|)；空目标时完全匹配记 1"""
    if not target:
        return 1.0 if not hypothesis else 0.0
    return max(0.0, 1.0 - edit_distance(hypothesis, target) / len(target))
