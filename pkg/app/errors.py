"""
错误码与异常定义

命令行退出码沿用错误码模块的写法：每个失败类别一个常量，
异常对象自带退出码，由命令分发层统一转换。
"""
from typing import Optional

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class SqueezeError(Exception):
    """所有库内异常的基类"""
    exit_code = EXIT_RUNTIME


class ShapeError(SqueezeError, ValueError):
    """张量维度不匹配"""
    exit_code = EXIT_RUNTIME


class ConfigError(SqueezeError, ValueError):
    """配置不合法，field 指出出错字段"""
    exit_code = EXIT_CONFIG

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        if field and field not in message:
            message = f"{field}: {message}"
        super().__init__(message)


class GradientError(SqueezeError, RuntimeError):
    exit_code = EXIT_RUNTIME


class AlignmentError(SqueezeError, ValueError):
    """CTC 目标序列在给定帧数下无可行对齐"""
    exit_code = EXIT_RUNTIME


class TrainingDivergedError(SqueezeError, RuntimeError):
    exit_code = EXIT_RUNTIME

    def __init__(self, step: int, loss: float):
        self.step = step
        self.loss = loss
        super().__init__(f"training diverged at step {step}: loss={loss}")


class CheckpointError(SqueezeError):
    exit_code = EXIT_RUNTIME


class FeatureFileError(SqueezeError):
    exit_code = EXIT_RUNTIME


class UsageError(SqueezeError, ValueError):
    """命令行参数取值不合法（argparse 之外的检查）"""
    exit_code = EXIT_USAGE
