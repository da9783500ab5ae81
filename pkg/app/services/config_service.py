"""
配置文件加载（YAML）

model 段可以写 preset，其余键覆盖预设字段；未知键一律拒绝。
"""
import logging
from typing import Any, Dict, Optional

import yaml
from pydantic import ValidationError

from app.encoder import config_error_from_validation, named_config
from app.errors import ConfigError
from app.schemas import CliConfigFile, ModelConfig

logger = logging.getLogger(__name__)


class ConfigService:
    def load(self, path: str) -> CliConfigFile:
        try:
            with open(path, "r", encoding="utf-8") as f:
                raw = yaml.safe_load(f) or {}
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e}", field="config") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"invalid YAML in {path}: {e}", field="config") from e
        return self.parse(raw)

    def parse(self, raw: Dict[str, Any]) -> CliConfigFile:
        if not isinstance(raw, dict):
            raise ConfigError("config file must contain a mapping at the top level", field="config")
        try:
            parsed = CliConfigFile(**raw)
        except ValidationError as e:
            raise config_error_from_validation(e) from e
        # 尽早展开 model 段，让错误在加载时暴露
        self.model_config(parsed)
        return parsed

    def model_config(self, parsed: CliConfigFile) -> ModelConfig:
        return self.resolve_model(parsed.model)

    def resolve_model(self, section: Dict[str, Any], preset: Optional[str] = None) -> ModelConfig:
        fields = dict(section)
        name = preset or fields.pop("preset", None)
        fields.pop("preset", None)
        if name:
            return named_config(name, **fields)
        try:
            return ModelConfig(**fields)
        except ValidationError as e:
            raise config_error_from_validation(e) from e

    def dump_model(self, config: ModelConfig) -> str:
        return yaml.safe_dump({"model": config.model_dump()}, sort_keys=False)

    def dump(self, parsed: CliConfigFile) -> str:
        data = parsed.model_dump(by_alias=True)
        data["model"] = self.model_config(parsed).model_dump()
        return yaml.safe_dump(data, sort_keys=False)


config_service = ConfigService()
