from pathlib import Path

import pytest
import yaml

from app.errors import ConfigError
from app.services.config_service import config_service

EXAMPLE = Path(__file__).resolve().parent.parent / "configs" / "example.yaml"


def test_example_config_loads():
    parsed = config_service.load(str(EXAMPLE))
    assert parsed.schedule.warmup_steps == 100
    assert parsed.schedule.peak_steps == 200
    config = config_service.model_config(parsed)
    assert config.dim == 32 and config.unet


def test_preset_fields_are_overridden(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("model:\n  preset: toy\n  unet: false\n  positional: absolute\n", encoding="utf-8")
    config = config_service.model_config(config_service.load(str(path)))
    assert (config.dim, config.unet, config.positional) == (8, False, "absolute")


def test_model_without_preset_uses_defaults():
    config = config_service.resolve_model({"num_blocks": 4, "downsample_after_block": 2})
    assert config.num_blocks == 4 and config.dim == 144


def test_schedule_accepts_aliases_and_names():
    a = config_service.parse({"schedule": {"T_0": 7, "T_peak": 3, "d": 0.5}})
    b = config_service.parse({"schedule": {"warmup_steps": 7, "peak_steps": 3, "decay": 0.5}})
    assert a.schedule == b.schedule


@pytest.mark.parametrize("raw,field", [
    ({"model": {"preset": "toy", "kernel": 5}}, "kernel"),
    ({"model": {"preset": "toy", "conv_kernel": 4}}, "conv_kernel"),
    ({"train": {"steps": -1}}, "train.steps"),
    ({"extra": 1}, "extra"),
])
def test_invalid_configs_name_the_field(raw, field):
    with pytest.raises(ConfigError) as excinfo:
        config_service.parse(raw)
    assert excinfo.value.field == field


def test_top_level_must_be_mapping():
    with pytest.raises(ConfigError):
        config_service.parse([1, 2])


def test_unreadable_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        config_service.load(str(tmp_path / "missing.yaml"))
    bad = tmp_path / "bad.yaml"
    bad.write_text("model: [unclosed\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        config_service.load(str(bad))


def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("", encoding="utf-8")
    parsed = config_service.load(str(path))
    assert config_service.model_config(parsed).dim == 32


def test_dump_round_trips(tmp_path):
    parsed = config_service.load(str(EXAMPLE))
    dumped = yaml.safe_load(config_service.dump(parsed))
    assert dumped["schedule"]["T_0"] == 100
    assert dumped["model"]["num_blocks"] == 2
    assert config_service.parse(dumped) == parsed.model_copy(update={"model": dumped["model"]})
