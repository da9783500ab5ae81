import numpy as np
import pytest

from app.errors import ConfigError
from app.schemas import ScheduleParams
from app.training.schedule import lr, noam_lr, noam_params, recipe_schedule, sample_curve


@pytest.fixture
def params():
    return ScheduleParams(lr_peak=2e-3, T_0=100, T_peak=50, d=1.0)


def test_warmup_midpoint(params):
    assert lr(50, params) == pytest.approx(1e-3)


def test_plateau_end_is_continuous(params):
    assert lr(150, params) == pytest.approx(2e-3)


def test_decay_halves_at_twice_warmup(params):
    assert lr(2 * 100 + 50, params) == pytest.approx(1e-3)


def test_start_is_zero(params):
    assert lr(0, params) == 0.0


def test_negative_step_rejected(params):
    with pytest.raises(ValueError):
        lr(-1, params)


def test_continuity_at_both_breakpoints():
    rng = np.random.default_rng(0)
    for _ in range(100):
        p = ScheduleParams(
            lr_peak=float(rng.uniform(1e-4, 1e-2)),
            warmup_steps=int(rng.integers(1, 1000)),
            peak_steps=int(rng.integers(0, 1000)),
            decay=float(rng.uniform(0.1, 2.0)),
        )
        eps = 1e-7
        for t in (p.warmup_steps, p.warmup_steps + p.peak_steps):
            assert lr(t - eps, p) == pytest.approx(lr(t, p), rel=1e-5)
            assert lr(t + eps, p) == pytest.approx(lr(t, p), rel=1e-5)


@pytest.mark.parametrize("t", [1, 10, 399, 400, 401, 1000, 25000])
def test_noam_special_case(t):
    p = noam_params(d_model=256, warmup=400, factor=2.0)
    assert lr(t, p) == pytest.approx(noam_lr(t, 256, 400, 2.0), rel=1e-12)


def test_recipe_schedule_uses_epochs():
    p = recipe_schedule("m", steps_per_epoch=10)
    assert (p.lr_peak, p.warmup_steps, p.peak_steps, p.decay) == (1.5e-3, 200, 1600, 1.0)
    with pytest.raises(ConfigError):
        recipe_schedule("xl", 10)


def test_aliases_and_field_names_both_accepted():
    assert ScheduleParams(T_0=5) == ScheduleParams(warmup_steps=5)


def test_sample_curve(params):
    curve = sample_curve(params, 100, every=25)
    assert [t for t, _ in curve] == [0, 25, 50, 75, 100]
    assert curve[2][1] == pytest.approx(1e-3)
