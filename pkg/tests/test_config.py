from pathlib import Path

import pytest

from lochom.config import ConfigError, RunConfig, load_config, parse_config

DATA = Path(__file__).parent / "data" / "config"
VALID = sorted((DATA / "valid").glob("*.toml"))
INVALID = sorted((DATA / "invalid").glob("*.toml"))


@pytest.mark.parametrize("path", VALID, ids=lambda p: p.stem)
def test_valid(path):
    cfg = load_config(path)
    assert isinstance(cfg, RunConfig)
    cfg.problem.spec()
    cfg.problem.point()


@pytest.mark.parametrize("path", INVALID, ids=lambda p: p.stem)
def test_invalid(path):
    with pytest.raises(ValueError):
        cfg = load_config(path)
        cfg.problem.spec()
        cfg.problem.point()


def test_shipped_config_matches_fixture():
    root = Path(__file__).parents[1]
    assert load_config(root / "configs" / "r2_reference.toml").problem == load_config(
        DATA / "valid" / "r2_reference.toml").problem


def test_defaults():
    cfg = parse_config({"schema_version": 1, "problem": {
        "dim": 1, "domain": [[-1, 1]], "a": "1", "b": "1", "c": "1 + x1^2", "alpha": 0, "beta": 2}})
    assert cfg.solver.modes == 32 and cfg.sweep.levels == 3
    assert cfg.solver.sweep_settings().seed == 0


def test_bool_is_not_int():
    with pytest.raises(ConfigError):
        parse_config({"schema_version": 1, "solver": {"modes": True}, "problem": {
            "dim": 1, "domain": [[-1, 1]], "a": "1", "b": "1", "c": "1", "alpha": 0, "beta": 2}})
