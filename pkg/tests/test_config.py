from pathlib import Path

import numpy as np
import pytest

from bcsgap import config
from bcsgap.errors import ConfigError
from bcsgap.model import (ConstantDOS, ConstantKernel, FreeElectronDOS, SeparableKernel, TabulatedDOS,
                          TabulatedKernel, ZeroDOS)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_defaults():
    cfg = config.load()
    assert isinstance(cfg.kernel, SeparableKernel) and isinstance(cfg.dos, ZeroDOS)
    assert cfg.n_nodes == 64 and cfg.mapping == "log"
    assert cfg.solver.tol == 1e-12 and cfg.solver.method == "newton"
    assert cfg.offsets == (1e-2, 5e-3, 2.5e-3, 1.25e-3)
    assert cfg.problem().grid.size == 64
    assert cfg.problem(32).grid.size == 32


def test_shipped_configs_load():
    default = config.load(CONFIGS / "default.toml")
    assert default.params.epsilon == 0.01
    const = config.load(CONFIGS / "constant.toml")
    assert isinstance(const.kernel, ConstantKernel) and const.kernel.u1 == 0.5


def test_bare_override_targets_tolerances():
    cfg = config.load(overrides=["solver=1e-10", "grid.n_nodes=32", "solver.method=picard"])
    assert cfg.solver.tol == 1e-10
    assert cfg.n_nodes == 32 and cfg.solver.method == "picard"
    assert config.load(overrides=["mu=20"]).params.mu == 20.0


def test_override_coercion():
    raw = config.apply_overrides({}, ["a.b=3", "a.c=2.5", "a.d=true", "a.e=log"])
    assert raw == {"a": {"b": 3, "c": 2.5, "d": True, "e": "log"}}


@pytest.mark.parametrize("overrides", [
    ["solver=-1"], ["grid.n_nodes=8"], ["output.format=xml"], ["kernel.form=cubic"],
    ["dos.form=lorentzian"], ["solver.method=broyden"], ["epsilon=2.0"], ["nonsense"], ["rtol=1e-3"],
    ["grid.n_nodes.x=1"], ["kernel.base=abc"],
])
def test_bad_values_raise_config_error(overrides):
    with pytest.raises(ConfigError):
        config.load(overrides=overrides)


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        config.load(tmp_path / "absent.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("epsilon = = 1\n")
    with pytest.raises(ConfigError):
        config.load(bad)


def test_constant_bounds_must_match():
    with pytest.raises(ConfigError):
        config.build({"kernel": {"form": "constant", "value": 0.5, "u2": 0.6}})


def test_digest_is_stable_and_sensitive():
    a = config.load(overrides=["solver=1e-11"])
    b = config.load(overrides=["solver=1e-11"])
    c = config.load(overrides=["solver=1e-10"])
    assert a.digest == b.digest and len(a.digest) == 64
    assert a.digest != c.digest
    assert config.digest({"x": 1, "y": 2}) == config.digest({"y": 2, "x": 1})


def test_tabulated_kernel_from_csv(tmp_path):
    src = TabulatedKernel.sample(lambda x, xi: 0.4 + 0.1 * x * xi, (0.01, 1.0), 9)
    src.to_csv(tmp_path / "k.csv")
    toml = tmp_path / "run.toml"
    toml.write_text('[kernel]\nform = "tabulated"\ntable_path = "k.csv"\n')
    cfg = config.load(toml)
    np.testing.assert_array_equal(cfg.kernel.values, src.values)


def test_tabulated_kernel_sampled():
    cfg = config.build({"kernel": {"form": "tabulated", "sample": {"base": 0.4, "coefficients": [0.1], "n": 17}}})
    assert isinstance(cfg.kernel, TabulatedKernel) and cfg.kernel.values.shape == (17, 17)
    with pytest.raises(ConfigError):
        config.build({"kernel": {"form": "tabulated"}})


def test_dos_forms(tmp_path):
    assert isinstance(config.build({"dos": {"form": "constant"}}).dos, ConstantDOS)
    assert isinstance(config.build({"dos": {"form": "free_electron", "c": 0.3}}).dos, FreeElectronDOS)
    table = tmp_path / "dos.csv"
    table.write_text("# x,n\n-10,0.5\n0,1\n10,1.5\n")
    cfg = config.load(overrides=[f"dos.form=tabulated", f"dos.table_path={table}"])
    assert isinstance(cfg.dos, TabulatedDOS)


def test_output_dir_created(tmp_path):
    cfg = config.load(overrides=[f"output.dir={tmp_path / 'a' / 'b'}"])
    assert cfg.ensure_output_dir().is_dir()
