import math

import numpy as np
import pytest
from scipy import stats as sps

from hardcore.errors import ConfigError, InvalidRegime
from hardcore.geometry import Ball, Polygon
from hardcore.sampling import (ScenarioSpec, centered_window, load_spec, parse_kv, sample,
                               spec_from_strings)


def test_poisson_counts_are_poisson():
    spec = ScenarioSpec(seed=123)
    counts = np.array([len(sample(spec, r)) for r in range(1000)])
    assert abs(counts.mean() - 100) <= 3 * math.sqrt(100 / 1000)
    # dispersion test: sum (N - mean)^2 / mean ~ chi2(M - 1)
    stat = np.sum((counts - counts.mean()) ** 2) / counts.mean()
    p = sps.chi2.sf(stat, len(counts) - 1)
    assert 0.001 < p < 0.999


def test_positions_uniform_in_window():
    spec = ScenarioSpec(window=((2, -1), (4, 3)), process="binomial", n=2000, seed=5)
    pos = sample(spec).positions
    assert np.all(pos >= [2, -1]) and np.all(pos <= [4, 3])
    assert sps.kstest((pos[:, 0] - 2) / 2, "uniform").pvalue > 0.001


def test_binomial_two_unit_balls():
    cfg = sample(ScenarioSpec(process="binomial", n=2), 0)
    assert len(cfg) == 2 and all(g.shape == Ball(1.0) and g.t == 0 for g in cfg.grains)


def test_determinism_and_substreams():
    spec = ScenarioSpec(births="uniform", shape="ball-uniform", c=2.0, seed=99)
    a, b = sample(spec, 3), sample(spec, 3)
    assert a.to_dict() == b.to_dict()
    assert a.to_dict() != sample(spec, 4).to_dict()
    assert a.to_dict() != sample(spec.replace(seed=100), 3).to_dict()
    # births do not disturb positions or shapes
    c = sample(spec.replace(births="constant"), 3)
    assert np.array_equal(a.positions, c.positions)
    assert [g.shape for g in a.grains] == [g.shape for g in c.grains]


def test_shape_laws():
    cfg = sample(ScenarioSpec(shape="ball-uniform", c=2.0, seed=1))
    radii = [g.shape.radius for g in cfg.grains]
    assert min(radii) >= 1 and max(radii) <= 2
    cfg = sample(ScenarioSpec(shape="regular-polygon", m=8, c=1.1, regime=True, seed=1))
    assert all(isinstance(g.shape, Polygon) and g.shape.inradius == pytest.approx(1.0) for g in cfg.grains)
    cfg = sample(ScenarioSpec(births="exponential", rate=2.0, seed=1))
    assert cfg.births.mean() == pytest.approx(0.5, rel=0.4)


def test_invalid_specs():
    with pytest.raises(ConfigError):
        ScenarioSpec(window=((0, 0), (0, 1)))
    with pytest.raises(ConfigError):
        ScenarioSpec(intensity=0)
    with pytest.raises(ConfigError):
        ScenarioSpec(process="binomial", n=1)
    with pytest.raises(ConfigError):
        ScenarioSpec(births="gamma")
    with pytest.raises(InvalidRegime):
        ScenarioSpec(births="uniform", regime=True)
    with pytest.raises(InvalidRegime):
        ScenarioSpec(shape="square", c=1.2, regime=True)
    ScenarioSpec(shape="square", c=1.5, regime=True)


def test_key_value_parsing(tmp_path):
    text = "# scenario\nprocess = binomial\nn = 5\nwindow = 0, 20\nshape = ball-uniform\nc = 1.5\nM = 7\n"
    f = tmp_path / "s.cfg"
    f.write_text(text)
    spec = load_spec(f, ["n=6", "births=uniform"], seed=4)
    assert spec.n == 6 and spec.births == "uniform" and spec.seed == 4
    assert spec.window == ((0.0, 0.0), (20.0, 20.0))
    assert spec.extra == {"M": "7"}
    assert parse_kv("a=1\nb = x")["b"] == "x"
    with pytest.raises(ConfigError):
        load_spec(tmp_path / "missing.cfg")
    with pytest.raises(ConfigError):
        spec_from_strings({"n": "two"})
    assert ScenarioSpec.from_dict(spec.to_dict()) == spec


def test_centered_window():
    lo, hi = centered_window(400)
    assert lo == (-10.0, -10.0) and hi == (10.0, 10.0)
