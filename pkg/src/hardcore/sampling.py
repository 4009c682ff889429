"""Seeded generation of independently marked germ configurations.

Every random quantity is drawn from a Philox stream keyed by
``(seed, *key, replicate, stream)``: stream 0 drives the count and the
positions, stream 1 the birth times and stream 2 the shapes.  Two specs that
differ only in their birth law therefore share positions and shapes
replicate by replicate, and replicates can be generated in any order.
"""
from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, InvalidRegime
from .geometry import Ball, Polygon, regular_polygon, square
from .model import Configuration, Grain

POSITIONS, BIRTHS, SHAPES = 0, 1, 2
MIN_SEPARATION = 1e-9

PROCESSES = ("poisson", "binomial")
BIRTH_LAWS = ("constant", "uniform", "exponential")
SHAPE_LAWS = ("ball", "ball-uniform", "regular-polygon", "square", "polygon")


@dataclass(frozen=True)
class ScenarioSpec:
    dimension: int = 2
    window: tuple = ((0.0, 0.0), (10.0, 10.0))
    process: str = "poisson"
    intensity: float = 1.0
    n: int = 2
    births: str = "constant"
    birth_value: float = 0.0
    t_max: float = 10.0
    rate: float = 1.0
    shape: str = "ball"
    radius: float = 1.0
    c: float = 1.0
    m: int = 6
    vertices: Optional[tuple] = None
    regime: bool = False
    seed: int = 0
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        win = np.asarray(self.window, dtype=float)
        if win.size != 2 * self.dimension:
            raise ConfigError(f"window needs {2 * self.dimension} numbers for dimension {self.dimension}")
        win = win.reshape(2, self.dimension)
        object.__setattr__(self, "window", tuple(tuple(float(v) for v in row) for row in win))
        if self.vertices is not None:
            object.__setattr__(self, "vertices", tuple(tuple(float(v) for v in p) for p in self.vertices))
        self.validate()

    @property
    def window_array(self) -> np.ndarray:
        return np.array(self.window, dtype=float)

    @property
    def volume(self) -> float:
        lo, hi = self.window_array
        return float(np.prod(hi - lo))

    def validate(self) -> None:
        if self.dimension < 1:
            raise ConfigError("dimension must be positive")
        lo, hi = self.window_array
        if np.any(hi <= lo) or not np.all(np.isfinite(self.window_array)):
            raise ConfigError("degenerate window")
        if self.process not in PROCESSES:
            raise ConfigError(f"process must be one of {PROCESSES}")
        if self.process == "poisson" and not self.intensity > 0:
            raise ConfigError("intensity must be positive")
        if self.process == "binomial" and self.n < 2:
            raise ConfigError("binomial process needs n >= 2")
        if self.births not in BIRTH_LAWS:
            raise ConfigError(f"births must be one of {BIRTH_LAWS}")
        if self.births == "constant" and self.birth_value < 0:
            raise ConfigError("birth_value must be nonnegative")
        if self.births == "uniform" and self.t_max < 0:
            raise ConfigError("t_max must be nonnegative")
        if self.births == "exponential" and not self.rate > 0:
            raise ConfigError("rate must be positive")
        if self.shape not in SHAPE_LAWS:
            raise ConfigError(f"shape must be one of {SHAPE_LAWS}")
        if self.shape != "ball" and self.shape != "ball-uniform" and self.dimension != 2:
            raise ConfigError("polygon shapes need dimension 2")
        if not self.radius > 0 or not self.c > 0:
            raise ConfigError("radius and c must be positive")
        if self.shape == "ball-uniform" and self.c < 1:
            raise ConfigError("ball-uniform draws radii from [1, c]; c must be >= 1")
        if self.shape == "regular-polygon" and self.m < 3:
            raise ConfigError("m must be at least 3")
        if self.shape == "polygon":
            if self.vertices is None:
                raise ConfigError("shape 'polygon' needs vertices")
            Polygon(self.vertices)
        if self.regime:
            self.check_regime()

    def check_regime(self, c: Optional[float] = None) -> None:
        """Births all 0 and every shape between the unit ball and c times it."""
        c = self.c if c is None else c
        if self.births != "constant" or self.birth_value != 0:
            raise InvalidRegime("equal-birth regime needs constant births at 0")
        lo_r, hi_r = _shape_radius_bounds(self)
        if lo_r < 1 - 1e-12 or hi_r > c + 1e-12:
            raise InvalidRegime(f"shape law '{self.shape}' is not between B and {c}B")

    def replace(self, **kw) -> "ScenarioSpec":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "extra"}
        out["window"] = [list(r) for r in self.window]
        if self.vertices is not None:
            out["vertices"] = [list(p) for p in self.vertices]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioSpec":
        names = {f.name for f in dataclasses.fields(cls)} - {"extra"}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
        kw = dict(data)
        if "window" in kw:
            kw["window"] = tuple(tuple(r) for r in np.asarray(kw["window"], dtype=float).reshape(2, -1))
        return cls(**kw)


def _shape_radius_bounds(spec: ScenarioSpec):
    """(smallest inradius, largest circumradius) the shape law can produce."""
    if spec.shape == "ball":
        return spec.radius, spec.radius
    if spec.shape == "ball-uniform":
        return 1.0, spec.c
    if spec.shape == "regular-polygon":
        return 1.0, 1.0 / math.cos(math.pi / spec.m)
    if spec.shape == "square":
        return 1.0, math.sqrt(2.0)
    p = Polygon(spec.vertices)
    return p.inradius, p.circumradius


def centered_window(n: float, dimension: int = 2) -> tuple:
    """W_n: the cube of volume n centred at the origin."""
    half = n ** (1.0 / dimension) / 2
    return (tuple([-half] * dimension), tuple([half] * dimension))


def rng_for(seed: int, replicate: int, stream: int, key: tuple = ()) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key) + (int(replicate), int(stream)))
    return np.random.Generator(np.random.Philox(ss))


def sample_positions(spec: ScenarioSpec, rng: np.random.Generator) -> np.ndarray:
    lo, hi = spec.window_array
    count = int(rng.poisson(spec.intensity * spec.volume)) if spec.process == "poisson" else spec.n
    pos = lo + (hi - lo) * rng.random((count, spec.dimension))
    while count > 1:
        close = cKDTree(pos).query_pairs(MIN_SEPARATION, output_type="ndarray")
        if not len(close):
            break
        redo = np.unique(close[:, 1])
        pos[redo] = lo + (hi - lo) * rng.random((len(redo), spec.dimension))
    return pos


def sample_births(spec: ScenarioSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    if spec.births == "constant":
        return np.full(count, float(spec.birth_value))
    if spec.births == "uniform":
        return rng.uniform(0.0, spec.t_max, count)
    return rng.exponential(1.0 / spec.rate, count)


def sample_shapes(spec: ScenarioSpec, count: int, rng: np.random.Generator) -> list:
    if spec.shape == "ball":
        return [Ball(spec.radius, spec.dimension)] * count
    if spec.shape == "ball-uniform":
        return [Ball(float(r), spec.dimension) for r in rng.uniform(1.0, spec.c, count)]
    if spec.shape == "square":
        return [square(1.0)] * count
    if spec.shape == "polygon":
        return [Polygon(spec.vertices)] * count
    angles = rng.uniform(0.0, 2 * math.pi / spec.m, count)
    return [regular_polygon(spec.m, 1.0, float(a)) for a in angles]


def sample(spec: ScenarioSpec, replicate: int = 0, key: tuple = ()) -> Configuration:
    pos = sample_positions(spec, rng_for(spec.seed, replicate, POSITIONS, key))
    count = len(pos)
    births = sample_births(spec, count, rng_for(spec.seed, replicate, BIRTHS, key))
    shapes = sample_shapes(spec, count, rng_for(spec.seed, replicate, SHAPES, key))
    grains = [Grain(k, pos[k], float(births[k]), shapes[k]) for k in range(count)]
    meta = {"seed": spec.seed, "replicate": replicate, "key": list(key)}
    return Configuration(grains, spec.window_array, spec.dimension, meta=meta)


# ---------------------------------------------------------------------------
# flat key-value configuration

_INT_KEYS = {"dimension", "n", "m", "seed"}
_FLOAT_KEYS = {"intensity", "birth_value", "t_max", "rate", "radius", "c"}


def parse_kv(text: str) -> dict:
    """Parse ``key = value`` lines (``#`` comments allowed) into a dict of strings."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string("[scenario]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from None
    return dict(parser["scenario"])


def parse_overrides(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not KEY=VALUE")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _numbers(value: str) -> list:
    try:
        return [float(v) for v in value.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected numbers, got '{value}'") from None


def _bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got '{value}'")


def spec_from_strings(values: dict) -> ScenarioSpec:
    """Build a spec from string values; keys that are not scenario fields go to ``extra``."""
    names = {f.name for f in dataclasses.fields(ScenarioSpec)} - {"extra"}
    kw, extra = {}, {}
    dim = int(values.get("dimension", 2))
    for k, v in values.items():
        if k not in names:
            extra[k] = v
            continue
        try:
            if k in _INT_KEYS:
                kw[k] = int(v)
            elif k in _FLOAT_KEYS:
                kw[k] = float(v)
            elif k == "regime":
                kw[k] = _bool(v)
            elif k == "window":
                nums = _numbers(v)
                if len(nums) == 2:
                    nums = [nums[0]] * dim + [nums[1]] * dim
                kw[k] = tuple(tuple(r) for r in np.reshape(nums, (2, -1)))
            elif k == "vertices":
                kw[k] = tuple(tuple(r) for r in np.reshape(_numbers(v), (-1, 2)))
            else:
                kw[k] = v.strip()
        except (ValueError, TypeError):
            raise ConfigError(f"bad value for '{k}': '{v}'") from None
    return ScenarioSpec(**kw, extra=extra)


def load_spec(path=None, overrides=None, seed: Optional[int] = None) -> ScenarioSpec:
    values = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"configuration file not found: {p}")
        values.update(parse_kv(p.read_text()))
    values.update(parse_overrides(overrides))
    if seed is not None:
        values["seed"] = str(seed)
    return spec_from_strings(values)
