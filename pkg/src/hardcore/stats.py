"""Additive functionals of the grown configuration and Monte Carlo harnesses.

A functional sums ``f(n^{-1/d} X) * h(R, K)`` over the grains of a result
built in the window ``W_n``; it is zero for configurations with fewer than
two grains.  The volume variant ``h(t, K) = V_d(tK)`` equals the volume of
the union of grains because grown grains have disjoint interiors, which
:func:`rasterized_union_volume` checks independently.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import stats as sps

from .analysis import neighbour_graph, clusters
from .builder import build
from .errors import ConfigError
from .model import CAPPED, COVERED
from .sampling import ScenarioSpec, centered_window, sample

log = logging.getLogger(__name__)

KINDS = ("volume", "count", "power")
WEIGHTS = ("const", "box", "poly")


@dataclass(frozen=True)
class FunctionalSpec:
    kind: str = "volume"
    alpha: float = 1.0
    beta: float = 1.0
    weight: str = "const"
    value: float = 1.0
    box: tuple = ((-0.25, -0.25), (0.25, 0.25))
    coeffs: tuple = (1.0,)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"functional must be one of {KINDS}")
        if self.weight not in WEIGHTS:
            raise ConfigError(f"weight must be one of {WEIGHTS}")
        if self.kind == "power" and self.alpha < 0:
            raise ConfigError("power functional needs alpha >= 0")

    def h(self, grain) -> float:
        if self.kind == "count":
            return 1.0
        if self.kind == "volume":
            return grain.grain.shape.volume(grain.R)
        return self.alpha * grain.R ** self.beta

    def f(self, u: np.ndarray) -> np.ndarray:
        """Weight on W_1 evaluated at scaled positions ``u`` (rows)."""
        u = np.atleast_2d(u)
        if self.weight == "const":
            return np.full(len(u), float(self.value))
        if self.weight == "box":
            lo, hi = np.asarray(self.box, dtype=float).reshape(2, -1)
            return np.all((u >= lo) & (u <= hi), axis=1).astype(float)
        return npoly.polyval(u[:, 0], np.asarray(self.coeffs, dtype=float))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "alpha": self.alpha, "beta": self.beta, "weight": self.weight,
                "value": self.value, "box": [list(r) for r in self.box], "coeffs": list(self.coeffs)}


def functional_terms(result, functional: FunctionalSpec, window_n: float):
    """(value, number of capped grains that contributed)."""
    if result is None or len(result.grains) < 2:
        return 0.0, 0
    d = result.config.dimension
    x = np.array([g.grain.x for g in result.grains]) * window_n ** (-1.0 / d)
    h = np.array([functional.h(g) for g in result.grains])
    capped = sum(g.status == CAPPED for g in result.grains)
    if capped:
        log.warning("%d capped grain(s) contribute to the functional", capped)
    return float(math.fsum(functional.f(x) * h)), capped


def functional_value(result, functional: FunctionalSpec, window_n: float) -> float:
    return functional_terms(result, functional, window_n)[0]


def run_replicates(fn, args, workers: int = 1) -> list:
    """Map ``fn`` over ``args`` preserving order; worker processes when ``workers > 1``."""
    args = list(args)
    if workers <= 1 or len(args) < 2:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, args, chunksize=max(1, len(args) // (4 * workers))))


# ---------------------------------------------------------------------------
# CLT experiment


@dataclass
class CltLevel:
    n: float
    samples: np.ndarray
    mean: float
    variance: float
    var_over_n: float
    standardized: np.ndarray
    ks: Optional[float]
    ks_pvalue: Optional[float]
    capped: int

    @property
    def indeterminate(self) -> bool:
        return self.ks is None


@dataclass
class CltReport:
    n_list: list
    M: int
    functional: FunctionalSpec
    levels: list = field(default_factory=list)

    @property
    def sigma2_hat(self) -> float:
        return self.levels[-1].var_over_n if self.levels else math.nan

    def variance_ratio(self) -> float:
        """Relative change of variance/n between the two largest window sizes."""
        if len(self.levels) < 2:
            return math.nan
        a, b = self.levels[-2].var_over_n, self.levels[-1].var_over_n
        return abs(b - a) / a if a > 0 else math.nan

    def to_dict(self) -> dict:
        return {
            "schema": "hardcore.clt/1",
            "n_list": list(self.n_list),
            "M": self.M,
            "functional": self.functional.to_dict(),
            "sigma2_hat": self.sigma2_hat,
            "variance_ratio": self.variance_ratio(),
            "levels": [{"n": lv.n, "mean": lv.mean, "variance": lv.variance,
                        "var_over_n": lv.var_over_n, "ks": lv.ks, "ks_pvalue": lv.ks_pvalue,
                        "standardized_mean": float(np.mean(lv.standardized)) if lv.ks is not None else None,
                        "capped": lv.capped} for lv in self.levels],
        }


def _clt_one(args):
    spec, functional, n, key, r = args
    config = sample(spec, r, key)
    if len(config) < 2:
        return 0.0, 0
    return functional_terms(build(config), functional, n)


def clt_experiment(spec: ScenarioSpec, functional: FunctionalSpec, n_list, M: int,
                   seed: Optional[int] = None, workers: int = 1) -> CltReport:
    spec.check_regime()
    if M < 2:
        raise ConfigError("clt experiment needs M >= 2 replicates")
    if seed is not None:
        spec = spec.replace(seed=seed)
    report = CltReport([float(n) for n in n_list], M, functional)
    for k, n in enumerate(report.n_list):
        spec_n = spec.replace(window=centered_window(n, spec.dimension))
        out = run_replicates(_clt_one, [(spec_n, functional, n, (k,), r) for r in range(M)], workers)
        vals = np.array([v for v, _ in out])
        capped = int(sum(c for _, c in out))
        mean = float(math.fsum(vals) / M)
        var = float(math.fsum((vals - mean) ** 2) / (M - 1))
        sd = math.sqrt(var)
        if sd <= 1e-12 * max(1.0, abs(mean)):
            z = np.zeros(M)
            ks = pval = None
            log.warning("n=%g: sample variance is ~0, KS gate indeterminate", n)
        else:
            z = (vals - mean) / sd
            res = sps.kstest(z, "norm")
            ks, pval = float(res.statistic), float(res.pvalue)
        report.levels.append(CltLevel(n, vals, mean, var, var / n, z, ks, pval, capped))
        log.info("n=%g mean=%.6g var/n=%.6g ks=%s", n, mean, var / n, ks)
    return report


# ---------------------------------------------------------------------------
# coupled birth scenarios


@dataclass
class CompareReport:
    t_max: float
    M: int
    rows: list
    mean_R: dict
    covered_fraction: dict
    quantiles: dict
    cluster_sizes: dict
    paired_diff_mean: float
    t_statistic: float
    p_value: float

    def to_dict(self) -> dict:
        return {
            "schema": "hardcore.compare/1",
            "t_max": self.t_max,
            "M": self.M,
            "mean_R": self.mean_R,
            "covered_fraction": self.covered_fraction,
            "quantiles": self.quantiles,
            "mean_cluster_size": {k: float(np.mean(v)) if len(v) else None
                                  for k, v in self.cluster_sizes.items()},
            "paired_diff_mean": self.paired_diff_mean,
            "t_statistic": self.t_statistic,
            "p_value": self.p_value,
        }


QUANTILE_LEVELS = (0.05, 0.25, 0.5, 0.75, 0.95)


def _scenario_stats(config):
    res = build(config)
    keep = [g.R for g in res.grains if g.status not in (COVERED, CAPPED)]
    covered = sum(g.status == COVERED for g in res.grains)
    sizes = [len(c) for c in clusters(neighbour_graph(res))]
    return keep, covered, len(res.grains), sizes


def _compare_one(args):
    spec_a, spec_b, r = args
    out = {}
    for name, spec in (("A", spec_a), ("B", spec_b)):
        config = sample(spec, r)
        out[name] = _scenario_stats(config) if len(config) >= 2 else ([], 0, len(config), [])
    return out


def compare_scenarios(spec: ScenarioSpec, t_max: float, M: int, seed: Optional[int] = None,
                      workers: int = 1) -> CompareReport:
    """Scenario A: all births 0.  Scenario B: births uniform on [0, t_max].  Same germs and shapes."""
    if seed is not None:
        spec = spec.replace(seed=seed)
    spec_a = spec.replace(births="constant", birth_value=0.0, regime=False)
    spec_b = spec.replace(births="uniform", t_max=float(t_max), regime=False)
    reps = run_replicates(_compare_one, [(spec_a, spec_b, r) for r in range(M)], workers)

    rows = []
    pooled = {"A": [], "B": []}
    per_rep = {"A": [], "B": []}
    covered = {"A": 0, "B": 0}
    total = {"A": 0, "B": 0}
    sizes = {"A": [], "B": []}
    for r, rep in enumerate(reps):
        for name in ("A", "B"):
            rs, cov, n, cs = rep[name]
            pooled[name].extend(rs)
            covered[name] += cov
            total[name] += n
            sizes[name].extend(cs)
            m = float(math.fsum(rs) / len(rs)) if rs else math.nan
            per_rep[name].append(m)
            rows.append((name, r, "mean_R", m))
            rows.append((name, r, "covered_fraction", cov / n if n else math.nan))
            rows.append((name, r, "n_clusters", float(len(cs))))
            rows.extend((name, r, "R", float(v)) for v in rs)
            rows.extend((name, r, "cluster_size", float(s)) for s in cs)

    a = np.array(per_rep["A"])
    b = np.array(per_rep["B"])
    ok = np.isfinite(a) & np.isfinite(b)
    diff = b[ok] - a[ok]
    if len(diff) >= 2 and np.any(diff != diff[0]):
        res = sps.ttest_rel(b[ok], a[ok], alternative="greater")
        t_stat, p = float(res.statistic), float(res.pvalue)
    else:
        t_stat, p = math.nan, math.nan
    return CompareReport(
        float(t_max), M, rows,
        {k: float(np.mean(v)) if v else math.nan for k, v in pooled.items()},
        {k: covered[k] / total[k] if total[k] else math.nan for k in covered},
        {k: dict(zip(map(str, QUANTILE_LEVELS), np.quantile(v, QUANTILE_LEVELS).tolist()))
         if v else {} for k, v in pooled.items()},
        sizes,
        float(diff.mean()) if len(diff) else math.nan,
        t_stat, p,
    )


# ---------------------------------------------------------------------------
# union volume by rasterization


def rasterized_union_volume(result, n_points: int = 1_000_000, include_capped: bool = False) -> float:
    """Volume of the union of grown grains from a midpoint grid over their bounding box."""
    grains = [g for g in result.grains if g.R > 0 and (include_capped or g.status != CAPPED)]
    if not grains:
        return 0.0
    d = result.config.dimension
    lo_all, hi_all = [], []
    for g in grains:
        ext = g.R * g.grain.shape.circumradius
        lo_all.append(g.grain.x - ext)
        hi_all.append(g.grain.x + ext)
    lo = np.min(lo_all, axis=0)
    hi = np.max(hi_all, axis=0)
    k = max(2, int(round(n_points ** (1.0 / d))))
    h = (hi - lo) / k
    mask = np.zeros((k,) * d, dtype=bool)
    for g, glo, ghi in zip(grains, lo_all, hi_all):
        i0 = np.clip(np.floor((glo - lo) / h).astype(int), 0, k - 1)
        i1 = np.clip(np.ceil((ghi - lo) / h).astype(int), 1, k)
        axes = [lo[a] + (np.arange(i0[a], i1[a]) + 0.5) * h[a] for a in range(d)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        inside = g.body().contains(pts.reshape(-1, d)).reshape(pts.shape[:-1])
        sl = tuple(slice(i0[a], i1[a]) for a in range(d))
        mask[sl] |= inside
    return float(mask.sum() * np.prod(h))
