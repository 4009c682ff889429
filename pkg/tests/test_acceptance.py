"""Exit criteria, one test per criterion; each prints a PASS/FAIL line."""
import json
import math
import time

import numpy as np
import pytest

from hardcore.analysis import (center_grain, check_invariants, cluster_report, sandwich_violation,
                               neighbour_graph, stabilization, stabilization_spot_check, tail_curve_U,
                               verify_hard_core)
from hardcore.builder import IN_H, TIE_DEGENERATE, build
from hardcore.cli import main
from hardcore.geometry import Ball
from hardcore.model import Grain, first_contact_time
from hardcore.oracle import simulate_growth
from hardcore.sampling import ScenarioSpec, sample
from hardcore.stats import (FunctionalSpec, clt_experiment, compare_scenarios, functional_value,
                            rasterized_union_volume)

from conftest import make_config, record

pytestmark = pytest.mark.acceptance

PER_SCENARIO = 17  # 6 scenarios -> 102 configurations
BIRTHS = {"births 0": dict(births="constant"), "births U[0,10]": dict(births="uniform", t_max=10.0)}
SHAPES = {"unit ball": dict(shape="ball"), "ball radius U[1,2]": dict(shape="ball-uniform", c=2.0),
          "square": dict(shape="square")}


@pytest.fixture(scope="module")
def runs():
    """Builder and oracle results on seeded Poisson(1) configurations in [0, 10]^2."""
    t0 = time.perf_counter()
    out = []
    skipped = 0
    for bi, (bname, bkw) in enumerate(BIRTHS.items()):
        for si, (sname, skw) in enumerate(SHAPES.items()):
            spec = ScenarioSpec(seed=1000 + 10 * bi + si, **bkw, **skw)
            r = 0
            kept = 0
            while kept < PER_SCENARIO:
                config = sample(spec, r)
                r += 1
                res = build(config)
                if res.status == TIE_DEGENERATE:
                    skipped += 1
                    continue
                out.append((f"{bname}/{sname}", config, res, simulate_growth(config)))
                kept += 1
    return out, time.perf_counter() - t0, skipped


def test_c01_oracle_equivalence(runs):
    data, elapsed, skipped = runs
    worst = 0.0
    for _, _, a, b in data:
        m = a.non_capped_mask() & b.non_capped_mask()
        worst = max(worst, float(np.max(np.abs(a.R - b.R)[m])))
    ok = len(data) >= 100 and worst <= 1e-6 and elapsed < 120
    record(1, "oracle equivalence", ok,
           f"{len(data)} configs ({skipped} tie-degenerate skipped), max |dR| = {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_c02_hard_core(runs):
    worst = max(verify_hard_core(res).max_relative_penetration for _, _, res, _ in runs[0])
    ok = worst <= 1e-7
    record(2, "hard-core", ok, f"max penetration / circumradius = {worst:.2e}")
    assert ok


def test_c03_earlier_neighbours(runs):
    missing = 0
    non_unique = 0
    checked = 0
    for name, _, res, _ in runs[0]:
        inv = check_invariants(res)
        missing += inv["earlier-neighbour"][1]
        checked += sum(g.status != "unstopped-capped" for g in res.grains)
        if "unique-earlier-neighbour" in inv:
            non_unique += inv["unique-earlier-neighbour"][1]
    ok = missing == 0 and non_unique == 0
    record(3, "earlier neighbours", ok,
           f"{checked} grains, {missing} without earlier neighbour, {non_unique} ball grains without exactly one")
    assert ok


def test_c04_doublets(runs):
    bad = 0
    increase = 0
    interior = 0
    for _, _, res, _ in runs[0]:
        inv = check_invariants(res)
        bad += inv["doublet"][1]
        increase += inv["stop-time-increase"][1]
        interior += sum(not c.touches_boundary for c in cluster_report(res))
    ok = bad == 0 and increase == 0
    record(4, "doublet structure", ok,
           f"{interior} interior clusters, {bad} doublet-count violations, {increase} non-increasing BFS edges")
    assert ok


def test_c05_closed_form_anchors():
    rng = np.random.default_rng(5)
    worst_pair = 0.0
    for _ in range(50):
        p, q = rng.uniform(-100, 100, (2, 2))
        res = build(make_config([p, q]))
        worst_pair = max(worst_pair, float(np.max(np.abs(res.R - np.linalg.norm(p - q) / 2))))
    triple = build(make_config([(0, 0), (10, 0), (24, 0)]))
    e_triple = float(np.max(np.abs(triple.R - [5, 5, 9])))
    e_stagger = abs(first_contact_time(Grain(0, [0, 0], 0.0, Ball(1.0)), Grain(1, [10, 0], 3.0, Ball(1.0))) - 6.5)
    cov = build(make_config([(0, 0), (2, 0)], births=[0.0, 5.0]))
    e_cov = abs(cov[1].R)
    ok = worst_pair <= 1e-12 and max(e_triple, e_stagger, e_cov) <= 1e-9
    record(5, "closed-form anchors", ok,
           f"pair {worst_pair:.1e}, triple {e_triple:.1e}, staggered d {e_stagger:.1e}, coverage R {e_cov:.1e}")
    assert ok


def test_c06_translation_invariance(runs):
    rng = np.random.default_rng(6)
    data = runs[0]
    picks = [data[k] for k in rng.choice(len(data), 20, replace=False)]
    worst = 0.0
    for _, config, res, _ in picks:
        for _ in range(50):
            shifted = build(config.shifted(rng.uniform(-100, 100, 2)))
            m = res.non_capped_mask()
            worst = max(worst, float(np.max(np.abs(shifted.R - res.R)[m])))
    ok = worst <= 1e-9
    record(6, "translation invariance", ok, f"20 configs x 50 shifts, max |dR| = {worst:.2e}")
    assert ok


def test_c07_sandwich(runs):
    worst = max(sandwich_violation(res) for _, _, res, _ in runs[0])
    edges = sum(len(neighbour_graph(res).edges) for _, _, res, _ in runs[0])
    ok = worst <= 1e-8
    record(7, "contact-time sandwich", ok, f"{edges} neighbour pairs, max violation = {max(worst, 0):.2e}")
    assert ok


def test_c08_stabilization():
    spec = ScenarioSpec(window=((0, 0), (15, 15)), seed=808)
    used = 0
    worst = 0.0
    r = 0
    while used < 50:
        config = sample(spec, r)
        r += 1
        gid = center_grain(config)
        rec = stabilization(config, None, gid)
        if rec.truncated or not math.isfinite(rec.U):
            continue
        chk = stabilization_spot_check(config, gid, rec, 20, seed=r)
        worst = max(worst, chk.max_deviation)
        used += 1
    tail_spec = ScenarioSpec(window=((0, 0), (30, 30)), seed=809)
    half_diam = 30 * math.sqrt(2) / 2
    ts = np.arange(0.0, half_diam, 0.5)
    curve = tail_curve_U(tail_spec, 200, ts)
    monotone = bool(np.all(np.diff(curve.tail) <= 0))
    below = ts[curve.tail < 0.05]
    ok = worst <= 1e-9 and monotone and len(below) > 0
    t_cross = f"{below[0]:.1f}" if len(below) else "never"
    record(8, "stabilization", ok,
           f"{used} grains x 20 insertions, max |dR| = {worst:.1e}; P(U>t) < 0.05 from t = {t_cross} "
           f"(half diameter {half_diam:.1f}), monotone = {monotone}")
    assert ok


@pytest.fixture(scope="module")
def clt_report():
    t0 = time.perf_counter()
    rep = clt_experiment(ScenarioSpec(regime=True, seed=2024), FunctionalSpec("volume"), [100, 400], 500)
    return rep, time.perf_counter() - t0


def test_c09a_clt_normality(clt_report):
    rep, elapsed = clt_report
    lv = rep.levels[-1]
    zmean = float(np.mean(lv.standardized))
    ok = lv.ks is not None and lv.ks < 0.08 and abs(zmean) <= 3 / math.sqrt(rep.M) and elapsed < 900
    record(9, "CLT normality (n=400)", ok, f"KS = {lv.ks:.4f}, standardized mean = {zmean:.1e}, {elapsed:.0f}s")
    assert ok


def test_c09b_clt_variance_stability(clt_report):
    rep, _ = clt_report
    a, b = rep.levels[0].var_over_n, rep.levels[1].var_over_n
    ratio = rep.variance_ratio()
    ok = ratio < 0.20
    record(9, "CLT variance/n stability", ok, f"var/n = {a:.4f} (n=100), {b:.4f} (n=400), relative change {ratio:.1%}")
    assert ok


def test_c10_birth_scenarios():
    rep = compare_scenarios(ScenarioSpec(window=((0, 0), (20, 20)), seed=1010), 10.0, 200)
    ok = rep.covered_fraction["B"] > 0 and rep.paired_diff_mean > 0 and rep.p_value < 0.01
    record(10, "staggered vs equal births", ok,
           f"covered fraction {rep.covered_fraction['B']:.3f}, mean R {rep.mean_R['A']:.4f} -> "
           f"{rep.mean_R['B']:.4f}, one-sided p = {rep.p_value:.1e}")
    assert ok


def test_c11_volume_identity(runs):
    data = [x for x in runs[0] if x[2].status == IN_H]
    rng = np.random.default_rng(11)
    picks = [data[k] for k in rng.choice(len(data), 20, replace=False)]
    worst = 0.0
    for _, config, res, _ in picks:
        exact = functional_value(res, FunctionalSpec("volume"), 1.0)
        raster = rasterized_union_volume(res, 1_000_000)
        worst = max(worst, abs(raster - exact) / exact)
    ok = worst <= 0.01
    record(11, "volume functional = union volume", ok, f"20 configs, max relative difference {worst:.2e}")
    assert ok


def test_c12_replay(tmp_path):
    same = []
    for cmd, extra in (("simulate", ["--set", "births=uniform", "--set", "shape=square"]),
                       ("compare", ["-M", "3", "--set", "window=0,10"]),
                       ("clt", ["--n-list", "25,49", "-M", "20"])):
        out = tmp_path / cmd
        assert main([cmd, *extra, "--seed", "12", "--out", str(out)]) == 0
        again = tmp_path / (cmd + "-replay")
        assert main(["replay", str(out / "manifest.json"), "--out", str(again)]) == 0
        for name in json.loads((out / "manifest.json").read_text())["outputs"]:
            same.append((out / name).read_bytes() == (again / name).read_bytes())
    ok = all(same) and len(same) > 0
    record(12, "manifest replay", ok, f"{sum(same)}/{len(same)} data files byte-identical")
    assert ok
