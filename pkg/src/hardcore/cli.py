"""Command-line entry point.

Every command resolves a :class:`ScenarioSpec` from an optional flat
``key = value`` file plus ``--set KEY=VALUE`` overrides, runs, and writes its
data files together with ``manifest.json`` into ``--out``.  ``replay``
re-executes a manifest; data files come out byte-identical.

Exit codes: 0 ok, 1 invariant violation, 2 configuration error,
3 degenerate configuration, 4 regime violation.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (center_grain, check_invariants, cluster_report, neighbour_graph,
                       stabilization, tail_curve_U)
from .builder import TIE_DEGENERATE, build
from .errors import ConfigError, InvalidConfiguration, InvalidRegime
from .io import (configuration_to_dict, dumps, grains_rows, load_configuration, result_to_dict,
                 write_csv, write_json)
from .model import Configuration, GrownGrain
from .oracle import simulate_growth
from .sampling import ScenarioSpec, load_spec, sample
from .stats import FunctionalSpec, clt_experiment, compare_scenarios, run_replicates

log = logging.getLogger("hardcore")

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_DEGENERATE, EXIT_REGIME = 0, 1, 2, 3, 4
MANIFEST_SCHEMA = "hardcore.manifest/1"

CSV_HELP = """\
output files (all CSV files have a header row):
  simulate  result.json, grains.csv (id, x0.., t, R, status),
            clusters.csv (cluster_id, size, has_doublet, touches_boundary)
  verify    verify.json, verify.csv (replicate, invariant, passed, value)
  clt       clt.json, clt_samples.csv (n, replicate, value, standardized)
  compare   compare.json, compare_long.csv (scenario, replicate, statistic, value)
  tail      tail.json, tail.csv (t, tail, stderr)
every run also writes manifest.json, which lists the data files it produced
"""


# ---------------------------------------------------------------------------
# commands; each returns (exit code, {name: path})


def _run_simulate(spec: ScenarioSpec, run: dict, out: Path, input_config=None):
    if input_config is not None:
        config = Configuration.from_dict(input_config)
    else:
        config = sample(spec, run.get("replicate", 0))
    engine = run.get("engine", "builder")
    result = simulate_growth(config) if engine == "oracle" else build(config)
    if result.status == TIE_DEGENERATE:
        log.warning("configuration has tied contact times; result flagged %s", TIE_DEGENERATE)
    if not result.in_h:
        log.warning("result status: %s", result.status)
    files = {"result.json": write_json(out / "result.json", result_to_dict(result))}
    header, rows = grains_rows(result)
    files["grains.csv"] = write_csv(out / "grains.csv", header, rows)
    infos = cluster_report(result)
    files["clusters.csv"] = write_csv(
        out / "clusters.csv", ["cluster_id", "size", "has_doublet", "touches_boundary"],
        [[c.cluster_id, c.size, int(c.has_doublet), int(c.touches_boundary)] for c in infos])
    return EXIT_OK, files


def _inflate(result):
    """Test hook: grow the first positive grain by 0.1 so the hard-core check must fail."""
    for k, g in enumerate(result.grains):
        if g.R > 0:
            result.grains[k] = GrownGrain(g.grain, g.R + 0.1, g.status, g.round, g.earlier_neighbour_ids)
            break
    return result


def _verify_one(args):
    spec, r, engines, fault = args
    config = sample(spec, r)
    if len(config) < 2:
        return r, {}
    result = build(config)
    if fault:
        result = _inflate(result)
    reference = simulate_growth(config) if engines == "both" else None
    return r, check_invariants(result, reference)


def _run_verify(spec: ScenarioSpec, run: dict, out: Path, input_config=None):
    M = int(run.get("replicates", 100))
    if M == 0:
        log.warning("zero replicates requested; verification is vacuous")
    tasks = [(spec, r, run.get("engines", "both"), bool(run.get("inject_fault"))) for r in range(M)]
    results = run_replicates(_verify_one, tasks, run.get("workers", 1))
    rows, summary = [], {}
    for r, checks in results:
        for name, (ok, value) in sorted(checks.items()):
            rows.append([r, name, int(ok), float(value)])
            s = summary.setdefault(name, {"runs": 0, "failures": 0, "worst": 0.0})
            s["runs"] += 1
            s["failures"] += int(not ok)
            s["worst"] = max(s["worst"], float(value))
    failed = sorted(k for k, s in summary.items() if s["failures"])
    for name in failed:
        log.error("invariant violated: %s (%d of %d runs)", name, summary[name]["failures"],
                  summary[name]["runs"])
    files = {
        "verify.json": write_json(out / "verify.json", {"schema": "hardcore.verify/1", "replicates": M,
                                                         "invariants": summary, "failed": failed}),
        "verify.csv": write_csv(out / "verify.csv", ["replicate", "invariant", "passed", "value"], rows),
    }
    return (EXIT_INVARIANT if failed else EXIT_OK), files


def _functional(run: dict) -> FunctionalSpec:
    return FunctionalSpec(kind=run.get("functional", "volume"), alpha=float(run.get("alpha", 1.0)),
                          beta=float(run.get("beta", 1.0)), weight=run.get("weight", "const"),
                          value=float(run.get("weight_value", 1.0)))


def _run_clt(spec: ScenarioSpec, run: dict, out: Path, input_config=None):
    rep = clt_experiment(spec, _functional(run), run["n_list"], int(run["M"]), workers=run.get("workers", 1))
    rows = [[lv.n, r, float(v), float(z)] for lv in rep.levels
            for r, (v, z) in enumerate(zip(lv.samples, lv.standardized))]
    files = {
        "clt.json": write_json(out / "clt.json", rep.to_dict()),
        "clt_samples.csv": write_csv(out / "clt_samples.csv", ["n", "replicate", "value", "standardized"], rows),
    }
    return EXIT_OK, files


def _run_compare(spec: ScenarioSpec, run: dict, out: Path, input_config=None):
    rep = compare_scenarios(spec, float(run["t_max"]), int(run["M"]), workers=run.get("workers", 1))
    files = {
        "compare.json": write_json(out / "compare.json", rep.to_dict()),
        "compare_long.csv": write_csv(out / "compare_long.csv",
                                      ["scenario", "replicate", "statistic", "value"], rep.rows),
    }
    return EXIT_OK, files


def _run_tail(spec: ScenarioSpec, run: dict, out: Path, input_config=None):
    spec.check_regime()
    thresholds = run["thresholds"]
    curve = tail_curve_U(spec, int(run["M"]), thresholds, int(run.get("chain_budget", 100_000)))
    rows = list(zip(curve.thresholds, curve.tail, curve.stderr))
    files = {
        "tail.json": write_json(out / "tail.json", {"schema": "hardcore.tail/1", "M": int(run["M"]),
                                                     "truncated": curve.truncated,
                                                     "log_slope": curve.log_slope,
                                                     "U": curve.samples}),
        "tail.csv": write_csv(out / "tail.csv", ["t", "tail", "stderr"], rows),
    }
    return EXIT_OK, files


RUNNERS = {"simulate": _run_simulate, "verify": _run_verify, "clt": _run_clt,
           "compare": _run_compare, "tail": _run_tail}


# ---------------------------------------------------------------------------
# argument handling


def _floats(text: str) -> list:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got '{text}'") from None


def _resolve(args) -> tuple:
    """(spec, run parameters, embedded input configuration) from parsed arguments."""
    spec = load_spec(args.config, args.set, args.seed)
    extra = dict(spec.extra)
    run = {"workers": args.workers}
    cmd = args.command
    if cmd == "simulate":
        run["replicate"] = args.replicate
        run["engine"] = args.engine
    elif cmd == "verify":
        run["replicates"] = args.replicates if args.replicates is not None else int(extra.get("replicates", 100))
        run["engines"] = args.engines
        if args.inject_fault:
            run["inject_fault"] = True
    elif cmd == "clt":
        run["n_list"] = _floats(args.n_list or extra.get("n_list", "100,400"))
        run["M"] = args.M if args.M is not None else int(extra.get("M", 500))
        run["functional"] = args.functional or extra.get("functional", "volume")
        for k in ("alpha", "beta", "weight", "weight_value"):
            if k in extra:
                run[k] = extra[k]
        _functional(run)
    elif cmd == "compare":
        run["t_max"] = args.t_max if args.t_max is not None else float(extra.get("t_max_b", spec.t_max))
        run["M"] = args.M if args.M is not None else int(extra.get("M", 200))
    elif cmd == "tail":
        run["M"] = args.M if args.M is not None else int(extra.get("M", 100))
        run["thresholds"] = _floats(args.thresholds or extra.get("thresholds", "0,2,4,6,8,10,12,14"))
        run["chain_budget"] = args.chain_budget
    input_config = None
    if getattr(args, "input", None):
        input_config = configuration_to_dict(load_configuration(args.input))
    return spec, run, input_config


def execute(command: str, spec: ScenarioSpec, run: dict, out: Path, input_config=None,
            dry_run: bool = False, argv=None) -> int:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    code, files = EXIT_OK, {}
    if not dry_run:
        code, files = RUNNERS[command](spec, run, out, input_config)
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "command": command,
        "argv": list(argv or []),
        "scenario": spec.to_dict(),
        "run": run,
        "input": input_config,
        "seeds": {"seed": spec.seed},
        "version": __version__,
        "dry_run": dry_run,
        "started": started,
        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "outputs": sorted(files),
        "exit_code": code,
    }
    (out / "manifest.json").write_text(dumps(manifest))
    return code


def _replay(args) -> int:
    path = Path(args.manifest)
    if not path.is_file():
        raise ConfigError(f"manifest not found: {path}")
    try:
        m = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid manifest ({exc})") from None
    if m.get("schema") != MANIFEST_SCHEMA or m.get("command") not in RUNNERS:
        raise ConfigError(f"{path}: not a run manifest")
    spec = ScenarioSpec.from_dict(m["scenario"])
    run = dict(m["run"])
    if args.workers is not None:
        run["workers"] = args.workers
    out = Path(args.out) if args.out else path.parent / "replay"
    code = execute(m["command"], spec, run, out, m.get("input"), argv=["replay", str(path)])
    if args.check:
        differ = [f for f in m["outputs"]
                  if (path.parent / f).read_bytes() != (out / f).read_bytes()]
        for f in differ:
            log.error("replayed %s differs from the original", f)
        if differ:
            return EXIT_INVARIANT
        log.info("replay reproduced %d file(s) byte-for-byte", len(m["outputs"]))
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hardcore", description="Growth-maximal hard-core germ-grain models.",
                                epilog=CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", nargs="?", help="flat key = value scenario file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration key (repeatable)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--dry-run", action="store_true", help="write the manifest only")

    sp = sub.add_parser("simulate", help="sample one configuration and build its growth times",
                        epilog=CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    common(sp)
    sp.add_argument("--input", help="configuration JSON to use instead of sampling")
    sp.add_argument("--replicate", type=int, default=0)
    sp.add_argument("--engine", choices=("builder", "oracle"), default="builder")

    sp = sub.add_parser("verify", help="run the invariant battery over replicates")
    common(sp)
    sp.add_argument("--replicates", "-M", type=int)
    sp.add_argument("--engines", choices=("both", "builder"), default="both")
    sp.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)

    sp = sub.add_parser("clt", help="window-size sweep of a functional (equal-birth regime)")
    common(sp)
    sp.add_argument("--n-list", help="comma-separated window volumes, e.g. 100,400")
    sp.add_argument("-M", type=int, help="replicates per window size")
    sp.add_argument("--functional", choices=("volume", "count", "power"))

    sp = sub.add_parser("compare", help="coupled births-0 vs staggered-births scenarios")
    common(sp)
    sp.add_argument("--t-max", type=float, help="upper end of the staggered birth law")
    sp.add_argument("-M", type=int)

    sp = sub.add_parser("tail", help="empirical tail of the stabilization radius")
    common(sp)
    sp.add_argument("-M", type=int)
    sp.add_argument("--thresholds", help="comma-separated t values")
    sp.add_argument("--chain-budget", type=int, default=100_000)

    sp = sub.add_parser("replay", help="re-run a manifest")
    sp.add_argument("manifest")
    sp.add_argument("--out", help="output directory (default: <manifest dir>/replay)")
    sp.add_argument("--workers", type=int)
    sp.add_argument("--check", action="store_true", help="exit 1 unless outputs match byte-for-byte")
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "replay":
            return _replay(args)
        spec, run, input_config = _resolve(args)
        return execute(args.command, spec, run, Path(args.out), input_config, args.dry_run, argv)
    except InvalidRegime as exc:
        log.error("regime violation: %s", exc)
        return EXIT_REGIME
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except InvalidConfiguration as exc:
        log.error("degenerate configuration: %s", exc)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
