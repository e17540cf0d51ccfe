"""Batch runner: ``harnack-lab --config demo.toml --out results``.

Exit codes: 0 ok, 1 a violated verdict, 2 config error, 3 scenario
validation failure, 4 runtime error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import math
import platform
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__, coupling, invariant, kernels, montecarlo, parallel
from .config import (ExperimentConfig, build_scenario, functions_of, group_experiments, load_tree,
                     resolve_points)
from .errors import ConfigError, HarnackLabError
from .integrator import NoiseStream
from .reporting import write_csv
from .scenario import Scenario, validate

EXIT_OK, EXIT_VIOLATED, EXIT_CONFIG, EXIT_VALIDATION, EXIT_RUNTIME = range(5)
log = logging.getLogger("harnack_lab")

SUMMARY_HEADER = ["experiment", "kind", "rows", "holds", "violated", "inconclusive"]


def _get(p: Dict, key: str, default=None, cast=float):
    if key not in p:
        if default is None:
            raise ConfigError(f"experiment parameter {key!r} is required")
        return default
    try:
        return cast(p[key])
    except (TypeError, ValueError) as e:
        raise ConfigError(f"experiment parameter {key!r} has a bad value {p[key]!r}") from e


def _common(p, sc):
    x, y = resolve_points(p, sc.dim)
    return x, y, _get(p, "T"), _get(p, "h"), _get(p, "n_paths", cast=int), _get(p, "seed", cast=int)


def _run_validate(sc: Scenario, params: List[Dict], out: Path, label: str):
    p = params[0]
    rep = validate(sc, n_samples=_get(p, "n_samples", 10_000, int), seed=_get(p, "seed", 0, int))
    rows = [[k, v.passed, v.slack, v.detail] for k, v in rep.per_hypothesis.items()]
    write_csv(out / f"{label}.csv", ["hypothesis", "passed", "slack", "detail"], rows)
    ok = sum(r[1] for r in rows)
    return len(rows), ok, len(rows) - ok, 0


def _run_verdicts(kind: str, sc: Scenario, params: List[Dict], out: Path, label: str):
    rows, counts = [], {v: 0 for v in montecarlo.VERDICTS}
    for p in params:
        x, y, T, h, n, seed = _common(p, sc)
        scale = _get(p, "theta_scale", 1.0)
        for f in functions_of(p):
            if kind == "harnack":
                alpha = _get(p, "alpha")
                rep = montecarlo.verify_harnack(sc, x, y, T, alpha, f, n, h, seed,
                                                bound=str(p.get("bound", "theorem")), theta_scale=scale)
            else:
                alpha = None
                rep = montecarlo.verify_log_harnack(sc, x, y, T, f, n, h, seed, theta_scale=scale)
            counts[rep.verdict] += 1
            rows.append(montecarlo.verdict_row(sc, x, y, T, alpha, f, rep, h, seed))
            log.info("%s x=%s y=%s T=%g %s -> %s (slack %.3g)", kind, x, y, T, f.name, rep.verdict, rep.slack)
    write_csv(out / f"{label}.csv", montecarlo.VERDICT_HEADER, rows)
    return len(rows), counts["holds"], counts["violated"], counts["inconclusive"]


def _run_girsanov(sc, params, out, label):
    header = ["scenario", "x", "y", "T", "f", "mean_R", "stderr_R", "weighted", "weighted_stderr",
              "direct", "direct_stderr", "gap", "coupled_fraction", "verdict", "n", "h", "seed"]
    rows, holds, bad = [], 0, 0
    for p in params:
        x, y, T, h, n, seed = _common(p, sc)
        rep = montecarlo.verify_girsanov(sc, x, y, T, functions_of(p), n, h, seed,
                                         mode=str(p.get("mode", "singular_eta")))
        for t in rep.transfers:
            ok = rep.mass_passed and t.passed
            holds += ok
            bad += not ok
            rows.append([sc.name, x, y, T, t.name, rep.mean_R.mean, rep.mean_R.stderr, t.weighted.mean,
                         t.weighted.stderr, t.direct.mean, t.direct.stderr, t.gap, rep.coupled_fraction,
                         "holds" if ok else "violated", n, h, seed])
    write_csv(out / f"{label}.csv", header, rows)
    return len(rows), holds, bad, 0


def _run_strong_feller(sc, params, out, label):
    header = ["scenario", "x", "y", "T", "f", "lhs", "lhs_stderr", "lhs_lower", "rhs", "verdict", "n", "h", "seed"]
    rows, holds, bad = [], 0, 0
    for p in params:
        x, y, T, h, n, seed = _common(p, sc)
        for f in functions_of(p):
            rep = montecarlo.verify_strong_feller(sc, x, y, T, f, n, h, seed)
            holds += rep.passed
            bad += not rep.passed
            rows.append([sc.name, x, y, T, f.name, rep.lhs, rep.diff.stderr, rep.lhs_lower, rep.rhs,
                         "holds" if rep.passed else "violated", n, h, seed])
    write_csv(out / f"{label}.csv", header, rows)
    return len(rows), holds, bad, 0


def _run_couple(sc, params, out, label):
    header = ["scenario", "x", "y", "T", "h", "mode", "coupled_fraction", "mean_tau", "mean_R",
              "stderr_R", "max_qv", "n", "seed"]
    rows = []
    for i, p in enumerate(params):
        x, y, T, h, n, seed = _common(p, sc)
        mode = str(p.get("mode", "singular_eta"))
        b = coupling.coupled_batch(sc, x, y, T, h, seed, n, mode)
        r = montecarlo.Estimate.from_samples(b.r_T)
        tau = b.tau[b.coupled]
        rows.append([sc.name, x, y, T, h, mode, float(b.coupled.mean()),
                     float(tau.mean()) if tau.size else math.inf, r.mean, r.stderr, float(b.qv_T.max()), n, seed])
        if p.get("trace", False):
            traj = coupling.simulate_coupled(sc, x, y, T, h, NoiseStream(seed, 0), mode)
            write_csv(out / f"{label}_trace{i}.csv", traj.trace_header(), traj.trace_rows())
    write_csv(out / f"{label}.csv", header, rows)
    return len(rows), 0, 0, 0


def _run_invariant(sc, params, out, label):
    header = ["statistic", "value", "stderr", "n", "flag"]
    rows = []
    for i, p in enumerate(params):
        x0 = resolve_points(p, sc.dim)[0]
        m = invariant.sample_invariant(sc, x0, _get(p, "burn_in", 10.0), _get(p, "horizon", 1e4),
                                       _get(p, "stride", 0.5), _get(p, "h", 1e-3), _get(p, "seed", 0, int))
        for pw in p.get("moments", [1, 2]):
            e = invariant.moment(m, float(pw))
            rows.append([f"moment[{pw}]", e.mean, e.stderr, e.n, ""])
        for th in p.get("exp_thetas", []):
            e = invariant.exp_moment(m, float(th), float(p.get("exp_power", 2.0)))
            rows.append([f"exp_moment[{th}]", e.estimate.mean, e.estimate.stderr, e.estimate.n,
                         "unstable" if e.unstable else "stable"])
        if "centers" in p:
            cov = invariant.support_coverage(m, p["centers"], float(p.get("radius", 0.25)))
            for c, frac in zip(cov.centers, cov.hit_fraction):
                rows.append([f"coverage[{' '.join(f'{v:g}' for v in c)}]", frac, "", m.n,
                             "hit" if frac > 0 else "miss"])
        if p.get("dump_samples", False):
            write_csv(out / f"{label}_samples{i}.csv", [f"X{j + 1}" for j in range(sc.dim)], m.samples)
    write_csv(out / f"{label}.csv", header, rows)
    return len(rows), 0, 0, 0


RUNNERS = {
    "validate": _run_validate,
    "couple": _run_couple,
    "harnack": lambda *a: _run_verdicts("harnack", *a),
    "log_harnack": lambda *a: _run_verdicts("log_harnack", *a),
    "girsanov": _run_girsanov,
    "strong_feller": _run_strong_feller,
    "invariant": _run_invariant,
}


def load(config_path, overrides: Sequence[str] = ()) -> ExperimentConfig:
    tree = load_tree(config_path, overrides)
    if "scenario" not in tree:
        raise ConfigError("config has no [scenario] section")
    groups = group_experiments(tree)
    scenario = build_scenario(tree["scenario"])
    exps = [e for g in groups for e in g]
    return ExperimentConfig(tree, scenario, exps, (tree.get("output") or {}).get("dir"))


def run(config_path, overrides: Sequence[str] = (), out_dir: Optional[str] = None,
        n_threads: Optional[int] = None) -> int:
    """Run every experiment of the config and write reports; returns the exit status."""
    try:
        tree = load_tree(config_path, overrides)
        if "scenario" not in tree:
            raise ConfigError("config has no [scenario] section")
        groups = group_experiments(tree)
        out = Path(out_dir or (tree.get("output") or {}).get("dir") or "harnack_lab_out")
    except ConfigError as e:
        log.error("config error: %s", e)
        return EXIT_CONFIG
    try:
        sc = build_scenario(tree["scenario"])
        report = validate(sc)
        if not report.passed:
            log.error("scenario fails %s", ", ".join(report.failures()))
            return EXIT_VALIDATION
    except ConfigError as e:
        log.error("config error: %s", e)
        return EXIT_CONFIG
    except HarnackLabError as e:
        log.error("invalid scenario: %s", e)
        return EXIT_VALIDATION

    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    summary = []
    try:
        with parallel.threads(n_threads if n_threads is not None else parallel.get_threads()):
            out.mkdir(parents=True, exist_ok=True)
            for group in groups:
                label = group[0].label
                log.info("running %s (%d parameter sets)", label, len(group))
                counts = RUNNERS[group[0].kind](sc, [e.params for e in group], out, label)
                summary.append([label, group[0].kind, *counts])
            threads_used = parallel.get_threads()
    except ConfigError as e:
        log.error("config error: %s", e)
        return EXIT_CONFIG
    except (HarnackLabError, ValueError, ArithmeticError) as e:
        log.error("runtime error: %s", e)
        return EXIT_RUNTIME
    write_csv(out / "summary.csv", SUMMARY_HEADER, summary)
    meta = {
        "started": started,
        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "config": str(config_path),
        "overrides": list(overrides),
        "threads": threads_used,
        "backend": kernels.backend_name(),
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    (out / "metadata.json").write_text(json.dumps(meta, indent=2) + "\n")
    violated = sum(row[4] for row in summary)
    log.info("done: %d experiments, %d violated", len(summary), violated)
    return EXIT_VIOLATED if violated else EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = argparse.ArgumentParser(prog="harnack-lab", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="TOML experiment file")
    ap.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                    help="set a config entry, e.g. scenario.q=3 or experiment.0.n_paths=100")
    ap.add_argument("--out", help="output directory (default: [output] dir)")
    ap.add_argument("--threads", type=int, help="worker threads (default: $HARNACK_LAB_THREADS or 1)")
    ap.add_argument("--verbose", "-v", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.threads is not None and args.threads < 1:
        ap.error("--threads must be >= 1")
    return run(args.config, args.override, args.out, args.threads)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
