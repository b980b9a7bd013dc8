"""Command-line drivers: ``memodiff <run|verify|pullback|sweep>``.

Every command validates the configuration before any time step, writes its
artifacts into ``--out`` and returns a non-zero exit status on a failed check
(1), an invalid configuration (2) or a diverged run (3).  Outputs depend only
on the arguments, so repeated invocations are byte-identical.
"""

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .analysis import absorbing_entry_time, dissipative_bound_check, dissipation_constant, pullback_attractor_approx
from .config import DEFAULT_CONFIG, parse_config_full, parse_number
from .dynamics import evolve
from .errors import ConfigurationError, DivergenceError
from .memory import decaying_past_admissibility, decaying_past_history, write_history_csv
from .model import SystemState, zero_state
from .reports import EstimateReport, fmt, write_reports_csv
from .suite import summary_text, verification_suite

log = logging.getLogger("memodiff")

LOG_ENV = "MEMODIFF_LOG_LEVEL"
COMMANDS = ("run", "verify", "pullback", "sweep")
PULLBACK_THRESHOLD = 1e-4

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3


@dataclass
class RunManifest:
    """Everything that determines a command's outputs."""

    command: str
    config_path: str
    out_dir: str
    dt: float = None
    t_end: float = None
    workers: int = 1
    sample_every: float = None
    tolerances: dict = field(default_factory=dict)
    param: str = None
    values: list = None
    save_history: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigurationError(f"unknown command {self.command!r}")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")

    def overrides(self):
        out = {}
        if self.dt is not None:
            out["numerics.dt"] = self.dt
        if self.t_end is not None:
            out["numerics.t_end"] = self.t_end
        if self.sample_every is not None:
            out["numerics.sample_every"] = self.sample_every
        return out


def initial_state(config, initial):
    """State at ``t_start`` with ``u`` from the file and the matching decaying-past history."""
    t = config.numerics.t_start
    if not np.any(initial.u):
        return zero_state(config, t)
    adm = decaying_past_admissibility(initial.u, config.basis, initial.history_rate, config.varrho)
    if adm > config.admissibility_bound:
        raise ConfigurationError(f"initial history violates the admissibility bound: {adm:.6g} > "
                                 f"{config.admissibility_bound:.6g}")
    return SystemState(t, initial.u, decaying_past_history(initial.u, config.grid, initial.history_rate))


def _load(manifest):
    text = DEFAULT_CONFIG if manifest.config_path is None else Path(manifest.config_path).read_text()
    config, initial = parse_config_full(text, manifest.overrides())
    log.info("derived constants: %s", config.derived_constants())
    return config, initial


def _apply_tolerances(reports, overrides):
    for r in reports:
        if r.name in overrides:
            r.tolerance = overrides[r.name]
    return reports


def _write_reports(out, reports, config):
    with open(out / "reports.csv", "w", newline="") as fh:
        write_reports_csv(reports, fh)
    text = summary_text(reports, config)
    (out / "summary.txt").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_run(manifest, config, initial, out):
    num = config.numerics
    z0 = initial_state(config, initial)
    tr = evolve(z0, num.t_start, num.t_end, num.dt, config, sample_every=num.sample_every,
                keep_states=False)
    with open(out / "trajectory.csv", "w", newline="") as fh:
        tr.write_csv(fh)
    if manifest.save_history:
        with open(out / "history.csv", "w", newline="") as fh:
            write_history_csv(tr.final.eta, fh)
    return EXIT_OK


def cmd_verify(manifest, config, initial, out):
    reports = verification_suite(config, workers=manifest.workers, history_rate=initial.history_rate)
    return _write_reports(out, _apply_tolerances(reports, manifest.tolerances), config)


def cmd_pullback(manifest, config, initial, out):
    num = config.numerics
    t = num.t_end
    unforced = not np.any(config.g)
    levels = num.pullback_levels + (0 if unforced else 1)
    taus = [t - num.pullback_spacing * k for k in range(1, levels + 1)]
    reference = [zero_state(config, t)] if unforced else None
    snapshot, report = pullback_attractor_approx(t, taus, num.ensemble, num.radius, config,
                                                 reference=reference, workers=manifest.workers)
    reports = [report]
    if unforced:
        reports.append(EstimateReport("pullback_threshold", [taus[-1]], [report.lhs[-1]],
                                      [PULLBACK_THRESHOLD], 0.0))
    else:
        # the deepest level is the reference set itself
        d = report
        reports[0] = EstimateReport(d.name, d.t[:-1], d.lhs[:-1], d.rhs[:-1], d.tolerance, d.info)
    with open(out / "pullback.csv", "w", newline="") as fh:
        fh.write("k,tau,delta\n")
        for k, (tau, delta) in enumerate(zip(taus, report.lhs), start=1):
            fh.write(f"{k},{fmt(tau)},{fmt(delta)}\n")
    with open(out / "snapshot.csv", "w", newline="") as fh:
        snapshot.write_csv(fh)
    return _write_reports(out, _apply_tolerances(reports, manifest.tolerances), config)


def _sweep_point(args):
    text, overrides, param, value = args
    config, initial = parse_config_full(text, {**overrides, param: value})
    num = config.numerics
    tr = evolve(initial_state(config, initial), num.t_start, num.t_end, num.dt, config,
                sample_every=num.sample_every, keep_states=False)
    q, growth = dissipation_constant(tr, config)
    rep = dissipative_bound_check(tr, config, Q=q)
    return [value, config.alpha, config.alpha_strong, config.L, q, growth,
            absorbing_entry_time(num.radius, q, config.alpha), tr.norms["mt1"][-1], rep.worst_margin,
            rep.passed]


SWEEP_COLUMNS = ("value", "alpha", "alpha_strong", "L", "Q", "growth_sup", "t0", "mt1_final",
                 "dissipative_worst_margin", "dissipative_pass")


def cmd_sweep(manifest, config, initial, out):
    if not manifest.param or not manifest.values:
        raise ConfigurationError("sweep needs --param section.key and --values v1,v2,...")
    text = DEFAULT_CONFIG if manifest.config_path is None else Path(manifest.config_path).read_text()
    # every point is validated before any of them runs
    for v in manifest.values:
        parse_config_full(text, {**manifest.overrides(), manifest.param: v})
    jobs = [(text, manifest.overrides(), manifest.param, v) for v in manifest.values]
    if manifest.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=manifest.workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    with open(out / "sweep.csv", "w", newline="") as fh:
        fh.write("param," + ",".join(SWEEP_COLUMNS) + "\n")
        for row in rows:
            cells = [fmt(x) if not isinstance(x, bool) else str(x) for x in row]
            fh.write(manifest.param + "," + ",".join(cells) + "\n")
    return EXIT_OK if all(r[-1] for r in rows) else EXIT_FAIL


HANDLERS = {"run": cmd_run, "verify": cmd_verify, "pullback": cmd_pullback, "sweep": cmd_sweep}


def _tolerance(text):
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError("tolerance override must look like name=value")
    return name.strip(), float(value)


def _float(text):
    try:
        return parse_number(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def build_parser():
    p = argparse.ArgumentParser(prog="memodiff", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="INI configuration file (default: the shipped configuration)")
    p.add_argument("--out", required=True, help="output directory (created if missing)")
    p.add_argument("--dt", type=_float, help="override [numerics] dt")
    p.add_argument("--t-end", type=_float, help="override [numerics] t_end")
    p.add_argument("--sample-every", type=_float, help="override [numerics] sample_every")
    p.add_argument("--workers", type=int, default=1, help="process pool size for ensembles")
    p.add_argument("--tol", type=_tolerance, action="append", default=[], metavar="NAME=VALUE",
                   help="override the tolerance of a named check")
    p.add_argument("--param", help="sweep parameter as section.key")
    p.add_argument("--values", help="comma-separated sweep values")
    p.add_argument("--history", action="store_true", help="run: also write the final history")
    p.add_argument("--print-config", action="store_true", help="print the shipped configuration and exit")
    return p


def main(argv=None):
    if argv is None:
        argv = sys.argv[1:]
    if "--print-config" in argv:
        sys.stdout.write(DEFAULT_CONFIG)
        return EXIT_OK
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=os.environ.get(LOG_ENV, "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        values = [_float(v) for v in args.values.split(",")] if args.values else None
        manifest = RunManifest(args.command, args.config, args.out, args.dt, args.t_end, args.workers,
                               args.sample_every, dict(args.tol), args.param, values, args.history)
        config, initial = _load(manifest)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "manifest.json").write_text(json.dumps(asdict(manifest), sort_keys=True, indent=1) + "\n")
        return HANDLERS[args.command](manifest, config, initial, out)
    except (ConfigurationError, argparse.ArgumentTypeError, OSError) as e:
        log.error("%s", e)
        sys.stderr.write(f"error: {e}\n")
        return EXIT_CONFIG
    except DivergenceError as e:
        log.error("%s", e)
        sys.stderr.write(f"diverged: {e}\n")
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
