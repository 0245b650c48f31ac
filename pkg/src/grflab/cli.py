"""Command line entry point: ``grflab {simulate,entropy,verify,sweep,report}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import runs, suites
from .config import ConfigError, load_config
from .entropy import eps_regularity_probe, regularity_pair, slab_entropies
from .records import FAIL, dump_checks
from .transport import solve_conjugate

log = logging.getLogger("grflab")


def _summary(reports) -> str:
    c = suites.counts(reports)
    return f"{c['pass']} pass, {c['fail']} fail, {c['not-applicable']} not-applicable"


def _failed(reports) -> bool:
    return any(r.verdict == FAIL for r in reports)


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    directory = runs.run_dir(cfg)
    _, reports = runs.simulate(cfg, directory)
    print(f"{directory}: {_summary(reports)}")
    return 1 if _failed(reports) else 0


def cmd_entropy(args) -> int:
    cfg = load_config(args.config)
    directory = runs.run_dir(cfg)
    rows, reports, _ = runs.entropy(cfg, directory)
    print(f"{directory}: {len(rows)} entropy rows; {_summary(reports)}")
    return 1 if _failed(reports) else 0


def cmd_verify(args) -> int:
    root = runs.output_root() / f"verify-{args.suite}"
    report, reports = suites.verify(args.suite, root, args.golden_dir)
    suites.write_report(report, root / "report.json")
    print(f"{root / 'report.json'}: {_summary(reports)}")
    for r in reports:
        if r.verdict == FAIL:
            print(f"  FAIL {r.name} margin={r.margin:.3g} tol={r.tolerance:.3g} "
                  f"run={r.context.get('run', '')}", file=sys.stderr)
    return 1 if _failed(reports) else 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if not cfg.sweep_key:
        raise ConfigError("key 'sweep_key': required by the sweep command")
    root = runs.run_dir(cfg)
    r = cfg.radii[0] if cfg.radii else (cfg.t_end / 2) ** 0.5
    rows, all_reports, pairs = [], [], []
    for value in cfg.sweep_values:
        typed = int(value) if isinstance(getattr(cfg, cfg.sweep_key), int) else value
        sub = replace(cfg, **{cfg.sweep_key: typed}, run_id=f"{cfg.run_id}-{cfg.sweep_key}-{value:g}",
                      sweep_key="", sweep_values=())
        history, reports = runs.simulate(sub, root / sub.run_id)
        b = sub.bases[0]
        sol = solve_conjugate(history, [b], data="uniform" if sub.model == "homogeneous" else "delta")
        pair = regularity_pair(history, slab_entropies(history, sol), b, r)
        pairs.append(pair)
        counts = suites.counts(reports)
        rows.append([value, *pair, counts["pass"], counts["fail"], counts["not-applicable"]])
        all_reports += reports
    probe = eps_regularity_probe(pairs, {"run": cfg.run_id, "sweep_key": cfg.sweep_key, "r": r})
    with open(root / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([cfg.sweep_key, "N_H_r2", "r_Rm_over_r", "pass", "fail", "not_applicable"])
        w.writerows([[f"{v:.12g}" if isinstance(v, float) else v for v in row] for row in rows])
    dump_checks(all_reports + [probe], root / "checks.json")
    print(f"{root}: {len(rows)} runs; {_summary(all_reports + [probe])}")
    return 1 if _failed(all_reports + [probe]) else 0


def cmd_report(args) -> int:
    from .plotting import render_run

    cfg = load_config(args.config)
    directory = runs.run_dir(cfg)
    if not (directory / "history.csv").exists():
        raise runs.MissingRun(f"no run artifacts in {directory}")
    for path in render_run(directory):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="grflab", description="Generalized Ricci flow laboratory.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, text in (("simulate", cmd_simulate, "integrate a run and monitor it"),
                           ("entropy", cmd_entropy, "entropies and bound checks on a finished run"),
                           ("sweep", cmd_sweep, "repeat a run over sweep_values of sweep_key"),
                           ("report", cmd_report, "render PNG figures from a run's CSV files")):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("config", type=Path)
        sp.set_defaults(func=fn)
    sp = sub.add_parser("verify", help="run a canned acceptance suite")
    sp.add_argument("suite", choices=suites.SUITES + ("all",))
    sp.add_argument("--golden-dir", type=Path, default=None,
                    help="directory holding the golden entropy table")
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except runs.MissingRun as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
