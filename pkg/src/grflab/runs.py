"""Single-run orchestration: build a history from a config, monitor it, and
evaluate entropies on it. Artifacts go to one directory per run."""

from __future__ import annotations

import json
import logging
import math
import os
from pathlib import Path

import numpy as np

from .config import RunConfig, render_config
from .entropy import (
    EntropyParams,
    check_monotonicity,
    entropy_report,
    nash_average_residual,
    restrict,
    slab_entropies,
    verify_entropy_bounds,
)
from .flow import FlowHistory, cfl_limit, initial_state, monitor_bounds, monitor_identities, run
from .homogeneous import (
    HomState,
    flat_t3_entropy_exact,
    flat_t3_exact_array,
    flat_t3_rhs,
    integrate_homogeneous,
)
from .records import ENTROPY_COLUMNS, CheckReport, dump_checks, write_csv
from .transport import solve_conjugate

log = logging.getLogger(__name__)

OUTPUT_ENV = "GRFLAB_OUTPUT_ROOT"
RESIDUAL_COLUMNS = ("tauN_phi", "tauN_H", "dW_H", "W_forms")
HOMOGENEOUS_EMBED_N = 8
HOMOGENEOUS_TOL = 1e-6
STATE_RTOL = 1e-8


class MissingRun(FileNotFoundError):
    pass


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "grflab-out"))


def run_dir(cfg: RunConfig) -> Path:
    return output_root() / (cfg.output or cfg.run_id)


def grid_dt(cfg: RunConfig, state0) -> float:
    """Store step: ``dt`` or ``cfl`` times the explicit limit, dividing ``t_end`` evenly."""
    dt = cfg.cfl * cfl_limit(state0.geom) if cfg.dt == "auto" else float(cfg.dt)
    n = max(1, int(math.ceil(cfg.t_end / dt - 1e-9)))
    return cfg.t_end / n


def grid_initial(cfg: RunConfig):
    state = initial_state(cfg.family, cfg.N, cfg.L, cfg.Ly, cfg.Lz, cfg.a0, cfg.b0, cfg.c0,
                          cfg.h0, cfg.phi0, cfg.eps, cfg.k, cfg.eps_h, cfg.eps_phi)
    return state if cfg.scale == 1.0 else state.rescaled(cfg.scale)


def build_history(cfg: RunConfig) -> FlowHistory:
    """Integrate the configured model; homogeneous runs are embedded as constant fields."""
    if cfg.model == "homogeneous":
        if cfg.b0 != cfg.a0 or cfg.c0 != cfg.a0:
            log.info("homogeneous model with unequal metric coefficients")
        lam = cfg.scale
        state0 = HomState(0.0, ((cfg.a0 / lam) ** 2, (cfg.b0 / lam) ** 2, (cfg.c0 / lam) ** 2),
                          cfg.h0 * lam, cfg.phi0)
        traj = integrate_homogeneous(flat_t3_rhs, state0, cfg.t_end, float(cfg.dt), cfg.scheme,
                                     rtol=cfg.rtol)
        return FlowHistory.from_homogeneous(traj, HOMOGENEOUS_EMBED_N, cfg.L, cfg.Ly, cfg.Lz)
    state0 = grid_initial(cfg)
    dt = grid_dt(cfg, state0)
    kw = {"rtol": cfg.rtol} if cfg.scheme == "adaptive" else {}
    return run(state0, cfg.t_end, dt, cfg.scheme, **kw)


def save_history(history: FlowHistory, directory: Path) -> None:
    history.save(directory)
    meta = {"N": history.N, "L": history.L, "Ly": history.Ly, "Lz": history.Lz,
            "dt": history.dt, "scheme": history.scheme}
    (directory / "history_meta.json").write_text(json.dumps(meta, sort_keys=True) + "\n")


def load_history(directory: Path) -> FlowHistory:
    try:
        meta = json.loads((directory / "history_meta.json").read_text())
        times = np.load(directory / "times.npy")
        fields = np.load(directory / "fields.npy")
    except FileNotFoundError as exc:
        raise MissingRun(f"no run artifacts in {directory} ({exc.filename} missing)") from None
    return FlowHistory(times, fields, meta["N"], meta["L"], meta["Ly"], meta["Lz"], meta["dt"],
                       meta["scheme"])


# -- monitors --------------------------------------------------------------------

def homogeneous_state_check(cfg: RunConfig, history: FlowHistory) -> CheckReport:
    """Relative error of the embedded trajectory against the closed form."""
    worst = 0.0
    for t, y in zip(history.times, history.fields[:, :, 0]):
        exact = flat_t3_exact_array(cfg.h0 * cfg.scale, (cfg.a0 / cfg.scale) ** 2, cfg.phi0, t)
        got = np.array([y[0] ** 2, y[1] ** 2, y[2] ** 2, y[3], y[4]])
        scale = np.maximum(np.abs(exact), 1.0)
        worst = max(worst, float(np.max(np.abs(got - exact) / scale)))
    ok_model = cfg.a0 == cfg.b0 == cfg.c0
    if not ok_model:
        return CheckReport.not_applicable("oracle.homogeneous_state", "closed form needs a0 = b0 = c0",
                                          run=cfg.run_id)
    return CheckReport("oracle.homogeneous_state", worst, 0.0, -worst, STATE_RTOL,
                       context={"run": cfg.run_id, "dt": history.dt, "t_end": cfg.t_end})


def simulate_checks(cfg: RunConfig, history: FlowHistory) -> list:
    if cfg.model == "homogeneous":
        return [homogeneous_state_check(cfg, history)]
    reports = monitor_identities(history, cfg.tol_c) + monitor_bounds(history, cfg.tol_c, cfg.C0, cfg.K)
    for r in reports:
        r.context["run"] = cfg.run_id
    return reports


def _tag(reports, stage):
    for r in reports:
        r.context["stage"] = stage
    return reports


def simulate(cfg: RunConfig, directory: Path | None = None):
    """Run, write history/snapshot/check artifacts; returns ``(history, reports)``."""
    directory = Path(directory or run_dir(cfg))
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "config.txt").write_text(render_config(cfg))
    history = build_history(cfg)
    save_history(history, directory)
    reports = _tag(simulate_checks(cfg, history), "simulate")
    history.to_csv(directory / "history.csv")
    times = cfg.snapshot_times or (history.times[0], history.times[len(history) // 2], history.times[-1])
    snaps = [float(history.times[history.index_of(t)]) if _stored(history, t) else None for t in times]
    for t, s in zip(times, snaps):
        if s is None:
            log.warning("snapshot time %g is not a stored time; skipped", t)
    history.snapshots_csv(directory / "snapshots.csv", [s for s in snaps if s is not None])
    dump_checks(reports, directory / "checks.json")
    return history, reports


def _stored(history, t):
    try:
        history.index_of(t)
        return True
    except ValueError:
        return False


# -- entropies -------------------------------------------------------------------

def default_tau_grid(cfg: RunConfig, history: FlowHistory):
    t_span = history.times[-1] - history.times[0]
    step = max(history.dt, round(t_span / 20, 12))
    n = int(math.floor((t_span - cfg.tau_min) / step + 1e-9))
    return tuple(cfg.tau_min + i * step for i in range(n + 1))


def entropy_rows(history, sol, tau_grid, base_label, ent):
    rows = []
    for tau in tau_grid:
        try:
            (rec,) = entropy_report(history, sol, [tau], ent=ent)
        except ValueError as exc:
            log.warning("base %s: %s; row skipped", base_label, exc)
            continue
        rows.append([base_label, *rec.row(), *(rec.residuals[c] for c in RESIDUAL_COLUMNS)])
    return rows


def homogeneous_entropy_checks(cfg, history, ent, records) -> list:
    ctx = {"run": cfg.run_id, "tau_min": cfg.tau_min}
    t0 = float(history.times[-1])
    worst, worst_res = 0.0, 0.0
    for rec in records:
        ex = flat_t3_entropy_exact(cfg.h0 * cfg.scale, cfg.phi0, t0, rec.tau, (cfg.a0 / cfg.scale) ** 2,
                                   (cfg.L, cfg.Ly, cfg.Lz))
        worst = max(worst, *(abs(a - b) for a, b in zip(rec.row()[1:], ex.row()[1:])))
        worst_res = max(worst_res, abs(rec.residuals["tauN_phi"]), abs(rec.residuals["tauN_H"]))
    out = [
        CheckReport("oracle.entropy_closed_form", worst, 0.0, -worst, HOMOGENEOUS_TOL, context=dict(ctx)),
        CheckReport("oracle.entropy_derivatives", worst_res, 0.0, -worst_res, HOMOGENEOUS_TOL,
                    context=dict(ctx)),
    ]
    window = ent.taus >= cfg.tau_min - 1e-12

    def tol(name):
        exact = name in ("entropy.N_H_monotone", "entropy.W_le_N", "entropy.dW_nonpositive")
        return 0.0 if exact else HOMOGENEOUS_TOL
    out += check_monotonicity(history, restrict(ent, window), tol, dict(ctx))
    nash = nash_average_residual(ent)
    out.append(CheckReport("entropy.nash_average", nash, 0.0, -nash, 1e-4, context=dict(ctx)))
    return out


def entropy(cfg: RunConfig, directory: Path | None = None):
    """Conjugate solves, ``entropy.csv`` and entropy checks for an existing run."""
    directory = Path(directory or run_dir(cfg))
    history = load_history(directory)
    tau_grid = cfg.tau_grid or default_tau_grid(cfg, history)
    header = ["base", *ENTROPY_COLUMNS, *(f"res_{c}" for c in RESIDUAL_COLUMNS)]
    rows, reports, consts = [], [], {}
    if cfg.model == "homogeneous":
        sol = solve_conjugate(history, [0], data="uniform")
        ent = slab_entropies(history, sol)
        rows = entropy_rows(history, sol, tau_grid, "uniform", ent)
        records = entropy_report(history, sol, [r[1] for r in rows], ent=ent)
        reports.append(CheckReport("conjugate.mass", sol.mass_drift, 0.0, -sol.mass_drift, 1e-10,
                                   context={"run": cfg.run_id}))
        reports += homogeneous_entropy_checks(cfg, history, ent, records)
    else:
        for b in cfg.bases:
            sol = solve_conjugate(history, [b])
            rows += entropy_rows(history, sol, tau_grid, b, slab_entropies(history, sol))
        params = EntropyParams(cfg.tol_c, cfg.tau_min, cfg.bases, cfg.H_n, cfg.radii,
                               run_id=cfg.run_id, seed=cfg.seed, M=cfg.M)
        reports, consts, _ = verify_entropy_bounds(history, params)
    write_csv(directory / "entropy.csv", header, rows)
    _tag(reports, "entropy")
    previous = _load_checks(directory / "checks.json")
    dump_checks(previous + reports, directory / "checks.json")
    (directory / "constants.json").write_text(json.dumps(_plain(consts), indent=2, sort_keys=True) + "\n")
    return rows, reports, consts


def _load_checks(path: Path) -> list:
    if not path.exists():
        return []
    out = []
    for d in json.loads(path.read_text()):
        if d.get("context", {}).get("stage") == "entropy":
            continue
        nan = math.nan
        out.append(CheckReport(d["name"], _num(d["lhs"], nan), _num(d["rhs"], nan),
                               _num(d["margin"], nan), _num(d["tolerance"], 0.0), d["verdict"],
                               d["context"]))
    return out


def _num(v, default):
    return default if v is None else float(v)


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    if isinstance(v, (float, np.floating)):
        return float(f"{float(v):.12g}") if math.isfinite(v) else None
    return v
