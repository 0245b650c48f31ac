"""Canned verification suites and the aggregate report."""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path

import numpy as np

from . import runs
from .config import CALIBRATION, TOL_C, parse_config
from .entropy import derivative_residuals, eps_regularity_probe, regularity_pair, restrict, slab_entropies
from .flow import cfl_limit, identity_residuals, initial_state, run, tolerance
from .grid import GridGeometry, reduced_distance, weighted_ball_volume
from .homogeneous import (
    HomState,
    flat_t3_exact_array,
    flat_t3_rhs,
    integrate_homogeneous,
    observed_order,
)
from .records import ENTROPY_COLUMNS, FAIL, NOT_APPLICABLE, PASS, CheckReport
from .tensor_point import (
    ThreeForm,
    h_squared,
    observed_rh_constant,
    r_h_identity_residuals_4d,
    random_algebraic_curvature,
    star_dual_4d,
    weitzenbock_residual,
)
from .transport import solve_conjugate, w1_distance

log = logging.getLogger(__name__)

SUITES = ("identities", "homogeneous", "grid-small", "grid-full")
GOLDEN_DIR = Path(__file__).parent / "golden"
GOLDEN_ENTROPY = "homogeneous_entropy.csv"

HOMOGENEOUS = """\
model = homogeneous
run_id = homogeneous
h0 = 1.0
phi0 = 0.0
t_end = 1.0
dt = 0.001
tau_grid = 0.05:1:0.05
tau_min = 0.05
"""

PERTURBED = """\
model = grid
run_id = perturbed-N{N}
family = perturbed
N = {N}
h0 = 1.0
eps = 0.1
phi0 = 0.2
t_end = 0.2
dt = auto
tau_min = 0.05
bases = {b1}, {b2}
radii = 0.25, 0.3, 0.4
"""

FLAT_STATIC = """\
model = grid
run_id = flat-static
family = flat
N = 128
L = 25.132741228718345
phi0 = 0.3
t_end = 0.2
dt = auto
bases = 30, 40
"""

HYPOTHESIS_VIOLATED = """\
model = grid
run_id = hypotheses-violated
family = perturbed
N = 64
h0 = 1.0
eps = 0.1
t_end = 0.1
dt = auto
C0 = 0.01
K = 0.01
"""

RESCALED = """\
model = grid
run_id = rescale-{lam}
family = perturbed
N = 64
h0 = 1.0
eps = 0.1
phi0 = 0.2
scale = {lam}
t_end = {t_end}
dt = {dt}
bases = 21
"""

REGULARITY = """\
model = grid
run_id = regularity-{lam}-{eps}
family = perturbed
N = 64
k = 3
h0 = 1.0
eps = {eps}
phi0 = 0.2
scale = {lam}
t_end = 0.2
dt = auto
"""
REGULARITY_SCALES = (0.7, 1.0, 1.4, 2.0)
REGULARITY_AMPLITUDES = (0.2, 0.4)
REGULARITY_RADIUS = 0.3

IDENTITY_SAMPLES = 1000
IDENTITY_TOL = 1e-10
TRACE_TOL = 1e-14
ORDER_MIN = 3.8
REFINEMENT_MIN = 3.5
CONSTANT_RTOL = 0.10


def perturbed_config(N):
    return parse_config(PERTURBED.format(N=N, b1=N // 3, b2=N // 3 + N // 4))


# -- pointwise algebra -------------------------------------------------------------

def suite_identities(seed=0, n=IDENTITY_SAMPLES):
    worst = {"pointwise.weitzenbock": 0.0, "pointwise.rh_4d_first": 0.0, "pointwise.rh_4d_second": 0.0,
             "pointwise.eigenstructure_4d": 0.0, "pointwise.trace_law": 0.0}
    ss = np.random.SeedSequence(seed)
    rh_constant = {}
    for dim in (3, 4):
        pairs = []
        for child in ss.spawn(n):
            s_rm, s_h = (int(x) for x in child.generate_state(2))
            Rm = random_algebraic_curvature(s_rm, dim)
            H = ThreeForm.random(s_h, dim)
            pairs.append((Rm, H))
            scale = max(1.0, Rm.norm() * H.norm_sq())
            worst["pointwise.weitzenbock"] = max(worst["pointwise.weitzenbock"],
                                                 abs(weitzenbock_residual(Rm, H)) / scale)
            HH = h_squared(H)
            hh = H.norm_sq()
            worst["pointwise.trace_law"] = max(worst["pointwise.trace_law"],
                                               abs(np.trace(HH) - hh) / max(1.0, hh))
            if dim == 4:
                a, b = r_h_identity_residuals_4d(Rm, H)
                worst["pointwise.rh_4d_first"] = max(worst["pointwise.rh_4d_first"], abs(a) / scale)
                worst["pointwise.rh_4d_second"] = max(worst["pointwise.rh_4d_second"], abs(b) / scale)
                eig = np.sort(np.linalg.eigvalsh(HH))
                expect = np.array([0.0, 1.0, 1.0, 1.0]) * hh / 3
                X = star_dual_4d(H)
                kernel = float(np.linalg.norm(HH @ X)) / max(1.0, float(np.linalg.norm(X)) * hh)
                worst["pointwise.eigenstructure_4d"] = max(
                    worst["pointwise.eigenstructure_4d"], float(np.max(np.abs(eig - expect))) / max(1.0, hh),
                    kernel)
        rh_constant[f"dim{dim}"] = observed_rh_constant(pairs)
    ctx = {"run": "pointwise", "samples_per_dim": n, "seed": seed}
    reports = [CheckReport(name, w, 0.0, -w, TRACE_TOL if name == "pointwise.trace_law" else IDENTITY_TOL,
                           context=dict(ctx)) for name, w in worst.items()]
    return reports, {"pointwise": {"rh_constant_observed": rh_constant}}


# -- homogeneous -------------------------------------------------------------------

def _order_check():
    errs = []
    for dt in (0.1, 0.05, 0.025, 0.0125):
        traj = integrate_homogeneous(flat_t3_rhs, HomState(0.0, (1.0, 1.0, 1.0), 1.0, 0.0), 1.0, dt)
        exact = np.array([flat_t3_exact_array(1.0, 1.0, 0.0, t) for t in traj.times])
        errs.append(float(np.max(np.abs(traj.states - exact))))
    p = observed_order(errs)
    return CheckReport("oracle.homogeneous_order", p, ORDER_MIN, p - ORDER_MIN,
                       context={"run": "homogeneous-order", "errors": errs})


def _read_entropy(path):
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=None, encoding="utf-8")
    return {c: np.atleast_1d(data[c]).astype(float) for c in ENTROPY_COLUMNS}


def golden_check(produced: Path, golden: Path, run_id) -> CheckReport:
    ctx = {"run": run_id, "golden": golden.name}
    try:
        got, ref = _read_entropy(produced), _read_entropy(golden)
    except (OSError, ValueError) as exc:
        return CheckReport("oracle.golden_entropy", math.nan, 0.0, math.nan,
                           context=dict(ctx, error=str(exc)))
    if len(got["tau"]) != len(ref["tau"]):
        return CheckReport("oracle.golden_entropy", math.nan, 0.0, math.nan,
                           context=dict(ctx, error="row count differs"))
    worst = max(float(np.max(np.abs(got[c] - ref[c]))) for c in ENTROPY_COLUMNS)
    return CheckReport("oracle.golden_entropy", worst, 0.0, -worst, runs.HOMOGENEOUS_TOL, context=ctx)


def suite_homogeneous(root: Path, golden_dir=None):
    cfg = parse_config(HOMOGENEOUS)
    directory = root / cfg.run_id
    _, reports = runs.simulate(cfg, directory)
    rows, ent_reports, _ = runs.entropy(cfg, directory)
    reports = list(reports) + list(ent_reports) + [_order_check()]
    golden = Path(golden_dir or GOLDEN_DIR) / GOLDEN_ENTROPY
    reports.append(golden_check(directory / "entropy.csv", golden, cfg.run_id))
    base = {r[1]: r[2:2 + len(ENTROPY_COLUMNS) - 1] for r in rows}
    worst = 0.0
    for lam in (0.5, 2.0):
        text = HOMOGENEOUS.replace("run_id = homogeneous", f"run_id = homogeneous-scale-{lam}")
        scaled = parse_config(text, scale=lam, t_end=1.0 / lam**2, dt=1e-3 / lam**2,
                              tau_grid=", ".join(repr(t / lam**2) for t in base))
        hist = runs.build_history(scaled)
        sol = solve_conjugate(hist, [0], data="uniform")
        ent = slab_entropies(hist, sol)
        for tau, vals in base.items():
            j = int(np.argmin(np.abs(ent.taus - tau / lam**2)))
            rec = ent.record(j)
            worst = max(worst, *(abs(a - b) for a, b in zip(rec.row()[1:], vals)))
    reports.append(CheckReport("rescaling.entropy", worst, 0.0, -worst, runs.HOMOGENEOUS_TOL,
                               context={"run": "homogeneous-rescaling", "lambdas": [0.5, 2.0]}))
    return reports, {}


def golden_rows():
    """Closed-form entropy table for the canned homogeneous run."""
    from .homogeneous import flat_t3_entropy_exact

    cfg = parse_config(HOMOGENEOUS)
    out = []
    for tau in cfg.tau_grid:
        rec = flat_t3_entropy_exact(cfg.h0, cfg.phi0, cfg.t_end, tau)
        out.append(["uniform", *rec.row()])
    return ["base", *ENTROPY_COLUMNS], out


# -- grid ----------------------------------------------------------------------------

class RunCache:
    """Runs shared between suites within one verify call."""

    def __init__(self, root: Path):
        self.root = root
        self._done = {}

    def full(self, cfg):
        """Simulate and evaluate entropies; returns ``(reports, constants)``."""
        if cfg.run_id not in self._done:
            directory = self.root / cfg.run_id
            _, sim = runs.simulate(cfg, directory)
            _, ent, consts = runs.entropy(cfg, directory)
            self._done[cfg.run_id] = (list(sim) + list(ent), consts)
        return self._done[cfg.run_id]


def _w1_delta_pairs(history, seed):
    g = history.geometry(-1)
    rng = np.random.default_rng(seed)
    worst = -math.inf
    cell = float(np.max(g.a) * g.dx)
    for _ in range(20):
        i, j = (int(v) for v in rng.integers(0, g.N, 2))
        mu1, mu2 = np.zeros(g.N), np.zeros(g.N)
        mu1[i] = mu2[j] = 1.0
        worst = max(worst, abs(w1_distance(g, mu1, mu2) - reduced_distance(g, i, j)))
    return CheckReport("transport.w1_delta_pair", worst, cell, cell - worst,
                       context={"run": "perturbed-N128", "pairs": 20, "seed": seed})


def _flat_static_checks(root):
    cfg = parse_config(FLAT_STATIC)
    directory = root / cfg.run_id
    history, reports = runs.simulate(cfg, directory)
    s1 = solve_conjugate(history, [cfg.bases[0]])
    s2 = solve_conjugate(history, [cfg.bases[1]])
    w1 = np.array([w1_distance(history.geometry(k), s1.mass(k)[0], s2.mass(k)[0])
                   for k in range(len(history))])
    spread = float(np.max(np.abs(w1 - w1[-1])))
    tol = 1e-6 + tolerance(cfg.tol_c, cfg.N, history.dt, "transport")
    reports = list(reports)
    reports.append(CheckReport("transport.w1_static_equality", spread, 0.0, -spread, tol,
                               context={"run": cfg.run_id, "w1": float(w1[-1])}))
    g = GridGeometry.flat(cfg.N, cfg.L)
    r = cfg.L / 50
    ball = weighted_ball_volume(g, np.full(cfg.N, cfg.phi0), 0, r, cfg.M)
    limit = 4 * math.pi / 3 * math.exp(-cfg.phi0)
    rel = ball.value / r**3 / limit - 1
    reports.append(CheckReport("noncollapsing.flat_small_r", ball.value / r**3, limit, -abs(rel), 0.02,
                               context={"run": cfg.run_id, "r": r, "M": cfg.M, "relative_error": rel}))
    return reports


def _grid_rescaling(root):
    base = parse_config(RESCALED.format(lam=1.0, t_end=0.1, dt="auto"))
    dt = runs.grid_dt(base, runs.grid_initial(base))
    ref = _pointed_records(base, root)
    worst = 0.0
    for lam in (0.5, 2.0):
        cfg = parse_config(RESCALED.format(lam=lam, t_end=repr(0.1 / lam**2), dt=repr(dt / lam**2)))
        got = _pointed_records(cfg, root)
        for tau, vals in ref.items():
            other = got[min(got, key=lambda t: abs(t - tau / lam**2))]
            worst = max(worst, *(abs(a - b) for a, b in zip(vals, other)))
    tol = tolerance(base.tol_c, base.N, dt, "rescaling")
    return CheckReport("rescaling.entropy", worst, 0.0, -worst, tol,
                       context={"run": "grid-rescaling", "lambdas": [0.5, 2.0]})


def _pointed_records(cfg, root):
    history = runs.build_history(cfg)
    sol = solve_conjugate(history, [cfg.bases[0]])
    ent = slab_entropies(history, sol)
    return {float(ent.taus[j]): ent.record(j).row()[1:] for j in range(len(ent.taus))}


def suite_grid_small(root: Path, cache: RunCache | None = None):
    cache = cache or RunCache(root)
    cfg = perturbed_config(128)
    reports, consts = cache.full(cfg)
    reports = list(reports)
    history = runs.load_history(root / cfg.run_id)
    reports.append(_w1_delta_pairs(history, cfg.seed))
    reports += _flat_static_checks(root)
    _, na = runs.simulate(parse_config(HYPOTHESIS_VIOLATED), root / "hypotheses-violated")
    reports += na
    reports.append(_grid_rescaling(root))
    return reports, {cfg.run_id: consts}


def _relative_change(a, b):
    if a == b:
        return 0.0
    return abs(a - b) / max(abs(a), abs(b))


def regularity_points(root: Path):
    pairs = []
    for lam in REGULARITY_SCALES:
        for eps in REGULARITY_AMPLITUDES:
            cfg = parse_config(REGULARITY.format(lam=lam, eps=eps))
            history = runs.build_history(cfg)
            sol = solve_conjugate(history, [0])
            ent = slab_entropies(history, sol)
            pairs.append(regularity_pair(history, ent, 0, REGULARITY_RADIUS))
    return pairs


def suite_grid_full(root: Path, cache: RunCache | None = None):
    cache = cache or RunCache(root)
    reports, consts = [], {}
    coarse, fine = perturbed_config(128), perturbed_config(256)
    rep_c, const_c = cache.full(coarse)
    rep_f, const_f = cache.full(fine)
    reports += rep_f
    consts[fine.run_id] = const_f
    consts[coarse.run_id] = const_c
    h_c = runs.load_history(root / coarse.run_id)
    h_f = runs.load_history(root / fine.run_id)
    res_c, res_f = identity_residuals(h_c), identity_residuals(h_f)
    for name in ("evolve_H", "volume", "h_l2", "evolve_R"):
        ratio = float(np.nanmax(res_c[name]) / np.nanmax(res_f[name]))
        reports.append(CheckReport("refinement.identity_order", ratio, REFINEMENT_MIN, ratio - REFINEMENT_MIN,
                                   context={"run": "refinement", "identity": name}))
    for key in ("B6_C", "B7_C", "B8_C", "B9_C", "B10_c", "B10_center_c"):
        if key not in const_c or key not in const_f:
            continue
        a, b = np.atleast_1d(const_c[key]), np.atleast_1d(const_f[key])
        change = max(_relative_change(float(x), float(y)) for x, y in zip(a, b))
        reports.append(CheckReport("refinement.constants", change, CONSTANT_RTOL, CONSTANT_RTOL - change,
                                   context={"run": "refinement", "constant": key,
                                            "coarse": a.tolist(), "fine": b.tolist()}))
    pairs = regularity_points(root)
    reports.append(eps_regularity_probe(pairs, {"run": "regularity", "r": REGULARITY_RADIUS}))
    consts["regularity"] = {"pairs": [list(p) for p in pairs]}
    return reports, consts


# -- calibration -------------------------------------------------------------------

def calibration_ratios():
    """Residual / (N^-2 + dt^2) per monitor on the calibration run."""
    c = CALIBRATION
    s0 = initial_state(c["family"], c["N"], h0=c["h0"], eps=c["eps"], phi0=c["phi0"])
    dt = c["cfl"] * cfl_limit(s0.geom)
    n = int(math.ceil(c["t_end"] / dt))
    history = run(s0, c["t_end"], c["t_end"] / n)
    scale = c["N"] ** -2.0 + history.dt**2
    out = {f"identity.{k}": float(np.nanmax(v)) / scale for k, v in identity_residuals(history).items()}
    sol = solve_conjugate(history, [c["N"] // 3])
    ent = slab_entropies(history, sol)
    ent = restrict(ent, ent.taus >= c["tau_min"])
    res = [derivative_residuals(ent, j) for j in range(len(ent.taus))]
    for key, name in (("tauN_H", "entropy.B1_tauN_derivative"), ("dW_H", "entropy.B1_dW_identity"),
                      ("W_forms", "entropy.W_forms")):
        out[name] = max(abs(r[key]) for r in res) / scale
    return out


# -- aggregate -----------------------------------------------------------------------

def counts(reports):
    out = {PASS: 0, FAIL: 0, NOT_APPLICABLE: 0}
    for r in reports:
        out[r.verdict] += 1
    return out


def _sort_key(d):
    return (str(d["context"].get("run", "")), d["name"], json.dumps(d, sort_keys=True))


def verify(suite: str, root: Path, golden_dir=None):
    """Run ``suite`` (or ``all``); returns ``(report dict, reports)``."""
    root = Path(root)
    if suite != "all" and suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {SUITES + ('all',)}")
    chosen = SUITES if suite == "all" else (suite,)
    cache = RunCache(root / "runs")
    reports, constants = [], {}
    for name in chosen:
        log.info("suite %s", name)
        if name == "identities":
            rep, const = suite_identities()
        elif name == "homogeneous":
            rep, const = suite_homogeneous(root / "runs", golden_dir)
        elif name == "grid-small":
            rep, const = suite_grid_small(root / "runs", cache)
        else:
            rep, const = suite_grid_full(root / "runs", cache)
        for r in rep:
            r.context.setdefault("suite", name)
        reports += rep
        constants.update(const)
    checks = sorted((r.to_dict() for r in reports), key=_sort_key)
    report = {"suite": suite, "counts": counts(reports), "constants": runs._plain(constants),
              "tolerance_constants": TOL_C, "checks": checks}
    return report, reports


def write_report(report, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
