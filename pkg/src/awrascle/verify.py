"""Acceptance checks, grouped into the suites run by ``awrascle verify``.

Each check returns a :class:`CheckResult`; :func:`run_suite` runs a suite and
:func:`format_table` renders the pass/fail table.  Slab runs shared between
checks (the "corpus") are computed once per process.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import mms, parabolic, picard
from .grid import Torus
from .offset import LocalPlusNewtonian, PowerLaw, SingularRational, SingularReciprocal, solve_potential
from .transport import Trajectory, advect, flow_diagnostics

__all__ = ["CheckResult", "SUITES", "CHECKS", "run_suite", "format_table", "corpus"]


@dataclass
class CheckResult:
    criterion: str
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.criterion:>3} {self.name}: {self.detail} ({self.seconds:.2f} s)"


def _timed(criterion, name):
    def wrap(fn):
        def run():
            t0 = time.perf_counter()
            passed, detail = fn()
            return CheckResult(criterion, name, bool(passed), detail, time.perf_counter() - t0)
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run
    return wrap


def _order(errors, ratio=2.0):
    e = np.asarray(errors, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(ratio)


# -- corpus of accepted slab runs --------------------------------------------


@dataclass
class CorpusRun:
    name: str
    model: object
    state: picard.SlabState
    reports: list
    audit: picard.SlabAudit
    seconds: float


def _corpus_specs():
    t1 = Torus((64,))
    x = t1.nodes[0]
    t2 = Torus((32, 32))
    X, Y = t2.nodes
    return {
        "small-data": (PowerLaw(2.0), t1, 1 + 0.05 * np.sin(x), 0.05 * np.cos(x)[None], 0.05, 20),
        "barrier": (SingularRational(0.05, 1.0, 2.0), t1, 0.5 + 0.3 * np.sin(x), 0.1 * np.cos(x)[None], 0.05, 20),
        "reciprocal": (SingularReciprocal(0.05, 2.0, 2.0), t1, 1 + 0.3 * np.sin(x), 0.1 * np.cos(x)[None], 0.05, 20),
        "power-2d": (PowerLaw(1.5), t2, 1 + 0.2 * np.sin(X) * np.cos(Y),
                     0.1 * np.stack([np.cos(X), np.cos(Y)]), 0.05, 10),
        "nonlocal-1d": (LocalPlusNewtonian(PowerLaw(2.0)), t1, 1 + 0.1 * np.sin(x), 0.05 * np.cos(x)[None], 0.05, 20),
        "nonlocal-2d": (LocalPlusNewtonian(PowerLaw(2.0)), t2, 1 + 0.1 * np.sin(X) * np.cos(Y),
                        0.05 * np.stack([np.cos(X), np.sin(Y)]), 0.05, 10),
    }


@lru_cache(maxsize=None)
def corpus():
    runs = []
    for name, (model, torus, rho0, u0, T, M) in _corpus_specs().items():
        t0 = time.perf_counter()
        state, reps = picard.solve_slab(rho0, u0, model, torus, T, M, tol_fix=1e-10, max_iter=30)
        audit = picard.audit_slab(state, model)
        runs.append(CorpusRun(name, model, state, reps, audit, time.perf_counter() - t0))
    return tuple(runs)


# -- transport ----------------------------------------------------------------


@_timed("1", "transport exactness")
def check_transport_exactness():
    t = Torus((64,))
    x = t.nodes[0]
    parts, ok = [], True
    for method, tol in (("spline", 1e-8), ("trig", 1e-12)):
        t0 = time.perf_counter()
        v = Trajectory.steady(t, np.ones((1, 64)), 0.0, np.pi / 2, method)
        _, eta = advect(np.sin(x), v, np.pi / 2, np.pi / 64, method=method)
        secs = time.perf_counter() - t0
        err = t.sup(eta[-1] - np.sin(x - np.pi / 2))
        ok &= err <= tol and secs < 1.0
        parts.append(f"{method} err={err:.2e} (<= {tol:.0e}) in {secs:.2f} s")
    return ok, "; ".join(parts)


@_timed("11", "flow-map regularity")
def check_flow_map():
    t = Torus((64,))
    Ts = np.array([0.4, 0.2, 0.1, 0.05])
    v = Trajectory.steady(t, np.sin(t.nodes[0])[None], 0.0, 0.4)
    g = np.array([flow_diagnostics(v, T).sup_grad_minus_identity for T in Ts])
    slope = float(np.polyfit(np.log(Ts), np.log(g), 1)[0])
    jmin = min(r.audit.jacobian_min for r in corpus())
    ok = abs(slope - 1.0) <= 0.15 and jmin > 0
    return ok, f"slope={slope:.3f} (1 +- 0.15); corpus jacobian_min={jmin:.4f} (> 0)"


# -- parabolic ----------------------------------------------------------------


def _heat(dt, nu=0.1, t_end=1.0, N=64):
    t = Torus((N,))
    rho0 = 1 + 0.1 * np.cos(t.nodes[0])
    M = int(round(t_end / dt))
    prob = parabolic.ParabolicProblem(t, np.zeros((M + 1, 1, N)), np.full((M + 1, N), nu), rho0, t_end, dt)
    traj, _ = parabolic.solve(prob)
    return t, traj[-1]


@_timed("2", "heat-mode decay")
def check_heat_mode():
    nu = 0.1
    t, rho = _heat(1e-3, nu)
    amp = 2 * t.transform(rho)[1].real
    rel = abs(amp / 0.1 - np.exp(-nu)) / np.exp(-nu)
    finals = [_heat(dt, nu)[1] for dt in (0.1, 0.05, 0.025, 0.0125, 0.00625)]
    diffs = [np.abs(a - b).max() for a, b in zip(finals, finals[1:])]
    orders = _order(diffs)
    ok = rel <= 1e-6 and orders.min() >= 1.8
    return ok, f"relative mode error={rel:.2e} (<= 1e-6); self-convergence orders {np.round(orders, 2).tolist()} (>= 1.8)"


def _mass_run():
    t = Torus((64,))
    x = t.nodes[0]
    M = 1000
    a = np.broadcast_to(0.5 + 0.2 * np.sin(x), (M + 1, 64))
    v = np.broadcast_to(0.3 * np.cos(x), (M + 1, 1, 64))
    prob = parabolic.ParabolicProblem(t, v, a, 1 + 0.3 * np.sin(2 * x), 1.0, 1e-3)
    traj, _ = parabolic.solve(prob)
    return t, traj


@_timed("4", "mass conservation")
def check_mass():
    t, traj = _mass_run()
    m = np.array([t.integral(r) for r in traj])
    drift_par = float(np.abs(m - m[0]).max() / m[0])
    drift_slab = max(r.audit.mass_drift for r in corpus())
    ok = drift_par <= 1e-12 and drift_slab <= 1e-10
    return ok, f"parabolic 1000 steps drift={drift_par:.1e} (<= 1e-12); max slab drift={drift_slab:.1e} (<= 1e-10)"


def _audited(prob):
    traj, _ = parabolic.solve(prob)
    q, reports = parabolic.with_measured_tolerance(prob, traj)
    return traj, q, reports


@_timed("5", "max-min principle")
def check_maxmin():
    # divergence-free velocity: plain bounds
    t2 = Torus((32, 32))
    X, Y = t2.nodes
    M = 50
    v = np.broadcast_to(np.stack([np.sin(Y), np.sin(X)]), (M + 1, 2, 32, 32))
    rho0 = 1 + 0.5 * np.cos(X) * np.cos(Y)
    p2 = parabolic.ParabolicProblem(t2, v, np.full((M + 1, 32, 32), 0.05), rho0, 0.5, 0.01)
    traj2, q2, rep2 = _audited(p2)
    free_ok = traj2.min() >= rho0.min() - q2.tol_mp and traj2.max() <= rho0.max() + q2.tol_mp
    free_ok &= not any(r.violated for r in rep2)
    # variable divergence: exponential envelopes
    t1 = Torus((128,))
    x = t1.nodes[0]
    M = 500
    v1 = np.broadcast_to(0.3 * np.sin(x), (M + 1, 1, 128))
    p1 = parabolic.ParabolicProblem(t1, v1, np.full((M + 1, 128), 0.1), 1 + 0.5 * np.cos(x), 0.5, 1e-3)
    _, q1, rep1 = _audited(p1)
    n_viol = sum(r.violated for r in rep1)
    ok = free_ok and n_viol == 0
    return ok, (f"div-free 2D within [{rho0.min():.3f}, {rho0.max():.3f}] +- {q2.tol_mp:.1e}: {free_ok}; "
                f"variable-div envelope violations={n_viol} (tol_mp={q1.tol_mp:.1e})")


@_timed("6", "positivity")
def check_positivity():
    mins = {r.name: r.audit.min_rho for r in corpus()}
    _, traj = _mass_run()
    mins["parabolic-variable"] = float(traj.min())
    _, heat = _heat(1e-2)
    mins["heat-mode"] = float(heat.min())
    ok = all(m > 0 for m in mins.values())
    worst = min(mins, key=mins.get)
    return ok, f"{len(mins)} runs incl. nonlocal; min rho={mins[worst]:.4f} ({worst})"


# -- poisson ------------------------------------------------------------------


@_timed("3", "Poisson residual")
def check_poisson():
    t = Torus((64,))
    x = t.nodes[0]
    pot = solve_potential(2.5 + np.cos(x), t)
    single = max(t.sup(pot.phi - np.cos(x)), t.sup(pot.grad_phi[0] + np.sin(x)))
    rng = np.random.default_rng(20241018)
    resid = 0.0
    for torus in (Torus((64,)), Torus((32, 48)), Torus((16, 16, 16), (1.0, 2.0, 3.0))):
        rho = 1 + 0.1 * rng.standard_normal(torus.shape)
        p = solve_potential(rho, torus)
        resid = max(resid, t.sup(-torus.laplacian(p.phi) - (rho - torus.mean(rho))))
    ok = single <= 1e-13 and resid <= 1e-12
    return ok, f"single-mode error={single:.1e} (<= 1e-13); random residual={resid:.1e} (<= 1e-12)"


# -- contraction ----------------------------------------------------------------


def _small_data(T, M=20):
    t = Torus((64,))
    x = t.nodes[0]
    return picard.solve_slab(1 + 0.05 * np.sin(x), 0.05 * np.cos(x)[None], PowerLaw(2.0), t, T, M,
                             tol_fix=1e-10, max_iter=30)


@_timed("7", "contraction")
def check_contraction():
    t0 = time.perf_counter()
    _, reps = _small_data(0.05)
    _, reps_half = _small_data(0.025)
    secs = time.perf_counter() - t0
    kappas = [r.kappa for r in reps[1:]]
    k_T, k_half = picard.contraction_factor(reps), picard.contraction_factor(reps_half)
    ok = max(kappas) < 1 and reps[-1].converged and len(reps) <= 15 and k_half < k_T and secs < 30
    return ok, (f"{len(reps)} iterations (<= 15); max kappa(T)={k_T:.4f} (< 1); "
                f"kappa(T/2)={k_half:.4f} < kappa(T); {secs:.1f} s (< 30)")


@_timed("8", "uniform bound")
def check_uniform_bound():
    worst = 0.0
    for r in corpus():
        if len(r.reports) < 2:
            continue
        ref = r.reports[1].bound_M
        worst = max(worst, max(rep.bound_M for rep in r.reports[1:]) / ref)
    return worst <= 2.0, f"max bound_M / iteration-2 value over corpus={worst:.4f} (<= 2)"


@_timed("9", "singular barrier")
def check_barrier():
    run = next(r for r in corpus() if r.name == "barrier")
    rho = run.state.rho
    r0 = rho[0]
    ok = r0.min() >= 0.2 - 1e-12 and r0.max() <= 0.8 + 1e-12 and rho.min() > 0.1 and rho.max() < 0.9
    ok &= bool(run.audit.barrier_ok)
    return ok, f"rho in [{rho.min():.4f}, {rho.max():.4f}] on every level (inside (0.1, 0.9))"


# -- mms ----------------------------------------------------------------------


def _study_orders(rows):
    return np.array([r.order_sup for r in rows[1:]])


@_timed("10", "MMS convergence")
def check_mms():
    t0 = time.perf_counter()
    m = PowerLaw(2.0)
    wave = mms.build_case("traveling-wave", m, Torus((16,)))
    heat = mms.build_case("heat-mode", m, Torus((32,)))
    studies = {
        "transport spatial": (mms.convergence_study(wave, "transport", [16, 32, 64], [1e-3] * 3, 0.5), 3.7),
        "transport temporal": (mms.convergence_study(wave.on(Torus((32,))), "transport", [32] * 4,
                                                     [0.1, 0.05, 0.025, 0.0125], 0.5, method="trig"), 1.9),
        "parabolic constant": (mms.convergence_study(heat, "parabolic", [32] * 4,
                                                     [0.1, 0.05, 0.025, 0.0125], 1.0), 1.8),
        "parabolic variable": (mms.convergence_study(wave.on(Torus((64,))), "parabolic", [64] * 4,
                                                     [0.1, 0.05, 0.025, 0.0125], 0.5), 0.9),
        "coupled": (mms.convergence_study(wave, "coupled", [16, 32, 64], [0.05, 0.025, 0.0125], 0.2), 0.9),
    }
    secs = time.perf_counter() - t0
    parts, ok = [], secs < 300
    for name, (rows, need) in studies.items():
        orders = _study_orders(rows)
        errs = [r.err_sup for r in rows]
        good = orders.min() >= need and all(a > b for a, b in zip(errs, errs[1:]))
        ok &= good
        parts.append(f"{name} {np.round(orders, 2).tolist()} (>= {need})")
    return ok, "; ".join(parts) + f"; {secs:.1f} s (< 300)"


MOMENTUM_LEVELS = ((32, 5), (64, 10), (128, 20))


def momentum_drift(N, M, T_total=0.2, slab_T=0.1, method="spline"):
    """``|int rho w (T_total) - int rho w (0)|`` over a two-slab march."""
    t = Torus((N,))
    x = t.nodes[0]
    res = picard.march(1 + 0.2 * np.sin(x), (0.3 + 0.2 * np.cos(x))[None], PowerLaw(2.0), t,
                       T_total, slab_T, M, method=method)
    mom = picard.momentum(res, t)
    return float(np.abs(mom[-1] - mom[0]).max())


@_timed("12", "momentum consistency")
def check_momentum():
    drifts = [momentum_drift(N, M) for N, M in MOMENTUM_LEVELS]
    orders = _order(drifts)
    ok = orders.min() >= 1.0
    return ok, f"drift {[f'{d:.2e}' for d in drifts]}; orders {np.round(orders, 2).tolist()} (>= 1)"


FORMULATION_LEVELS = ((16, 5), (32, 10), (64, 20), (128, 40))


def formulation_residual(N, M, T=0.1):
    t = Torus((N,))
    x = t.nodes[0]
    state, _ = picard.solve_slab(1 + 0.2 * np.sin(x), (0.3 + 0.2 * np.cos(x))[None], PowerLaw(2.0), t, T, M)
    return picard.formulation_residual(state)


@_timed("13", "formulation consistency")
def check_formulation():
    res = [formulation_residual(N, M) for N, M in FORMULATION_LEVELS]
    orders = _order(res)
    ok = orders.min() >= 1.0
    return ok, f"residual {[f'{r:.2e}' for r in res]}; orders {np.round(orders, 2).tolist()} (>= 1)"


CHECKS = {
    "1": check_transport_exactness,
    "2": check_heat_mode,
    "3": check_poisson,
    "4": check_mass,
    "5": check_maxmin,
    "6": check_positivity,
    "7": check_contraction,
    "8": check_uniform_bound,
    "9": check_barrier,
    "10": check_mms,
    "11": check_flow_map,
    "12": check_momentum,
    "13": check_formulation,
}

SUITES = {
    "transport": ("1", "11"),
    "parabolic": ("2", "4", "5", "6"),
    "poisson": ("3",),
    "contraction": ("7", "8", "9"),
    "mms": ("10", "12", "13"),
}
SUITES["all"] = tuple(sorted(CHECKS, key=int))


def run_suite(name, echo=None):
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    results = []
    for c in SUITES[name]:
        try:
            res = CHECKS[c]()
        except Exception as exc:  # a crashing check is a failed check
            res = CheckResult(c, CHECKS[c].__name__, False, f"raised {type(exc).__name__}: {exc}")
        results.append(res)
        if echo is not None:
            echo(res.line())
    return results


def format_table(results):
    lines = [r.line() for r in results]
    n = sum(r.passed for r in results)
    lines.append(f"{n}/{len(results)} checks passed")
    return "\n".join(lines)
