"""Successive approximations on a time slab.

Each iteration transports the desired velocity w with the previous actual
velocity u, then solves the linear dissipative continuity equation for rho
with velocity w (minus grad Phi for the nonlocal closure) and mobility
``a = rho p'(rho)`` of the previous iterate.  Iteration stops when the change
in the contraction metric drops below ``tol_fix``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import parabolic, transport
from .offset import DomainViolation, Potential, closure_u, grad_p_field, solve_potential
from .transport import Trajectory

__all__ = [
    "SlabState",
    "IterationReport",
    "SlabAudit",
    "SlabForcing",
    "SlabError",
    "NonConvergence",
    "init_slab",
    "iterate_once",
    "solve_slab",
    "audit_slab",
    "march",
    "MarchResult",
    "contraction_factor",
    "formulation_residual",
    "momentum",
]

log = logging.getLogger(__name__)


class SlabError(RuntimeError):
    def __init__(self, message, iteration=None, level=None, cause=None):
        self.iteration = iteration
        self.level = level
        self.cause = cause
        where = []
        if iteration is not None:
            where.append(f"iteration {iteration}")
        if level is not None:
            where.append(f"level {level}")
        super().__init__(message + (f" ({', '.join(where)})" if where else ""))


class NonConvergence(SlabError):
    def __init__(self, kappas, deltas, iteration):
        self.kappas = list(kappas)
        self.deltas = list(deltas)
        hist = ", ".join(f"{k:.3g}" for k in self.kappas)
        super().__init__(
            f"no convergence after {iteration} iterations; kappa history [{hist}] "
            "(slab length may exceed the contraction regime)",
            iteration,
        )


@dataclass
class SlabState:
    torus: object
    times: np.ndarray
    rho: np.ndarray
    w: np.ndarray
    u: np.ndarray
    phi: np.ndarray = None
    grad_phi: np.ndarray = None
    iteration: int = 0
    parabolic_reports: list = field(default_factory=list, repr=False)
    problem: object = field(default=None, repr=False)

    @property
    def dt(self):
        return float(self.times[1] - self.times[0])

    @property
    def n_levels(self):
        return len(self.times)


@dataclass
class IterationReport:
    iter: int
    delta_w: float
    delta_rho: float
    kappa: float
    bound_M: float
    min_rho: float
    max_rho: float
    mass: float
    converged: bool
    delta_rho_t: float = 0.0

    @property
    def delta(self):
        return self.delta_w + self.delta_rho


@dataclass
class SlabForcing:
    """Source terms on the slab levels (manufactured-solution runs).

    ``g``: ``(M+1, dim, *shape)`` for the w-transport, ``b``: ``(M+1, *shape)``
    for the continuity equation.
    """

    g: np.ndarray = None
    b: np.ndarray = None


def _potential_levels(rho, torus):
    pots = [solve_potential(r, torus) for r in rho]
    return np.stack([p.phi for p in pots]), np.stack([p.grad_phi for p in pots])


def init_slab(rho0, u0, model, torus, T, M_levels, w0=None, t0=0.0):
    """Iterate 0: constant-in-time extension of the initial data.

    ``w0`` defaults to ``u0 + grad p(rho0)`` (``+ grad Phi`` nonlocal); passing
    it directly is how marches restart from a slab endpoint.
    """
    rho0 = np.asarray(rho0, dtype=float)
    if rho0.shape != torus.shape:
        raise ValueError("rho0 is not on the given torus")
    model.check(rho0, torus)
    times = t0 + np.linspace(0.0, T, M_levels + 1)
    phi = gphi = None
    if model.nonlocal_:
        pot = solve_potential(rho0, torus)
        phi = np.broadcast_to(pot.phi, (M_levels + 1,) + torus.shape).copy()
        gphi = np.broadcast_to(pot.grad_phi, (M_levels + 1, torus.dim) + torus.shape).copy()
    if w0 is None:
        u0 = np.asarray(u0, dtype=float)
        if u0.shape != (torus.dim,) + torus.shape:
            raise ValueError("u0 is not a vector field on the given torus")
        w0 = u0 + grad_p_field(model, rho0, torus)
        if phi is not None:
            w0 = w0 + gphi[0]
    w0 = np.asarray(w0, dtype=float)
    u_0 = closure_u(model, w0, rho0, torus, _pot(phi, gphi, 0))
    rep = lambda a: np.broadcast_to(a, (M_levels + 1,) + a.shape).copy()
    return SlabState(torus, times, rep(rho0), rep(w0), rep(u_0), phi, gphi, 0)


def _pot(phi, gphi, k):
    if phi is None:
        return None
    return Potential(phi[k], gphi[k])


def _norm_levels(torus, f, k):
    return np.array([torus.sobolev_norm(x, k) for x in f])


def _v2_norm(torus, d, dt):
    return float(_norm_levels(torus, d, 2).max() + np.sqrt(dt * np.sum(_norm_levels(torus, d[1:], 3) ** 2)))


def iterate_once(state, model, forcing=None, substeps=4, method="spline", scheme="cn",
                 previous_delta=None, tol_fix=1e-10, tol_mp=1e-8):
    """One Picard step.  Returns ``(new_state, report)``."""
    t = state.torus
    dt = state.dt
    T = float(state.times[-1] - state.times[0])
    n = state.iteration + 1
    level = None
    try:
        u_traj = Trajectory(t, state.times, state.u, method)
        g = None
        if forcing is not None and forcing.g is not None:
            g = Trajectory(t, state.times, forcing.g, method)
        _, w_new = transport.advect(state.w[0], u_traj, T, dt, g=g, substeps=substeps,
                                    method=method, t0=state.times[0])
        a = np.stack([model.mobility(r) for r in state.rho])
        v = w_new if state.grad_phi is None else w_new - state.grad_phi
        prob = parabolic.ParabolicProblem(
            t, v, a, state.rho[0], T, dt,
            b=None if forcing is None else forcing.b, t0=state.times[0], scheme=scheme,
            tol_base=tol_mp,
        )
        rho_new, reports = parabolic.solve(prob)
        phi = gphi = None
        if state.phi is not None:
            phi, gphi = _potential_levels(rho_new, t)
        u_new = np.empty_like(w_new)
        for level in range(len(state.times)):
            u_new[level] = closure_u(model, w_new[level], rho_new[level], t, _pot(phi, gphi, level))
        level = None
    except DomainViolation as exc:
        raise SlabError(f"domain violation: {exc}", n, level, exc) from exc
    except parabolic.DegenerateDissipation as exc:
        raise SlabError(str(exc), n, level, exc) from exc
    except (FloatingPointError, ValueError) as exc:
        raise SlabError(f"solver abort: {exc}", n, level, exc) from exc

    delta_w = float(_norm_levels(t, w_new - state.w, 2).max())
    drho = rho_new - state.rho
    delta_rho = _v2_norm(t, drho, dt)
    drho_t = np.diff(drho, axis=0) / dt
    delta_rho_t = float(np.sqrt(dt * np.sum(_norm_levels(t, drho_t, 1) ** 2)))
    delta = delta_w + delta_rho
    if n == 1 or previous_delta is None:
        kappa = 0.0
    elif previous_delta == 0.0:
        kappa = 0.0
    else:
        kappa = delta / previous_delta
    bound_M = float(np.max(_norm_levels(t, w_new, 3) + _norm_levels(t, rho_new, 3)))
    masses = np.array([t.integral(r) for r in rho_new])
    report = IterationReport(
        n, delta_w, delta_rho, kappa, bound_M,
        float(rho_new.min()), float(rho_new.max()), float(masses[-1]),
        bool(delta <= tol_fix), delta_rho_t,
    )
    new = SlabState(t, state.times, rho_new, w_new, u_new, phi, gphi, n, reports, prob)
    return new, report


def solve_slab(rho0, u0, model, torus, T, M_levels, tol_fix=1e-10, max_iter=30, forcing=None,
               substeps=4, method="spline", scheme="cn", w0=None, t0=0.0, initial=None, tol_mp=1e-8):
    """Iterate to a fixed point.  Returns ``(state, reports)``.

    ``initial`` optionally replaces iterate 0 (uniqueness smoke tests).
    """
    state = initial if initial is not None else init_slab(rho0, u0, model, torus, T, M_levels, w0, t0)
    reports = []
    prev = None
    for _ in range(max_iter):
        state, rep = iterate_once(state, model, forcing, substeps, method, scheme, prev, tol_fix, tol_mp)
        reports.append(rep)
        log.debug("iter %d delta_w=%.3e delta_rho=%.3e kappa=%.3f", rep.iter, rep.delta_w, rep.delta_rho, rep.kappa)
        if rep.converged:
            return state, reports
        prev = rep.delta
    raise NonConvergence([r.kappa for r in reports[1:]], [r.delta for r in reports], len(reports))


def contraction_factor(reports):
    """Largest recorded kappa (iterations >= 2); 0 when none is recorded."""
    ks = [r.kappa for r in reports[1:]]
    return max(ks) if ks else 0.0


@dataclass
class SlabAudit:
    mass_drift: float
    min_rho: float
    positive: bool
    maxmin_violations: int
    barrier_ok: bool = None
    barrier_bounds: tuple = None
    potential_residual: float = None
    jacobian_min: float = None

    @property
    def passed(self):
        ok = self.positive and self.maxmin_violations == 0 and self.mass_drift <= 1e-10
        if self.barrier_ok is not None:
            ok = ok and self.barrier_ok
        if self.potential_residual is not None:
            ok = ok and self.potential_residual <= 1e-12
        if self.jacobian_min is not None:
            ok = ok and self.jacobian_min > 0
        return ok


def audit_slab(state, model, forced=False, flow=True):
    """Level-by-level invariant audit of a converged slab."""
    t = state.torus
    masses = np.array([t.integral(r) for r in state.rho])
    drift = float(np.abs(masses - masses[0]).max() / abs(masses[0]))
    pos = parabolic.positivity_guard(state.rho, form_check=True)
    reports = state.parabolic_reports
    if any(r.violated for r in reports) and state.problem is not None:
        # the envelope tolerance includes the scheme's own error at this resolution
        _, reports = parabolic.with_measured_tolerance(state.problem, state.rho)
        state.parabolic_reports = reports
    viol = sum(r.violated for r in reports)
    audit = SlabAudit(0.0 if forced else drift, pos.min_rho, pos.positive, viol)
    if model.singular:
        sup = model.rho_sup
        r0 = state.rho[0]
        theta = min(float(r0.min()), sup - float(r0.max())) / sup
        lo, hi = 0.5 * theta * sup, (1.0 - 0.5 * theta) * sup
        audit.barrier_ok = bool(state.rho.min() > lo and state.rho.max() < hi)
        audit.barrier_bounds = (lo, hi)
    if state.phi is not None:
        audit.potential_residual = max(
            Potential(p, g).residual(r, t) for p, g, r in zip(state.phi, state.grad_phi, state.rho)
        )
    if flow:
        u = Trajectory(t, state.times, state.u)
        audit.jacobian_min = transport.flow_diagnostics(u, float(state.times[-1] - state.times[0])).jacobian_min
    return audit


def formulation_residual(state):
    """Sup residual of the conservative system evaluated on a slab.

    ``rho_t + div(rho u)`` and ``(rho w)_t + div(rho w (x) u)`` with spectral
    space derivatives and centered time differences at the interior levels.
    """
    t = state.torus
    dt = state.dt
    out = 0.0
    for k in range(1, state.n_levels - 1):
        rho, w, u = state.rho[k], state.w[k], state.u[k]
        r_mass = (state.rho[k + 1] - state.rho[k - 1]) / (2 * dt) + t.divergence(rho * u)
        out = max(out, t.sup(r_mass))
        m_t = (state.rho[k + 1] * state.w[k + 1] - state.rho[k - 1] * state.w[k - 1]) / (2 * dt)
        for i in range(t.dim):
            out = max(out, t.sup(m_t[i] + t.divergence(rho * w[i] * u)))
    return out


def momentum(state_or_result, torus):
    """Per-level total momentum ``int rho w``, shape ``(levels, dim)``."""
    r = state_or_result
    return np.stack([torus.integral(rk * wk) for rk, wk in zip(r.rho, r.w)])


@dataclass
class MarchResult:
    times: np.ndarray
    rho: np.ndarray
    w: np.ndarray
    u: np.ndarray
    slab_reports: list
    audits: list


def march(rho0, u0, model, torus, T_total, slab_T, M_levels, tol_fix=1e-10, max_iter=30,
          substeps=4, method="spline", scheme="cn", on_slab=None, tol_mp=1e-8):
    """Chain slabs over ``[0, T_total]``, each restarted from the previous endpoint."""
    n_slabs = int(round(T_total / slab_T))
    if n_slabs < 1 or abs(n_slabs * slab_T - T_total) > 1e-12 * max(1.0, T_total):
        raise ValueError(f"slab_T={slab_T} does not divide T_total={T_total}")
    times, rhos, ws, us, reps, audits = [], [], [], [], [], []
    rho, w = np.asarray(rho0, dtype=float), None
    for s in range(n_slabs):
        t0 = s * slab_T
        try:
            state, r = solve_slab(rho, u0, model, torus, slab_T, M_levels, tol_fix, max_iter,
                                  substeps=substeps, method=method, scheme=scheme, w0=w, t0=t0,
                                  tol_mp=tol_mp)
        except SlabError as exc:
            raise SlabError(f"march aborted in slab starting at t={t0:g}: {exc}", exc.iteration, exc.level, exc) from exc
        audit = audit_slab(state, model)
        first = 0 if s == 0 else 1
        times.append(state.times[first:])
        rhos.append(state.rho[first:])
        ws.append(state.w[first:])
        us.append(state.u[first:])
        reps.append(r)
        audits.append(audit)
        if on_slab is not None:
            on_slab(s, state, r, audit)
        rho, w = state.rho[-1], state.w[-1]
    return MarchResult(np.concatenate(times), np.concatenate(rhos), np.concatenate(ws),
                       np.concatenate(us), reps, audits)
