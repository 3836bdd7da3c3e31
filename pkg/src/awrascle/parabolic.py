"""Linear continuity equation with dissipation.

    rho_t + div(rho v) - div(a grad rho) = b

Stabilized IMEX splitting: ``abar * Lap`` is implicit (spectral diagonal
inverse) with ``abar = max a``; ``div((a - abar) grad rho) - div(rho v) + b``
is explicit.  Every explicit term is a divergence, so the mean of rho moves
only through ``b``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .grid import check_finite

__all__ = [
    "CFLWarning",
    "DegenerateDissipation",
    "ParabolicProblem",
    "StepReport",
    "PositivityReport",
    "step",
    "solve",
    "positivity_guard",
    "estimate_scheme_error",
    "with_measured_tolerance",
]

SCHEMES = ("cn", "euler")


class CFLWarning(UserWarning):
    pass


class DegenerateDissipation(ValueError):
    pass


@dataclass
class StepReport:
    level: int
    time: float
    min_rho: float
    max_rho: float
    mass: float
    maxmin_lower_bound: float
    maxmin_upper_bound: float
    violated: bool


@dataclass
class ParabolicProblem:
    """Coefficient trajectories on the uniform levels ``t0 + k*dt``.

    ``v``: ``(M+1, dim, *shape)``; ``a`` and optional ``b``: ``(M+1, *shape)``.
    ``scheme="cn"`` is trapezoidal in the implicit part with Heun for the
    explicit part (second order); ``"euler"`` is the first-order
    backward/forward Euler split.
    """

    torus: object
    v: np.ndarray
    a: np.ndarray
    rho0: np.ndarray
    t_end: float
    dt: float
    b: np.ndarray = None
    t0: float = 0.0
    a_floor: float = 1e-10
    scheme: str = "cn"
    scheme_error: float = 0.0
    dealias: bool = True
    tol_base: float = 1e-8
    div_sup: np.ndarray = field(init=False, repr=False)
    div_integral: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        self.rho0 = check_finite(np.asarray(self.rho0, dtype=float), "rho0")
        m = int(round(self.t_end / self.dt))
        if m < 1 or abs(m * self.dt - self.t_end) > 1e-12 * max(1.0, self.t_end):
            raise ValueError(f"dt={self.dt} does not divide t_end={self.t_end}")
        shape = self.torus.shape
        if self.v.shape != (m + 1, self.torus.dim) + shape:
            raise ValueError(f"v must have shape {(m + 1, self.torus.dim) + shape}, got {self.v.shape}")
        if self.a.shape != (m + 1,) + shape:
            raise ValueError(f"a must have shape {(m + 1,) + shape}, got {self.a.shape}")
        if self.b is not None:
            self.b = np.asarray(self.b, dtype=float)
            if self.b.shape != self.a.shape:
                raise ValueError("b must be aligned with a")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        amin = float(self.a.min())
        if not amin >= self.a_floor or self.a_floor < 1e-10:
            raise DegenerateDissipation(
                f"degenerate dissipation: min mobility {amin:.3e} below floor {max(self.a_floor, 1e-10):.1e}"
            )
        self.div_sup = np.array([self.torus.sup(self.torus.divergence(vk)) for vk in self.v])
        inc = 0.5 * self.dt * (self.div_sup[1:] + self.div_sup[:-1])
        self.div_integral = np.concatenate([[0.0], np.cumsum(inc)])
        h = min(self.torus.spacing)
        cfl = self.dt * float(np.abs(self.v).max()) / h
        if cfl > 1.0:
            warnings.warn(f"advective CFL number {cfl:.2f} > 1; accuracy may degrade", CFLWarning, stacklevel=2)

    @property
    def n_steps(self):
        return len(self.a) - 1

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    @property
    def tol_mp(self):
        return self.tol_base + self.scheme_error

    def envelopes(self, level):
        """Exponential max-min bounds at ``level`` (NaN when a source is present)."""
        if self.b is not None:
            return np.nan, np.nan
        e = np.exp(self.div_integral[level])
        return float(self.rho0.min()) / e, float(self.rho0.max()) * e

    def report(self, rho, level):
        lo, hi = self.envelopes(level)
        rmin, rmax = float(rho.min()), float(rho.max())
        violated = bool(self.b is None and (rmin < lo - self.tol_mp or rmax > hi + self.tol_mp))
        return StepReport(level, float(self.times[level]), rmin, rmax,
                          float(self.torus.integral(rho)), lo, hi, violated)


def _explicit_hat(p, rho_hat, level, abar):
    t = p.torus
    rho = t.irfft(rho_hat)
    grad = np.stack([t.irfft(m * rho_hat) for m in t._derivative_multipliers])
    flux = (p.a[level] - abar) * grad - rho * p.v[level]
    out = t.divergence_hat(flux)
    if p.dealias:
        out = out * t.dealias_mask
    if p.b is not None:
        out = out + t.rfft(p.b[level])
    return out


def step(state, problem, level):
    """Advance ``state`` from ``level`` to ``level + 1``."""
    p = problem
    t = p.torus
    if not 0 <= level < p.n_steps:
        raise IndexError(f"level {level} outside 0..{p.n_steps - 1}")
    check_finite(state, f"rho at level {level}")
    abar = max(float(p.a[level].max()), float(p.a[level + 1].max()))
    dt = p.dt
    k2 = t.k_squared()
    rh = t.rfft(state)
    e0 = _explicit_hat(p, rh, level, abar)
    if p.scheme == "euler":
        new_h = (rh + dt * e0) / (1.0 + dt * abar * k2)
    else:
        lhs = 1.0 + 0.5 * dt * abar * k2
        rhs0 = (1.0 - 0.5 * dt * abar * k2) * rh
        pred = (rhs0 + dt * e0) / lhs
        e1 = _explicit_hat(p, pred, level + 1, abar)
        new_h = (rhs0 + 0.5 * dt * (e0 + e1)) / lhs
    new = t.irfft(new_h)
    if not np.all(np.isfinite(new)):
        raise FloatingPointError(f"non-finite density after step to level {level + 1}")
    return new, p.report(new, level + 1)


def solve(problem):
    """Run all steps.  Returns ``(trajectory, reports)``; reports[0] describes rho0."""
    p = problem
    traj = np.empty((p.n_steps + 1,) + p.torus.shape)
    traj[0] = p.rho0
    reports = [p.report(p.rho0, 0)]
    for k in range(p.n_steps):
        traj[k + 1], rep = step(traj[k], p, k)
        reports.append(rep)
    return traj, reports


@dataclass
class PositivityReport:
    min_rho: float
    level: int
    positive: bool
    form_checked: bool


def positivity_guard(trajectory, form_check=True):
    """Audit ``min rho > 0`` over a trajectory ``(M+1, *shape)``."""
    traj = np.asarray(trajectory)
    if not traj[0].min() > 0:
        raise ValueError("positivity audit requires strictly positive initial density")
    mins = traj.reshape(len(traj), -1).min(axis=1)
    lvl = int(np.argmin(mins))
    return PositivityReport(float(mins[lvl]), lvl, bool(mins[lvl] > 0), bool(form_check))


def _refine(arr):
    mid = 0.5 * (arr[1:] + arr[:-1])
    out = np.empty((2 * len(arr) - 1,) + arr.shape[1:])
    out[0::2] = arr
    out[1::2] = mid
    return out


def estimate_scheme_error(problem):
    """Self-convergence estimate of the sup-norm error of ``problem``.

    Re-solves with ``dt/2`` (coefficients linear in time between levels) and
    returns the Richardson-scaled sup difference at the shared levels.
    """
    p = problem
    fine = ParabolicProblem(
        p.torus, _refine(p.v), _refine(p.a), p.rho0, p.t_end, p.dt / 2,
        None if p.b is None else _refine(p.b), p.t0, p.a_floor, p.scheme, 0.0, p.dealias, p.tol_base,
    )
    coarse_traj, _ = solve(p)
    fine_traj, _ = solve(fine)
    order = 2.0 if p.scheme == "cn" else 1.0
    diff = float(np.abs(coarse_traj - fine_traj[::2]).max())
    return diff * 2**order / (2**order - 1)


def with_measured_tolerance(problem, trajectory):
    """Copy of ``problem`` whose ``tol_mp`` includes the measured scheme error,
    plus the reports of ``trajectory`` re-audited against it."""
    p = problem
    err = estimate_scheme_error(p)
    q = ParabolicProblem(p.torus, p.v, p.a, p.rho0, p.t_end, p.dt, p.b, p.t0, p.a_floor,
                         p.scheme, err, p.dealias, p.tol_base)
    return q, [q.report(r, k) for k, r in enumerate(trajectory)]
