"""Manufactured solutions and refinement studies.

Catalog cases are closed-form ``(rho*, w*)`` with exact time derivatives.
Forcings are obtained by spectral differentiation of the sampled exact
solution:

    g = w*_t + (u* . grad) w*                      (transport slot)
    b = rho*_t + div(rho* v*) - div(a(rho*) grad rho*)   (continuity slot)

with ``u*`` from the offset closure and ``v* = w*`` (``w* - grad Phi*`` for the
nonlocal closure).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import parabolic, picard
from .offset import closure_u, solve_potential
from .transport import Trajectory, advect

__all__ = ["CATALOG", "ManufacturedCase", "build_case", "StudyRow", "convergence_study", "write_study_csv"]

CATALOG = ("constant", "heat-mode", "traveling-wave")

HEAT_NU = 0.1
WAVE_SPEED = 1.0


@dataclass
class ManufacturedCase:
    catalog_id: str
    model: object
    torus: object
    constant_mobility: float = None

    def on(self, torus):
        return build_case(self.catalog_id, self.model, torus)

    # -- closed forms -----------------------------------------------------

    @property
    def _scale(self):
        # keep 0.5 rho_sup <= rho* <= 0.9 rho_sup for the singular offsets
        return (1.0, 1.0) if not self.model.singular else (self.model.rho_sup, 0.7)

    def _xi(self, t):
        k1 = 2 * np.pi / self.torus.lengths[0]
        return k1 * self.torus.nodes[0] - WAVE_SPEED * t, k1

    def rho(self, t):
        s, base = self._scale
        x = self.torus.nodes[0]
        if self.catalog_id == "constant":
            return np.full(self.torus.shape, s * base)
        if self.catalog_id == "heat-mode":
            k1 = 2 * np.pi / self.torus.lengths[0]
            return s * (base + 0.1 * np.exp(-HEAT_NU * k1**2 * t) * np.cos(k1 * x))
        xi, _ = self._xi(t)
        return s * (base + 0.2 * np.sin(xi))

    def rho_t(self, t):
        s, _ = self._scale
        x = self.torus.nodes[0]
        if self.catalog_id == "constant":
            return np.zeros(self.torus.shape)
        if self.catalog_id == "heat-mode":
            k1 = 2 * np.pi / self.torus.lengths[0]
            lam = HEAT_NU * k1**2
            return -s * lam * 0.1 * np.exp(-lam * t) * np.cos(k1 * x)
        xi, _ = self._xi(t)
        return -s * 0.2 * WAVE_SPEED * np.cos(xi)

    def w(self, t):
        d = self.torus.dim
        out = np.zeros((d,) + self.torus.shape)
        if self.catalog_id == "constant":
            out[0] = 0.3
        elif self.catalog_id == "traveling-wave":
            xi, _ = self._xi(t)
            out[0] = 0.5 + 0.2 * np.cos(xi)
            out[1:] = 0.1 * np.sin(xi)
        return out

    def w_t(self, t):
        d = self.torus.dim
        out = np.zeros((d,) + self.torus.shape)
        if self.catalog_id == "traveling-wave":
            xi, _ = self._xi(t)
            out[0] = 0.2 * WAVE_SPEED * np.sin(xi)
            out[1:] = -0.1 * WAVE_SPEED * np.cos(xi)
        return out

    # -- derived fields ---------------------------------------------------

    def potential(self, t):
        return solve_potential(self.rho(t), self.torus) if self.model.nonlocal_ else None

    def u(self, t):
        return closure_u(self.model, self.w(t), self.rho(t), self.torus, self.potential(t))

    def mobility(self, t):
        if self.constant_mobility is not None:
            return np.full(self.torus.shape, self.constant_mobility)
        return self.model.mobility(self.rho(t))

    def parabolic_velocity(self, t):
        pot = self.potential(t)
        return self.w(t) if pot is None else self.w(t) - pot.grad_phi

    def forcing_transport(self, t):
        T = self.torus
        u, w = self.u(t), self.w(t)
        adv = np.stack([np.sum(u * T.gradient(wi), axis=0) for wi in w])
        return self.w_t(t) + adv

    def forcing_parabolic(self, t):
        T = self.torus
        rho = self.rho(t)
        flux = rho * self.parabolic_velocity(t) - self.mobility(t) * T.gradient(rho)
        return self.rho_t(t) + T.divergence(flux)

    def forcings(self, times):
        return (np.stack([self.forcing_transport(t) for t in times]),
                np.stack([self.forcing_parabolic(t) for t in times]))

    def audit(self, t=0.0):
        """Residuals of the defining identities, re-derived by the product rule."""
        T = self.torus
        rho, w, u = self.rho(t), self.w(t), self.u(t)
        grad_rho = T.gradient(rho)
        v = self.parabolic_velocity(t)
        a = self.mobility(t)
        b_alt = (self.rho_t(t) + rho * T.divergence(v) + np.sum(v * grad_rho, axis=0)
                 - a * T.laplacian(rho) - np.sum(T.gradient(a) * grad_rho, axis=0))
        g_alt = self.w_t(t) + np.einsum("i...,ji...->j...", u, np.stack([T.gradient(wi) for wi in w]))
        return (T.sup(self.forcing_transport(t) - g_alt), T.sup(self.forcing_parabolic(t) - b_alt))


def build_case(catalog_id, model, torus):
    if catalog_id not in CATALOG:
        raise ValueError(f"unknown catalog id {catalog_id!r}; choose from {CATALOG}")
    case = ManufacturedCase(catalog_id, model, torus, HEAT_NU if catalog_id == "heat-mode" else None)
    # admissibility over the catalog window: rho* ranges are time-independent bounds
    r = case.rho(0.0)
    lo, hi = float(r.min()), float(r.max())
    s, base = case._scale
    amp = 0.2 if catalog_id == "traveling-wave" else 0.1 if catalog_id == "heat-mode" else 0.0
    model.check(np.array([s * (base - amp), s * (base + amp), lo, hi]))
    return case


@dataclass
class StudyRow:
    h: float
    dt: float
    err_sup: float
    err_l2: float
    order_sup: float = float("nan")
    order_l2: float = float("nan")


def _errors(torus, num, exact):
    e = np.asarray(num) - np.asarray(exact)
    return float(np.abs(e).max()), float(np.sqrt(torus.volume * np.mean(np.sum(e.reshape((-1,) + torus.shape) ** 2, axis=0))))


def _run(case, kind, t_end, dt, method, substeps, scheme, tol_fix):
    T = case.torus
    M = int(round(t_end / dt))
    times = dt * np.arange(M + 1)
    if kind == "transport":
        v = Trajectory(T, times, np.stack([case.u(t) for t in times]), method)
        g = Trajectory(T, times, np.stack([case.forcing_transport(t) for t in times]), method)
        _, w = advect(case.w(0.0), v, t_end, dt, g=g, substeps=substeps, method=method, final_only=True)
        return _errors(T, w[-1], case.w(t_end))
    if kind == "parabolic":
        prob = parabolic.ParabolicProblem(
            T, np.stack([case.parabolic_velocity(t) for t in times]),
            np.stack([case.mobility(t) for t in times]), case.rho(0.0), t_end, dt,
            b=np.stack([case.forcing_parabolic(t) for t in times]), scheme=scheme,
        )
        rho, _ = parabolic.solve(prob)
        return _errors(T, rho[-1], case.rho(t_end))
    if kind == "coupled":
        g, b = case.forcings(times)
        state, _ = picard.solve_slab(
            case.rho(0.0), case.u(0.0), case.model, T, t_end, M, tol_fix=tol_fix, max_iter=40,
            forcing=picard.SlabForcing(g, b), substeps=substeps, method=method, scheme=scheme,
        )
        e_rho = _errors(T, state.rho[-1], case.rho(t_end))
        e_w = _errors(T, state.w[-1], case.w(t_end))
        return max(e_rho[0], e_w[0]), float(np.hypot(e_rho[1], e_w[1]))
    raise ValueError(f"unknown study kind {kind!r}")


def convergence_study(case, kind, resolutions, dts, t_end, method="spline", substeps=4,
                      scheme="cn", tol_fix=1e-10):
    """Errors against the exact solution at ``t_end`` over paired (N, dt) levels.

    ``resolutions`` holds per-level point counts (an int, applied to every
    axis, or a tuple).  Orders use the ratio of whichever of ``h`` and ``dt``
    was refined.
    """
    if len(resolutions) != len(dts) or len(dts) < 3:
        raise ValueError("need >= 3 paired refinement levels")
    rows = []
    for N, dt in zip(resolutions, dts):
        sizes = (N,) * case.torus.dim if np.isscalar(N) else tuple(N)
        torus = type(case.torus)(sizes, case.torus.lengths)
        c = case.on(torus)
        es, el = _run(c, kind, t_end, dt, method, substeps, scheme, tol_fix)
        rows.append(StudyRow(min(torus.spacing), dt, es, el))
    for prev, row in zip(rows, rows[1:]):
        ratio = max(prev.h / row.h, prev.dt / row.dt)
        row.order_sup = float(np.log(prev.err_sup / row.err_sup) / np.log(ratio))
        row.order_l2 = float(np.log(prev.err_l2 / row.err_l2) / np.log(ratio))
    return rows


def write_study_csv(rows, path):
    with open(path, "w", newline="") as fh:
        fh.write("# awrascle-study v1\n")
        wr = csv.writer(fh)
        wr.writerow(["h", "dt", "err_sup", "err_l2", "order_sup", "order_l2"])
        for r in rows:
            wr.writerow([repr(r.h), repr(r.dt), repr(r.err_sup), repr(r.err_l2), repr(r.order_sup), repr(r.order_l2)])
