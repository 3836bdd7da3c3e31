"""Semi-Lagrangian solver for eta_t + v . grad eta = g.

Characteristics dX/dt = v(t, X) are traced backward from the lattice nodes
with classical RK4.  Off-lattice velocities come from per-level interpolants
and are linear in time between stored levels.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import check_finite

__all__ = [
    "Trajectory",
    "VelocityTrajectory",
    "TimeSpanError",
    "Feet",
    "FlowMapDiagnostics",
    "trace_feet",
    "advect",
    "flow_diagnostics",
]


class TimeSpanError(ValueError):
    pass


class Trajectory:
    """Fields stored at strictly increasing time levels.

    ``fields`` has shape ``(M+1, *component_shape, *torus.shape)``.
    Evaluation between levels is linear in time.
    """

    def __init__(self, torus, times, fields, method="spline"):
        self.torus = torus
        self.times = np.asarray(times, dtype=float)
        self.fields = np.asarray(fields, dtype=float)
        if self.times.ndim != 1 or len(self.times) != len(self.fields):
            raise ValueError("one field per time level required")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        if self.fields.shape[-torus.dim:] != torus.shape:
            raise ValueError("trajectory fields do not live on the given torus")
        self.method = method
        self._interp = {}

    @classmethod
    def steady(cls, torus, field, t0, t1, method="spline"):
        field = np.asarray(field, dtype=float)
        return cls(torus, [t0, t1], np.stack([field, field]), method)

    @property
    def span(self):
        return float(self.times[0]), float(self.times[-1])

    def interpolant(self, j):
        if j not in self._interp:
            self._interp[j] = self.torus.interpolant(self.fields[j], self.method)
        return self._interp[j]

    def locate(self, t):
        t0, t1 = self.span
        tol = 1e-12 * max(1.0, abs(t0), abs(t1))
        if t < t0 - tol or t > t1 + tol:
            raise TimeSpanError(f"time {t!r} outside trajectory span [{t0}, {t1}]")
        j = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2))
        theta = (t - self.times[j]) / (self.times[j + 1] - self.times[j])
        return j, float(np.clip(theta, 0.0, 1.0))

    def field_at(self, t):
        j, th = self.locate(t)
        return (1.0 - th) * self.fields[j] + th * self.fields[j + 1]

    def __call__(self, t, points):
        """Value at time ``t`` and physical ``points`` of shape ``(dim, ...)``."""
        j, th = self.locate(t)
        if th == 0.0:
            return self.interpolant(j)(points)
        if th == 1.0:
            return self.interpolant(j + 1)(points)
        return self.interpolant(j).blend(self.interpolant(j + 1), th)(points)


VelocityTrajectory = Trajectory


def _rk4(v, t, X, h):
    k1 = v(t, X)
    k2 = v(t + h / 2, X + h / 2 * k1)
    k3 = v(t + h / 2, X + h / 2 * k2)
    k4 = v(t + h, X + h * k3)
    return X + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


@dataclass
class Feet:
    unwrapped: np.ndarray
    wrapped: np.ndarray


def _wrap(torus, X):
    L = np.asarray(torus.lengths).reshape((-1,) + (1,) * (X.ndim - 1))
    return np.mod(X, L)


def trace_feet(v, t_from, t_to, substeps=4, points=None):
    """Positions at ``t_to`` of characteristics through ``points`` at ``t_from``.

    ``points`` defaults to the lattice nodes.  Works in either direction;
    the semi-Lagrangian use is ``t_from > t_to``.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    v.locate(t_from)
    v.locate(t_to)
    X = v.torus.nodes.copy() if points is None else np.array(points, dtype=float)
    h = (t_to - t_from) / substeps
    for s in range(substeps):
        X = _rk4(v, t_from + s * h, X, h)
    return Feet(X, _wrap(v.torus, X))


def _levels(t_end, dt, t0):
    m = int(round(t_end / dt))
    if m < 1 or abs(m * dt - t_end) > 1e-12 * max(1.0, abs(t_end)):
        raise ValueError(f"dt={dt} does not divide t_end={t_end}")
    return t0 + dt * np.arange(m + 1)


def advect(eta0, v, t_end, dt, g=None, substeps=4, method="spline", mode="characteristic", t0=None,
           final_only=False):
    """Solve the transport problem on ``[t0, t0 + t_end]`` with step ``dt``.

    ``eta0`` may be scalar or carry leading component axes.  ``g`` is an
    optional source :class:`Trajectory` covering the run.  ``substeps`` is the
    number of RK4 steps per ``dt``.

    ``mode="characteristic"`` evaluates each output level by tracing the
    characteristic from that level back to ``t0`` and interpolating ``eta0``
    once, plus the source integral along the whole path.
    ``mode="stepwise"`` re-interpolates the previous level each step.
    ``final_only`` skips the intermediate levels (characteristic mode), which
    are then left as NaN.

    Returns ``(times, trajectory)`` with trajectory shape ``(M+1, *eta0.shape)``.
    """
    torus = v.torus
    eta0 = check_finite(np.asarray(eta0, dtype=float), "eta0")
    t0 = v.span[0] if t0 is None else float(t0)
    times = _levels(t_end, dt, t0)
    v.locate(times[-1])
    if g is not None:
        g.locate(times[0])
        g.locate(times[-1])
    out = np.empty((len(times),) + eta0.shape)
    out[0] = eta0
    h = -dt / substeps
    if mode == "stepwise":
        for k in range(len(times) - 1):
            X = torus.nodes.copy()
            acc = 0.0
            s = times[k + 1]
            gprev = g(s, X) if g is not None else None
            for i in range(substeps):
                X = _rk4(v, s + i * h, X, h)
                if g is not None:
                    gnext = g(s + (i + 1) * h, X)
                    acc = acc + 0.5 * dt / substeps * (gprev + gnext)
                    gprev = gnext
            out[k + 1] = torus.interpolant(out[k], method)(X) + acc
            _abort_if_nonfinite(out[k + 1], k + 1)
        return times, out
    if mode != "characteristic":
        raise ValueError(f"unknown advection mode {mode!r}")

    # All paths march backward in sync; the path started at level k joins
    # when the clock reaches t_k.
    M = len(times) - 1
    nodes = torus.nodes.reshape(torus.dim, -1)
    P = nodes.shape[1]
    X = np.empty((torus.dim, 0))
    acc = np.zeros(eta0.shape[: eta0.ndim - torus.dim] + (0,))
    gprev = None
    first = M if final_only else 1
    if final_only:
        out[1:M] = np.nan
    for k in range(M, 0, -1):
        if k >= first:
            X = np.concatenate([nodes, X], axis=1)
        if g is not None and k >= first:
            gnew = g(times[k], nodes).reshape(acc.shape[:-1] + (P,))
            gprev = gnew if gprev is None else np.concatenate([gnew, gprev], axis=-1)
            acc = np.concatenate([np.zeros_like(gnew), acc], axis=-1)
        s = times[k]
        for i in range(substeps):
            X = _rk4(v, s + i * h, X, h)
            if g is not None:
                gnext = g(s + (i + 1) * h, X)
                acc = acc + 0.5 * dt / substeps * (gprev + gnext)
                gprev = gnext
    vals = torus.interpolant(eta0, method)(X)
    if g is not None:
        vals = vals + acc
    for k in range(first, M + 1):
        block = vals[..., (k - first) * P : (k - first + 1) * P]
        out[k] = block.reshape(eta0.shape)
        _abort_if_nonfinite(out[k], k)
    return times, out


def _abort_if_nonfinite(f, step):
    if not np.all(np.isfinite(f)):
        raise FloatingPointError(f"non-finite transported value at step {step}")


@dataclass
class FlowMapDiagnostics:
    sup_grad_minus_identity: float
    jacobian_min: float
    jacobian_max: float


def flow_diagnostics(v, T, steps=None):
    """Regularity of the forward flow map X(t0 + T, .) of ``v``.

    ``grad X - I`` is the gradient of the periodic displacement ``X - y``,
    taken by centered differences across neighbouring nodes.
    """
    torus = v.torus
    t0 = v.span[0]
    v.locate(t0 + T)
    if steps is None:
        steps = max(16, 4 * int(np.ceil(T / np.min(np.diff(v.times)))))
    feet = trace_feet(v, t0, t0 + T, substeps=steps)
    disp = feet.unwrapped - torus.nodes
    d = torus.dim
    G = np.empty((d, d) + torus.shape)
    for j, hj in enumerate(torus.spacing):
        ax = 1 + j
        G[:, j] = (np.roll(disp, -1, axis=ax) - np.roll(disp, 1, axis=ax)) / (2 * hj)
    J = np.linalg.det(np.moveaxis(G, (0, 1), (-2, -1)) + np.eye(d))
    return FlowMapDiagnostics(float(np.abs(G).max()), float(J.min()), float(J.max()))
