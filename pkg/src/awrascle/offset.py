"""Velocity-offset closures p(rho) and the Newtonian potential.

The actual velocity is ``u = w - grad p(rho)`` (minus ``grad Phi`` for the
nonlocal variant, where ``-Lap Phi = rho - <rho>``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DomainViolation",
    "PowerLaw",
    "SingularRational",
    "SingularReciprocal",
    "LocalPlusNewtonian",
    "Potential",
    "p_of",
    "dp_of",
    "mobility",
    "grad_p_field",
    "solve_potential",
    "closure_u",
    "model_from_config",
]


class DomainViolation(ValueError):
    """Density left the admissible interval of an offset model.

    For the singular variants this is how congestion blow-up shows up.
    """

    def __init__(self, variant, lower, upper, value, node=None, coords=None):
        self.variant = variant
        self.bounds = (lower, upper)
        self.value = float(value)
        self.node = node
        self.coords = coords
        where = ""
        if node is not None:
            where = f" at node {node}"
            if coords is not None:
                where += " (x = " + ", ".join(f"{c:.6g}" for c in coords) + ")"
        super().__init__(
            f"{variant}: density {self.value!r}{where} outside admissible interval "
            f"({lower:g}, {upper:g})"
        )


class _Offset:
    rho_sup = np.inf

    @property
    def name(self):
        return type(self).__name__

    @property
    def nonlocal_(self):
        return False

    @property
    def singular(self):
        return np.isfinite(self.rho_sup)

    def check(self, rho, torus=None):
        rho = np.asarray(rho, dtype=float)
        bad = ~((rho > 0.0) & (rho < self.rho_sup))
        if bad.any():
            idx = np.unravel_index(np.argmax(bad), rho.shape) if rho.ndim else ()
            value = rho[idx] if rho.ndim else rho
            node = tuple(int(i) for i in idx) if rho.ndim else None
            coords = None
            if torus is not None and node is not None and len(node) == torus.dim:
                coords = tuple(i * h for i, h in zip(node, torus.spacing))
            raise DomainViolation(self.name, 0.0, self.rho_sup, value, node, coords)
        return rho

    def p(self, rho):
        return self._p(self.check(rho))

    def dp(self, rho):
        return self._dp(self.check(rho))

    def mobility(self, rho):
        rho = self.check(rho)
        return rho * self._dp(rho)


@dataclass(frozen=True)
class PowerLaw(_Offset):
    """p = rho**gamma."""

    gamma: float = 2.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    def _p(self, rho):
        return rho**self.gamma

    def _dp(self, rho):
        return self.gamma * rho ** (self.gamma - 1.0)


@dataclass(frozen=True)
class SingularRational(_Offset):
    """p = a rho**alpha / (1 - rho)**beta, admissible on (0, 1)."""

    a: float = 1.0
    alpha: float = 1.0
    beta: float = 2.0
    rho_sup = 1.0

    def __post_init__(self):
        if not (self.a > 0 and self.alpha > 0 and self.beta > 1):
            raise ValueError("SingularRational needs a > 0, alpha > 0, beta > 1")

    def _p(self, rho):
        return self.a * rho**self.alpha / (1.0 - rho) ** self.beta

    def _dp(self, rho):
        a, al, be = self.a, self.alpha, self.beta
        return a * rho ** (al - 1.0) * (1.0 - rho) ** (-be - 1.0) * (al * (1.0 - rho) + be * rho)


@dataclass(frozen=True)
class SingularReciprocal(_Offset):
    """p = eps * (1/rho - 1/rho_max)**(-beta), admissible on (0, rho_max)."""

    eps: float = 1.0
    beta: float = 2.0
    rho_max: float = 1.0

    def __post_init__(self):
        if not (self.eps > 0 and self.beta > 0 and self.rho_max > 0):
            raise ValueError("SingularReciprocal needs eps, beta, rho_max > 0")

    @property
    def rho_sup(self):
        return self.rho_max

    def _p(self, rho):
        return self.eps * (1.0 / rho - 1.0 / self.rho_max) ** (-self.beta)

    def _dp(self, rho):
        s = 1.0 / rho - 1.0 / self.rho_max
        return self.eps * self.beta * s ** (-self.beta - 1.0) / rho**2


@dataclass(frozen=True)
class LocalPlusNewtonian(_Offset):
    """Local offset ``base`` plus the Newtonian potential of the density."""

    base: _Offset = PowerLaw()

    def __post_init__(self):
        if not isinstance(self.base, _Offset):
            raise TypeError(f"base must be an offset closure, got {type(self.base).__name__}")
        if isinstance(self.base, LocalPlusNewtonian):
            raise ValueError("base of LocalPlusNewtonian must be a local offset")

    @property
    def name(self):
        return f"LocalPlusNewtonian[{self.base.name}]"

    @property
    def rho_sup(self):
        return self.base.rho_sup

    @property
    def nonlocal_(self):
        return True

    def _p(self, rho):
        return self.base._p(rho)

    def _dp(self, rho):
        return self.base._dp(rho)


def p_of(model, rho):
    return model.p(rho)


def dp_of(model, rho):
    return model.dp(rho)


def mobility(model, rho):
    return model.mobility(rho)


def grad_p_field(model, rho, torus):
    """grad p(rho), with p(rho) de-aliased before differentiation."""
    model.check(rho, torus)
    return torus.gradient(torus.dealias(model._p(np.asarray(rho, dtype=float))))


@dataclass
class Potential:
    phi: np.ndarray
    grad_phi: np.ndarray

    def residual(self, rho, torus):
        """sup | -Lap phi - (rho - <rho>) |."""
        return torus.sup(-torus.laplacian(self.phi) - (rho - torus.mean(rho)))


def solve_potential(rho, torus):
    """Solve -Lap phi = rho - <rho> with zero-mean phi."""
    rh = torus.rfft(rho)
    k2 = torus.k_squared()
    with np.errstate(divide="ignore", invalid="ignore"):
        ph = np.where(k2 > 0, rh / k2, 0.0)
    phi = torus.irfft(ph)
    grad = np.stack([torus.irfft(m * ph) for m in torus._derivative_multipliers])
    return Potential(phi, grad)


def closure_u(model, w, rho, torus, potential=None):
    """u = w - grad p(rho) [- grad phi for the nonlocal variant]."""
    if model.nonlocal_ != (potential is not None):
        raise ValueError("a potential is required exactly for the nonlocal variant")
    u = np.asarray(w, dtype=float) - grad_p_field(model, rho, torus)
    if potential is not None:
        u = u - potential.grad_phi
    return u


def model_from_config(cfg):
    """Build a model from flat ``offset.*`` keys (prefix optional)."""
    get = lambda k, d=None: cfg.get(f"offset.{k}", cfg.get(k, d))
    variant = str(get("variant", "power_law")).lower().replace("-", "_")
    if variant in ("power_law", "powerlaw"):
        model = PowerLaw(float(get("gamma", 2.0)))
    elif variant in ("singular_rational", "rational"):
        model = SingularRational(float(get("a", 1.0)), float(get("alpha", 1.0)), float(get("beta", 2.0)))
    elif variant in ("singular_reciprocal", "reciprocal"):
        model = SingularReciprocal(float(get("eps", 1.0)), float(get("beta", 2.0)), float(get("rho_max", 1.0)))
    else:
        raise ValueError(f"unknown offset variant {variant!r}")
    if bool(get("nonlocal", False)):
        model = LocalPlusNewtonian(model)
    return model
