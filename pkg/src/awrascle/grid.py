"""Periodic lattice geometry and spectral machinery.

Fields are plain numpy arrays: a scalar field has shape ``torus.shape`` and a
vector field has shape ``(torus.dim, *torus.shape)``.  Spectra returned by
:meth:`Torus.transform` are normalized so that the zero mode equals the lattice
mean (``fftn(f) / n_nodes``).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import ndimage

__all__ = [
    "Torus",
    "NonFiniteFieldError",
    "check_finite",
    "SplineInterpolant",
    "TrigInterpolant",
]

TWO_PI = 2.0 * np.pi


class NonFiniteFieldError(ValueError):
    """A field contains NaN or inf."""

    def __init__(self, name, index, value):
        self.name = name
        self.index = tuple(int(i) for i in index)
        self.value = value
        super().__init__(f"non-finite value {value!r} in {name} at node {self.index}")


def check_finite(f, name="field"):
    f = np.asarray(f)
    bad = ~np.isfinite(f)
    if bad.any():
        idx = np.argwhere(bad)[0]
        raise NonFiniteFieldError(name, idx, f[tuple(idx)])
    return f


@dataclass(frozen=True, eq=True)
class Torus:
    """Uniform periodic lattice on ``prod_i [0, L_i)``."""

    sizes: tuple
    lengths: tuple = None

    def __post_init__(self):
        sizes = tuple(int(n) for n in np.atleast_1d(self.sizes))
        if not 1 <= len(sizes) <= 3:
            raise ValueError(f"dimension must be 1, 2 or 3, got {len(sizes)}")
        for n in sizes:
            if n < 8 or n % 2:
                raise ValueError(f"per-axis point counts must be even and >= 8, got {n}")
        if self.lengths is None:
            lengths = (TWO_PI,) * len(sizes)
        else:
            lengths = tuple(float(x) for x in np.atleast_1d(self.lengths))
            if len(lengths) == 1 and len(sizes) > 1:
                lengths = lengths * len(sizes)
        if len(lengths) != len(sizes):
            raise ValueError("lengths and sizes differ in length")
        if any(not np.isfinite(x) or x <= 0 for x in lengths):
            raise ValueError(f"periods must be positive, got {lengths}")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "lengths", lengths)

    @classmethod
    def cube(cls, dim, n, length=TWO_PI):
        return cls((n,) * dim, (length,) * dim)

    # -- geometry ---------------------------------------------------------

    @property
    def dim(self):
        return len(self.sizes)

    @property
    def shape(self):
        return self.sizes

    @property
    def n_nodes(self):
        return int(np.prod(self.sizes))

    @property
    def spacing(self):
        return tuple(L / n for L, n in zip(self.lengths, self.sizes))

    @property
    def volume(self):
        return float(np.prod(self.lengths))

    @cached_property
    def nodes(self):
        """Node coordinates, shape ``(dim, *shape)``."""
        axes = [np.arange(n) * h for n, h in zip(self.sizes, self.spacing)]
        return np.stack(np.meshgrid(*axes, indexing="ij"))

    # -- wave numbers -----------------------------------------------------

    def _axis_index(self, axis, real):
        n = self.sizes[axis]
        if real and axis == self.dim - 1:
            return np.arange(n // 2 + 1)
        return np.fft.fftfreq(n, 1.0 / n)

    def _broadcast(self, arr, axis):
        shape = [1] * self.dim
        shape[axis] = arr.size
        return arr.reshape(shape)

    @cached_property
    def _wavenumbers(self):
        # physical wave numbers per axis for the full and the real layout
        out = {}
        for real in (False, True):
            ks, nyq = [], []
            for ax in range(self.dim):
                m = self._axis_index(ax, real)
                ks.append(self._broadcast(TWO_PI / self.lengths[ax] * m, ax))
                nyq.append(self._broadcast(np.abs(m) == self.sizes[ax] // 2, ax))
            out[real] = (ks, nyq)
        return out

    def wavenumbers(self, real=True):
        """Per-axis physical wave numbers, each broadcastable to the spectrum."""
        return self._wavenumbers[real][0]

    @cached_property
    def _k2_real(self):
        return sum(k**2 for k in self.wavenumbers(True))

    @cached_property
    def _k2_full(self):
        return sum(k**2 for k in self.wavenumbers(False))

    def k_squared(self, real=True):
        return self._k2_real if real else self._k2_full

    @cached_property
    def _derivative_multipliers(self):
        # i*k with the Nyquist mode removed: odd derivatives of the Nyquist
        # mode vanish on the lattice
        ks, nyq = self._wavenumbers[True]
        return [np.where(nq, 0.0, 1j * k) for k, nq in zip(ks, nyq)]

    @cached_property
    def dealias_mask(self):
        """2/3-rule mask in the real-FFT layout."""
        mask = np.ones(1, dtype=bool).reshape((1,) * self.dim)
        for ax in range(self.dim):
            m = np.abs(self._axis_index(ax, True))
            mask = mask & self._broadcast(m <= self.sizes[ax] // 3, ax)
        return np.broadcast_to(mask, self.rshape).copy()

    @property
    def rshape(self):
        return self.sizes[:-1] + (self.sizes[-1] // 2 + 1,)

    # -- transforms -------------------------------------------------------

    def _axes(self):
        return tuple(range(-self.dim, 0))

    def rfft(self, f):
        return np.fft.rfftn(f, axes=self._axes())

    def irfft(self, fh):
        return np.fft.irfftn(fh, s=self.sizes, axes=self._axes())

    def transform(self, f):
        """Normalized complex Fourier coefficients (full layout)."""
        f = check_finite(f, "transform input")
        return np.fft.fftn(f, axes=self._axes()) / self.n_nodes

    def inverse(self, c):
        return np.fft.ifftn(np.asarray(c) * self.n_nodes, axes=self._axes()).real

    # -- differential operators -------------------------------------------

    def gradient(self, f):
        fh = self.rfft(f)
        return np.stack([self.irfft(m * fh) for m in self._derivative_multipliers])

    def divergence(self, v):
        v = np.asarray(v)
        if v.shape[0] != self.dim:
            raise ValueError(f"expected {self.dim} components, got {v.shape[0]}")
        vh = sum(m * self.rfft(v[i]) for i, m in enumerate(self._derivative_multipliers))
        return self.irfft(vh)

    def divergence_hat(self, v):
        """Divergence of ``v``, returned in the real-FFT layout."""
        return sum(m * self.rfft(v[i]) for i, m in enumerate(self._derivative_multipliers))

    def laplacian(self, f):
        return self.irfft(-self.k_squared() * self.rfft(f))

    def dealias(self, f):
        return self.irfft(self.rfft(f) * self.dealias_mask)

    # -- norms and reductions ---------------------------------------------

    def sobolev_norm(self, f, k):
        """Discrete H^k norm: sum (1+|k|^2)^k |c_k|^2 * volume, summed over components."""
        if not 0 <= int(k) <= 4:
            raise ValueError(f"Sobolev index must be in 0..4, got {k}")
        c = self.transform(f)
        weight = (1.0 + self.k_squared(False)) ** int(k)
        return float(np.sqrt(self.volume * np.sum(weight * np.abs(c) ** 2)))

    def mean(self, f):
        return np.asarray(f).mean(axis=self._axes())

    def integral(self, f):
        return self.mean(f) * self.volume

    def sup(self, f):
        return float(np.max(np.abs(f)))

    # -- interpolation ----------------------------------------------------

    def interpolant(self, f, method="spline"):
        if method == "spline":
            return SplineInterpolant(self, f)
        if method == "trig":
            return TrigInterpolant(self, f)
        raise ValueError(f"unknown interpolation method {method!r}")

    def interpolate(self, f, points, method="spline"):
        """Evaluate ``f`` at arbitrary points.

        ``points`` has shape ``(P, dim)`` (a single point may be given as a
        length-``dim`` vector).  Returns shape ``(P,)`` for a scalar field and
        ``(P, C)`` for a field with ``C`` components.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[-1] != self.dim:
            raise ValueError(f"points must have {self.dim} coordinates")
        out = self.interpolant(f, method)(pts.T)
        return out if out.ndim == 1 else out.T


class _Interpolant:
    def blend(self, other, theta):
        """Interpolant of ``(1-theta)*self + theta*other`` (both are linear in the data)."""
        out = object.__new__(type(self))
        out.__dict__.update(self.__dict__)
        for name in self._linear:
            setattr(out, name, (1.0 - theta) * getattr(self, name) + theta * getattr(other, name))
        return out


class SplineInterpolant(_Interpolant):
    """Tensor-product periodic cubic spline, prefiltered once per field.

    Queries landing on a lattice node (to a few ulps) return the stored value.
    """

    _linear = ("values", "coeffs")

    def __init__(self, torus, f):
        self.torus = torus
        f = np.asarray(f, dtype=float)
        self.scalar = f.ndim == torus.dim
        self.values = f[None] if self.scalar else f
        self.coeffs = np.stack([
            ndimage.spline_filter(c, order=3, mode="grid-wrap") for c in self.values
        ])

    def __call__(self, points):
        """``points``: physical coordinates, shape ``(dim, ...)``."""
        t = self.torus
        pts = np.asarray(points, dtype=float)
        lead = pts.shape[1:]
        idx = np.stack([
            np.mod(pts[i].ravel() / h, n) for i, (h, n) in enumerate(zip(t.spacing, t.sizes))
        ])
        out = np.stack([
            ndimage.map_coordinates(c, idx, order=3, mode="grid-wrap", prefilter=False)
            for c in self.coeffs
        ])
        near = np.rint(idx)
        on_node = np.all(np.abs(idx - near) <= 8 * np.finfo(float).eps * np.maximum(1.0, idx), axis=0)
        if on_node.any():
            node = tuple(np.mod(near[i, on_node].astype(int), n) for i, n in enumerate(t.sizes))
            out[:, on_node] = self.values[(slice(None),) + node]
        out = out.reshape((out.shape[0],) + lead)
        return out[0] if self.scalar else out


class TrigInterpolant(_Interpolant):
    """Trigonometric interpolant: exact for band-limited fields.

    Real data has a Hermitian spectrum, so only the non-negative half of the
    last axis is kept (doubled except at the zero and Nyquist modes) and the
    real part is taken on evaluation.  The Nyquist mode of every axis is
    taken in its symmetric (cosine) form.
    """

    _linear = ("coeffs",)

    def __init__(self, torus, f):
        self.torus = torus
        f = np.asarray(f, dtype=float)
        self.scalar = f.ndim == torus.dim
        values = f[None] if self.scalar else f
        n = torus.sizes[-1]
        weight = np.full(n // 2 + 1, 2.0)
        weight[0] = weight[-1] = 1.0
        full = np.stack([torus.transform(c) for c in values])
        self.coeffs = full[..., : n // 2 + 1] * weight

    def _basis(self, x, axis, half=False):
        # rows exp(i k x), built by repeated multiplication; fftfreq order
        # unless ``half``
        n = self.torus.sizes[axis]
        base = np.exp(1j * TWO_PI / self.torus.lengths[axis] * x)
        pos = np.empty((n // 2 + 1, x.size), dtype=complex)
        pos[0] = 1.0
        for j in range(1, n // 2 + 1):
            np.multiply(pos[j - 1], base, out=pos[j])
        if half:
            return pos
        out = np.concatenate([pos[: n // 2], np.conj(pos[n // 2 : 0 : -1])])
        out[n // 2] = out[n // 2].real  # symmetric Nyquist: cos(n x / 2)
        return out

    def __call__(self, points):
        pts = np.asarray(points, dtype=float)
        lead = pts.shape[1:]
        d = self.torus.dim
        flat = pts.reshape(d, -1)
        E = [self._basis(flat[i], i, half=(i == d - 1)) for i in range(d)]
        if d == 1:
            out = self.coeffs @ E[0]
        elif d == 2:
            out = np.einsum("ap,bp,cab->cp", E[0], E[1], self.coeffs, optimize=True)
        else:
            out = np.einsum("ap,bp,gp,zabg->zp", E[0], E[1], E[2], self.coeffs, optimize=True)
        out = out.real.reshape((out.shape[0],) + lead)
        return out[0] if self.scalar else out
