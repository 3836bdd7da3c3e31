"""Run configuration: a flat, typed ``section.key = value`` text file.

The syntax is the TOML subset of dotted keys with scalar or array values::

    domain.dim = 1
    domain.N = [64]
    offset.variant = "power_law"
    offset.gamma = 2.0
    time.T_total = 0.1

Parsing goes through the TOML reader; :func:`dump_config` writes the same
subset back, so ``parse_config(dump_config(flat)) == flat``.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .grid import Torus
from .offset import DomainViolation, model_from_config

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config", "dump_config", "INITIAL_CATALOG",
           "initial_fields"]

INITIAL_CATALOG = ("constant", "small-data", "sine")
METHODS = ("spline", "trig")

KEYS = frozenset(
    f"{section}.{key}"
    for section, keys in {
        "domain": "dim N L",
        "offset": "variant gamma a alpha beta eps rho_max nonlocal",
        "initial": "kind id rho_mean rho_amp u_mean u_amp rho_path u_path",
        "time": "T_total slab_T M_levels",
        "tol": "fix mp max_iter",
        "numerics": "method substeps scheme",
        "output": "dir snapshot_stride heatmap_axis heatmap_index",
    }.items()
    for key in keys.split()
)
SCHEMES = ("cn", "euler")


class ConfigError(ValueError):
    pass


def _flatten(tree, prefix=""):
    out = {}
    for k, v in tree.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def parse_config(text):
    try:
        tree = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config syntax: {exc}") from exc
    return _flatten(tree)


def load_config(path):
    try:
        with open(path, "rb") as fh:
            text = fh.read().decode("utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _escape(c):
    if c in '"\\':
        return "\\" + c
    if ord(c) < 0x20 or ord(c) == 0x7F:
        return f"\\u{ord(c):04X}"
    return c


def _emit(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        r = repr(v)
        return r if any(c in r for c in ".en") else r + ".0"
    if isinstance(v, str):
        return '"' + "".join(_escape(c) for c in v) + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_emit(x) for x in v) + "]"
    raise ConfigError(f"cannot emit value of type {type(v).__name__}")


def dump_config(flat):
    """Emit a flat mapping in sorted key order."""
    return "".join(f"{k} = {_emit(flat[k])}\n" for k in sorted(flat))


def _per_axis(value, dim, name, cast):
    vals = list(value) if isinstance(value, (list, tuple)) else [value]
    if len(vals) == 1:
        vals = vals * dim
    if len(vals) != dim:
        raise ConfigError(f"{name}: expected {dim} entries, got {len(vals)}")
    try:
        return tuple(cast(v) for v in vals)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


@dataclass
class RunConfig:
    dim: int
    N: tuple
    L: tuple
    offset: dict
    initial: dict
    T_total: float
    slab_T: float
    M_levels: int
    tol_fix: float = 1e-10
    tol_mp: float = 1e-8
    max_iter: int = 30
    method: str = "spline"
    substeps: int = 4
    scheme: str = "cn"
    out_dir: str = "out"
    snapshot_stride: int = 0
    heatmap_axis: int = 0
    heatmap_index: int = 0
    source: dict = field(default_factory=dict, repr=False)

    @property
    def torus(self):
        return Torus(self.N, self.L)

    @property
    def model(self):
        return model_from_config(self.offset)

    @classmethod
    def from_flat(cls, flat, base_dir="."):
        for k in flat:
            if k not in KEYS:
                raise ConfigError(f"unknown config key {k!r}")

        def get(key, default=None, cast=None, required=False):
            if key not in flat:
                if required:
                    raise ConfigError(f"missing required key {key!r}")
                return default
            v = flat[key]
            if cast is None:
                return v
            if cast in (int, float) and isinstance(v, bool):
                raise ConfigError(f"{key}: expected a number, got {v!r}")
            if cast is int and isinstance(v, float) and not v.is_integer():
                raise ConfigError(f"{key}: expected an integer, got {v!r}")
            try:
                return cast(v)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{key}: {exc}") from exc

        dim = get("domain.dim", required=True, cast=int)
        if dim not in (1, 2, 3):
            raise ConfigError(f"domain.dim must be 1, 2 or 3, got {dim}")
        N = _per_axis(get("domain.N", required=True), dim, "domain.N", int)
        L = _per_axis(get("domain.L", 2 * math.pi), dim, "domain.L", float)
        try:
            Torus(N, L)
        except ValueError as exc:
            raise ConfigError(f"domain: {exc}") from exc

        offset = {k.split(".", 1)[1]: v for k, v in flat.items() if k.startswith("offset.")}
        try:
            model_from_config(offset)
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(f"offset: {exc}") from exc

        initial = {k.split(".", 1)[1]: v for k, v in flat.items() if k.startswith("initial.")}
        initial.setdefault("kind", "catalog")
        if initial["kind"] == "catalog":
            if initial.get("id") not in INITIAL_CATALOG:
                raise ConfigError(f"initial.id must be one of {INITIAL_CATALOG}, got {initial.get('id')!r}")
        elif initial["kind"] == "snapshot":
            for key in ("rho_path", "u_path"):
                if key not in initial:
                    raise ConfigError(f"missing required key 'initial.{key}'")
                p = initial[key]
                p = p if os.path.isabs(p) else os.path.join(base_dir, p)
                if not os.path.isfile(p):
                    raise ConfigError(f"initial.{key}: file {p!r} does not exist")
                initial[key] = p
        else:
            raise ConfigError(f"initial.kind must be 'catalog' or 'snapshot', got {initial['kind']!r}")

        T_total = get("time.T_total", required=True, cast=float)
        slab_T = get("time.slab_T", T_total, cast=float)
        M = get("time.M_levels", required=True, cast=int)
        if not (T_total > 0 and slab_T > 0 and M >= 1):
            raise ConfigError("time.T_total, time.slab_T must be > 0 and time.M_levels >= 1")
        n = round(T_total / slab_T)
        if n < 1 or abs(n * slab_T - T_total) > 1e-12 * max(1.0, T_total):
            raise ConfigError(f"time.slab_T={slab_T} does not divide time.T_total={T_total}")

        cfg = cls(
            dim, N, L, offset, initial, T_total, slab_T, M,
            tol_fix=get("tol.fix", 1e-10, float),
            tol_mp=get("tol.mp", 1e-8, float),
            max_iter=get("tol.max_iter", 30, int),
            method=get("numerics.method", "spline", str),
            substeps=get("numerics.substeps", 4, int),
            scheme=get("numerics.scheme", "cn", str),
            out_dir=get("output.dir", "out", str),
            snapshot_stride=get("output.snapshot_stride", 0, int),
            heatmap_axis=get("output.heatmap_axis", 0, int),
            heatmap_index=get("output.heatmap_index", 0, int),
            source=dict(flat),
        )
        if not (cfg.tol_fix > 0 and cfg.tol_mp >= 0 and cfg.max_iter >= 1):
            raise ConfigError("tol.fix must be > 0, tol.mp >= 0, tol.max_iter >= 1")
        if cfg.method not in METHODS:
            raise ConfigError(f"numerics.method must be one of {METHODS}")
        if cfg.scheme not in SCHEMES:
            raise ConfigError(f"numerics.scheme must be one of {SCHEMES}")
        if cfg.substeps < 1:
            raise ConfigError("numerics.substeps must be >= 1")
        if cfg.snapshot_stride < 0:
            raise ConfigError("output.snapshot_stride must be >= 0")
        if dim == 3 and not (0 <= cfg.heatmap_axis < 3 and 0 <= cfg.heatmap_index < N[cfg.heatmap_axis]):
            raise ConfigError("output.heatmap_axis/heatmap_index outside the lattice")
        if not os.path.isabs(cfg.out_dir):
            cfg.out_dir = os.path.join(base_dir, cfg.out_dir)

        # the initial density must be admissible before any solve starts
        rho0, u0 = initial_fields(cfg)
        try:
            cfg.model.check(rho0, cfg.torus)
        except DomainViolation as exc:
            raise ConfigError(f"initial density violates the offset barrier: {exc}") from exc
        return cfg

    @classmethod
    def load(cls, path):
        return cls.from_flat(load_config(path), os.path.dirname(os.path.abspath(path)))


def initial_fields(cfg):
    """``(rho0, u0)`` for a validated config.

    Catalog entries:

    * ``constant``: ``rho = rho_mean``, ``u = (u_mean, 0, ...)``.
    * ``sine``: ``rho = rho_mean + rho_amp sin(x1) cos(x2) ...`` and
      ``u_i = u_mean [i == 1] + u_amp cos(x_i)``.
    * ``small-data``: ``sine`` with defaults ``rho_mean = 1``,
      ``rho_amp = u_amp = 0.05``, ``u_mean = 0``.
    """
    from .snapshot import read_snapshot

    torus = cfg.torus
    ini = cfg.initial
    if ini["kind"] == "snapshot":
        r, u = read_snapshot(ini["rho_path"]), read_snapshot(ini["u_path"])
        if r.torus != torus or u.torus != torus:
            raise ConfigError("initial snapshots do not match the configured domain")
        if r.components != 1 or u.components != torus.dim:
            raise ConfigError("initial snapshots: rho must be scalar and u a vector field")
        return r.field, u.field
    small = ini["id"] == "small-data"
    try:
        rm = float(ini.get("rho_mean", 1.0))
        ra = float(ini.get("rho_amp", 0.05 if small else 0.0 if ini["id"] == "constant" else 0.2))
        um = float(ini.get("u_mean", 0.0))
        ua = float(ini.get("u_amp", 0.05 if small else 0.0 if ini["id"] == "constant" else 0.1))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"initial: {exc}") from exc
    x = torus.nodes
    k = [2 * np.pi / L for L in torus.lengths]
    rho = np.full(torus.shape, rm)
    u = np.zeros((torus.dim,) + torus.shape)
    u[0] = um
    if ini["id"] != "constant":
        shape = np.sin(k[0] * x[0])
        for i in range(1, torus.dim):
            shape = shape * np.cos(k[i] * x[i])
        rho = rho + ra * shape
        for i in range(torus.dim):
            u[i] = u[i] + ua * np.cos(k[i] * x[i])
    return rho, u

