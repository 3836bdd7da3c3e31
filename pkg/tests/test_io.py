import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from awrascle import cli
from awrascle.config import KEYS, ConfigError, RunConfig, dump_config, initial_fields, parse_config
from awrascle.grid import Torus
from awrascle.snapshot import (
    Snapshot, SnapshotError, heatmap_slice, read_pgm, read_snapshot, write_pgm, write_snapshot,
)

# -- snapshots -------------------------------------------------------------------------

shapes = st.sampled_from([(8,), (8, 10), (8, 8, 12)])


@settings(max_examples=20)
@given(shapes, st.integers(1, 3), st.floats(-1e3, 1e3), st.integers(0, 2**32 - 1))
def test_snapshot_round_trip(tmp_path_factory, sizes, comps, time, seed):
    t = Torus(sizes, tuple(1.0 + i for i in range(len(sizes))))
    shape = sizes if comps == 1 else (comps,) + sizes
    f = np.random.default_rng(seed).standard_normal(shape)
    path = tmp_path_factory.mktemp("snap") / "f.awrs"
    write_snapshot(path, t, f, time)
    snap = read_snapshot(path)
    assert snap.torus == t and snap.time == time and snap.components == comps
    assert np.array_equal(snap.field, f)


def test_snapshot_byte_layout(tmp_path):
    t = Torus((8, 10), (2.0, 3.0))
    v = np.stack([np.arange(80.0).reshape(8, 10), -np.arange(80.0).reshape(8, 10)])
    path = tmp_path / "v.awrs"
    write_snapshot(path, t, v, 0.25)
    raw = path.read_bytes()
    assert raw[:4] == b"AWRS"
    assert struct.unpack_from("<IIII", raw, 4) == (1, 2, 8, 10)
    assert struct.unpack_from("<dd", raw, 20) == (2.0, 3.0)
    assert struct.unpack_from("<Id", raw, 36) == (2, 0.25)
    body = np.frombuffer(raw[48:], dtype="<f8")
    # row-major nodes, components interleaved per node
    assert body.size == 160 and list(body[:6]) == [0.0, -0.0, 1.0, -1.0, 2.0, -2.0]
    assert body[2 * 10] == 10.0  # node (1, 0)


def test_snapshot_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.awrs"
    bad.write_bytes(b"NOPE" + bytes(40))
    with pytest.raises(SnapshotError, match="magic"):
        read_snapshot(bad)
    t = Torus((8,))
    good = tmp_path / "good.awrs"
    write_snapshot(good, t, np.ones(8))
    trunc = tmp_path / "trunc.awrs"
    trunc.write_bytes(good.read_bytes()[:-8])
    with pytest.raises(SnapshotError, match="expected 8 values"):
        read_snapshot(trunc)
    trunc.write_bytes(good.read_bytes()[:14])
    with pytest.raises(SnapshotError, match="truncated"):
        read_snapshot(trunc)
    with pytest.raises(SnapshotError):
        write_snapshot(good, t, np.ones(9))
    with pytest.raises(ValueError):
        write_snapshot(good, t, np.full(8, np.nan))


def test_pgm_min_max_scaling(tmp_path):
    img = np.array([[0.0, 1.0, 2.0], [3.0, 4.0, 4.0]])
    path = tmp_path / "h.pgm"
    write_pgm(path, img)
    assert path.read_bytes().startswith(b"P5\n3 2\n255\n")
    pix = read_pgm(path)
    assert pix.shape == (2, 3)
    assert pix.tolist() == [[0, 64, 128], [191, 255, 255]]
    write_pgm(path, np.full((4, 4), 7.0))
    assert read_pgm(path).max() == 0


def test_pgm_survives_whitespace_pixels(tmp_path):
    img = np.linspace(0, 1, 256).reshape(16, 16)
    path = tmp_path / "g.pgm"
    write_pgm(path, img)
    assert np.array_equal(read_pgm(path).ravel(), np.arange(256))


def test_heatmap_slices():
    t3 = Torus((8, 10, 12))
    f = np.random.default_rng(0).standard_normal((3,) + t3.shape)
    snap = Snapshot(t3, f, 0.0)
    assert np.array_equal(heatmap_slice(snap, 1, 4), f[0][:, 4, :])
    with pytest.raises(SnapshotError):
        heatmap_slice(snap, 1, 10)
    with pytest.raises(SnapshotError):
        heatmap_slice(snap, 3, 0)
    t2 = Torus((8, 10))
    assert heatmap_slice(Snapshot(t2, np.ones((8, 10)), 0.0)).shape == (8, 10)
    with pytest.raises(SnapshotError):
        heatmap_slice(Snapshot(Torus((8,)), np.ones(8), 0.0))


# -- config ----------------------------------------------------------------------------

values = st.one_of(
    st.integers(-10**6, 10**6),
    st.floats(allow_nan=False),
    st.booleans(),
    st.text(st.characters(blacklist_categories=("Cs",)), max_size=12),
    st.lists(st.integers(-100, 100), max_size=3),
    st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=3),
)


@given(st.dictionaries(st.sampled_from(sorted(KEYS)), values, max_size=12))
def test_config_round_trip(flat):
    back = parse_config(dump_config(flat))
    assert set(back) == set(flat)
    for k, v in flat.items():
        assert back[k] == v and type(back[k]) is type(v)


BASE = """
domain.dim = 1
domain.N = [32]
offset.variant = "power_law"
offset.gamma = 2.0
initial.id = "small-data"
time.T_total = 0.1
time.slab_T = 0.05
time.M_levels = 10
"""


def cfg(extra="", base=BASE, tmp="."):
    return RunConfig.from_flat(parse_config(base + extra), str(tmp))


def test_config_defaults():
    c = cfg()
    assert c.N == (32,) and c.L == pytest.approx((2 * np.pi,))
    assert (c.tol_fix, c.tol_mp, c.max_iter, c.method, c.substeps) == (1e-10, 1e-8, 30, "spline", 4)
    rho, u = initial_fields(c)
    x = c.torus.nodes[0]
    assert np.allclose(rho, 1 + 0.05 * np.sin(x)) and np.allclose(u[0], 0.05 * np.cos(x))


@pytest.mark.parametrize("extra,match", [
    ("domain.Nx = 3\n", "unknown config key"),
    ("offset.gamma2 = 3\n", "unknown config key"),
    ("numerics.method = \"cubic\"\n", "numerics.method"),
    ("tol.fix = -1.0\n", "tol.fix"),
    ("tol.max_iter = 2.5\n", "integer"),
])
def test_config_rejects(extra, match):
    with pytest.raises(ConfigError, match=match):
        cfg(extra)


@pytest.mark.parametrize("text,match", [
    ("domain.dim = 4", "domain.dim"),
    ("domain.N = [7]", "domain"),
    ("time.slab_T = 0.03", "does not divide"),
    ("offset.gamma = -1.0", "offset"),
    ('initial.id = "bump"', "initial.id"),
    ('initial.kind = "snapshot"\ninitial.rho_path = "nowhere.awrs"\ninitial.u_path = "x.awrs"', "does not exist"),
    ("domain.dim = true", "number"),
    ("this is not toml", "syntax"),
])
def test_config_validation_messages(text, match):
    lines = {line.split("=")[0].strip(): line for line in BASE.strip().splitlines()}
    for line in text.splitlines():
        key = line.split("=")[0].strip()
        lines[key] = line
    with pytest.raises(ConfigError, match=match):
        RunConfig.from_flat(parse_config("\n".join(lines.values())))


def test_barrier_violation_is_config_error():
    text = BASE.replace('"power_law"', '"singular_rational"').replace('offset.gamma = 2.0', '')
    text = text.replace('"small-data"', '"sine"') + "initial.rho_mean = 0.5\ninitial.rho_amp = 0.5\n"
    with pytest.raises(ConfigError, match="barrier"):
        RunConfig.from_flat(parse_config(text))


# -- cli -------------------------------------------------------------------------------


def write_cfg(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text + f'\noutput.dir = "{(tmp_path / "out").as_posix()}"\n')
    return path


def read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0], [dict(zip(lines[1].split(","), row.split(","))) for row in lines[2:]]


def test_run_constant_state(tmp_path, capsys):
    text = BASE.replace('"small-data"', '"constant"') + "initial.u_mean = 0.2\noutput.snapshot_stride = 5\n"
    assert cli.main(["run", str(write_cfg(tmp_path, text))]) == 0
    head, rows = read_csv(tmp_path / "out" / "iterations.csv")
    assert head == "# awrascle-diagnostics iterations v1"
    assert [r["slab"] for r in rows] == ["0", "1"]
    assert all(float(r["delta_w"]) <= 1e-12 and float(r["delta_rho"]) <= 1e-12 for r in rows)
    _, levels = read_csv(tmp_path / "out" / "levels.csv")
    assert [int(r["level"]) for r in levels] == list(range(21))
    snaps = sorted(p.name for p in (tmp_path / "out").glob("rho_*.awrs"))
    assert snaps == [f"rho_{k:06d}.awrs" for k in (0, 5, 10, 15, 20)]
    assert read_snapshot(tmp_path / "out" / "rho_000020.awrs").time == pytest.approx(0.1)


def test_run_small_data_kappa(tmp_path):
    text = BASE.replace("domain.N = [32]", "domain.N = [64]").replace("time.M_levels = 10", "time.M_levels = 20")
    text = text.replace("time.T_total = 0.1", "time.T_total = 0.05").replace("time.slab_T = 0.05", "")
    assert cli.main(["run", str(write_cfg(tmp_path, text))]) == 0
    _, rows = read_csv(tmp_path / "out" / "iterations.csv")
    assert all(float(r["kappa"]) < 1 for r in rows[1:]) and rows[-1]["converged"] == "true"
    _, audit = read_csv(tmp_path / "out" / "audit.csv")
    assert audit[0]["passed"] == "true"


def test_run_is_deterministic(tmp_path):
    path = write_cfg(tmp_path, BASE)
    assert cli.main(["run", str(path)]) == 0
    first = {n: (tmp_path / "out" / n).read_bytes() for n in ("iterations.csv", "levels.csv", "audit.csv")}
    assert cli.main(["run", str(path)]) == 0
    assert all((tmp_path / "out" / n).read_bytes() == b for n, b in first.items())


def test_run_barrier_violation_status(tmp_path, capsys):
    text = BASE.replace('"power_law"', '"singular_rational"').replace('offset.gamma = 2.0', '')
    text = text.replace('"small-data"', '"sine"') + "initial.rho_mean = 0.5\ninitial.rho_amp = 0.5\n"
    assert cli.main(["run", str(write_cfg(tmp_path, text))]) == 2
    assert "barrier" in capsys.readouterr().err


def test_run_solver_abort_status(tmp_path, capsys):
    text = BASE + "tol.max_iter = 2\n"
    assert cli.main(["run", str(write_cfg(tmp_path, text))]) == 3
    assert "no convergence after 2 iterations" in capsys.readouterr().err
    assert (tmp_path / "out" / "iterations.csv").exists()


def test_run_from_snapshot_initial_data(tmp_path):
    t = Torus((16, 16))
    X, Y = t.nodes
    write_snapshot(tmp_path / "rho0.awrs", t, 1 + 0.1 * np.sin(X) * np.cos(Y))
    write_snapshot(tmp_path / "u0.awrs", t, 0.05 * np.stack([np.cos(X), np.cos(Y)]))
    text = """
domain.dim = 2
domain.N = [16, 16]
offset.variant = "power_law"
offset.nonlocal = true
initial.kind = "snapshot"
initial.rho_path = "rho0.awrs"
initial.u_path = "u0.awrs"
time.T_total = 0.05
time.M_levels = 5
output.snapshot_stride = 5
"""
    assert cli.main(["run", str(write_cfg(tmp_path, text))]) == 0
    pgm = read_pgm(tmp_path / "out" / "rho_000005.pgm")
    assert pgm.shape == (16, 16) and pgm.min() == 0 and pgm.max() == 255
    # mismatched snapshot lattice is a config error
    write_snapshot(tmp_path / "u0.awrs", Torus((8, 8)), np.zeros((2, 8, 8)))
    assert cli.main(["run", str(write_cfg(tmp_path, text))]) == 2


def test_inspect_and_export(tmp_path, capsys):
    t = Torus((8, 8, 8))
    f = np.random.default_rng(2).standard_normal((3,) + t.shape)
    write_snapshot(tmp_path / "v.awrs", t, f, 1.5)
    assert cli.main(["inspect", str(tmp_path / "v.awrs")]) == 0
    out = capsys.readouterr().out
    assert "components: 3" in out and "time: 1.5" in out and "H2" in out
    assert cli.main(["export-heatmap", str(tmp_path / "v.awrs"), "2", "3", str(tmp_path / "s.pgm")]) == 0
    expected = np.rint((f[0][:, :, 3] - f[0][:, :, 3].min()) / np.ptp(f[0][:, :, 3]) * 255)
    assert np.array_equal(read_pgm(tmp_path / "s.pgm"), expected.astype(np.uint8))
    assert cli.main(["export-heatmap", str(tmp_path / "v.awrs"), "2", "9", str(tmp_path / "s.pgm")]) == 2
    assert cli.main(["inspect", str(tmp_path / "missing.awrs")]) == 2


def test_verify_poisson(capsys):
    assert cli.main(["verify", "poisson"]) == 0
    out = capsys.readouterr().out
    assert "[PASS]   3 Poisson residual" in out and "1/1 checks passed" in out


def test_bad_arguments():
    assert cli.main(["verify", "everything"]) == 2
    assert cli.main([]) == 2
