import csv

import numpy as np
import pytest
import sympy as sp

from awrascle import mms
from awrascle.grid import Torus
from awrascle.offset import LocalPlusNewtonian, PowerLaw, SingularRational, SingularReciprocal

xs, ts, rs = sp.symbols("x t r")


def symbolic_forcings(p_of_r, base, nonlocal_=False):
    """g and b for the traveling wave, derived symbolically."""
    xi = xs - ts
    rho = base + sp.Rational(1, 5) * sp.sin(xi)
    w = sp.Rational(1, 2) + sp.Rational(1, 5) * sp.cos(xi)
    p = p_of_r.subs(rs, rho)
    a = (rs * sp.diff(p_of_r, rs)).subs(rs, rho)
    phi = sp.Rational(1, 5) * sp.sin(xi) if nonlocal_ else 0  # -phi'' = rho - <rho>
    u = w - sp.diff(p, xs) - sp.diff(phi, xs)
    v = w - sp.diff(phi, xs)
    g = sp.diff(w, ts) + u * sp.diff(w, xs)
    b = sp.diff(rho, ts) + sp.diff(rho * v, xs) - sp.diff(a * sp.diff(rho, xs), xs)
    return sp.lambdify((xs, ts), g, "numpy"), sp.lambdify((xs, ts), b, "numpy")


@pytest.mark.parametrize("model,p_of_r,base,N,tol", [
    (PowerLaw(2.0), rs**2, 1, 64, 1e-10),
    (LocalPlusNewtonian(PowerLaw(2.0)), rs**2, 1, 64, 1e-10),
    (SingularRational(0.05, 1.0, 2.0), rs / 20 / (1 - rs) ** 2, sp.Rational(7, 10), 128, 1e-9),
])
def test_forcings_match_symbolic_oracle(model, p_of_r, base, N, tol):
    t = Torus((N,))
    x = t.nodes[0]
    case = mms.build_case("traveling-wave", model, t)
    g, b = symbolic_forcings(p_of_r, base, model.nonlocal_)
    for time in (0.0, 0.37, 1.0):
        assert np.abs(case.forcing_transport(time)[0] - g(x, time)).max() < tol
        assert np.abs(case.forcing_parabolic(time) - b(x, time)).max() < tol


def test_constant_case_has_zero_forcing():
    case = mms.build_case("constant", PowerLaw(), Torus((16, 16)))
    g, b = case.forcings([0.0, 0.5])
    assert np.abs(g).max() == 0 and np.abs(b).max() == 0
    assert np.all(case.rho(0.3) == 1.0)


def test_heat_mode_is_an_exact_heat_solution():
    case = mms.build_case("heat-mode", PowerLaw(), Torus((32,)))
    for time in (0.0, 0.5, 2.0):
        assert np.abs(case.forcing_parabolic(time)).max() < 1e-15
        assert np.abs(case.forcing_transport(time)).max() == 0


def test_traveling_wave_audit_at_t0():
    case = mms.build_case("traveling-wave", PowerLaw(2.0), Torus((64,)))
    gap_g, gap_b = case.audit(0.0)
    assert gap_g <= 1e-12 and gap_b <= 1e-12


@pytest.mark.parametrize("model", [PowerLaw(1.5), SingularReciprocal(0.1, 2.0, 2.0), LocalPlusNewtonian(PowerLaw())])
@pytest.mark.parametrize("catalog_id", mms.CATALOG)
def test_forcing_audit_every_level(model, catalog_id):
    # p(rho) of the singular closure is not band-limited: resolve it finer
    t = Torus((128, 8)) if model.singular else Torus((32, 16))
    case = mms.build_case(catalog_id, model, t)
    for time in np.linspace(0.0, 1.0, 6):
        assert max(case.audit(time)) <= 1e-10


@pytest.mark.parametrize("model", [PowerLaw(), SingularRational(), SingularReciprocal(1.0, 2.0, 3.0)])
def test_catalog_stays_in_hypothesis_region(model):
    for cid in mms.CATALOG:
        case = mms.build_case(cid, model, Torus((64,)))
        for time in (0.0, 0.4, 2.0):
            r = case.rho(time)
            assert r.min() >= 0.5 - 1e-12
            if model.singular:
                assert r.max() <= 0.9 * model.rho_sup + 1e-12


def test_unknown_catalog_rejected():
    with pytest.raises(ValueError):
        mms.build_case("shock", PowerLaw(), Torus((16,)))


def test_constant_case_solved_exactly():
    case = mms.build_case("constant", PowerLaw(), Torus((16,)))
    for kind in ("transport", "parabolic", "coupled"):
        es, el = mms._run(case, kind, 0.2, 0.05, "spline", 4, "cn", 1e-10)
        assert es < 1e-13 and el < 1e-13


def test_study_requires_three_levels():
    case = mms.build_case("heat-mode", PowerLaw(), Torus((16,)))
    with pytest.raises(ValueError):
        mms.convergence_study(case, "parabolic", [16, 16], [0.1, 0.05], 1.0)


def test_heat_mode_parabolic_study_and_csv(tmp_path):
    case = mms.build_case("heat-mode", PowerLaw(), Torus((32,)))
    rows = mms.convergence_study(case, "parabolic", [32] * 3, [0.1, 0.05, 0.025], 1.0)
    assert all(r.order_sup >= 1.8 for r in rows[1:]) and np.isnan(rows[0].order_sup)
    path = tmp_path / "study.csv"
    mms.write_study_csv(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# awrascle-study v1"
    parsed = list(csv.DictReader(lines[1:]))
    assert list(parsed[0]) == ["h", "dt", "err_sup", "err_l2", "order_sup", "order_l2"]
    assert float(parsed[2]["err_sup"]) == rows[2].err_sup


def test_transport_temporal_study():
    case = mms.build_case("traveling-wave", PowerLaw(2.0), Torus((32,)))
    rows = mms.convergence_study(case, "transport", [32] * 3, [0.1, 0.05, 0.025], 0.5, method="trig")
    assert all(r.order_sup >= 1.9 for r in rows[1:])


def test_coupled_study_2d():
    case = mms.build_case("traveling-wave", PowerLaw(2.0), Torus((8, 8)))
    rows = mms.convergence_study(case, "coupled", [(16, 8), (32, 8), (64, 8)], [0.05, 0.025, 0.0125], 0.1)
    assert all(r.order_sup >= 0.9 for r in rows[1:])
