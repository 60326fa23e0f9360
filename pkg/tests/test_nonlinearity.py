import math

import numpy as np
import pytest

import kirchhoff as kh
from kirchhoff.nonlinearity import KINDS


def test_pure_linear_values():
    f = kh.make_nonlinearity("pure_linear", a=2.0, b=1.0, lambda1=3.0)
    assert f(1.5) == pytest.approx(1.5)
    assert f.deriv(0.0) == pytest.approx(1.0)
    assert f.f0 == pytest.approx(1.0 / 6.0)  # slope / (a lambda1)
    assert f.f_inf == 0.0


def test_sum_linear_cubic_values():
    f = kh.make_nonlinearity(
        "sum_linear_cubic", f0=2.0, f_inf=0.5, a=1.5, b=2.0, lambda1=3.0, mu1=4.0
    )
    s = 2.0
    expected = 1.5 * 3.0 * 2.0 * s + 2.0 * 4.0 * 0.5 * s**3
    assert f(s) == pytest.approx(expected)
    assert f.f0 == 2.0
    assert f.f_inf == 0.5


def test_pure_cubic_has_zero_slope():
    f = kh.make_nonlinearity("pure_cubic", f_inf=1.0, b=2.0, mu1=5.0)
    assert f.deriv(0.0) == 0.0
    assert f(3.0) == pytest.approx(2.0 * 5.0 * 27.0)
    assert f.f0 == 0.0


def test_f0_tilde_parameterization_is_a_independent():
    fa = kh.make_nonlinearity("sum_linear_cubic", f0_tilde=1.5, f_inf=1.0, a=0.5, lambda1=2.0)
    fb = kh.make_nonlinearity("sum_linear_cubic", f0_tilde=1.5, f_inf=1.0, a=0.25, lambda1=2.0)
    s = np.linspace(0.1, 3.0, 7)
    assert np.allclose(fa(s), fb(s))
    assert fa.f0 == pytest.approx(1.5 / 0.5)
    assert fb.f0 == pytest.approx(1.5 / 0.25)


def test_vanishing_a_declares_infinite_f0():
    f = kh.make_nonlinearity("sum_linear_cubic", f0_tilde=1.0, f_inf=1.0, a=0.0)
    assert math.isinf(f.f0)
    assert not f.satisfies_f2
    assert f.satisfies_f4


def test_derivative_matches_finite_differences():
    for kind, kwargs in (
        ("sum_linear_cubic", {"f0": 2.0, "f_inf": 1.0}),
        ("saturating", {"f0": 1.5, "f_inf": 0.5}),
    ):
        f = kh.make_nonlinearity(kind, lambda1=2.0, mu1=3.0, **kwargs)
        for s in (0.0, 0.3, 1.7, 10.0):
            eps = 1e-6 * (1 + abs(s))
            fd = (f(s + eps) - f(s - eps)) / (2 * eps)
            assert f.deriv(s) == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_asymptotics_verification():
    f = kh.make_nonlinearity("sum_linear_cubic", f0=2.0, f_inf=1.0, lambda1=2.0, mu1=3.0)
    report = kh.verify_asymptotics(f, 1e-6)
    assert report.passes
    # saturating kind approaches its cubic limit only algebraically
    g = kh.make_nonlinearity("saturating", f0=1.0, f_inf=0.5, lambda1=2.0, mu1=3.0)
    assert kh.verify_asymptotics(g, 1e-3).f3_passes
    assert not kh.verify_asymptotics(g, 1e-12).f3_passes
    # without a cubic part the large-s hypothesis fails
    h = kh.make_nonlinearity("pure_linear", lambda1=2.0)
    assert not kh.verify_asymptotics(h, 1e-6).f3_passes


def test_catalog_validation():
    assert set(KINDS) == {"sum_linear_cubic", "pure_linear", "pure_cubic", "saturating"}
    with pytest.raises(ValueError):
        kh.make_nonlinearity("exponential")
    with pytest.raises(ValueError):
        kh.make_nonlinearity("sum_linear_cubic", f0=-1.0)
    with pytest.raises(ValueError):
        kh.make_nonlinearity("sum_linear_cubic", f0=1.0, lambda1=0.0)


def test_h_form_conversion():
    f = kh.make_nonlinearity("pure_linear", a=1.0, lambda1=2.0)
    h = kh.to_h_form(f, lam=3.0)
    assert h.small_s_vanishes  # f'(0) = 1 exactly
    assert h(2.0) == pytest.approx(0.0)
    g = kh.make_nonlinearity("sum_linear_cubic", f0=2.0, f_inf=1.0, lambda1=2.0, mu1=3.0)
    hg = kh.to_h_form(g, lam=1.0)
    assert not hg.small_s_vanishes
    assert hg(1.0) == pytest.approx(g(1.0) - 1.0)


def test_serialization_roundtrip():
    import json

    f = kh.make_nonlinearity("sum_linear_cubic", f0=2.0, f_inf=1.0, lambda1=2.0, mu1=3.0)
    data = json.loads(f.to_json())
    assert data["kind"] == "sum_linear_cubic"
    assert data["f0"] == 2.0
    assert data["satisfies_f3"]
