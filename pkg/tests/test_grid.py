import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from singbal.grid import (
    GridError,
    GridFunction,
    derivative,
    fractional_tv,
    norm,
    pvar_bruteforce,
    pvar_dp,
    total_variation,
    turning_points,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_rejects_bad_grids():
    with pytest.raises(GridError):
        GridFunction(np.zeros(3), 0.1)
    with pytest.raises(GridError):
        GridFunction(np.zeros(8), 0.0)
    with pytest.raises(GridError):
        GridFunction(np.array([0, 1, np.nan, 2.0]), 0.1)


def test_periodic_length_matches_period():
    g = GridFunction.periodic(np.sin, 64, np.pi)
    assert g.n * g.dx == pytest.approx(2 * np.pi, rel=1e-15)


def test_line_truncation_warns():
    with pytest.warns(UserWarning):
        GridFunction.line(np.ones_like, 32, 1.0)


@pytest.mark.parametrize("p", [1, 2, 6, np.inf])
def test_norm_of_zero(p):
    assert norm(GridFunction.periodic(np.zeros_like, 16, 1.0), p) == 0.0


def test_norm_block_measure():
    n, P = 1000, 1.0
    g = GridFunction.periodic(lambda x: ((x >= 0) & (x < 0.25)).astype(float), n, P)
    assert norm(g, 1) == pytest.approx(0.25, abs=g.dx)


def test_norm_sin_l2():
    g = GridFunction.periodic(np.sin, 1024, np.pi, x0=0.0)
    exact = np.sqrt(integrate.quad(lambda x: np.sin(x) ** 2, 0, 2 * np.pi)[0])
    assert norm(g, 2) == pytest.approx(exact, abs=1e-6)
    assert exact == pytest.approx(np.sqrt(np.pi), abs=1e-12)


def test_norm_rejects_other_orders():
    with pytest.raises(GridError):
        norm(GridFunction.periodic(np.sin, 16, np.pi), 3)


def test_derivative_of_constant():
    g = GridFunction.periodic(np.ones_like, 64, 1.0)
    for order in (1, 2):
        assert np.max(np.abs(derivative(g, order).values)) < 1e-12


def test_spectral_derivative_sin():
    g = GridFunction.periodic(np.sin, 256, np.pi)
    assert np.max(np.abs(derivative(g, 1).values - np.cos(g.x))) < 1e-10
    assert np.max(np.abs(derivative(g, 2).values + np.sin(g.x))) < 1e-10


def test_central_derivative_linear_interior():
    g = GridFunction.line(lambda x: x, 101, 1.0, check_tail=False)
    d = derivative(g, 1, "central").values
    assert np.max(np.abs(d - 1.0)) < 1e-12


def test_spectral_needs_periodic():
    g = GridFunction.line(lambda x: np.exp(-(x**2) * 50), 101, 1.0)
    with pytest.raises(GridError):
        derivative(g, 1)


def test_fractional_tv_unit_step():
    g = GridFunction.line(lambda x: (x > 0).astype(float), 101, 1.0, check_tail=False)
    for gamma in (0.2, 0.5, 1.0):
        assert fractional_tv(g, gamma, -1, 1) == pytest.approx(1.0)


def test_fractional_tv_ramp():
    g = GridFunction.line(lambda x: (x + 1) / 2, 16, 1.0, check_tail=False)
    assert fractional_tv(g, 0.5, -1, 1) == pytest.approx(1.0)
    assert pvar_bruteforce(g.values, 2.0) == pytest.approx(1.0)


@pytest.mark.parametrize("N", range(1, 7))
def test_alternating_jumps_match_bruteforce(N):
    h = 0.7
    v = np.array([(i % 2) * h for i in range(N + 1)])
    assert pvar_dp(turning_points(v), 2.0) == pytest.approx(N * h**2)
    assert pvar_bruteforce(v, 2.0) == pytest.approx(N * h**2)


@settings(max_examples=60, deadline=None)
@given(st.lists(finite, min_size=2, max_size=12), st.floats(1.0, 4.0))
def test_pvar_dp_matches_bruteforce(vals, q):
    v = np.array(vals)
    assert pvar_dp(turning_points(v), q) == pytest.approx(pvar_bruteforce(v, q), rel=1e-9, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(finite, min_size=4, max_size=40), st.floats(0.05, 1.0))
def test_fractional_tv_bounds(vals, gamma):
    g = GridFunction(np.array(vals), 0.1, "line", 0.0)
    ftv = fractional_tv(g, gamma, g.x[0], g.x[-1])
    tv = total_variation(g)
    osc = np.ptp(g.values)
    # one jump between extremes is a partition; the sum is at most TV * osc^(q-1)
    assert ftv >= osc ** (1 / gamma) * (1 - 1e-12) - 1e-12
    assert ftv <= tv * osc ** (1 / gamma - 1) * (1 + 1e-9) + 1e-12


@settings(max_examples=50, deadline=None)
@given(st.lists(finite, min_size=4, max_size=40))
def test_norm_homogeneity_and_triangle(vals):
    g = GridFunction(np.array(vals), 0.05)
    h = g.with_values(np.roll(g.values, 1))
    for p in (1, 2, 6, np.inf):
        assert norm(g * -3.0, p) == pytest.approx(3 * norm(g, p), rel=1e-12, abs=1e-12)
        assert norm(g + h, p) <= norm(g, p) + norm(h, p) + 1e-9


def test_text_roundtrip(tmp_path):
    g = GridFunction.periodic(np.cos, 32, 2.0)
    g.save(tmp_path / "g.txt")
    back = GridFunction.load(tmp_path / "g.txt")
    assert back.same_grid(g)
    assert np.array_equal(back.values, g.values)
