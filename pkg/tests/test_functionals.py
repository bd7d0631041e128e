"""Energy, Nehari functional, fiber map and the nonlinear-term estimate."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from potwell import functionals as fn
from potwell.grid import Grid, Params
from potwell.wells import random_start

seeds = st.integers(0, 2**32 - 1)


def random_field(grid, seed, scale=1.0):
    return scale * random_start(grid, np.random.default_rng(seed))


def test_zero_field_report(grid256, p2q3):
    rep = fn.evaluate(grid256, np.zeros(256), p2q3)
    assert rep.as_dict() == dict(grad_p_norm_p=0.0, lq1_norm_q1=0.0, h1_norm_sq=0.0, J=0.0, I=0.0)


def test_cosine_functionals_match_quadrature(p2q3):
    a_exact = integrate.quad(lambda x: (np.pi * np.sin(np.pi * x)) ** 2, 0, 1, epsabs=1e-14)[0]
    b_exact = integrate.quad(lambda x: np.cos(np.pi * x) ** 4, 0, 1, epsabs=1e-14)[0]
    assert a_exact == pytest.approx(np.pi**2 / 2, rel=1e-13)
    assert b_exact == pytest.approx(3 / 8, rel=1e-13)
    g = Grid.interval(1025)
    rep = fn.evaluate(g, np.cos(np.pi * g.coords[0]), p2q3)
    assert rep.grad_p_norm_p == pytest.approx(a_exact, rel=1e-5)
    assert rep.lq1_norm_q1 == pytest.approx(b_exact, rel=1e-5)
    assert rep.J == pytest.approx(a_exact / 2 - b_exact / 4, rel=1e-5)
    assert rep.J == pytest.approx(2.3737, abs=1e-4)
    assert rep.I == pytest.approx(4.5598, abs=1e-4)


@settings(max_examples=60, deadline=None)
@given(seeds, st.sampled_from([(2.0, 3.0), (1.5, 3.0), (3.0, 4.0), (1.5, 1.5)]))
def test_report_identities(seed, pq):
    params = Params(*pq)
    g = Grid.interval(64)
    rep = fn.evaluate(g, random_field(g, seed, 3.0), params)
    p, q = params.p, params.q
    scale = max(rep.grad_p_norm_p, rep.lq1_norm_q1)
    assert rep.J == pytest.approx(rep.grad_p_norm_p / p - rep.lq1_norm_q1 / (q + 1), abs=1e-12 * scale)
    assert rep.I == pytest.approx(rep.grad_p_norm_p - rep.lq1_norm_q1, abs=1e-12 * scale)
    assert rep.J == pytest.approx(params.nehari_factor * rep.grad_p_norm_p + rep.I / (q + 1), abs=1e-12 * scale)


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(0.01, 20.0))
def test_nehari_scaling_law(seed, lam):
    params = Params(1.5, 3.0)
    g = Grid.interval(48)
    u = random_field(g, seed)
    base = fn.evaluate(g, u, params)
    scaled = fn.evaluate(g, lam * u, params)
    expect = lam**1.5 * base.grad_p_norm_p - lam**4 * base.lq1_norm_q1
    assert scaled.I == pytest.approx(expect, rel=1e-9, abs=1e-12)


def test_i_delta(grid256, p2q3, cos1):
    assert fn.i_delta(grid256, cos1, p2q3, 1.0) == pytest.approx(fn.evaluate(grid256, cos1, p2q3).I, rel=1e-15)
    assert fn.i_delta(grid256, np.zeros(256), p2q3, 0.7) == 0.0
    a = fn.grad_p_norm_p(grid256, cos1, 2.0)
    d1, d2 = 0.3, 1.9
    diff = fn.i_delta(grid256, cos1, p2q3, d2) - fn.i_delta(grid256, cos1, p2q3, d1)
    assert diff == pytest.approx((d2 - d1) * a, rel=1e-13)


def test_r_of_delta_examples(p2q3):
    assert fn.r_of_delta(1.0, p2q3, 1.0) == 1.0
    assert fn.r_of_delta(0.5, p2q3, 1.0) == pytest.approx(4.0, rel=1e-15)
    with pytest.raises(ValueError):
        fn.r_of_delta(0.0, p2q3, 1.0)


def test_lambda_star_cosine(p2q3):
    g = Grid.interval(1025)
    u = np.cos(np.pi * g.coords[0])
    assert fn.lambda_star(g, u, p2q3) == pytest.approx(2 * np.pi / np.sqrt(3), rel=1e-5)


def test_lambda_star_balanced_field_is_one(grid256, p2q3, cos1):
    u = fn.lambda_star(grid256, cos1, p2q3) * cos1
    assert fn.lambda_star(grid256, u, p2q3) == pytest.approx(1.0, rel=1e-12)


def test_lambda_star_zero_field_is_domain_error(grid256, p2q3):
    with pytest.raises(ValueError):
        fn.lambda_star(grid256, np.zeros(256), p2q3)


@settings(max_examples=30, deadline=None)
@given(seeds, st.sampled_from([2.0, 1.5]))
def test_fiber_sign_pattern(seed, p):
    params = Params(p, 3.0)
    g = Grid.interval(64)
    u = random_field(g, seed)
    ls = fn.lambda_star(g, u, params)
    assert fn.evaluate(g, 0.5 * ls * u, params).I > 0
    assert fn.evaluate(g, 2.0 * ls * u, params).I < 0
    assert abs(fn.evaluate(g, ls * u, params).I) <= 1e-10 * fn.grad_p_norm_p(g, ls * u, p)
    assert abs(fn.energy(g, 1e-6 * u, params)) < 1e-6
    assert fn.energy(g, 1e3 * u, params) < -1e6


def test_fiber_map_unimodal(grid256, p15q3):
    u = random_field(grid256, 11)
    ls = fn.lambda_star(grid256, u, p15q3)
    lams = ls * np.logspace(-2, 1, 50)
    J = [fn.energy(grid256, lam * u, p15q3) for lam in lams]
    k = int(np.argmax(J))
    assert np.all(np.diff(J[: k + 1]) > 0) and np.all(np.diff(J[k:]) < 0)
    assert lams[max(k - 1, 0)] <= ls <= lams[min(k + 1, 49)]


# -- nonlinear term estimate ----------------------------------------------

@pytest.mark.parametrize("q", [1.5, 2.0, 3.0])
def test_bound_trivial_cases(q):
    params = Params(1.2, q)
    u = np.array([0.3, 1.0, 7.0])
    assert fn.nonlinear_term_bound_holds(u, np.zeros(3), params)
    assert fn.nonlinear_term_bound_holds(u, -u, params)
    assert fn.nonlinear_term_bound_holds(u, u, params)  # all nodes skipped


@settings(max_examples=200)
@given(
    st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=20),
    st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=20),
    st.sampled_from([1.5, 2.0, 3.0]),
)
def test_bound_holds_for_arbitrary_pairs(a, b, q):
    n = min(len(a), len(b))
    assert fn.nonlinear_term_bound_holds(np.array(a[:n]), np.array(b[:n]), Params(1.2, q))


def test_bound_detects_violation():
    # q = 1 would be an equality; a deliberately wrong exponent must fail
    class Fake:
        q = 0.5
    assert not fn.nonlinear_term_bound_holds(np.array([4.0]), np.array([0.0]), Fake())
