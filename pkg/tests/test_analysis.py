"""Regime classification, fiber scaling, decay fits and blowup diagnostics."""
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from potwell import analysis as an
from potwell import functionals as fn
from potwell.grid import Grid, Params
from potwell.solver import BLOWUP, FLOOR, HORIZON, SolverConfig, Trajectory, run
from potwell.wells import InfeasibleError


def synthetic(times, h1, I=None, params=Params(2.0, 3.0), termination=HORIZON):
    g = Grid.interval(8)
    tr = Trajectory(params=params, grid=g, config=SolverConfig(), termination=termination)
    tr.times = list(times)
    tr.h1_norm_sq = list(h1)
    n = len(tr.times)
    tr.I = list(I) if I is not None else [1.0] * n
    tr.D = [0.0] * n
    tr.J = [0.0] * n
    return tr


# -- classify --------------------------------------------------------------

def test_classify_small_cosine(grid256, p2q3, wells_p2, cos1):
    rep = an.classify(grid256, 0.1 * cos1, p2q3, wells_p2)
    assert rep.J0 < wells_p2.d and rep.I0 > 0
    assert rep.predicted == an.T1
    assert rep.J0 == pytest.approx(0.01 * np.pi**2 / 4, rel=1e-2)


def test_classify_large_cosine(grid256, p2q3, wells_p2, cos1):
    rep = an.classify(grid256, 4 * cos1, p2q3, wells_p2)
    assert rep.I0 == pytest.approx(-17.04, abs=0.02)
    assert rep.predicted == (an.T2 if rep.J0 < wells_p2.d else an.T4 if abs(rep.J0 - wells_p2.d) <= 1e-3 * wells_p2.d else an.INDETERMINATE)
    assert rep.predicted == an.T2


def test_classify_zero(grid256, p2q3, wells_p2):
    rep = an.classify(grid256, np.zeros(256), p2q3, wells_p2)
    assert rep.predicted == an.INDETERMINATE
    assert rep.J0 == rep.I0 == 0.0
    assert "trivial" in rep.notes[0]


def test_classify_accepts_plain_depth(grid256, p2q3, cos1):
    assert an.classify(grid256, 0.1 * cos1, p2q3, 15.0).predicted == an.T1


def test_classify_switches_once_along_fiber(grid256, p2q3, wells_p2, cos1):
    ls = fn.lambda_star(grid256, cos1, p2q3)
    signs = [np.sign(an.classify(grid256, lam * cos1, p2q3, wells_p2).I0) for lam in ls * np.linspace(0.2, 2.0, 41)]
    assert np.count_nonzero(np.diff(signs)) == 1


# -- make_initial_data -----------------------------------------------------

@pytest.mark.parametrize("target", [an.T1, an.T2, an.T3, an.T4])
def test_make_initial_data_lands_in_regime(grid256, p2q3, wells_p2, cos1, target):
    u, lam = an.make_initial_data(grid256, cos1, target, p2q3, wells_p2)
    rep = an.classify(grid256, u, p2q3, wells_p2)
    assert rep.predicted == target
    ls = fn.lambda_star(grid256, cos1, p2q3)
    assert (lam < ls) == (target in (an.T1, an.T3))
    if target in (an.T3, an.T4):
        assert rep.J0 == pytest.approx(wells_p2.d, rel=1e-10)


def test_t2_scaling_for_cosine(grid256, p2q3, wells_p2, cos1):
    _, lam = an.make_initial_data(grid256, cos1, an.T2, p2q3, wells_p2)
    assert lam > 3.6276


def test_t5_scaling(grid256, p2q3, wells_p2, opt):
    profile = np.cos(2 * np.pi * grid256.coords[0])
    u, _ = an.make_initial_data(grid256, profile, an.T5, p2q3, wells_p2, opt)
    rep = an.classify(grid256, u, p2q3, wells_p2, opt=opt)
    assert rep.predicted == an.T5
    assert rep.J0 > wells_p2.d and rep.I0 > 0 and rep.h1_0 <= rep.lambda_alpha_estimate


def test_critical_target_infeasible_on_low_fiber(grid256, p2q3, cos1):
    with pytest.raises(InfeasibleError, match="fiber maximum"):
        an.make_initial_data(grid256, cos1, an.T3, p2q3, 100.0)


# -- decay_fit -------------------------------------------------------------

def test_decay_fit_exact_exponential():
    t = np.linspace(0, 5, 200)
    rate, r2 = an.decay_fit(synthetic(t, np.exp(-2 * 0.7 * t)))
    assert rate == pytest.approx(0.7, rel=1e-12)
    assert r2 == pytest.approx(1.0, abs=1e-12)


def test_decay_fit_constant():
    assert an.decay_fit(synthetic(np.linspace(0, 1, 20), np.full(20, 3.0))) == (0.0, 1.0)


def test_decay_fit_rejects_nonpositive():
    with pytest.raises(ValueError):
        an.decay_fit(synthetic(np.linspace(0, 1, 20), np.linspace(1, -1, 20)))


@settings(max_examples=30)
@given(st.floats(0.01, 5.0), st.floats(0.1, 100.0))
def test_decay_fit_recovers_rate(rate, c):
    t = np.linspace(0, 3, 50)
    got, r2 = an.decay_fit(synthetic(t, c * np.exp(-2 * rate * t)))
    assert got == pytest.approx(rate, rel=1e-8)


# -- G functional ----------------------------------------------------------

def test_g_constant_h1_telescopes():
    t = np.sort(np.random.default_rng(0).uniform(0, 2, 30))
    t[0] = 0.0
    _, G = an.g_functional(synthetic(t, np.full(30, 1.5)))
    np.testing.assert_allclose(G, 1.5 * t[-1], rtol=1e-14)


def test_g_derivative():
    t = np.linspace(0, 1, 401)
    h1 = 1 + t**2
    t_, G = an.g_functional(synthetic(t, h1))
    dG = np.diff(G) / np.diff(t)
    mid = 0.5 * (h1[1:] + h1[:-1])
    np.testing.assert_allclose(dG, mid - h1[0], atol=1e-12)


def test_second_differences_nonuniform():
    t = np.array([0.0, 0.1, 0.3, 0.35, 0.9])
    np.testing.assert_allclose(an.second_differences(t, 3 * t**2 + t), 6.0, rtol=1e-12)


def test_blowup_diagnostics_too_short():
    tr = synthetic(np.linspace(0, 1, 5), np.ones(5), termination=BLOWUP)
    with pytest.raises(ValueError):
        an.blowup_diagnostics(tr, Params(2.0, 3.0))


# -- end to end ------------------------------------------------------------

@pytest.fixture(scope="module")
def blowup_case(grid256, p2q3, wells_p2):
    u0 = 4 * np.cos(np.pi * grid256.coords[0])
    rep = an.classify(grid256, u0, p2q3, wells_p2)
    tr = run(grid256, u0, SolverConfig(t_end=5.0, dt0=1e-3), p2q3)
    diag = an.blowup_diagnostics(tr, p2q3)
    return rep, tr, diag


def test_blowup_diagnostics_on_run(blowup_case, p2q3, wells_p2):
    rep, tr, diag = blowup_case
    assert tr.termination == BLOWUP
    assert diag.theta == 0.5
    assert diag.concavity_ok
    assert tr.t_final <= diag.extrapolated_T <= 1.1 * tr.t_final
    assert np.all(diag.G > 0)
    assert diag.xi_floor >= an.xi_lower_bound(p2q3, wells_p2.d, rep.J0) * (1 - 1e-3) > 0
    assert np.all(an.gradient_floor_margin(tr, p2q3, wells_p2.d) > 0)
    json.dumps(diag.as_dict())


def test_g_second_derivative_tracks_nehari(blowup_case):
    """G'' = h1' = -2 I up to O(dt), away from the singular end."""
    _, tr, diag = blowup_case
    t, G, I = diag.t, diag.G, tr.column("I")
    n = len(t) // 2
    dd = an.second_differences(t[:n], G[:n])
    ref = -2 * I[1 : n - 1]
    assert np.max(np.abs(dd - ref) / np.abs(ref)) < 0.02


def test_verify_blowup_consistent(blowup_case):
    rep, tr, diag = blowup_case
    an.verify(rep, tr, diag)
    assert rep.verdict == an.CONSISTENT
    assert rep.observed["termination"] == BLOWUP


def test_verify_decay_consistent(grid256, p2q3, wells_p2, cos1):
    u0 = 0.1 * cos1
    rep = an.classify(grid256, u0, p2q3, wells_p2)
    tr = run(grid256, u0, SolverConfig(t_end=3.0, dt0=1e-3), p2q3)
    an.verify(rep, tr)
    assert rep.verdict == an.CONSISTENT
    assert rep.observed["decay_rate"] > 0
    # bound form of the decay on the fitted window
    t, h1 = tr.column("t"), tr.column("h1_norm_sq")
    half = len(t) // 2
    rate = rep.observed["decay_rate"]
    assert np.all(h1[half:] <= h1[0] * np.exp(-2 * rate * t[half:]) * 1.05)


def test_verify_flags_blowup_in_global_regime():
    rep = an.RegimeReport(J0=1.0, I0=1.0, d=2.0, h1_0=1.0, predicted=an.T1)
    tr = synthetic(np.linspace(0, 1, 20), np.linspace(1, 50, 20), termination=BLOWUP)
    assert an.verify(rep, tr).verdict == an.INCONSISTENT


def test_verify_flags_sign_change():
    rep = an.RegimeReport(J0=1.0, I0=1.0, d=2.0, h1_0=1.0, predicted=an.T1)
    t = np.linspace(0, 1, 20)
    I = np.ones(20)
    I[10] = -1
    assert an.verify(rep, synthetic(t, np.exp(-t), I)).verdict == an.INCONSISTENT


def test_verify_floor_is_indeterminate():
    rep = an.RegimeReport(J0=1.0, I0=1.0, d=2.0, h1_0=1.0, predicted=an.T1)
    tr = synthetic(np.linspace(0, 1, 20), np.exp(-np.linspace(0, 1, 20)), termination=FLOOR)
    assert an.verify(rep, tr).verdict == an.INDETERMINATE


def test_report_serialization():
    rep = an.RegimeReport(J0=1.0, I0=-1.0, d=2.0, h1_0=3.0, predicted=an.T2)
    data = json.loads(rep.to_json())
    assert data["predicted"] == an.T2 and data["verdict"] == an.INDETERMINATE
    assert "T2_blowup" in rep.summary()
