import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradflow import rates
from gradflow.core import Trajectory


def test_predict_extinction_example():
    pred = rates.predict(p=2, alpha=1, c=1, t0=0, E0=0.5)
    assert pred.regime == "extinction"
    assert pred.t_hat == pytest.approx(0.5, abs=1e-15)
    assert pred.c_tilde == pytest.approx(1.0, abs=1e-15)


def test_predict_exponential_rate():
    pred = rates.predict(p=2, alpha=0.5, c=1)
    assert pred.regime == "exponential"
    assert pred.rate == pytest.approx(0.5)
    assert pred.c_tilde is None and pred.t_hat is None


def test_boundary_is_exponential():
    assert rates.classify(3.0, 1.0 / 3.0) == "exponential"
    assert rates.classify(3.0, 0.3) == "polynomial"
    assert rates.classify(3.0, 0.34) == "extinction"


@pytest.mark.parametrize("kw", [dict(alpha=0.0), dict(alpha=1.5), dict(E0=-1.0), dict(c=0.0),
                                dict(p=1.0)])
def test_predict_rejects_invalid(kw):
    args = dict(p=2.0, alpha=0.5, c=1.0, E0=1.0)
    args.update(kw)
    with pytest.raises(ValueError):
        rates.predict(**args)


@settings(max_examples=100, deadline=None)
@given(st.floats(1.1, 6.0), st.floats(0.05, 1.0), st.floats(0.1, 10.0), st.floats(0.01, 10.0),
       st.floats(0.0, 5.0))
def test_extinction_scaling_identity(p, alpha, c, E0, t0):
    if alpha * p <= 1 + 1e-9:
        return
    a = rates.predict(p, alpha, c, t0, E0)
    b = rates.predict(p, alpha, c, t0, 2 * E0)
    beta = (p * alpha - 1) / (alpha * (p - 1))
    assert (b.t_hat - t0) / (a.t_hat - t0) == pytest.approx(2 ** beta, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(1.1, 6.0), st.floats(0.05, 1.0), st.floats(0.1, 10.0), st.floats(0.01, 10.0))
def test_bound_matches_at_anchor_and_decreases(p, alpha, c, E0):
    pred = rates.predict(p, alpha, c, 0.0, E0)
    H0 = (c / alpha) * E0 ** alpha
    assert float(pred.bound(0.0)) == pytest.approx(H0, rel=1e-12)
    t = np.linspace(0, 20, 400)
    b = np.asarray(pred.bound(t))
    assert np.all(b >= 0)
    assert np.all(np.diff(b) <= 1e-12 * H0)


def _traj(t, d):
    return Trajectory(t, list(d), np.zeros(len(t)))


def test_compare_half_bound_passes():
    pred = rates.predict(2.0, 0.3, 1.0, 0.0, 1.0)
    t = np.linspace(0, 5, 51)
    d = np.asarray(pred.bound(t)) / 2
    rep = rates.compare(pred, _traj(t, d), d)
    assert rep.passed and np.all(rep.slack > 0)
    assert len(rep.rows()) == 51


def test_compare_monotone_in_c():
    t = np.linspace(0, 3, 31)
    d = np.exp(-0.8 * t)
    verdicts = [rates.compare(rates.predict(2.0, 0.5, c, 0.0, 0.5), _traj(t, d), d).passed
                for c in [0.5, 0.7, 0.9, 1.2, 2.0]]
    assert verdicts == sorted(verdicts)


def test_compare_quadratic_flow_exponential():
    # E = kappa/2 x^2: LS holds with alpha = 1/2, c = 1/sqrt(2 kappa), giving rate kappa
    kappa, x0 = 1.7, 0.8
    c = 1 / math.sqrt(2 * kappa)
    t = np.linspace(0, 4, 81)
    d = x0 * np.exp(-kappa * t)
    pred = rates.predict(2.0, 0.5, c, 0.0, 0.5 * kappa * x0 ** 2)
    assert pred.rate == pytest.approx(kappa)
    rep = rates.compare(pred, _traj(t, d), d, tol_cmp=1e-12)
    assert rep.passed


def test_compare_extinction_checks_t_hat():
    pred = rates.predict(2.0, 1.0, 1.0, 0.0, 0.5)
    t = np.linspace(0, 1, 11)
    d = np.maximum(0.0, 0.4 - t)
    rep = rates.compare(pred, _traj(t, d), d)
    assert rep.t_star == pytest.approx(0.4) and rep.t_star_ok
    late = np.maximum(0.0, 0.45 - 0.5 * t) * 0.5
    rep2 = rates.compare(pred, _traj(t, late), late)
    assert rep2.t_star == pytest.approx(0.9) and not rep2.t_star_ok and not rep2.passed


def test_compare_time_range_mismatch():
    pred = rates.predict(2.0, 0.5, 1.0, 5.0, 1.0)
    t = np.linspace(0, 1, 5)
    with pytest.raises(ValueError):
        rates.compare(pred, _traj(t, np.ones(5)), np.ones(5))


def test_compare_tv_disc_extinction(disc_run):
    # LS with alpha = 1 and c = S2 follows from ||v|| <= S2 TV(v)
    inst, run = disc_run
    tr = run.traj
    pred = rates.predict(2.0, 1.0, inst.constant, 0.0, tr.energies[0])
    rep = rates.compare(pred, tr, run.norms, t_star=run.t_star)
    assert rep.passed
    assert run.t_star <= pred.t_hat


def test_extinction_bound_constant_energy():
    t = np.array([0.3, 0.5, 0.9])
    tr = Trajectory(t, [0, 0, 0], [2.0, 2.0, 2.0])
    assert rates.extinction_bound_inf(tr, 0.25) == pytest.approx(0.3 + 0.5)


@pytest.mark.parametrize("C", [0.2, 1.0, 3.0])
def test_extinction_bound_linear_energy(C):
    T, E0 = 1.0, 2.0
    t = np.linspace(0, 1.5, 1501)
    E = np.maximum(0.0, E0 * (1 - t / T))
    tr = Trajectory(t, list(t), E)
    # oracle: s + C E0 (1 - s/T) is affine on [0, T], so the minimum is at an end
    assert rates.extinction_bound_inf(tr, C) == pytest.approx(min(T, C * E0), abs=2e-3)


def test_extinction_bound_rejects_bad_constant():
    tr = Trajectory([0.0], [0], [1.0])
    with pytest.raises(ValueError):
        rates.extinction_bound_inf(tr, 0.0)


def test_prediction_json_fields():
    d = rates.predict(2.0, 1.0, 1.0, 0.0, 0.5).to_dict()
    for key in ("regime", "p", "alpha", "c", "t0", "E0", "t_hat", "c_tilde"):
        assert key in d
