import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iedtails import IedClass
from iedtails.arma import (
    ArmaModel,
    check_coprime,
    check_stability,
    lambda_limit,
    lambda_n,
    psi_expansion,
    simulate,
)
from iedtails.distributions import ReciprocalExponential, make_rng
from iedtails.errors import ArgumentError, ExpansionError, IndeterminateError
from oracles import long_division


def test_stability_examples():
    assert check_stability([0.25]).stable
    assert not check_stability([1.0]).stable
    assert check_stability([0.5, 0.3]).stable
    assert not check_stability([0.6, 0.5]).stable
    assert check_stability([]).stable
    with pytest.raises(IndeterminateError):
        check_stability([1.0 - 1e-12])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-0.99, 0.99), min_size=1, max_size=6))
def test_stability_matches_roots(coefs):
    roots = np.roots(np.r_[1.0, -np.asarray(coefs)])
    inside = np.max(np.abs(roots))
    if abs(inside - 1.0) < 1e-6:
        return
    try:
        cert = check_stability(coefs)
    except IndeterminateError:
        return
    assert cert.stable == (inside < 1.0)


def test_coprime():
    assert check_coprime([0.25], [0.5]).coprime
    assert check_coprime([0.25], []).coprime
    # Phi has roots 5/3 and -2; Theta = (1 + z/2)**2 has the double root -2
    assert not check_coprime([0.1, 0.3], [1.0, 0.25]).coprime
    with pytest.raises(ArgumentError):
        psi_expansion(ArmaModel([0.1, 0.3], [1.0, 0.25]))


def test_model_validation():
    with pytest.raises(ArgumentError):
        ArmaModel([1.0])
    with pytest.raises(ArgumentError):
        ArmaModel([0.5, -0.1])
    with pytest.raises(ArgumentError):
        ArmaModel([0.5], [0.0])


def test_psi_examples():
    exp = psi_expansion(ArmaModel([0.5, 0.3], [0.2]))
    assert np.allclose(exp.psi[:3], [1.0, 0.7, 0.65], rtol=0, atol=1e-15)
    ar = psi_expansion(ArmaModel([0.25]))
    k = np.arange(ar.psi.size)
    assert np.array_equal(ar.psi, 0.25**k)
    assert np.all(ar.psi <= ar.C * ar.beta**k * (1 + 1e-12))


def test_psi_csv():
    exp = psi_expansion(ArmaModel([0.25], [0.5]), 1e-10)
    lines = exp.to_csv().splitlines()
    assert lines[:4] == ["k,psi", "0,1", "1,0.75", "2,0.1875"]


stable_phi = st.lists(st.floats(0.01, 1.0), min_size=1, max_size=5).map(
    lambda v: [0.95 * x / max(1.0, sum(v)) for x in v])


@settings(max_examples=100, deadline=None)
@given(stable_phi, st.lists(st.floats(0.01, 2.0), max_size=5))
def test_psi_matches_long_division(phi, theta):
    model = ArmaModel(phi, theta)
    if not check_coprime(phi, theta).coprime:
        return
    exp = psi_expansion(model, min_terms=200)
    oracle = long_division(model.phi, model.theta, 200)
    got = exp.psi[:201]
    # positive wherever the value is representable as a normal double
    assert np.all(got[np.asarray(oracle) > 1e-300] > 0)
    assert np.all(np.abs(got - oracle) <= 1e-12 * np.maximum(1.0, np.abs(oracle)))


def test_lambda_limit_examples():
    ar = psi_expansion(ArmaModel([0.25]))
    assert lambda_limit(ar, IedClass(1, 0.5)).lam == pytest.approx(2.0, rel=1e-12)
    assert lambda_limit(ar, IedClass(1, 1.0)).lam == pytest.approx(4.0, rel=1e-12)
    arma = psi_expansion(ArmaModel([0.25], [0.5]))
    # psi_k = (3/4) 4**-(k-1): sqrt sum = 1 + sqrt(3), squared
    assert lambda_limit(arma, IedClass(1, 1.0)).lam == pytest.approx(4 + 2 * math.sqrt(3), rel=1e-12)
    assert lambda_limit(arma, IedClass(1, 1.0)).lam == pytest.approx(7.464101615137754, rel=1e-12)


def test_lambda_limit_rho_two():
    # e = 2/3: sum (1/4)**(2k/3) = 1/(1 - 4**(-2/3)), cubed
    ar = psi_expansion(ArmaModel([0.25]))
    out = lambda_limit(ar, IedClass(2.0, 1.0))
    assert out.lam == pytest.approx((1 / (1 - 0.25 ** (2 / 3))) ** 3, rel=1e-12)


def test_lambda_n():
    ar = psi_expansion(ArmaModel([0.25]))
    noise = IedClass(1, 0.5)
    assert lambda_n(ar, noise, 0).lam == 0.5
    assert lambda_n(ar, noise, 1).lam == pytest.approx(1.125, rel=1e-15)
    assert abs(lambda_n(ar, noise, 60).lam - 2.0) < 1e-6
    assert lambda_n(ar, noise, 500).lam == pytest.approx(2.0, rel=1e-12)
    with pytest.raises(ArgumentError):
        lambda_n(ar, noise, -1)


def test_simulate_deterministic_noise():
    n = 30
    x = simulate(ArmaModel([0.5]), n, noise_values=np.ones(n)).values
    k = np.arange(n + 1)
    assert np.allclose(x, 2 * (1 - 2.0**-k), rtol=0, atol=1e-15)
    y = simulate(ArmaModel([0.25], [0.5]), 3, noise_values=np.ones(3)).values
    assert np.allclose(y, [0.0, 1.0, 1.75, 1.9375], rtol=0, atol=1e-15)


def test_simulate_random_and_debug():
    model = ArmaModel([0.25], [0.5], ReciprocalExponential(0.5, 1.0))
    a = simulate(model, 5000, make_rng(3), debug=True)
    b = simulate(model, 5000, make_rng(3))
    assert np.array_equal(a.values, b.values)
    assert a.values[0] == 0.0 and a.n == 5000
    with pytest.raises(ArgumentError):
        simulate(ArmaModel([0.25]), 10, make_rng(0))
    with pytest.raises(ArgumentError):
        simulate(model, 10, noise_values=np.ones(3))


def test_slow_decay():
    exp = psi_expansion(ArmaModel([0.99]))
    assert 0.99 < exp.beta < 1.0
    assert lambda_limit(exp, IedClass(1, 1.0)).lam == pytest.approx(
        (1 / (1 - math.sqrt(0.99))) ** 2, rel=1e-9)
    # the bound cannot reach the target inside a tiny term budget
    with pytest.raises(ExpansionError):
        psi_expansion(ArmaModel([0.999]), max_terms=128)
