import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hankel_lti.lti import (
    DenseStateSpace,
    DiagonalContinuousSystem,
    DiagonalDiscreteSystem,
    LTIError,
    PoleError,
    bilinear_forward,
    bilinear_inverse,
    dumps_system,
    impulse_response,
    loads_system,
    markov_parameters,
    simulate_recurrence,
    time_scale,
    to_dense,
    transfer_continuous,
    transfer_discrete,
)

from conftest import crandn, random_continuous, random_discrete

S2 = np.sqrt(2.0)


def close_systems(s1, s2, tol):
    for f in "abc":
        np.testing.assert_allclose(getattr(s1, f), getattr(s2, f), atol=tol, rtol=tol)
    assert abs(s1.d - s2.d) <= tol * max(1, abs(s1.d))


# -- construction ------------------------------------------------------------

def test_continuous_rejects_unstable():
    with pytest.raises(LTIError, match="j=\\[1\\]"):
        DiagonalContinuousSystem([-1, 0.5], [1, 1], [1, 1])


def test_discrete_rejects_unstable():
    with pytest.raises(LTIError):
        DiagonalDiscreteSystem([1.0], [1], [1])


def test_rejects_mismatched_lengths():
    with pytest.raises(LTIError):
        DiagonalContinuousSystem([-1, -2], [1], [1, 1])


def test_rejects_empty():
    with pytest.raises(LTIError):
        DiagonalContinuousSystem([], [], [])


def test_systems_are_immutable():
    s = DiagonalContinuousSystem([-1], [1], [1])
    with pytest.raises(ValueError):
        s.a[0] = -2


def test_dense_stability_check():
    with pytest.raises(LTIError):
        DenseStateSpace(np.array([[0.5]]), [1], [1], 0, continuous=True, check_stable=True)
    ds = DenseStateSpace(np.array([[0.5]]), [1], [1], 0, continuous=False, check_stable=True)
    assert ds.is_stable()


# -- bilinear transform ------------------------------------------------------

def test_bilinear_scalar_example():
    sd = bilinear_forward(DiagonalContinuousSystem([-1], [1], [1], 0))
    np.testing.assert_allclose([sd.a[0], sd.b[0], sd.c[0], sd.d], [0, 1 / S2, 1 / S2, 0.5], atol=1e-15)


def test_bilinear_complex_pole():
    sd = bilinear_forward(DiagonalContinuousSystem([-1 + 1j], [1], [1]))
    assert abs(sd.a[0] - (-1 + 2j) / 5) < 1e-15


def test_bilinear_inverse_examples():
    sc = bilinear_inverse(DiagonalDiscreteSystem([0], [1 / S2], [1 / S2], 0.5))
    np.testing.assert_allclose([sc.a[0], sc.b[0], sc.c[0], sc.d], [-1, 1, 1, 0], atol=1e-15)
    assert abs(bilinear_inverse(DiagonalDiscreteSystem([0.5], [1], [1])).a[0] + 1 / 3) < 1e-15


def test_bilinear_roundtrip_100_systems(rng):
    for _ in range(100):
        s = random_continuous(rng, 8)
        close_systems(bilinear_inverse(bilinear_forward(s)), s, 1e-12)
        sd = random_discrete(rng, 8)
        close_systems(bilinear_forward(bilinear_inverse(sd)), sd, 1e-12)


def test_mobius_equivalence(rng):
    for _ in range(20):
        s = random_continuous(rng, 8)
        sd = bilinear_forward(s)
        pts = 1j * rng.standard_normal(50) * 3
        np.testing.assert_allclose(transfer_discrete(sd, (1 + pts) / (1 - pts)), transfer_continuous(s, pts),
                                   atol=1e-11, rtol=1e-11)


def test_feedthrough_uses_plus_identity(rng):
    # the (I - Abar)^-1 variant of the feedthrough breaks G(s) = Gbar((1+s)/(1-s))
    s = random_continuous(rng, 4)
    sd = bilinear_forward(s)
    wrong = s.d + np.sum(sd.c * sd.b / (1 - sd.a))
    z = (1 + 0.3j) / (1 - 0.3j)
    good = transfer_discrete(sd, z)[0]
    bad = transfer_discrete(sd.replace(d=wrong), z)[0]
    ref = transfer_continuous(s, 0.3j)[0]
    assert abs(good - ref) < 1e-12 and abs(bad - ref) > 1e-3


def test_dense_bilinear_matches_diagonal(rng):
    s = random_continuous(rng, 6)
    dd = bilinear_forward(to_dense(s))
    sd = bilinear_forward(s)
    np.testing.assert_allclose(np.diag(dd.A), sd.a, atol=1e-13)
    np.testing.assert_allclose(dd.B, sd.b, atol=1e-13)
    np.testing.assert_allclose(dd.C, sd.c, atol=1e-13)
    assert abs(dd.D - sd.d) < 1e-13
    back = bilinear_inverse(dd)
    np.testing.assert_allclose(back.A, np.diag(s.a), atol=1e-12)


def test_dense_bilinear_nondiagonal_mobius(rng):
    A = crandn(rng, 5, 5) - 4 * np.eye(5)
    s = DenseStateSpace(A, crandn(rng, 5), crandn(rng, 5), 0.3, continuous=True, check_stable=True)
    sd = bilinear_forward(s)
    pts = 1j * np.linspace(-4, 4, 9)
    np.testing.assert_allclose(transfer_discrete(sd, (1 + pts) / (1 - pts)), transfer_continuous(s, pts),
                               rtol=1e-11, atol=1e-11)


def test_bilinear_wrong_time_domain():
    with pytest.raises(LTIError):
        bilinear_forward(DiagonalDiscreteSystem([0.1], [1], [1]))
    with pytest.raises(LTIError):
        bilinear_inverse(DiagonalContinuousSystem([-1], [1], [1]))


def test_bilinear_inverse_singular_reported():
    with pytest.raises(LTIError, match="singular"):
        bilinear_inverse(DenseStateSpace(-np.eye(2), [1, 1], [1, 1], 0, continuous=False))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_bilinear_roundtrip_property(n, seed):
    s = random_continuous(np.random.default_rng(seed), n)
    close_systems(bilinear_inverse(bilinear_forward(s)), s, 1e-11)


# -- transfer functions ------------------------------------------------------

def test_transfer_continuous_examples():
    s = DiagonalContinuousSystem([-1], [1], [1], 0)
    np.testing.assert_allclose(transfer_continuous(s, [0, 1j]), [1, 0.5 - 0.5j], atol=1e-15)


def test_transfer_discrete_examples():
    np.testing.assert_allclose(transfer_discrete(DiagonalDiscreteSystem([0], [1], [1]), 2), [0.5])
    np.testing.assert_allclose(transfer_discrete(DiagonalDiscreteSystem([0.5], [1], [1]), 1), [2])


def test_transfer_pole_reported_per_point():
    s = DiagonalContinuousSystem([-1], [1], [1])
    with pytest.raises(PoleError) as err:
        transfer_continuous(s, [0, -1, 2j, -1])
    assert err.value.indices == [1, 3]


def test_transfer_dense_pole_reported():
    s = DenseStateSpace(np.diag([-1.0, -2.0]), [1, 1], [1, 1], 0)
    with pytest.raises(PoleError):
        transfer_continuous(s, [-2.0])


def test_transfer_dense_matches_diagonal(rng):
    s = random_continuous(rng, 7)
    pts = 1j * rng.uniform(-10, 10, 40)
    np.testing.assert_allclose(transfer_continuous(to_dense(s), pts), transfer_continuous(s, pts), rtol=1e-12)


def test_transfer_preserves_shape():
    s = DiagonalContinuousSystem([-1], [1], [1])
    assert transfer_continuous(s, np.zeros((2, 3)) + 1j).shape == (2, 3)


# -- time scaling ------------------------------------------------------------

def test_time_scale_identity(rng):
    s = random_continuous(rng, 4)
    assert time_scale(s, 1.0) == s


def test_time_scale_example():
    s = time_scale(DiagonalContinuousSystem([-1], [1], [1]), 2.0)
    np.testing.assert_allclose([s.a[0], s.b[0], s.c[0]], [-2, 2, 1])
    np.testing.assert_allclose(transfer_continuous(s, 2j), [0.5 - 0.5j], atol=1e-15)


def test_time_scale_substitution(rng):
    s = random_continuous(rng, 8)
    for dt in (0.1, 0.5, 3.0):
        pts = 1j * rng.uniform(-20, 20, 50)
        np.testing.assert_allclose(transfer_continuous(time_scale(s, dt), pts), transfer_continuous(s, pts / dt),
                                   rtol=1e-12)


@pytest.mark.parametrize("a,b", [(0.5, 4.0), (0.25, 8.0), (2.0, 0.125)])
def test_time_scale_composes_exactly(rng, a, b):
    s = random_continuous(rng, 5)
    assert time_scale(time_scale(s, a), b) == time_scale(s, a * b)


@pytest.mark.parametrize("dt", [0.0, -1.0])
def test_time_scale_rejects_nonpositive(dt):
    with pytest.raises(LTIError):
        time_scale(DiagonalContinuousSystem([-1], [1], [1]), dt)


# -- simulation --------------------------------------------------------------

def test_recurrence_delay():
    y = simulate_recurrence(DiagonalDiscreteSystem([0], [1], [1]), [1, 0, 0, 0])
    np.testing.assert_array_equal(y, [0, 1, 0, 0])


def test_recurrence_feedthrough(rng):
    u = crandn(rng, 10)
    np.testing.assert_allclose(simulate_recurrence(DiagonalDiscreteSystem([0], [0], [0], 1), u), u)


def test_recurrence_initial_state():
    y = simulate_recurrence(DiagonalDiscreteSystem([0.5], [1], [1]), np.zeros(3), x0=[2.0])
    np.testing.assert_allclose(y, [2, 1, 0.5])


def test_recurrence_linear(rng):
    s = random_discrete(rng, 6)
    u1, u2 = crandn(rng, 40), crandn(rng, 40)
    al, be = 0.3 - 1j, 2.0 + 0.5j
    lhs = simulate_recurrence(s, al * u1 + be * u2)
    np.testing.assert_allclose(lhs, al * simulate_recurrence(s, u1) + be * simulate_recurrence(s, u2), atol=1e-12)


def test_recurrence_dense_matches_diagonal(rng):
    s = random_discrete(rng, 5)
    u = crandn(rng, 30)
    np.testing.assert_allclose(simulate_recurrence(to_dense(s), u), simulate_recurrence(s, u), atol=1e-12)


def test_recurrence_periodic_steady_state(rng):
    # after burn-in, a periodic input's output spectrum is Gbar(w) times the input spectrum
    s = random_discrete(rng, 4, radius=0.5)
    L = 16
    per = crandn(rng, L)
    y = simulate_recurrence(s, np.tile(per, 8))[-L:]
    w = np.exp(2j * np.pi * np.arange(L) / L)
    np.testing.assert_allclose(np.fft.fft(y), transfer_discrete(s, w) * np.fft.fft(per), atol=1e-9)


def test_impulse_geometric():
    y = impulse_response(DiagonalDiscreteSystem([0.5], [1], [1]), 6)
    np.testing.assert_allclose(y, [0, 1, 0.5, 0.25, 0.125, 0.0625])


def test_impulse_envelope_and_matrix_powers(rng):
    s = random_discrete(rng, 8)
    T = 60
    y = impulse_response(s, T)
    k = np.arange(1, T)
    bound = np.abs(s.residues).sum() * np.abs(s.a).max() ** (k - 1)
    assert np.all(y[1:] <= bound * (1 + 1e-12))
    A = np.diag(s.a)
    direct = [s.c @ np.linalg.matrix_power(A, j - 1) @ s.b for j in k]
    np.testing.assert_allclose(y[1:], np.abs(direct), atol=1e-12)
    np.testing.assert_allclose(markov_parameters(s, T - 1), direct, atol=1e-12)


def test_impulse_rejects_empty():
    with pytest.raises(LTIError):
        impulse_response(DiagonalDiscreteSystem([0.5], [1], [1]), 0)


# -- serialization ---------------------------------------------------------

@pytest.mark.parametrize("factory", [random_continuous, random_discrete])
def test_json_roundtrip_diagonal(rng, factory):
    s = factory(rng, 5)
    assert loads_system(dumps_system(s)) == s


def test_json_roundtrip_dense(rng):
    s = DenseStateSpace(crandn(rng, 3, 3), crandn(rng, 3), crandn(rng, 3), 1 - 2j, continuous=False)
    back = loads_system(dumps_system(s))
    np.testing.assert_array_equal(back.A, s.A)
    assert back.D == s.D and not back.continuous


def test_json_record_layout():
    import json

    rec = json.loads(dumps_system(DiagonalContinuousSystem([-1 + 2j], [1], [3], 0.5)))
    assert rec == {"kind": "diagonal-continuous", "n": 1, "a": [[-1.0, 2.0]], "b": [[1.0, 0.0]],
                   "c": [[3.0, 0.0]], "d": [0.5, 0.0]}


def test_json_rejects_unknown_kind():
    with pytest.raises(LTIError):
        loads_system('{"kind": "mimo", "a": [], "b": [], "c": [], "d": [0, 0]}')
