import numpy as np
import pytest

from qglauber.channels import (
    HADAMARD,
    S_GATE,
    VARIANTS,
    XMatrix,
    apply_kraus,
    build_classical_kraus,
    build_classical_transition,
    build_kraus,
    build_x_matrix,
    induced_transition,
    verify_cptp,
    verify_extension,
)

R = 1 / np.sqrt(2)

# written out by hand from the rule: agreeing neighbours are copied, else 50/50
T_EXPECTED = np.array([
    [1, 0, 1, 0, 0, 0, 0, 0],
    [0, .5, 0, .5, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 0],
    [0, .5, 0, .5, 0, 0, 0, 0],
    [0, 0, 0, 0, .5, 0, .5, 0],
    [0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, .5, 0, .5, 0],
    [0, 0, 0, 0, 0, 1, 0, 1],
])

X_EXPECTED = {
    "H0": R * np.array([[1, 1, 0, 0], [1, -1, 0, 0], [0, 0, 1, 1], [0, 0, 1, -1]]),
    "S0": R * np.array([[1, -1, 0, 0], [1, 1, 0, 0], [0, 0, 1, -1], [0, 0, 1, 1]]),
    "H1": R * np.array([[0, 0, 1, 1], [0, 0, 1, -1], [1, 1, 0, 0], [1, -1, 0, 0]]),
    "H2": 0.5 * np.array([[1, 1, 1, 1], [1, -1, 1, -1], [1, 1, -1, -1], [1, -1, -1, 1]]),
    "S2": 0.5 * np.array([[1, -1, -1, 1], [1, 1, -1, -1], [1, -1, 1, -1], [1, 1, 1, 1]]),
    "S1": R * np.array([[0, 0, 1, -1], [0, 0, 1, 1], [1, -1, 0, 0], [1, 1, 0, 0]]),
}


def test_transition_matrix():
    t = build_classical_transition()
    np.testing.assert_array_equal(t, T_EXPECTED)
    np.testing.assert_allclose(t.sum(axis=0), 1.0)
    assert not t.flags.writeable


def test_single_spin_gates():
    np.testing.assert_allclose(HADAMARD @ HADAMARD, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(S_GATE @ np.array([1.0, 0.0]), [R, R])


@pytest.mark.parametrize("variant", VARIANTS)
def test_x_matrices_match_tables(variant):
    np.testing.assert_allclose(build_x_matrix(variant).entries, X_EXPECTED[variant], atol=1e-15)


@pytest.mark.parametrize("variant", VARIANTS)
def test_variant_is_extension(variant):
    x = build_x_matrix(variant)
    k = build_kraus(x)
    ok, dev = verify_cptp(k)
    assert ok and dev <= 1e-12
    ok, dev = verify_extension(k)
    assert ok and dev <= 1e-12
    assert np.max(np.abs(x.extension_residuals())) <= 1e-12
    assert x.column_gram_deviation() <= 1e-12


def test_kraus_positions_h0():
    k = build_kraus(build_x_matrix("H0"))
    k1 = np.zeros((8, 8))
    k1[0, 0] = k1[7, 7] = 1
    k1[1, 1] = k1[1, 3] = k1[3, 1] = R
    k1[3, 3] = -R
    k1[4, 4] = k1[4, 6] = k1[6, 4] = R
    k1[6, 6] = -R
    k2 = np.zeros((8, 8))
    k2[0, 2] = k2[7, 5] = 1
    np.testing.assert_allclose(k.k1, k1, atol=1e-15)
    np.testing.assert_allclose(k.k2, k2, atol=1e-15)


def test_kraus_positions_h2():
    k = build_kraus(build_x_matrix("H2"))
    x = X_EXPECTED["H2"]
    lo, hi = [1, 3], [4, 6]
    assert k.k1[0, 0] == 1 and k.k1[7, 7] == 1
    assert k.k2[0, 2] == 1 and k.k2[7, 5] == 1
    np.testing.assert_allclose(k.k1[np.ix_(lo, lo)], x[:2, :2])
    np.testing.assert_allclose(k.k1[np.ix_(hi, hi)], x[2:, 2:])
    np.testing.assert_allclose(k.k2[np.ix_(lo, lo)], x[2:, :2])
    np.testing.assert_allclose(k.k2[np.ix_(hi, hi)], x[:2, 2:])
    # nothing else is populated
    mask = np.zeros((8, 8), bool)
    mask[np.ix_(lo, lo)] = mask[np.ix_(hi, hi)] = True
    k1, k2 = k.k1.copy(), k.k2.copy()
    k1[mask] = 0
    k2[mask] = 0
    k1[0, 0] = k1[7, 7] = k2[0, 2] = k2[7, 5] = 0
    assert not k1.any() and not k2.any()


def test_identity_x_fails_extension():
    k = build_kraus(XMatrix(np.eye(4), "identity"))
    ok, _ = verify_cptp(k)
    assert ok
    ok, dev = verify_extension(k)
    assert not ok and dev == pytest.approx(0.5)


def test_scaled_identity_fails_cptp():
    k = build_kraus(XMatrix(np.eye(4) * R, "half"))
    ok, dev = verify_cptp(k)
    assert not ok and dev > 0.1
    with pytest.raises(ValueError):
        verify_extension(k)


def test_x_matrix_validation():
    with pytest.raises(ValueError):
        XMatrix(np.eye(3))
    with pytest.raises(ValueError):
        XMatrix(np.full((4, 4), np.nan))
    with pytest.raises(ValueError):
        build_x_matrix("Q7")


def test_classical_kraus_set():
    ks = build_classical_kraus()
    assert len(ks.operators) == 12
    assert verify_cptp(ks)[0]
    np.testing.assert_allclose(induced_transition(ks), T_EXPECTED)


def test_classical_kraus_rejects_bad_input():
    t = T_EXPECTED.copy()
    t[0, 0] = 0.9
    with pytest.raises(ValueError):
        build_classical_kraus(t)
    t = T_EXPECTED.copy()
    t[0, 2], t[1, 2] = 1.5, -0.5
    with pytest.raises(ValueError):
        build_classical_kraus(t)


def test_classical_kraus_keeps_diagonal():
    rng = np.random.default_rng(1)
    p = rng.random(8)
    out = apply_kraus(build_classical_kraus(), np.diag(p / p.sum()))
    assert not np.any(out - np.diag(np.diagonal(out)))
    np.testing.assert_allclose(np.diagonal(out), T_EXPECTED @ (p / p.sum()))


@pytest.mark.parametrize("variant", VARIANTS)
def test_quantum_channel_on_basis_states(variant):
    k = build_kraus(build_x_matrix(variant))
    for j in range(8):
        rho = np.zeros((8, 8))
        rho[j, j] = 1
        out = apply_kraus(k, rho)
        np.testing.assert_allclose(np.diagonal(out), T_EXPECTED[:, j], atol=1e-15)
        assert np.trace(out) == pytest.approx(1.0)
