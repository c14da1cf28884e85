import numpy as np
import pytest

from qglauber.configspace import ChainGeometry, SpinConfig, domain_wall_count
from qglauber.exactdyn import initial_density_matrix, iter_states, kraus_for
from qglauber.observables import (
    TimeSeries,
    coherence,
    domain_wall_expectation,
    equilibrium_probability,
    half_time,
    hamming_classify,
    purity,
)


def pure(n, amps):
    psi = np.zeros(1 << n)
    for k, v in amps.items():
        psi[k] = v
    return np.outer(psi, psi)


def test_coherence_examples():
    r = 1 / np.sqrt(2)
    assert coherence(np.diag([0.3, 0.7])) == 0
    assert coherence(pure(1, {0: r, 1: r})) == pytest.approx(1.0)
    assert coherence(pure(3, {0b001: r, 0b011: r})) == pytest.approx(1.0)
    # negative entries count by modulus
    assert coherence(pure(1, {0: r, 1: -r})) == pytest.approx(1.0)


def test_purity_examples():
    d = 16
    assert purity(np.eye(d) / d) == pytest.approx(1 / d)
    rng = np.random.default_rng(0)
    v = rng.normal(size=d)
    v /= np.linalg.norm(v)
    assert purity(np.outer(v, v)) == pytest.approx(1.0)
    rho = np.zeros((d, d))
    rho[0, 0] = rho[-1, -1] = 0.5
    assert purity(rho) == pytest.approx(0.5)
    assert purity(np.diagonal(rho)) == pytest.approx(0.5)


def test_domain_wall_examples():
    assert domain_wall_expectation(pure(4, {0: 1.0})) == 0
    assert domain_wall_expectation(pure(4, {0b0101: 1.0})) == 4
    rho0 = initial_density_matrix(ChainGeometry(4))
    # 0101 and 1010 carry 4 walls, the other four configurations 2
    assert domain_wall_expectation(rho0) == pytest.approx(16 / 6)
    # enumeration oracle
    configs = [c for c in range(16) if bin(c).count("1") == 2]
    expected = np.mean([domain_wall_count(SpinConfig(c, 4)) for c in configs])
    assert domain_wall_expectation(np.diagonal(rho0)) == pytest.approx(expected)
    with pytest.raises(ValueError):
        domain_wall_expectation(rho0, ChainGeometry(6))


def test_equilibrium_probability_examples():
    assert equilibrium_probability(initial_density_matrix(ChainGeometry(6))) == 0
    assert equilibrium_probability(pure(4, {0: 1.0})) == 1
    rho = np.zeros((16, 16))
    rho[0, 0] = rho[15, 15] = 0.5
    assert equilibrium_probability(rho) == 1


def test_half_time_examples():
    assert half_time([0, 1, 2], [0, 0.4, 0.6]) == pytest.approx(1.5)
    assert half_time([0, 1, 2], [0.7, 0.8, 0.9]) == 0
    assert half_time([0, 1, 2], [0, 0.1, 0.2]) is None
    ts = TimeSeries([0, 1, 2], [0, 0.4, 0.6])
    assert half_time(ts) == pytest.approx(1.5)


def test_timeseries_validation():
    with pytest.raises(ValueError):
        TimeSeries([0, 0], [1, 2])
    with pytest.raises(ValueError):
        TimeSeries([0, 1], [1])
    with pytest.raises(ValueError):
        TimeSeries([0, 1], [1, 2], stderr=[0.1])
    assert TimeSeries([0, 1.5], [1, 2]).at(1.5) == 2


def test_grid_initial_state():
    n = 6
    grid = hamming_classify(initial_density_matrix(ChainGeometry(n)))
    nz = np.argwhere(grid.mean_abs > 0)
    assert [tuple(x) for x in nz] == [(0, n // 2, n // 2)]
    assert grid.count.shape == (4, n + 1, n + 1)


def test_grid_population_and_constraints():
    n = 5
    rng = np.random.default_rng(1)
    a = rng.normal(size=(32, 32))
    rho = a @ a.T
    grid = hamming_classify(rho, c_max=None)
    assert grid.count.sum() == 2 ** (2 * n)
    for c in range(n + 1):
        for x in range(n + 1):
            for y in range(n + 1):
                if (x + y + c) % 2 or abs(x - y) > c:
                    assert grid.count[c, x, y] == 0
    assert np.all(grid.count[0] == np.diag(np.diagonal(grid.count[0])))


def test_grid_means_brute_force():
    n = 4
    rng = np.random.default_rng(4)
    a = rng.normal(size=(16, 16))
    rho = a + a.T
    grid = hamming_classify(rho, c_max=2)
    sums = {}
    for i in range(16):
        for j in range(16):
            c = bin(i ^ j).count("1")
            if c > 2:
                continue
            key = (c, n - bin(i).count("1"), n - bin(j).count("1"))
            sums.setdefault(key, []).append(rho[i, j])
    for (c, x, y), vals in sums.items():
        assert grid.count[c, x, y] == len(vals)
        assert grid.mean_abs[c, x, y] == pytest.approx(np.mean(np.abs(vals)))
        assert grid.mean_real[c, x, y] == pytest.approx(np.mean(vals))


def test_grid_diagonal_input():
    grid = hamming_classify(np.full(16, 1 / 16))
    assert not grid.mean_abs[1:].any()
    rows = list(grid.rows())
    assert all(r[3] == 0 for r in rows if r[0] > 0)
    assert sum(r[5] for r in rows) == grid.count.sum()


def test_classical_evolution_never_coherent():
    g = ChainGeometry(6)
    for _, state in iter_states(initial_density_matrix(g), kraus_for("classical"), 5):
        assert coherence(state) == 0


@pytest.mark.parametrize("variant", ["S0", "H0", "classical"])
def test_peq_non_decreasing(variant):
    g = ChainGeometry(8)
    mode = "classical" if variant == "classical" else "quantum"
    peq = [equilibrium_probability(s)
           for _, s in iter_states(initial_density_matrix(g), kraus_for(variant), 15, mode)]
    assert np.all(np.diff(peq) >= -1e-13)


def test_antidiagonal_asymmetry_measure():
    n = 4
    grid = hamming_classify(np.eye(16) / 16, c_max=1)
    grid.mean_abs[1, 1, 2] = 0.3
    grid.mean_abs[1, 2, 3] = 0.3  # (N-b, N-a) of (1, 2)
    assert grid.antidiagonal_asymmetry(1) == 0
    grid.mean_abs[1, 2, 3] = 0.1
    assert grid.antidiagonal_asymmetry(1) == pytest.approx(0.2)
    assert grid.n_sites == n
