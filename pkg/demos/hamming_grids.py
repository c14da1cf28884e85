"""
Where the coherence lives
=========================

Matrix elements rho_ij are grouped by the distances of i and j to the
all-down state and by their mutual distance. After one Monte Carlo step the
S0 grids are mirror symmetric about the anti-diagonal; H0 breaks that.
"""

from qglauber.configspace import ChainGeometry
from qglauber.exactdyn import initial_density_matrix, iter_states, kraus_for
from qglauber.observables import hamming_classify

n = 8
for variant in ("S0", "H0"):
    for t, state in iter_states(initial_density_matrix(ChainGeometry(n)), kraus_for(variant), 1):
        pass
    grid = hamming_classify(state, c_max=3)
    print(variant, "asymmetry c=2: %.1e  c=3: %.1e" % (grid.antidiagonal_asymmetry(2),
                                                       grid.antidiagonal_asymmetry(3)))
    # the c=1 grid, rows a (up spins of i), columns b
    for a in range(n + 1):
        print("   " + " ".join(f"{grid.mean_abs[1, a, b]:.1e}" for b in range(n + 1)))
