"""
Unravelling into trajectories
=============================

Each trajectory is a pure state that follows one Kraus branch per step.
Averages over the ensemble reproduce the exact density matrix, but the L1
coherence is a sum of moduli, so sampling noise in the many small
off-diagonal entries pushes the plain estimate up.
"""

from qglauber.configspace import ChainGeometry
from qglauber.exactdyn import initial_density_matrix, iter_states, kraus_for
from qglauber.observables import coherence, equilibrium_probability
from qglauber.trajdyn import EnsembleConfig, EnsembleRun, estimate_all, estimate_coherence

n = 8
g = ChainGeometry(n)
exact = {t: (coherence(s), equilibrium_probability(s))
         for t, s in iter_states(initial_density_matrix(g), kraus_for("S0"), 5)}

for m in (500, 5000, 50000):
    cfg = EnsembleConfig(n_traj=m, seed=1, n_mcs=5, snapshot_schedule=[1, 5])
    for snap in EnsembleRun(cfg, "S0", g):
        est = estimate_all(snap, ("coherence", "peq"))
        c_ex, p_ex = exact[snap.t_mcs]
        print(f"M={m:6d} t={snap.t_mcs:g}: Peq {est['peq'][0]:.4f} +- {est['peq'][1]:.4f} "
              f"(exact {p_ex:.4f}); C {est['coherence'][0]:.3f} "
              f"debiased {estimate_coherence(snap, debias=True):.3f} (exact {c_ex:.3f})")
