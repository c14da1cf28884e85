"""Quantum extensions of zero-temperature Glauber dynamics on a periodic Ising chain."""

__version__ = "0.1.0"

from .channels import (  # noqa: E402
    VARIANTS,
    build_classical_kraus,
    build_classical_transition,
    build_kraus,
    build_x_matrix,
    kraus_for_variant,
    verify_cptp,
    verify_extension,
)
from .configspace import ChainGeometry, SpinConfig  # noqa: E402
from .exactdyn import initial_density_matrix, iter_states, run_mcs  # noqa: E402
from .observables import (  # noqa: E402
    coherence,
    domain_wall_expectation,
    equilibrium_probability,
    half_time,
    hamming_classify,
    purity,
)

__all__ = [
    "VARIANTS", "ChainGeometry", "SpinConfig", "build_classical_kraus",
    "build_classical_transition", "build_kraus", "build_x_matrix", "coherence",
    "domain_wall_expectation", "equilibrium_probability", "half_time",
    "hamming_classify", "initial_density_matrix", "iter_states", "kraus_for_variant",
    "purity", "run_mcs", "verify_cptp", "verify_extension",
]
