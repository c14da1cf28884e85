"""
Local channels and their classical shadow
=========================================

The zero-temperature rule updates one spin from its two neighbours. Here we
build the 8x8 transition matrix, the six quantum extensions, and check that
measuring before and after each channel gives the classical rule back.
"""

import numpy as np

from qglauber.channels import (
    VARIANTS,
    build_classical_kraus,
    build_classical_transition,
    build_kraus,
    build_x_matrix,
    induced_transition,
    verify_cptp,
    verify_extension,
)

np.set_printoptions(precision=3, suppress=True)

# the classical map: column j is the distribution of outcomes for input j
T = build_classical_transition()
print(T)

# the incoherent embedding needs one rank-one operator per nonzero entry
print("classical Kraus operators:", len(build_classical_kraus().operators))

###############################################################################
# Every variant is a 4x4 matrix X scattered into two 8x8 Kraus operators.

for v in VARIANTS:
    k = build_kraus(build_x_matrix(v))
    cptp = verify_cptp(k)[1]
    ext = verify_extension(k)[1]
    print(f"{v}: CPTP deviation {cptp:.1e}, extension deviation {ext:.1e}")

###############################################################################
# The identity X is trace preserving but never randomises the middle spin,
# so its classical shadow is wrong.

k = build_kraus(np.eye(4))
print(induced_transition(k) - T)
