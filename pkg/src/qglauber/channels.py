"""Local three-spin channels for zero-temperature Glauber relaxation.

The three-spin neighbourhood of site ``q`` is encoded as a local index
``4*s(q+1) + 2*s(q) + s(q-1)``, so the local basis ``|000>, |001>, ..., |111>``
is plain binary counting and the middle bit is the updated spin.

The quantum extensions are parametrised by a real 4x4 matrix ``X`` whose
2x2 blocks are scattered into two 8x8 Kraus operators. Six named choices of
``X`` are built from the single-spin gates ``H`` and ``S = sigma_x H``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TOL = 1e-12

# Local three-spin indices that host the 2x2 blocks of X: (|001>, |011>) and
# (|100>, |110>), i.e. the configurations whose neighbours disagree.
BLOCK_INDICES = (1, 3, 4, 6)

VARIANTS = ("H0", "H1", "H2", "S2", "S1", "S0")

HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]])
S_GATE = SIGMA_X @ HADAMARD
IDENTITY_2 = np.eye(2)

for _m in (HADAMARD, SIGMA_X, S_GATE, IDENTITY_2):
    _m.setflags(write=False)


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class XMatrix:
    entries: np.ndarray
    variant: str = "custom"

    def __post_init__(self):
        a = np.asarray(self.entries)
        if a.shape != (4, 4):
            raise ValueError(f"X must be 4x4, got shape {a.shape}")
        if np.iscomplexobj(a):
            if np.any(a.imag != 0):
                raise ValueError("X must be real")
            a = a.real
        if not np.all(np.isfinite(a)):
            raise ValueError("X has non-finite entries")
        object.__setattr__(self, "entries", _frozen(a))

    def column_gram_deviation(self) -> float:
        """max |<v_j|v_k> - delta_jk| over the columns of X."""
        x = self.entries
        return float(np.max(np.abs(x.T @ x - np.eye(4))))

    def extension_residuals(self) -> np.ndarray:
        """The eight sums ``|X_1c|^2+|X_3c|^2`` and ``|X_2c|^2+|X_4c|^2`` minus 1/2.

        Returned as a (2, 4) array: row 0 pairs rows (1, 3), row 1 pairs rows
        (2, 4) of X; the column axis is c = 1..4.
        """
        x2 = self.entries ** 2
        return np.stack([x2[0] + x2[2], x2[1] + x2[3]]) - 0.5


@dataclass(frozen=True)
class KrausPair:
    k1: np.ndarray
    k2: np.ndarray
    label: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "k1", _frozen(self.k1))
        object.__setattr__(self, "k2", _frozen(self.k2))

    @property
    def operators(self) -> tuple[np.ndarray, ...]:
        return (self.k1, self.k2)


@dataclass(frozen=True)
class ClassicalKrausSet:
    """Rank-one operators ``sqrt(T_ij) |i><j|`` of an incoherent channel."""
    operators: tuple[np.ndarray, ...]
    positions: tuple[tuple[int, int], ...] = field(default=())
    label: str = "classical"


def build_classical_transition() -> np.ndarray:
    """The 8x8 column-stochastic matrix of the local zero-temperature rule.

    If the two neighbours agree the middle spin copies them; otherwise it is
    set to 0 or 1 with probability 1/2 each.
    """
    t = np.zeros((8, 8))
    for j in range(8):
        left, mid, right = (j >> 2) & 1, (j >> 1) & 1, j & 1
        base = j & 0b101
        if left == right:
            t[base | (left << 1), j] = 1.0
        else:
            t[base, j] = 0.5
            t[base | 0b010, j] = 0.5
    return _frozen(t)


def build_x_matrix(variant: str) -> XMatrix:
    """One of the six named X matrices, each a tensor product of 2x2 gates."""
    factors = {
        "H0": (IDENTITY_2, HADAMARD),
        "S0": (IDENTITY_2, S_GATE),
        "H1": (SIGMA_X, HADAMARD),
        "H2": (HADAMARD, HADAMARD),
        "S2": (S_GATE, S_GATE),
        "S1": (SIGMA_X, S_GATE),
    }
    if variant not in factors:
        raise ValueError(
            f"unknown variant {variant!r}; expected one of {', '.join(VARIANTS)}")
    a, b = factors[variant]
    return XMatrix(np.kron(a, b), variant)


def build_kraus(x) -> KrausPair:
    """Scatter X into the Kraus pair (K1, K2) acting on three spins.

    K1 keeps |000> and |111> and applies the diagonal 2x2 blocks of X inside
    the two disagreeing-neighbour sectors; K2 maps |010> -> |000> and
    |101> -> |111> and applies the off-diagonal blocks.
    """
    if not isinstance(x, XMatrix):
        x = XMatrix(x)
    e = x.entries
    lo = list(BLOCK_INDICES[:2])
    hi = list(BLOCK_INDICES[2:])
    k1 = np.zeros((8, 8))
    k2 = np.zeros((8, 8))
    k1[0, 0] = 1.0
    k1[7, 7] = 1.0
    k2[0, 2] = 1.0
    k2[7, 5] = 1.0
    k1[np.ix_(lo, lo)] = e[0:2, 0:2]
    k1[np.ix_(hi, hi)] = e[2:4, 2:4]
    k2[np.ix_(lo, lo)] = e[2:4, 0:2]
    k2[np.ix_(hi, hi)] = e[0:2, 2:4]
    return KrausPair(k1, k2, x.variant)


def kraus_for_variant(variant: str) -> KrausPair:
    return build_kraus(build_x_matrix(variant))


def verify_cptp(k, tol: float = TOL) -> tuple[bool, float]:
    """Check ``sum_a K_a^dag K_a = 1``; returns (passed, max deviation)."""
    ops = k.operators
    dim = ops[0].shape[1]
    acc = np.zeros((dim, dim), dtype=np.result_type(*ops))
    for op in ops:
        acc = acc + op.conj().T @ op
    dev = float(np.max(np.abs(acc - np.eye(dim))))
    return dev <= tol, dev


def induced_transition(k) -> np.ndarray:
    """Classical map seen through complete measurements before and after.

    Entry (i, j) is ``sum_a |<i|K_a|j>|^2``, the diagonal of the channel
    output for input ``|j><j|``.
    """
    return sum(np.abs(op) ** 2 for op in k.operators)


def verify_extension(k, t=None, tol: float = TOL) -> tuple[bool, float]:
    """Check that measure-channel-measure reproduces the transition matrix ``t``."""
    ok, dev = verify_cptp(k, tol)
    if not ok:
        raise ValueError(
            f"Kraus operators are not trace preserving (deviation {dev:.3g})")
    if t is None:
        t = build_classical_transition()
    dev = float(np.max(np.abs(induced_transition(k) - t)))
    return dev <= tol, dev


def build_classical_kraus(t=None) -> ClassicalKrausSet:
    """Incoherent Kraus set with one rank-one operator per nonzero ``T_ij``."""
    if t is None:
        t = build_classical_transition()
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("transition matrix has negative entries")
    if np.max(np.abs(t.sum(axis=0) - 1.0)) > TOL:
        raise ValueError("transition matrix is not column stochastic")
    ops, pos = [], []
    for i, j in zip(*np.nonzero(t)):
        op = np.zeros_like(t)
        op[i, j] = np.sqrt(t[i, j])
        op.setflags(write=False)
        ops.append(op)
        pos.append((int(i), int(j)))
    return ClassicalKrausSet(tuple(ops), tuple(pos))


def apply_kraus(k, rho: np.ndarray) -> np.ndarray:
    """Dense ``sum_a K_a rho K_a^dag`` on a small space."""
    return sum(op @ rho @ op.conj().T for op in k.operators)
