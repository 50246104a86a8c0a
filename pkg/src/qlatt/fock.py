"""Fock-space machinery for the ordered-product (Jordan-Wigner) CAR representation.

Modes are numbered site-major, ``mode = site_index * n_spins + spin_index``.
Basis index bits follow Kronecker order: mode 0 is the most significant bit,
so a single site occupies a contiguous ``2**n_spins`` block and site 0 is the
leftmost tensor factor.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

Factor = tuple[int, bool]  # (mode, dagger)


def popcount(x: np.ndarray) -> np.ndarray:
    return np.bitwise_count(np.asarray(x, dtype=np.int64)).astype(np.int64)


def monomial(factors: Sequence[Factor], n_modes: int) -> sp.csr_matrix:
    """Sparse matrix of the ordered product ``f_1 f_2 ... f_m`` of CAR generators.

    The rightmost factor acts first. Each generator carries the string
    ``(-1)**(occupation of all lower modes)``.
    """
    dim = 1 << n_modes
    cols = np.arange(dim, dtype=np.int64)
    states = cols.copy()
    amp = np.ones(dim)
    for mode, dagger in reversed(list(factors)):
        if not 0 <= mode < n_modes:
            raise ValueError(f"mode {mode} outside 0..{n_modes - 1}")
        bit = 1 << (n_modes - 1 - mode)
        higher = (dim - 1) & ~((bit << 1) - 1)
        occupied = (states & bit) != 0
        allowed = occupied != bool(dagger)
        sign = 1 - 2 * (popcount(states & higher) & 1)
        amp = amp * allowed * sign
        states = states ^ bit
    keep = amp != 0
    return sp.csr_matrix((amp[keep], (states[keep], cols[keep])), shape=(dim, dim))


def number_diagonal(n_modes: int, modes: Iterable[int] | None = None) -> np.ndarray:
    """Occupation count per basis state, optionally restricted to ``modes``."""
    dim = 1 << n_modes
    states = np.arange(dim, dtype=np.int64)
    if modes is None:
        return popcount(states).astype(float)
    mask = 0
    for m in modes:
        mask |= 1 << (n_modes - 1 - m)
    return popcount(states & mask).astype(float)


def parity_diagonal(n_modes: int) -> np.ndarray:
    return 1.0 - 2.0 * (number_diagonal(n_modes) % 2)


def matrix_unit_factors(i: int, j: int, n_modes: int) -> list[Factor]:
    """Ordered product of generators proportional to the matrix unit ``|i><j|``.

    Per mode the factor is ``n``, ``1 - n``, ``c^*`` or ``c`` depending on the
    (row bit, column bit) pair; ``1 - n`` is written ``c c^*``.
    """
    out: list[Factor] = []
    for m in range(n_modes):
        bit = 1 << (n_modes - 1 - m)
        bi, bj = bool(i & bit), bool(j & bit)
        if bi and bj:
            out += [(m, True), (m, False)]
        elif not bi and not bj:
            out += [(m, False), (m, True)]
        elif bi:
            out.append((m, True))
        else:
            out.append((m, False))
    return out


def expand_matrix(matrix: np.ndarray, n_modes: int, tol: float = 0.0):
    """Write a local matrix as a sum of ordered CAR monomials.

    Returns a list of ``(coefficient, factors)``. Every entry ``(i, j)`` maps to
    one monomial; the monomial is odd exactly when ``i`` and ``j`` differ in an
    odd number of occupation bits.
    """
    matrix = np.asarray(matrix)
    dim = 1 << n_modes
    if matrix.shape != (dim, dim):
        raise ValueError(f"expected a {dim}x{dim} matrix, got {matrix.shape}")
    terms = []
    rows, cols = np.nonzero(np.abs(matrix) > tol)
    for i, j in zip(rows.tolist(), cols.tolist()):
        factors = matrix_unit_factors(i, j, n_modes)
        sign = monomial(factors, n_modes)[i, j]
        terms.append((complex(matrix[i, j]) / sign, tuple(factors)))
    return terms


def is_even_factors(factors: Sequence[Factor]) -> bool:
    return len(factors) % 2 == 0
