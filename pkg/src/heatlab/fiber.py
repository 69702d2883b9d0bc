"""Exterior algebra of the (0,q) fiber.

Basis forms are indexed by strictly increasing multi-indices J of
{0, ..., n-1} (0-based internally, 1-based in labels), ordered
lexicographically.  All operators are dense complex matrices acting on
coefficient vectors in that basis.
"""

from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np

from .errors import ArgumentError


@lru_cache(maxsize=None)
def multi_indices(n: int, q: int) -> tuple:
    """Strictly increasing q-element multi-indices of {0..n-1}, lexicographic."""
    if not 0 <= q <= n:
        raise ArgumentError(f"q={q} outside [0, {n}]")
    return tuple(combinations(range(n), q))


@lru_cache(maxsize=None)
def index_position(n: int, q: int) -> dict:
    """Inverse of multi_indices: multi-index tuple -> basis position."""
    return {J: a for a, J in enumerate(multi_indices(n, q))}


def fiber_dim(n: int, q: int) -> int:
    return comb(n, q)


def index_label(J) -> str:
    """1-based label for CSV output, e.g. () -> '', (0, 2) -> '1-3'."""
    return "-".join(str(j + 1) for j in J)


def wedge_sign(i: int, J: tuple):
    """Sign and resulting index of e^i wedge e^J, or (0, None) if i in J."""
    if i in J:
        return 0, None
    k = sum(1 for j in J if j < i)
    return (-1) ** k, tuple(sorted(J + (i,)))


def contract_sign(j: int, J: tuple):
    """Sign and resulting index of the interior product iota_j e^J, or (0, None)."""
    if j not in J:
        return 0, None
    k = J.index(j)
    return (-1) ** k, tuple(x for x in J if x != j)


@lru_cache(maxsize=None)
def wedge_matrix(n: int, q: int, i: int) -> np.ndarray:
    """Matrix of e^i wedge . : Lambda^q -> Lambda^{q+1}."""
    rows, cols = multi_indices(n, q + 1), multi_indices(n, q)
    pos = index_position(n, q + 1)
    W = np.zeros((len(rows), len(cols)), dtype=complex)
    for a, J in enumerate(cols):
        s, K = wedge_sign(i, J)
        if s:
            W[pos[K], a] = s
    return W


@lru_cache(maxsize=None)
def contract_matrix(n: int, q: int, j: int) -> np.ndarray:
    """Matrix of the interior product iota_j : Lambda^q -> Lambda^{q-1}."""
    cols = multi_indices(n, q)
    pos = index_position(n, q - 1) if q >= 1 else {}
    C = np.zeros((fiber_dim(n, q - 1) if q >= 1 else 0, len(cols)), dtype=complex)
    for a, J in enumerate(cols):
        s, K = contract_sign(j, J)
        if s:
            C[pos[K], a] = s
    return C


@lru_cache(maxsize=None)
def wedge_contract(n: int, q: int, i: int, j: int) -> np.ndarray:
    """Matrix of e^i wedge iota_j on Lambda^q (the curvature action building block)."""
    if q == 0:
        return np.zeros((1, 1), dtype=complex)
    return wedge_matrix(n, q - 1, i) @ contract_matrix(n, q, j)


def projection_contains(n: int, q: int, j: int) -> np.ndarray:
    """Diagonal projection onto basis forms whose multi-index contains j."""
    return wedge_contract(n, q, j, j)


def twist_eigenvalues(lambdas, q: int) -> np.ndarray:
    """Diagonal of sum_j lambda_j e^j wedge iota_j: entry sum_{j in J} lambda_j per J."""
    lam = np.asarray(lambdas, dtype=float)
    return np.array([sum(lam[list(J)]) for J in multi_indices(len(lam), q)])


def exterior_power_matrix(V: np.ndarray, q: int) -> np.ndarray:
    """Induced action of a matrix V on Lambda^q: entries are q x q minors of V."""
    n = V.shape[0]
    idx = multi_indices(n, q)
    M = np.empty((len(idx), len(idx)), dtype=complex)
    for a, J in enumerate(idx):
        for b, K in enumerate(idx):
            M[a, b] = np.linalg.det(V[np.ix_(J, K)]) if q > 0 else 1.0
    return M
