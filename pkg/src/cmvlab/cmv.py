"""Finite CMV truncations as explicit unitary matrices.

These pentadiagonal matrices are the factored product of two block-diagonal
unitaries built from 2x2 blocks

    Xi_k = [[conj(alpha_k), rho_k], [rho_k, -alpha_k]],

one factor holding the even-indexed blocks, the other a leading 1x1 identity
plus the odd-indexed blocks.  Replacing alpha_{n-1} by the unimodular
e^{i eta} decouples the top-left n x n corner, which is what gets built
here.  The dense matrix exists for oracle tests and resolvent computation;
the statistics pipelines never form it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .sampling import CoefficientSequence


@dataclass
class PolyPair:
    """Value of the degree-k orthogonal polynomial and its reversal."""

    phi: complex
    phi_star: complex
    degree: int


def _factor(alphas_ext, n, start):
    """Block-diagonal factor with blocks Xi_k at k = start, start+2, ...

    A block that would overrun row n-1 is the boundary block k = n-1 and
    degenerates to the scalar conj(alpha_{n-1}) = e^{-i eta}.
    """
    out = np.zeros((n, n), dtype=np.complex128)
    if start == 1:
        out[0, 0] = 1.0
    for k in range(start, n, 2):
        a = alphas_ext[k]
        if k + 1 < n:
            rho = np.sqrt(max(0.0, 1.0 - abs(a) ** 2))
            out[k, k] = np.conj(a)
            out[k, k + 1] = rho
            out[k + 1, k] = rho
            out[k + 1, k + 1] = -a
        else:
            out[k, k] = np.conj(a)
    return out


def build_truncation(seq: CoefficientSequence) -> np.ndarray:
    """The n x n unitary truncation with boundary condition eta."""
    n = seq.n
    alphas_ext = np.append(seq.alphas, np.exp(1j * seq.eta))
    return _factor(alphas_ext, n, 0) @ _factor(alphas_ext, n, 1)


def szego_evaluate(seq: CoefficientSequence, z: complex, k: int) -> PolyPair:
    """Forward recurrence for (Phi_k(z), Phi*_k(z)) from Phi_0 = Phi*_0 = 1."""
    if not 0 <= k <= seq.n - 1:
        raise ValueError("need 0 <= k <= n-1")
    phi = phi_star = 1.0 + 0.0j
    z = complex(z)
    for j in range(k):
        a = seq.alphas[j]
        phi, phi_star = (z * phi - np.conj(a) * phi_star,
                         phi_star - a * z * phi)
    return PolyPair(phi=complex(phi), phi_star=complex(phi_star), degree=k)


def char_poly_eval(seq: CoefficientSequence, z: complex) -> complex:
    """det(z - truncation) = z Phi_{n-1}(z) - e^{-i eta} Phi*_{n-1}(z)."""
    pair = szego_evaluate(seq, z, seq.n - 1)
    return complex(z * pair.phi - np.exp(-1j * seq.eta) * pair.phi_star)


def unitarity_defect(matrix: np.ndarray) -> float:
    """max |U* U - I| entry, the assembly health check."""
    n = matrix.shape[0]
    return float(np.max(np.abs(matrix.conj().T @ matrix - np.eye(n))))


def dump_matrix_csv(matrix: np.ndarray, path) -> None:
    """Debug dump as (row, col, re, im) rows, nonzero entries only."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "col", "re", "im"])
        rows, cols = np.nonzero(matrix)
        for r, c in zip(rows, cols):
            v = matrix[r, c]
            writer.writerow([int(r), int(c), repr(v.real), repr(v.imag)])
