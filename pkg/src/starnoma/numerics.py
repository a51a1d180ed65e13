"""Small complex linear-algebra helpers and seeded random streams.

Matrices are plain ``numpy`` arrays of dtype ``complex128`` with two
dimensions.  Vectors passed around the simulator are column matrices
(``n x 1``) unless a function says otherwise.
"""
from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Raised when operands are not conformable."""


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    elif m.ndim == 1:
        m = m.reshape(-1, 1)
    elif m.ndim != 2:
        raise ShapeError(f"expected at most 2 dimensions, got {m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def matmul(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def hermitian(a) -> np.ndarray:
    return as_matrix(a).conj().T


def frobenius_norm(a) -> float:
    m = as_matrix(a)
    return float(np.sqrt(np.sum(m.real**2 + m.imag**2)))


def diag_from_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128).ravel()
    if v.size == 0:
        raise ShapeError("diagonal needs at least one entry")
    return np.diag(v)


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 stream; equal seeds give bit-identical draws."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def child_seeds(seed: int, n: int) -> list[int]:
    """Derive ``n`` independent 64-bit seeds from a parent seed."""
    ss = np.random.SeedSequence(int(seed))
    return [int(c.generate_state(1, np.uint64)[0]) for c in ss.spawn(n)]


def sample_cn01(rng: np.random.Generator, rows: int, cols: int = 1) -> np.ndarray:
    """i.i.d. CN(0, 1) entries (real and imaginary parts each of variance 1/2)."""
    z = rng.standard_normal((rows, cols, 2))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)
