"""Single-photon state algebra on N discrete pixel modes.

A pure single-photon state is a real amplitude vector over the pixels; a
general hidden state is a density matrix ``U``. The bucket-detector
coincidence probability after a balanced beam splitter is

    p = (||I||^2 Tr U - I^T U I) / 2

which serves as the reference every model forward pass is checked against.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConstraintViolation, LengthMismatch

NORM_TOL = 1e-9


def as_vector(a):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 1:
        raise LengthMismatch(f"expected a 1-d amplitude vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ConstraintViolation("amplitudes must be finite")
    return a


def is_unit(a, tol=1e-12):
    return abs(np.linalg.norm(a) - 1.0) <= tol


def inner(a, b):
    a, b = as_vector(a), as_vector(b)
    if a.shape != b.shape:
        raise LengthMismatch(f"lengths differ: {a.size} vs {b.size}")
    return float(a @ b)


@dataclass(frozen=True)
class DensityMatrix:
    """Real symmetric positive semidefinite matrix on the pixel modes."""

    entries: np.ndarray

    def __post_init__(self):
        U = np.asarray(self.entries, dtype=np.float64)
        if U.ndim != 2 or U.shape[0] != U.shape[1]:
            raise LengthMismatch(f"density matrix must be square, got {U.shape}")
        object.__setattr__(self, "entries", U)

    @property
    def dim(self):
        return self.entries.shape[0]

    @cached_property
    def trace(self):
        return float(np.trace(self.entries))

    def is_symmetric(self, tol=1e-12):
        return bool(np.max(np.abs(self.entries - self.entries.T), initial=0.0) <= tol)

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.entries).min())

    def is_psd(self, floor=-1e-10):
        return self.min_eigenvalue() >= floor

    def rank(self, tol=1e-10):
        return int(np.sum(np.linalg.eigvalsh(self.entries) > tol))


def _rows(W):
    W = np.asarray(W, dtype=np.float64)
    if W.ndim == 1:
        W = W[None, :]
    if W.ndim != 2:
        raise LengthMismatch(f"hidden patterns must be an M x N matrix, got {W.shape}")
    return W


def density_from_mixture(W, w):
    """``U = sum_i w_i W_i W_i^T`` for unit rows and probability weights."""
    W = _rows(W)
    w = as_vector(w)
    if w.size != W.shape[0]:
        raise LengthMismatch(f"{w.size} weights for {W.shape[0]} patterns")
    if np.any(w < 0) or abs(w.sum() - 1.0) > NORM_TOL:
        raise ConstraintViolation("mixture weights must be non-negative and sum to 1")
    norms = np.linalg.norm(W, axis=1)
    if np.any(np.abs(norms - 1.0) > NORM_TOL):
        raise ConstraintViolation("mixture patterns must have unit norm")
    return DensityMatrix((W.T * w) @ W)


def density_from_superposition(W, w):
    """Rank-one ``U = v v^T`` with ``v = sum_i w_i W_i``.

    The coherent sum must already be normalized; nothing is rescaled here.
    """
    W = _rows(W)
    w = as_vector(w)
    if w.size != W.shape[0]:
        raise LengthMismatch(f"{w.size} amplitudes for {W.shape[0]} patterns")
    v = w @ W
    trace = float(v @ v)
    if abs(trace - 1.0) > NORM_TOL:
        raise ConstraintViolation(f"superposition trace is {trace:.12g}, expected 1")
    return DensityMatrix(np.outer(v, v))


def coincidence_general(I, U, C=None):
    """Coincidence probability for input amplitudes ``I`` and hidden ``U``.

    ``C`` defaults to ``||I||^2 Tr U``; passing it overrides the
    normalization term (e.g. to model losses).
    """
    I = as_vector(I)
    if not isinstance(U, DensityMatrix):
        U = DensityMatrix(U)
    if U.dim != I.size:
        raise LengthMismatch(f"input has {I.size} modes, density matrix {U.dim}")
    if C is None:
        C = float(I @ I) * U.trace
    return 0.5 * (C - float(I @ U.entries @ I))
