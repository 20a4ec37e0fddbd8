"""Dense symmetric-matrix primitives: Gaussian ensembles, eigensolvers,
entrywise nonlinearities and norms.

Matrices are plain float64 ``ndarray``s.  Constructors here guarantee
bit-exact symmetry (A equals A.T entry for entry), which downstream code
relies on for reproducibility checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import eigsh

from .errors import SolverFailureError
from .streams import NoiseStream

# Above this size the dense solver gives way to a Lanczos iteration.
DENSE_EIG_LIMIT = 512
EIG_RESIDUAL_TOL = 1e-10


@dataclass
class EigenPair:
    """Eigenvalue with a unit-norm eigenvector, sign-fixed for determinism."""

    value: float
    vector: np.ndarray

    def residual(self, a: np.ndarray) -> float:
        return float(np.linalg.norm(a @ self.vector - self.value * self.vector))


@dataclass
class PowerIterationResult:
    """Rayleigh-quotient estimate from plain power iteration.

    Unlike :class:`EigenPair` there is no residual guarantee; ``degenerate``
    flags the zero-matrix corner where the start vector is returned as is.
    """

    value: float
    vector: np.ndarray
    degenerate: bool = False


def sample_goe(n: int, stream: NoiseStream) -> np.ndarray:
    """Symmetric Gaussian matrix: off-diagonal N(0,1), diagonal N(0,2)."""
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    a = stream.normal((n, n))
    return (a + a.T) / np.sqrt(2.0)


def goe_process_increment(n: int, dt: float, stream: NoiseStream) -> np.ndarray:
    """Increment of the symmetric Gaussian process over a step of length dt.

    Summing increments over a grid reproduces the process marginal
    sqrt(t) * GOE(n) at total time t.
    """
    if dt <= 0:
        raise ValueError(f"time step must be positive, got {dt}")
    return np.sqrt(dt) * sample_goe(n, stream)


def symmetrize(y: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """(y + y.T) / scale; callers working at observation time t pass 2*sqrt(t)."""
    if y.ndim != 2 or y.shape[0] != y.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {y.shape}")
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    return (y + y.T) / scale


def _fix_sign(vec: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude coordinate positive (ties: lowest index)."""
    i = int(np.argmax(np.abs(vec)))
    return -vec if vec[i] < 0 else vec


def top_eigenpairs(a: np.ndarray, r: int) -> list[EigenPair]:
    """Top-r eigenpairs of a symmetric matrix, sorted by descending eigenvalue.

    Dense LAPACK path up to ``DENSE_EIG_LIMIT``; Lanczos (with a residual
    check against ``EIG_RESIDUAL_TOL``, scaled by |eigenvalue|) above it.
    """
    n = a.shape[0]
    if not 1 <= r <= n:
        raise ValueError(f"need 1 <= r <= {n}, got r={r}")
    if n <= DENSE_EIG_LIMIT:
        if r == n:
            w, v = sla.eigh(a)
        else:
            w, v = sla.eigh(a, subset_by_index=[n - r, n - 1])
    else:
        # Deterministic start vector keeps the iteration replayable.
        v0 = np.full(n, 1.0 / np.sqrt(n))
        try:
            w, v = eigsh(a, k=r, which="LA", v0=v0, maxiter=10 * n, tol=0)
        except Exception as exc:  # ArpackNoConvergence and friends
            raise SolverFailureError(float("nan"), EIG_RESIDUAL_TOL) from exc
    order = np.argsort(w)[::-1]
    pairs = []
    for idx in order:
        vec = _fix_sign(np.ascontiguousarray(v[:, idx]))
        pair = EigenPair(float(w[idx]), vec)
        if n > DENSE_EIG_LIMIT:
            res = pair.residual(a)
            tol = EIG_RESIDUAL_TOL * max(1.0, abs(pair.value))
            if res > tol:
                raise SolverFailureError(res, tol)
        pairs.append(pair)
    return pairs


def power_iteration(a: np.ndarray, iters: int, stream: NoiseStream) -> PowerIterationResult:
    """iters multiply-normalize steps from a random Gaussian start vector."""
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    n = a.shape[0]
    v = stream.normal(n)
    v = v / np.linalg.norm(v)
    for _ in range(iters):
        w = a @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return PowerIterationResult(0.0, v, degenerate=True)
        v = w / nw
    value = float(v @ (a @ v))
    return PowerIterationResult(value, v)


def soft_threshold(a: np.ndarray, s: float) -> np.ndarray:
    """Entrywise shrinkage (|a| - s)_+ * sign(a); preserves symmetry."""
    if s < 0:
        raise ValueError(f"threshold must be >= 0, got {s}")
    return np.sign(a) * np.maximum(np.abs(a) - s, 0.0)


def norms(a: np.ndarray) -> tuple[float, float]:
    """(Frobenius norm, operator norm) for a symmetric matrix."""
    fro = float(np.linalg.norm(a, "fro"))
    w = np.linalg.eigvalsh(a)
    op = float(max(abs(w[0]), abs(w[-1])))
    return fro, op
