"""Target distributions, observation processes, and time thresholds.

The signal is a k-sparse unit vector u (entries +-1/sqrt(k) on a uniformly
random support) lifted to the rank-one matrix x = u u^T.  Observations are
y_t = t*x + sqrt(t)*g with g an n-by-n matrix of i.i.d. standard normals;
observations are stored unsymmetrized, symmetrization is the denoiser's job.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from .streams import NoiseStream


@dataclass
class SparseSpike:
    """Latent k-sparse sign vector: support indices plus a sign pattern."""

    n: int
    k: int
    support: np.ndarray  # sorted int indices, length k
    signs: np.ndarray  # +-1.0, aligned with support

    def vector(self) -> np.ndarray:
        u = np.zeros(self.n)
        u[self.support] = self.signs / np.sqrt(self.k)
        return u

    def matrix(self) -> np.ndarray:
        u = self.vector()
        return np.outer(u, u)

    def key(self) -> tuple:
        """Canonical (support, signs) label, invariant under u -> -u.

        Two spikes lift to the same matrix exactly when their keys match.
        """
        signs = self.signs if self.signs[0] > 0 else -self.signs
        return tuple(int(i) for i in self.support), tuple(int(s) for s in signs)


@dataclass
class TargetDistribution:
    """One of the three targets: spiked, centered_spiked, or mixture.

    mixture draws the zero matrix with probability 1/2 and a centered
    spike (u u^T - I/n) otherwise.
    """

    kind: str
    n: int
    k: int

    KINDS = ("spiked", "centered_spiked", "mixture")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown target kind {self.kind!r}, expected one of {self.KINDS}")
        if not 1 <= self.k <= self.n:
            raise ValueError(f"need 1 <= k <= n, got n={self.n}, k={self.k}")


@dataclass
class Observation:
    """Single-time observation y = t*x + sqrt(t)*g (g unsymmetrized)."""

    t: float
    y: np.ndarray
    truth: SparseSpike | None = None


def sample_spike(n: int, k: int, stream: NoiseStream) -> SparseSpike:
    """Uniform draw: support uniform over k-subsets, signs i.i.d. uniform."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got n={n}, k={k}")
    support = stream.subset(n, k)
    signs = stream.rademacher(k)
    return SparseSpike(n, k, support, signs)


def spike_matrix(spike: SparseSpike) -> np.ndarray:
    """Rank-one lift u u^T: trace 1, Frobenius norm 1."""
    return spike.matrix()


def sample_target(dist: TargetDistribution, stream: NoiseStream):
    """Draw (x, spike) from the target; spike is None for the zero branch."""
    if dist.kind == "mixture" and stream.uniform() < 0.5:
        return np.zeros((dist.n, dist.n)), None
    spike = sample_spike(dist.n, dist.k, stream)
    x = spike.matrix()
    if dist.kind != "spiked":
        # E[u u^T] = I/n in closed form, so centering is exact.
        x = x - np.eye(dist.n) / dist.n
    return x, spike


def observe_single(x: np.ndarray, t: float, stream: NoiseStream,
                   truth: SparseSpike | None = None) -> Observation:
    """y = t*x + sqrt(t)*g with n^2 independent noise entries."""
    if t < 0:
        raise ValueError(f"observation time must be >= 0, got {t}")
    n = x.shape[0]
    y = t * x + np.sqrt(t) * stream.normal((n, n))
    return Observation(t, y, truth)


def observe_path(x: np.ndarray, times, stream: NoiseStream) -> list[Observation]:
    """Observations y_t = t*x + W_t sharing one Brownian path over the grid."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise ValueError("times must be a nonempty 1-D grid")
    if times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing with times[0] >= 0")
    n = x.shape[0]
    w = np.zeros((n, n))
    t_prev = 0.0
    out = []
    for t in times:
        if t > t_prev:
            w = w + np.sqrt(t - t_prev) * stream.normal((n, n))
        out.append(Observation(float(t), t * x + w))
        t_prev = t
    return out


def algorithmic_threshold(n: int, k: int) -> float:
    """Conjectured time below which no polynomial-time denoiser beats zero.

    k^2 * log(n/k^2) in the very sparse branch (k < sqrt(n)), n/2 otherwise.
    The sharp boundary rule keeps the function total.
    """
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got n={n}, k={k}")
    if k < math.sqrt(n):
        return float(k * k * math.log(n / k**2))
    return n / 2.0


def bayes_threshold(n: int, k: int) -> float:
    """Time at which the computationally unbounded posterior mean transitions."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got n={n}, k={k}")
    return float(2 * k * math.log(n / k))


def enumeration_count(n: int, k: int) -> int:
    """Number of k-sparse sign vectors: C(n,k) * 2^k."""
    return math.comb(n, k) * 2**k


def spike_basis(n: int, k: int) -> np.ndarray:
    """All k-sparse sign vectors as rows, in canonical enumeration order.

    Supports in lexicographic order; within a support, sign patterns ordered
    by binary counter with bit i giving the sign of the i-th support index.
    """
    rows = np.zeros((enumeration_count(n, k), n))
    val = 1.0 / math.sqrt(k)
    m = 0
    for sup in combinations(range(n), k):
        for bits in product((1.0, -1.0), repeat=k):
            for ix, b in zip(sup, bits):
                rows[m, ix] = b * val
            m += 1
    return rows
