"""Euler-discretized generative diffusion and the estimation-to-sampling
reduction.

The sampler runs y_{t+dt} = y_t + m(y_t, t)*dt + sqrt(dt)*z_t from y_0 = 0
with z_t i.i.d. standard normal n-by-n matrices (noise is never symmetrized;
symmetry enters only inside denoisers).  The reduction warm-starts the same
recursion at y_{t0} = y/sigma^2, t0 = 1/sigma^2, from a unit-time observation
y = x + sigma*g, and reads off y_T/T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .denoisers import Denoiser
from .errors import NumericalError
from .model import observe_path
from .streams import NoiseStream

DEFAULT_RECORD_POINTS = 50


@dataclass
class DiffusionConfig:
    n: int
    delta: float
    t_max: float
    record_grid: list[float] | None = None
    seed: int | None = None  # carried as metadata; runners key streams off it

    steps: int = field(init=False)
    requested_t_max: float = field(init=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"dimension must be >= 1, got {self.n}")
        if self.delta <= 0:
            raise ValueError(f"step size must be positive, got {self.delta}")
        if self.t_max <= 0:
            raise ValueError(f"horizon must be positive, got {self.t_max}")
        self.requested_t_max = self.t_max
        self.steps = int(math.ceil(self.t_max / self.delta - 1e-12))
        self.t_max = self.steps * self.delta  # rounded up to a step multiple
        self.record_steps()  # validate any explicit record grid eagerly

    def record_steps(self) -> list[int]:
        """Recording times as step indices; defaults to 50 log-spaced plus T."""
        if self.record_grid is None:
            idx = np.unique(
                np.rint(np.geomspace(1, self.steps, DEFAULT_RECORD_POINTS)).astype(int)
            )
        else:
            idx = []
            for t in self.record_grid:
                j = int(round(t / self.delta))
                if not math.isclose(j * self.delta, t, rel_tol=0, abs_tol=1e-9 * self.delta):
                    raise ValueError(f"record time {t} is not a multiple of delta={self.delta}")
                if not 0 <= j <= self.steps:
                    raise ValueError(f"record time {t} outside [0, {self.t_max}]")
                idx.append(j)
            idx = np.unique(idx)
        return sorted(set(idx.tolist()) | {self.steps})


@dataclass
class DiffusionRun:
    """Trajectory record: states at the record grid plus the final estimate."""

    states: dict[float, np.ndarray]
    final_sample: np.ndarray
    t_max: float
    drift_log: list[tuple[float, float]] | None = None


def euler_sample(denoiser: Denoiser, config: DiffusionConfig, stream: NoiseStream,
                 log_drift: bool = False) -> DiffusionRun:
    """Run the discretized diffusion and return m(y_T, T) as the sample."""
    n = config.n
    delta = config.delta
    record = set(config.record_steps())
    states: dict[float, np.ndarray] = {}
    drift_log: list[tuple[float, float]] | None = [] if log_drift else None
    y = np.zeros((n, n))
    sqrt_delta = np.sqrt(delta)
    for step in range(config.steps + 1):
        t = step * delta
        if step in record:
            states[t] = y.copy()
        if step == config.steps:
            break
        m = denoiser(y, t)
        if not np.all(np.isfinite(m)):
            raise NumericalError(
                f"drift produced non-finite values at t={t} (|y|_F={np.linalg.norm(y):.3e})"
            )
        if drift_log is not None:
            drift_log.append((t, float(np.linalg.norm(m, "fro"))))
        y = y + m * delta + sqrt_delta * stream.normal((n, n))
    final = denoiser(y, config.t_max)
    if not np.all(np.isfinite(final)):
        raise NumericalError(f"drift produced non-finite values at t={config.t_max}")
    return DiffusionRun(states, final, config.t_max, drift_log)


def exact_sampler_demo(x: np.ndarray, config: DiffusionConfig,
                       stream: NoiseStream) -> DiffusionRun:
    """Ideal process y_t = t*x + W_t on the record grid, for side-by-side runs.

    The final sample is y_T/T, which converges to x as the horizon grows.
    """
    times = [s * config.delta for s in config.record_steps() if s > 0]
    obs = observe_path(x, times, stream)
    states = {o.t: o.y for o in obs}
    if 0 in config.record_steps():
        states[0.0] = np.zeros_like(x)
    y_final = obs[-1].y
    return DiffusionRun(states, y_final / config.t_max, config.t_max)


@dataclass
class ReductionConfig:
    """Sampling-from-posterior reduction parameters.

    The observation convention is unit-time: y = x + sigma*g.  Internally the
    run starts at t0 = 1/sigma^2 with state y/sigma^2 (which has the law of
    t0*x + sqrt(t0)*g) and ends at horizon T = theta * n^2.  ``lipschitz_hint``
    is documentation only; nothing at runtime consumes it.
    """

    sigma: float
    theta: float = 20.0
    delta: float = 0.2
    repeats: int = 1
    lipschitz_hint: float | None = None

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.theta <= 0 or self.delta <= 0:
            raise ValueError("theta and delta must be positive")
        if self.repeats < 1:
            raise ValueError(f"repeats must be >= 1, got {self.repeats}")

    @property
    def t0(self) -> float:
        return 1.0 / self.sigma**2

    def horizon(self, n: int) -> float:
        return self.theta * n * n


def reduction_sample(y: np.ndarray, denoiser: Denoiser, rconfig: ReductionConfig,
                     stream: NoiseStream) -> np.ndarray:
    """One posterior sample: warm-started diffusion, output y_T / T."""
    n = y.shape[0]
    t0 = rconfig.t0
    horizon = rconfig.horizon(n)
    if t0 > horizon:
        raise ValueError(f"t0={t0:.3f} exceeds horizon T={horizon:.3f}; increase theta")
    steps = int(math.ceil((horizon - t0) / rconfig.delta - 1e-12))
    delta = rconfig.delta
    sqrt_delta = np.sqrt(delta)
    cur = y / rconfig.sigma**2
    for j in range(steps):
        t = t0 + j * delta
        m = denoiser(cur, t)
        if not np.all(np.isfinite(m)):
            raise NumericalError(f"drift produced non-finite values at t={t}")
        cur = cur + m * delta + sqrt_delta * stream.normal((n, n))
    t_end = t0 + steps * delta
    return cur / t_end


def posterior_mean_estimate(y: np.ndarray, denoiser: Denoiser, rconfig: ReductionConfig,
                            stream: NoiseStream) -> np.ndarray:
    """Average of ``repeats`` independent reduction samples."""
    acc = np.zeros_like(y)
    for rep in range(rconfig.repeats):
        sub = stream.child(rep)
        d = denoiser.with_stream(sub.child("denoiser"))
        acc += reduction_sample(y, d, rconfig, sub.child("dz"))
    return acc / rconfig.repeats
