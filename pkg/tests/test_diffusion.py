import numpy as np
import pytest

from spikelab import (
    DiffusionConfig,
    FixedSpikeDrift,
    NoiseStream,
    NullDenoiser,
    PosteriorMeanOracle,
    ReductionConfig,
    SpectralDenoiser,
    SpectralParams,
    algorithmic_threshold,
    euler_sample,
    exact_sampler_demo,
    observe_path,
    posterior_mean_estimate,
    reduction_sample,
    sample_spike,
    spike_matrix,
)
from spikelab.errors import NumericalError


class ConstantDrift(NullDenoiser):
    id = "const"

    def __init__(self, m):
        self.m = m

    def __call__(self, y, t):
        return self.m.copy()


def test_config_rounds_horizon_up():
    cfg = DiffusionConfig(n=4, delta=0.4, t_max=1.0)
    assert cfg.steps == 3
    assert cfg.t_max == pytest.approx(1.2000000000000002)
    assert cfg.requested_t_max == 1.0
    exact = DiffusionConfig(n=4, delta=0.5, t_max=2.0)
    assert exact.steps == 4 and exact.t_max == 2.0


def test_config_validation():
    with pytest.raises(ValueError):
        DiffusionConfig(n=0, delta=0.5, t_max=1.0)
    with pytest.raises(ValueError):
        DiffusionConfig(n=4, delta=0.0, t_max=1.0)
    with pytest.raises(ValueError):
        DiffusionConfig(n=4, delta=0.5, t_max=2.0, record_grid=[0.3])


def test_null_drift_gaussian_marginal():
    cfg = DiffusionConfig(n=2, delta=0.5, t_max=4.0, record_grid=[4.0])
    s = NoiseStream(1)
    vals = []
    for tr in range(10_000):
        run = euler_sample(NullDenoiser(), cfg, s.child(tr))
        vals.append(run.states[4.0][0, 1])
    v = np.var(vals)
    assert abs(v - 4.0) <= 4 * 4.0 * np.sqrt(2 / 10_000)
    assert abs(np.mean(vals)) <= 4 * 2.0 / 100


def test_constant_drift_mean():
    n = 3
    m = np.full((n, n), 0.7)
    cfg = DiffusionConfig(n=n, delta=0.25, t_max=2.0, record_grid=[2.0])
    s = NoiseStream(2)
    acc = np.zeros((n, n))
    trials = 4000
    for tr in range(trials):
        acc += euler_sample(ConstantDrift(m), cfg, s.child(tr)).states[2.0]
    acc /= trials
    se = np.sqrt(2.0 / trials)
    assert np.all(np.abs(acc - 2.0 * m) <= 4 * se)


def test_euler_replay_bit_identical():
    cfg = DiffusionConfig(n=5, delta=0.5, t_max=3.0)
    a = euler_sample(NullDenoiser(), cfg, NoiseStream(3).child("dz"))
    b = euler_sample(NullDenoiser(), cfg, NoiseStream(3).child("dz"))
    assert np.array_equal(a.final_sample, b.final_sample)
    for t in a.states:
        assert np.array_equal(a.states[t], b.states[t])


def test_zero_drift_trajectory_equals_null_twin_bitwise():
    # a drift that returns exact zeros must reproduce the pure-noise path
    n, k = 30, 5
    t_max = 0.9 * algorithmic_threshold(n, k)  # spectral drift is identically 0 here
    cfg = DiffusionConfig(n=n, delta=t_max / 20, t_max=t_max)
    a = euler_sample(SpectralDenoiser(SpectralParams(n, k)), cfg, NoiseStream(4).child("dz"))
    b = euler_sample(NullDenoiser(), cfg, NoiseStream(4).child("dz"))
    for t in a.states:
        assert np.array_equal(a.states[t], b.states[t])


def test_euler_increments_match_drift_log():
    n = 4
    cfg = DiffusionConfig(n=n, delta=0.5, t_max=2.0,
                          record_grid=[0.0, 0.5, 1.0, 1.5, 2.0])
    drift = ConstantDrift(np.eye(n) * 0.3)
    run = euler_sample(drift, cfg, NoiseStream(5), log_drift=True)
    assert len(run.drift_log) == cfg.steps
    # increments minus drift*delta are N(0, delta) entrywise; check variance
    incs = []
    times = sorted(run.states)
    for t0, t1 in zip(times, times[1:]):
        incs.append(run.states[t1] - run.states[t0] - 0.5 * drift.m)
    flat = np.concatenate([i.ravel() for i in incs])
    assert abs(np.var(flat) - 0.5) <= 5 * 0.5 * np.sqrt(2 / flat.size)


def test_euler_aborts_on_nonfinite_drift():
    class Bad(NullDenoiser):
        id = "bad"

        def __call__(self, y, t):
            return np.full_like(y, np.nan)

    cfg = DiffusionConfig(n=3, delta=0.5, t_max=1.0)
    with pytest.raises(NumericalError):
        euler_sample(Bad(), cfg, NoiseStream(6))


def test_fixed_spike_drift_locks_trajectory():
    n, k = 16, 4
    cfg = DiffusionConfig(n=n, delta=1.0, t_max=256.0, record_grid=[64.0, 256.0])
    dz = NoiseStream(7).child("dz")
    drift = FixedSpikeDrift(dz.replay().normal((n, n)), n, k)
    run = euler_sample(drift, cfg, dz)
    x = drift.spike.matrix()
    for t, state in run.states.items():
        if t > 0:
            err = np.linalg.norm(state / t - x, "fro")
            assert err <= (n / np.sqrt(t)) * 1.2


def test_exact_sampler_final_ratio_converges():
    n, k = 6, 2
    x = spike_matrix(sample_spike(n, k, NoiseStream(8)))
    cfg = DiffusionConfig(n=n, delta=1.0, t_max=100.0)
    s = NoiseStream(9)
    hits = 0
    trials = 200
    for tr in range(trials):
        run = exact_sampler_demo(x, cfg, s.child(tr))
        if np.linalg.norm(run.final_sample - x, "fro") <= 2 * n / np.sqrt(100.0):
            hits += 1
    assert hits / trials >= 0.95


def test_exact_sampler_matches_observe_path():
    n, k = 5, 2
    x = spike_matrix(sample_spike(n, k, NoiseStream(10)))
    cfg = DiffusionConfig(n=n, delta=1.0, t_max=8.0, record_grid=[4.0, 8.0])
    run = exact_sampler_demo(x, cfg, NoiseStream(11).child("w"))
    obs = observe_path(x, [4.0, 8.0], NoiseStream(11).child("w"))
    assert np.array_equal(run.states[4.0], obs[0].y)
    assert np.array_equal(run.states[8.0], obs[1].y)
    assert np.array_equal(run.final_sample, obs[1].y / 8.0)


def test_exact_sampler_symmetrized_residual_variance():
    n, k, t = 4, 2, 6.0
    x = spike_matrix(sample_spike(n, k, NoiseStream(12)))
    cfg = DiffusionConfig(n=n, delta=1.0, t_max=t, record_grid=[t])
    s = NoiseStream(13)
    vals = []
    for tr in range(20_000):
        run = exact_sampler_demo(x, cfg, s.child(tr))
        w = run.states[t] - t * x
        vals.append(((w + w.T) / 2)[0, 1])
    assert abs(np.var(vals) - t / 2) <= 4 * (t / 2) * np.sqrt(2 / 20_000)


def test_reduction_config():
    rc = ReductionConfig(sigma=0.5)
    assert rc.t0 == 4.0
    assert rc.horizon(6) == 20.0 * 36
    with pytest.raises(ValueError):
        ReductionConfig(sigma=0.0)
    with pytest.raises(ValueError):
        # t0 > horizon
        reduction_sample(np.zeros((2, 2)), NullDenoiser(),
                         ReductionConfig(sigma=0.05, theta=20.0), NoiseStream(0))


def test_reduction_warm_start_scaling():
    # one tiny step: the state starts at y/sigma^2
    y = np.array([[1.0, 2.0], [3.0, 4.0]])
    rc = ReductionConfig(sigma=0.5, theta=1.1, delta=10.0)
    out = reduction_sample(y, NullDenoiser(), rc, NoiseStream(14).child("dz"))
    t_end = rc.t0 + 10.0
    z = NoiseStream(14).child("dz").normal((2, 2))
    expected = (y / 0.25 + np.sqrt(10.0) * z) / t_end
    assert np.allclose(out, expected, atol=1e-12)


def test_reduction_low_noise_recovers_truth():
    # sigma -> 0: the posterior pins the truth and y_T/T lands near it
    n, k, sigma = 6, 2, 0.1
    rc = ReductionConfig(sigma=sigma, theta=50.0, delta=0.5)
    oracle = PosteriorMeanOracle(n, k)
    s = NoiseStream(15)
    errs = []
    for tr in range(9):
        spike = sample_spike(n, k, s.child("spike", tr))
        x = spike_matrix(spike)
        y = x + sigma * s.child("obs", tr).normal((n, n))
        xh = reduction_sample(y, oracle, rc, s.child("dz", tr))
        errs.append(np.linalg.norm(xh - x, "fro"))
    assert np.median(errs) <= 0.2


def test_posterior_mean_single_repeat_matches_sample():
    n, k, sigma = 6, 2, 0.6
    rc = ReductionConfig(sigma=sigma, theta=2.0, delta=0.5, repeats=1)
    oracle = PosteriorMeanOracle(n, k)
    s = NoiseStream(16)
    x = spike_matrix(sample_spike(n, k, s.child("spike")))
    y = x + sigma * s.child("obs").normal((n, n))
    est = posterior_mean_estimate(y, oracle, rc, s.child("mc"))
    direct = reduction_sample(y, oracle, rc, s.child("mc").child(0).child("dz"))
    assert np.array_equal(est, direct)


def test_posterior_mean_variance_scales_inverse_n():
    # var of the N-average estimator decays like 1/N (log-log slope -1 +- 0.2)
    n, sigma = 4, 0.7
    y = np.zeros((n, n))
    repeats_grid = [1, 4, 16, 64]
    replicates = 20
    variances = []
    for N in repeats_grid:
        rc = ReductionConfig(sigma=sigma, theta=20.0, delta=0.5, repeats=N)
        ests = []
        for rep in range(replicates):
            s = NoiseStream(1000 + rep).child("pm", N)
            ests.append(posterior_mean_estimate(y, NullDenoiser(), rc, s))
        ests = np.stack(ests)
        variances.append(float(np.mean(np.var(ests, axis=0, ddof=1))))
    slope = np.polyfit(np.log(repeats_grid), np.log(variances), 1)[0]
    assert -1.2 <= slope <= -0.8
