import numpy as np
import pytest

from spikelab import (
    DiffusionConfig,
    NoiseStream,
    NullDenoiser,
    PosteriorMeanOracle,
    SpectralDenoiser,
    SpectralParams,
    TargetDistribution,
    algorithmic_threshold,
    exact_sampler_demo,
    lipschitz_probe,
    mse_curve,
    mse_samples,
    recovery_rate,
    sample_spike,
    score_distance_integral,
    snap_to_atoms,
    spike_matrix,
    tv_discrete,
    w1_lower_bound,
)
from spikelab.experiments import atom_catalog
from spikelab.metrics import (
    empirical_distribution,
    frobenius_statistic,
    inner_product_statistic,
    mean_stderr,
)


def test_mean_stderr_basics():
    mean, se = mean_stderr([1.0, 1.0, 1.0])
    assert mean == 1.0 and se == 0.0
    mean, se = mean_stderr([0.0, 2.0])
    assert mean == 1.0
    assert se == pytest.approx(1.0)
    with pytest.raises(ValueError):
        mean_stderr([1.0])


def test_null_mse_is_exactly_one_on_spiked_target():
    dist = TargetDistribution("spiked", 20, 5)
    curve = mse_curve([NullDenoiser()], dist, [1.0, 5.0], 50, NoiseStream(1))
    for rec in curve.records:
        assert abs(rec.mean - 1.0) <= 1e-12
        assert rec.stderr == 0.0
        assert rec.trials == 50


def test_null_mse_on_mixture_matches_moment():
    n, k = 15, 3
    dist = TargetDistribution("mixture", n, k)
    curve = mse_curve([NullDenoiser()], dist, [2.0], 4000, NoiseStream(2))
    rec = curve.records[0]
    target = 0.5 * (1 - 1 / n)
    assert abs(rec.mean - target) <= 4 * rec.stderr


def test_spectral_mse_below_threshold_exact_one():
    n, k = 60, 10
    dist = TargetDistribution("spiked", n, k)
    t = 0.5 * algorithmic_threshold(n, k)
    curve = mse_curve([SpectralDenoiser(SpectralParams(n, k))], dist, [t], 100, NoiseStream(3))
    rec = curve.records[0]
    assert abs(rec.mean - 1.0) <= 1e-12 and rec.stderr == 0.0


def test_mse_samples_shares_observations():
    # identical denoisers must produce identical per-trial losses
    n, k = 12, 3
    dist = TargetDistribution("spiked", n, k)
    losses = mse_samples([NullDenoiser(), NullDenoiser()], dist, 3.0, 10, NoiseStream(4))
    assert np.array_equal(losses[0], losses[1])


def test_mse_curve_validates_grid():
    dist = TargetDistribution("spiked", 10, 2)
    with pytest.raises(ValueError):
        mse_curve([NullDenoiser()], dist, [2.0, 1.0], 10, NoiseStream(5))


def test_recovery_rate_null_is_zero():
    dist = TargetDistribution("spiked", 12, 3)
    rec = recovery_rate(NullDenoiser(), dist, 5.0, 40, NoiseStream(6))
    assert rec.mean == 0.0


def test_recovery_rate_noiseless_spectral():
    # at zero noise the spectral estimator recovers exactly above threshold
    n, k = 40, 8

    class Noiseless(NullDenoiser):
        id = "clean"

        def __init__(self):
            self.inner = SpectralDenoiser(SpectralParams(n, k))

        def __call__(self, y, t):
            return self.inner(y, t)

    dist = TargetDistribution("spiked", n, k)
    t = 2 * algorithmic_threshold(n, k)

    # bypass observation noise by feeding t*x directly
    class CleanObs(Noiseless):
        pass

    s = NoiseStream(7)
    hits = 0
    for tr in range(20):
        x = spike_matrix(sample_spike(n, k, s.child(tr)))
        out = SpectralDenoiser(SpectralParams(n, k))(t * x, t)
        hits += int(np.max(np.abs(out - x)) <= 1e-12)
    assert hits == 20


def test_score_distance_identical_denoisers():
    n, k = 20, 4
    dist = TargetDistribution("spiked", n, k)
    d = SpectralDenoiser(SpectralParams(n, k))
    grid = np.linspace(1.0, 4 * algorithmic_threshold(n, k), 8)
    val, se = score_distance_integral(d, d, dist, grid, 5, NoiseStream(8))
    assert val == 0.0 and se == 0.0


def test_score_distance_zero_below_threshold():
    n, k = 30, 6
    dist = TargetDistribution("spiked", n, k)
    ta = algorithmic_threshold(n, k)
    grid = np.linspace(0.1 * ta, 0.9 * ta, 6)
    val, _ = score_distance_integral(
        NullDenoiser(), SpectralDenoiser(SpectralParams(n, k)), dist, grid, 5, NoiseStream(9)
    )
    assert val == 0.0


def test_score_distance_symmetric():
    n, k = 20, 4
    dist = TargetDistribution("spiked", n, k)
    d1, d2 = NullDenoiser(), SpectralDenoiser(SpectralParams(n, k))
    grid = np.linspace(1.0, 6 * algorithmic_threshold(n, k), 10)
    a, _ = score_distance_integral(d1, d2, dist, grid, 6, NoiseStream(10))
    b, _ = score_distance_integral(d2, d1, dist, grid, 6, NoiseStream(10))
    assert a == pytest.approx(b, abs=1e-12)


def test_w1_identical_samples():
    s = NoiseStream(11)
    samples = [s.normal((4, 4)) for _ in range(20)]
    bound, se = w1_lower_bound(samples, list(samples))
    assert bound == 0.0 and se >= 0.0


def test_w1_translation_oracle():
    s = NoiseStream(12)
    a = [s.normal((5, 5)) for _ in range(30)]
    c = s.normal((5, 5))
    b = [m + c for m in a]
    stat = inner_product_statistic(c)
    bound, _ = w1_lower_bound(a, b, stat)
    assert bound == pytest.approx(np.linalg.norm(c, "fro"), abs=1e-10)


def test_w1_never_beats_paired_coupling_bound():
    s = NoiseStream(13)
    a = [s.normal((4, 4)) for _ in range(40)]
    b = [s.normal((4, 4)) for _ in range(40)]
    coupled = np.mean([np.linalg.norm(x - y, "fro") for x, y in zip(a, b)])
    for stat in (frobenius_statistic, inner_product_statistic(np.eye(4))):
        bound, _ = w1_lower_bound(a, b, stat)
        assert bound <= coupled + 1e-12


def test_w1_rejects_empty():
    with pytest.raises(ValueError):
        w1_lower_bound([], [np.eye(2)])


def test_lipschitz_probe_null_is_zero():
    assert lipschitz_probe(NullDenoiser(), 10, 5.0, 20, 0.5, NoiseStream(14)) == 0.0


def test_lipschitz_probe_bounded_outputs():
    # outputs live in the unit ball, so ratios never exceed 2/radius
    n, k = 8, 2
    oracle = PosteriorMeanOracle(n, k)
    radius = 0.5
    worst = lipschitz_probe(oracle, n, 3.0, 25, radius, NoiseStream(15))
    assert worst <= 2 / radius + 1e-9


def test_spectral_jump_detected_by_bisection():
    # the support gate makes the estimator discontinuous in y: bisecting
    # between a firing and a non-firing input exhibits a huge local ratio
    n, k = 40, 8
    d = SpectralDenoiser(SpectralParams(n, k))
    t = 2 * algorithmic_threshold(n, k)
    x = spike_matrix(sample_spike(n, k, NoiseStream(16)))
    lo, hi = np.zeros((n, n)), t * x  # d(lo)=0, d(hi)=x
    assert not np.any(d(lo, t)) and np.any(d(hi, t))
    for _ in range(60):
        mid = (lo + hi) / 2
        if np.any(d(mid, t)):
            hi = mid
        else:
            lo = mid
    gap = np.linalg.norm(hi - lo, "fro")
    ratio = np.linalg.norm(d(hi, t) - d(lo, t), "fro") / gap
    assert gap <= 1e-3
    assert ratio > 10


def test_tv_discrete_trivial_cases():
    assert tv_discrete({"a": 1.0}, {"a": 1.0}) == 0.0
    assert tv_discrete({"a": 1.0}, {"b": 1.0}) == 1.0
    assert tv_discrete({"a": 0.5, "b": 0.5}, {"a": 1.0}) == pytest.approx(0.5)


def test_snap_and_empirical_tv_at_enumeration_scale():
    # samples from the ideal process, snapped to the atom catalog, should
    # reproduce the uniform target distribution up to multinomial noise
    n, k = 6, 2
    atoms = atom_catalog(n, k)
    uniform = {key: 1 / 30 for key in atoms if key != "zero"}
    cfg = DiffusionConfig(n=n, delta=1.0, t_max=400.0, record_grid=[400.0])
    s = NoiseStream(17)
    samples = []
    for tr in range(10_000):
        x = spike_matrix(sample_spike(n, k, s.child("spike", tr)))
        samples.append(exact_sampler_demo(x, cfg, s.child("w", tr)).final_sample)
    labels = snap_to_atoms(samples, atoms)
    emp = empirical_distribution(labels)
    assert tv_discrete(emp, uniform) <= 0.05


def test_snap_labels_other_when_far():
    atoms = atom_catalog(4, 2)
    far = np.full((4, 4), 10.0)
    assert snap_to_atoms([far], atoms) == ["other"]
