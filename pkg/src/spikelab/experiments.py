"""Config-driven experiment runners behind the command-line interface.

Every runner takes a JSON-style config dict, executes one reproducible
experiment, and writes a CSV or JSON artifact.  Output files embed the fully
resolved config and package version in header comments and are byte-identical
across reruns with the same config.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from itertools import combinations, product

import numpy as np
from scipy.stats import chisquare

from . import __version__
from .denoisers import (
    FixedSpikeDrift,
    PosteriorMeanOracle,
    _enum_cap_from_env,
    build_denoiser,
    fixed_spike_from_noise,
)
from .diffusion import DiffusionConfig, ReductionConfig, euler_sample, reduction_sample
from .errors import CapacityError, ConfigError
from .metrics import (
    OTHER_LABEL,
    empirical_distribution,
    mean_stderr,
    mse_curve,
    snap_to_atoms,
    tv_discrete,
    w1_lower_bound,
)
from .model import (
    TargetDistribution,
    algorithmic_threshold,
    bayes_threshold,
    enumeration_count,
    sample_target,
)
from .streams import NoiseStream

VERSION_TAG = f"spikelab-{__version__}"

EXPERIMENTS = ("mse-curve", "generate", "oracle-phase", "reduction", "cheat-demo")


# ---------------------------------------------------------------------------
# config plumbing


def _require(config: dict, key: str, kind=None):
    if key not in config:
        raise ConfigError(f"config is missing required key {key!r}")
    val = config[key]
    if kind is not None and not isinstance(val, kind):
        raise ConfigError(f"config key {key!r} has type {type(val).__name__}")
    return val


def _seed(config: dict) -> int:
    seed = _require(config, "seed")
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer (wall-clock defaults are not allowed)")
    return seed


def time_grid(spec: dict, n: int, k: int) -> list[float]:
    """Resolve a grid spec, injecting threshold times that fall in range."""
    kind = _require(spec, "kind")
    if kind == "explicit":
        values = [float(v) for v in _require(spec, "values", list)]
        if len(values) == 0:
            raise ConfigError("explicit grid needs at least one value")
    elif kind in ("linear", "log"):
        lo, hi = float(_require(spec, "lo")), float(_require(spec, "hi"))
        points = int(_require(spec, "points"))
        if hi <= lo or points < 1:
            raise ConfigError(f"bad grid range lo={lo} hi={hi} points={points}")
        if kind == "log":
            if lo <= 0:
                raise ConfigError("log grid needs lo > 0")
            values = np.geomspace(lo, hi, points).tolist()
        else:
            values = np.linspace(lo, hi, points).tolist()
    else:
        raise ConfigError(f"unknown grid kind {kind!r}")
    lo, hi = min(values), max(values)
    for marker in (algorithmic_threshold(n, k), bayes_threshold(n, k)):
        if lo <= marker <= hi:
            values.append(marker)
    return np.unique(np.asarray(values, dtype=float)).tolist()


def _target(config: dict, n: int, k: int) -> TargetDistribution:
    return TargetDistribution(config.get("target", "spiked"), n, k)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _canonical_config(config: dict) -> str:
    return json.dumps(config, sort_keys=True, separators=(",", ":"))


def write_csv(path: str, schema: str, config: dict, meta: dict, columns, rows) -> None:
    """CSV with '#' header comments; LF endings, UTF-8, '.' decimals."""
    lines = [
        f"# version: {VERSION_TAG}",
        f"# schema: {schema}",
        f"# config: {_canonical_config(config)}",
    ]
    lines += [f"# {key}: {_fmt(val)}" for key, val in meta.items()]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# runners


def run_mse_curve(config: dict, out: str, threads: int = 1) -> None:
    n, k = _require(config, "n", int), _require(config, "k", int)
    seed = _seed(config)
    trials = _require(config, "trials", int)
    grid = time_grid(_require(config, "grid", dict), n, k)
    stream = NoiseStream(seed)
    specs = _require(config, "denoisers", list)
    denoisers = []
    for j, spec in enumerate(specs):
        d = build_denoiser(spec, n, k, stream.child("denoiser-init", j))
        if isinstance(spec, dict) and "label" in spec:
            d.id = str(spec["label"])
        denoisers.append(d)
    if len({d.id for d in denoisers}) != len(denoisers):
        raise ConfigError("denoiser ids collide; disambiguate with 'label'")
    curve = mse_curve(denoisers, _target(config, n, k), grid, trials, stream.child("mc"))
    rows = [
        {
            "t": r.t,
            "t_over_n": r.t / n,
            "estimator_id": r.estimator_id,
            "mse_mean": r.mean,
            "mse_stderr": r.stderr,
            "trials": r.trials,
            "seed": r.seed,
        }
        for r in curve.records
    ]
    rows.sort(key=lambda r: (r["t"], r["estimator_id"]))
    meta = {"t_alg": algorithmic_threshold(n, k), "t_bayes": bayes_threshold(n, k)}
    write_csv(out, "mse-curve/v1", config, meta,
              ["t", "t_over_n", "estimator_id", "mse_mean", "mse_stderr", "trials", "seed"],
              rows)


def _generate_trial(config, dconfig, drift_spec, stream, trial):
    n, k = config["n"], config["k"]
    ts = stream.child("trial", trial)
    dz = ts.child("dz")
    if (drift_spec.get("id") if isinstance(drift_spec, dict) else drift_spec) == "fixed_spike":
        # couple the drift to the diffusion's first noise draw
        drift = build_denoiser(drift_spec, n, k, dz.replay())
    else:
        drift = build_denoiser(drift_spec, n, k, ts.child("drift"))
    run = euler_sample(drift, dconfig, dz)
    final = run.final_sample
    w = np.linalg.eigvalsh(final)
    return {
        "trial": trial,
        "fro_norm": float(np.linalg.norm(final, "fro")),
        "trace": float(np.trace(final)),
        "top_eig": float(w[-1]),
        "seed": stream.master_seed,
    }, final


def run_generate(config: dict, out: str, threads: int = 1) -> None:
    n, k = _require(config, "n", int), _require(config, "k", int)
    seed = _seed(config)
    trials = _require(config, "trials", int)
    drift_spec = _require(config, "drift", (dict, str))
    dconfig = DiffusionConfig(
        n=n,
        delta=float(_require(config, "delta")),
        t_max=float(_require(config, "t_max")),
        record_grid=config.get("record_grid", []),  # only the endpoint by default
    )
    stream = NoiseStream(seed)
    # validate the drift spec before burning compute
    build_denoiser(drift_spec, n, k, stream.child("validate"))

    def work(trial):
        return _generate_trial(config, dconfig, drift_spec, stream, trial)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, range(trials)))
    else:
        results = [work(tr) for tr in range(trials)]
    rows = [row for row, _ in results]
    finals = [final for _, final in results]
    dist = _target(config, n, k)
    targets = [sample_target(dist, stream.child("target", i))[0] for i in range(trials)]
    bound, bound_se = w1_lower_bound(finals, targets)
    meta = {
        "t_alg": algorithmic_threshold(n, k),
        "t_bayes": bayes_threshold(n, k),
        "t_max": dconfig.t_max,
        "delta": dconfig.delta,
        "w1_lower_bound": bound,
        "w1_stderr": bound_se,
    }
    write_csv(out, "generate/v1", config, meta,
              ["trial", "fro_norm", "trace", "top_eig", "seed"], rows)


def run_oracle_phase(config: dict, out: str, threads: int = 1) -> None:
    n, k = _require(config, "n", int), _require(config, "k", int)
    seed = _seed(config)
    trials = _require(config, "trials", int)
    cap = int(config.get("cap", _enum_cap_from_env()))
    count = enumeration_count(n, k)
    if count > cap:
        raise CapacityError(count, cap)
    grid = time_grid(_require(config, "grid", dict), n, k)
    stream = NoiseStream(seed)
    oracle = PosteriorMeanOracle(n, k, cap=cap)
    curve = mse_curve([oracle], _target(config, n, k), grid, trials, stream.child("mc"))
    rows = [
        {
            "t": r.t,
            "t_over_t_bayes": r.t / bayes_threshold(n, k),
            "estimator_id": r.estimator_id,
            "mse_mean": r.mean,
            "mse_stderr": r.stderr,
            "trials": r.trials,
            "seed": r.seed,
        }
        for r in curve.records
    ]
    rows.sort(key=lambda r: (r["t"], r["estimator_id"]))
    meta = {
        "t_bayes": bayes_threshold(n, k),
        "t_alg": algorithmic_threshold(n, k),
        "enumeration_count": count,
    }
    write_csv(out, "oracle-phase/v1", config, meta,
              ["t", "t_over_t_bayes", "estimator_id", "mse_mean", "mse_stderr", "trials", "seed"],
              rows)


def atom_catalog(n: int, k: int, include_zero: bool = True) -> dict:
    """Distinct rank-one lift matrices keyed by canonical (support, signs).

    u and -u lift to the same matrix, so the catalog fixes the first support
    sign to +1; the zero matrix enters under the label "zero".
    """
    atoms: dict = {}
    val = 1.0 / math.sqrt(k)
    for sup in combinations(range(n), k):
        for bits in product((1.0, -1.0), repeat=(k - 1)):
            signs = (1.0,) + bits
            u = np.zeros(n)
            for ix, b in zip(sup, signs):
                u[ix] = b * val
            key = (tuple(sup), tuple(int(b) for b in signs))
            atoms[key] = np.outer(u, u)
    if include_zero:
        atoms["zero"] = np.zeros((n, n))
    return atoms


def exact_posterior_on_atoms(oracle: PosteriorMeanOracle, y_scaled: np.ndarray) -> dict:
    """Collapse the oracle's posterior over sign vectors onto distinct matrices."""
    weights = oracle.posterior(y_scaled)
    probs: dict = {}
    m = 0
    for sup in combinations(range(oracle.n), oracle.k):
        for bits in product((1, -1), repeat=oracle.k):
            signs = bits if bits[0] > 0 else tuple(-b for b in bits)
            key = (tuple(sup), signs)
            probs[key] = probs.get(key, 0.0) + float(weights[m])
            m += 1
    return probs


def run_reduction(config: dict, out: str, threads: int = 1) -> None:
    n, k = _require(config, "n", int), _require(config, "k", int)
    seed = _seed(config)
    sigma = float(_require(config, "sigma"))
    repeats = _require(config, "repeats", int)
    rconfig = ReductionConfig(
        sigma=sigma,
        theta=float(config.get("theta", 20.0)),
        delta=float(config.get("delta", 0.2)),
        repeats=repeats,
    )
    cap = int(config.get("cap", _enum_cap_from_env()))
    count = enumeration_count(n, k)
    if count > cap:
        raise CapacityError(count, cap)
    stream = NoiseStream(seed)
    drift_spec = config.get("drift", {"id": "bayes"})
    drift = build_denoiser(drift_spec, n, k, stream.child("drift"))

    dist = TargetDistribution("spiked", n, k)
    x, _ = sample_target(dist, stream.child("truth"))
    y = x + sigma * stream.child("obs").normal((n, n))

    oracle = PosteriorMeanOracle(n, k, cap=cap)
    y_scaled = y / sigma**2
    exact = exact_posterior_on_atoms(oracle, y_scaled)
    post_mean = oracle(y_scaled, rconfig.t0)

    def work(rep):
        sub = stream.child("rep", rep)
        d = drift.with_stream(sub.child("denoiser"))
        return reduction_sample(y, d, rconfig, sub.child("dz"))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            samples = list(pool.map(work, range(repeats)))
    else:
        samples = [work(rep) for rep in range(repeats)]

    labels = snap_to_atoms(samples, atom_catalog(n, k))
    emp = empirical_distribution(labels)
    tv = tv_discrete(emp, exact)
    mean_est = np.mean(samples, axis=0)
    rel_err = float(np.linalg.norm(mean_est - post_mean, "fro")
                    / np.linalg.norm(post_mean, "fro"))
    payload = {
        "schema": "reduction/v1",
        "version": VERSION_TAG,
        "config": config,
        "t0": rconfig.t0,
        "horizon": rconfig.horizon(n),
        "repeats": repeats,
        "tv_snapped": tv,
        "posterior_mean_rel_error": rel_err,
        "other_fraction": emp.get(OTHER_LABEL, 0.0),
    }
    write_json(out, payload)


def run_cheat_demo(config: dict, out: str, threads: int = 1) -> None:
    n, k = _require(config, "n", int), _require(config, "k", int)
    seed = _seed(config)
    trials = _require(config, "trials", int)
    stream = NoiseStream(seed)

    # (i) score-matching error of the fixed-spike drift vs the analytic value
    dist = TargetDistribution("spiked", n, k)
    losses = []
    for tr in range(trials):
        ts = stream.child("mse", tr)
        x, _ = sample_target(dist, ts.child("target"))
        drift = FixedSpikeDrift(ts.child("z1").normal((n, n)), n, k)
        losses.append(float(np.sum((drift(x, 1.0) - x) ** 2)))
    mse_mean, mse_se = mean_stderr(losses)
    analytic = 2.0 - 2.0 / n

    # (ii) chi^2 uniformity of the carved spike over all sparse sign vectors
    chi_cfg = config.get("chi2", {"n": 6, "k": 2, "draws": 100_000})
    cn, ck, draws = int(chi_cfg["n"]), int(chi_cfg["k"]), int(chi_cfg["draws"])
    counts: dict = {}
    cs = stream.child("chi2")
    for _ in range(draws):
        spike = fixed_spike_from_noise(cs.normal((cn, cn)), cn, ck)
        key = (tuple(int(i) for i in spike.support), tuple(int(s) for s in spike.signs))
        counts[key] = counts.get(key, 0) + 1
    cells = enumeration_count(cn, ck)
    all_keys = [
        (sup, bits)
        for sup in combinations(range(cn), ck)
        for bits in product((1, -1), repeat=ck)
    ]
    observed = np.array([counts.get(key, 0) for key in all_keys], dtype=float)
    stat, pvalue = chisquare(observed)

    # (iii) trajectory: y_t/t approaches the carved spike at the n^2/t rate
    traj_cfg = config.get(
        "trajectory", {"n": 64, "delta": 1.0, "t_max": 512.0, "trials": 4, "margin": 0.2}
    )
    tn = int(traj_cfg.get("n", 64))
    tk = int(traj_cfg.get("k", max(1, tn // 8)))
    margin = float(traj_cfg.get("margin", 0.2))
    dconfig = DiffusionConfig(n=tn, delta=float(traj_cfg["delta"]), t_max=float(traj_cfg["t_max"]))
    rows = []
    all_ok = True
    for tr in range(int(traj_cfg.get("trials", 4))):
        ts = stream.child("traj", tr)
        dz = ts.child("dz")
        drift = FixedSpikeDrift(dz.replay().normal((tn, tn)), tn, tk)
        run = euler_sample(drift, dconfig, dz)
        x_cheat = drift.spike.matrix()
        for t, state in sorted(run.states.items()):
            if t <= 0:
                continue
            err = float(np.linalg.norm(state / t - x_cheat, "fro"))
            bound = tn / math.sqrt(t) * (1 + margin)
            ok = err <= bound
            all_ok = all_ok and ok
            rows.append({"trial": tr, "t": t, "error": err, "bound": bound, "ok": ok})

    payload = {
        "schema": "cheat-demo/v1",
        "version": VERSION_TAG,
        "config": config,
        "mse": {
            "mean": mse_mean,
            "stderr": mse_se,
            "analytic": analytic,
            "within_3_stderr": bool(abs(mse_mean - analytic) <= 3 * mse_se),
        },
        "chi2": {
            "statistic": float(stat),
            "pvalue": float(pvalue),
            "cells": cells,
            "draws": draws,
        },
        "trajectory": {"margin": margin, "all_within_bound": all_ok, "rows": rows},
    }
    write_json(out, payload)


RUNNERS = {
    "mse-curve": run_mse_curve,
    "generate": run_generate,
    "oracle-phase": run_oracle_phase,
    "reduction": run_reduction,
    "cheat-demo": run_cheat_demo,
}


def run_experiment(config: dict, out: str | None = None, seed: int | None = None,
                   threads: int = 1) -> str:
    """Dispatch a config to its runner; returns the output path."""
    name = _require(config, "experiment")
    if name not in RUNNERS:
        raise ConfigError(f"unknown experiment {name!r}, expected one of {EXPERIMENTS}")
    config = dict(config)
    if seed is not None:
        config["seed"] = seed
    out_path = out or config.get("out")
    if not out_path:
        raise ConfigError("no output path: set 'out' in the config or pass --out")
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")
    RUNNERS[name](config, out_path, threads)
    return out_path
