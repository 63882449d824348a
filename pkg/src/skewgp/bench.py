"""Desk-scale experiment harness.

Each runner is a plain function from an ExperimentConfig to a list of
row dicts (one per trial/iteration), written as CSV with a leading
comment line carrying the library version and a hash of the resolved
config.  Everything is driven by (config, seed); re-runs reproduce the
same rows (timing columns excepted).
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.special import ndtr

from . import __version__
from .acquisition import AcqConfig, bald, dueling_ucb, eiig, safe_ucb
from .benchmarks import BenchmarkFunction, get_benchmark
from .errors import InputError
from .kernels import KernelSpec, SkewPriorSpec, kernel_matrix
from .likelihoods import (
    dataset_to_observations,
    merge,
    numeric_block,
    preference_block,
    save_dataset,
    valid_invalid_block,
)
from .linalg import jittered_cholesky
from .model_selection import FitConfig, default_bounds, optimize
from .posterior import FittedModel, fit, sample_latent
from .truncnorm_sampler import gelman_rubin

_TASKS = (
    "fit",
    "predict",
    "active_learn",
    "pbo",
    "mixed_bo",
    "safe_bo",
    "sample_bench",
    "generate",
)


@dataclass
class ExperimentConfig:
    task: str = "pbo"
    benchmark: str = "oneD"
    budget: int = 40
    trials: int = 20
    seed: int = 0
    output_path: str | None = None
    # model
    lengthscales: list | None = None
    variance: float | None = None
    refit_every: int = 1
    restarts: int = 2
    # acquisition / sampling
    acquisition: str = "dueling_ucb"
    n_samples: int = 3000
    candidates: int = 200
    credible_level: float = 0.95
    eiig_k: float = 0.1
    # preferential / mixed BO
    initial_duels: int = 5
    initial_numeric: int = 5
    numeric_every: int = 4
    pref_noise: float = 1.0
    numeric_noise: float = 0.01
    duel_noise: float = 0.0
    # safe BO
    safe_threshold: float = 0.0
    safe_prob: float = 0.7
    safe_penalty: float = 1000.0
    obs_noise: float = 0.05
    grid_size: int = 101
    domain: list | None = None
    # active learning
    dataset: str | None = None
    generator: str = "classification_2d"
    pool_size: int = 120
    initial_pool: int = 10
    test_fraction: float = 0.3
    # sample bench
    sizes: list = field(default_factory=lambda: [500, 1000, 2000])
    # generate / fit / predict
    kind: str = "preference_1d"
    n: int = 100
    data: str | None = None
    model: str | None = None
    xstar: list | None = None
    noise: float = 1.0

    def __post_init__(self):
        if self.task not in _TASKS:
            raise InputError(f"task must be one of {_TASKS}")
        if self.budget < 0:
            raise InputError("budget must be >= 0")
        if self.trials < 1:
            raise InputError("trials must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InputError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)


def config_hash(config: ExperimentConfig) -> str:
    blob = json.dumps(asdict(config), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def write_rows(path, rows: list[dict], config: ExperimentConfig):
    if not rows:
        raise InputError("no rows to write")
    names = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        fh.write(
            f"# skewgp={__version__} config_hash={config_hash(config)} "
            f"seed={config.seed}\n"
        )
        writer = csv.DictWriter(fh, fieldnames=names)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _trial_seed(config: ExperimentConfig, trial: int, salt: int = 0) -> int:
    return (config.seed * 1_000_003 + trial * 10_007 + salt) % (2**31 - 1)


def _default_prior(config: ExperimentConfig, bench: BenchmarkFunction) -> SkewPriorSpec:
    if config.lengthscales is not None:
        ls = np.asarray(config.lengthscales, dtype=float)
    elif bench.name == "oneD":
        ls = np.array([0.33])
    else:
        ls = (bench.upper - bench.lower) / 8.0
    if config.variance is not None:
        var = float(config.variance)
    elif bench.name == "oneD":
        var = 50.0
    else:
        var = 10.0
    return SkewPriorSpec(kernel=KernelSpec(lengthscales=ls, variance=var))


def _duel(g, x_new, x_ref, rng, duel_noise: float) -> bool:
    """True when x_new wins; optional probit noise on the comparison."""
    a, b = g(x_new), g(x_ref)
    if duel_noise > 0.0:
        a += duel_noise * rng.standard_normal()
        b += duel_noise * rng.standard_normal()
    return a > b


def _candidate_set(bench: BenchmarkFunction, count: int, rng) -> np.ndarray:
    if bench.dimension == 1:
        return np.linspace(bench.lower[0], bench.upper[0], count)[:, None]
    return rng.uniform(bench.lower, bench.upper, size=(count, bench.dimension))


# ---------------------------------------------------------------------------
# preferential / mixed Bayesian optimisation
# ---------------------------------------------------------------------------


def run_pbo(config: ExperimentConfig, mixed: bool = False) -> list[dict]:
    bench = get_benchmark(config.benchmark)
    spec = _default_prior(config, bench)
    rows = []
    for trial in range(config.trials):
        rng = np.random.default_rng(_trial_seed(config, trial, 1))
        x = rng.uniform(
            bench.lower, bench.upper, size=(2 * config.initial_duels, bench.dimension)
        )
        duels = []
        for i in range(config.initial_duels):
            a, b = 2 * i, 2 * i + 1
            win = _duel(g=bench, x_new=x[a], x_ref=x[b], rng=rng,
                        duel_noise=config.duel_noise)
            duels.append((a, b) if win else (b, a))
        xr = duels[0][0]
        for w, _ in duels[1:]:
            if _duel(bench, x[w], x[xr], rng, config.duel_noise):
                xr = w
        numeric_obs = []
        if mixed:
            xn0 = rng.uniform(
                bench.lower, bench.upper, size=(config.initial_numeric, bench.dimension)
            )
            base = x.shape[0]
            x = np.vstack([x, xn0])
            for j in range(config.initial_numeric):
                y = bench(xn0[j]) + config.numeric_noise * rng.standard_normal()
                numeric_obs.append((base + j, y))
            best_num = max(numeric_obs, key=lambda iy: iy[1])[0]
            if _duel(bench, x[best_num], x[xr], rng, config.duel_noise):
                xr = best_num
        rows.append(
            {"trial": trial, "iteration": 0, "query": "init",
             "g_xr": bench(x[xr]), "x_new": "", "won": ""}
        )
        theta_prev = None
        for it in range(1, config.budget + 1):
            obs_parts = [preference_block(x, duels, config.pref_noise)]
            if numeric_obs:
                obs_parts.append(
                    numeric_block(x, numeric_obs, config.numeric_noise)
                )
            obs = merge(*obs_parts)
            if config.refit_every and (it == 1 or it % config.refit_every == 0):
                theta_prev, model = _warm_refit(
                    x, duels, numeric_obs, config, spec, theta_prev,
                    seed=_trial_seed(config, trial, 2 + it),
                )
            else:
                model = fit(spec, x, obs, seed=_trial_seed(config, trial, 2 + it))
            cands = _candidate_set(bench, config.candidates, rng)
            points = np.vstack([cands, x[xr : xr + 1]])
            draws = sample_latent(
                model, points, config.n_samples,
                seed=_trial_seed(config, trial, 500 + it), joint=True,
            )
            diffs = draws[:, :-1] - draws[:, -1:]
            if config.acquisition == "eiig":
                scores = [
                    eiig(diffs[:, j], config.eiig_k, config.pref_noise)
                    for j in range(cands.shape[0])
                ]
            else:
                scores = [
                    dueling_ucb(diffs[:, j], config.credible_level)
                    for j in range(cands.shape[0])
                ]
            x_new = cands[int(np.argmax(scores))]
            new_idx = x.shape[0]
            x = np.vstack([x, x_new[None, :]])
            query = "num" if (mixed and it % config.numeric_every == 0) else "pref"
            win = _duel(bench, x_new, x[xr], rng, config.duel_noise)
            if query == "num":
                y = bench(x_new) + config.numeric_noise * rng.standard_normal()
                numeric_obs.append((new_idx, y))
            else:
                duels.append((new_idx, xr) if win else (xr, new_idx))
            if win:
                xr = new_idx
            rows.append(
                {
                    "trial": trial,
                    "iteration": it,
                    "query": query,
                    "g_xr": bench(x[xr]),
                    "x_new": " ".join(f"{v:.6g}" for v in x_new),
                    "won": int(xr == new_idx),
                }
            )
    return rows


def run_mixed_bo(config: ExperimentConfig) -> list[dict]:
    return run_pbo(config, mixed=True)


def _warm_refit(x, duels, numeric_obs, config, template, theta_prev, seed):
    """One cheap L-BFGS polish per refit, warm-started at the previous optimum."""
    observations = [
        {"type": "pref", "winner": int(w), "loser": int(l)} for w, l in duels
    ] + [
        {"type": "num", "index": int(i), "value": float(y)} for i, y in numeric_obs
    ]
    bounds = default_bounds(x)
    fit_cfg = FitConfig(
        optimizer="multistart_local", restarts=1, bounds=bounds, seed=seed
    )
    theta, model = optimize(
        x, observations, fit_cfg, template=template, warm_start=theta_prev
    )
    return theta, model


# ---------------------------------------------------------------------------
# safe Bayesian optimisation
# ---------------------------------------------------------------------------


def run_safe_bo(config: ExperimentConfig) -> list[dict]:
    domain = config.domain or [-5.0, 5.0]
    grid = np.linspace(domain[0], domain[1], config.grid_size)[:, None]
    start = int(np.argmin(np.abs(grid[:, 0])))
    h = config.safe_threshold
    spec = SkewPriorSpec(
        kernel=KernelSpec(
            lengthscales=np.atleast_1d(config.lengthscales or [1.5]),
            variance=config.variance or 2.0,
        )
    )
    acq_cfg = AcqConfig(
        kind="safe_ucb",
        credible_level=config.credible_level,
        safe_threshold=h,
        safe_prob=config.safe_prob,
        safe_penalty=config.safe_penalty,
        n_samples=config.n_samples,
    )
    rows = []
    for trial in range(config.trials):
        rng = np.random.default_rng(_trial_seed(config, trial, 7))
        g = _draw_safe_objective(grid, start, h, rng)
        x_pts = grid[start : start + 1].copy()
        grid_idx = [start]
        y0 = g[start] + config.obs_noise * rng.standard_normal()
        outcomes = [(0, True, y0)]
        best_valid = 0
        violations = 0
        for it in range(1, config.budget + 1):
            obs = valid_invalid_block(x_pts, outcomes, h, config.obs_noise)
            model = fit(spec, x_pts, obs, seed=_trial_seed(config, trial, 900 + it))
            draws = sample_latent(
                model, grid, config.n_samples,
                seed=_trial_seed(config, trial, 1300 + it),
            )
            scores = [safe_ucb(draws[:, j], acq_cfg) for j in range(grid.shape[0])]
            pick = int(np.argmax(scores))
            g_val = g[pick]
            valid = bool(g_val >= h)
            new_idx = x_pts.shape[0]
            x_pts = np.vstack([x_pts, grid[pick : pick + 1]])
            grid_idx.append(pick)
            if valid:
                y = g_val + config.obs_noise * rng.standard_normal()
                outcomes.append((new_idx, True, y))
                if y > outcomes[best_valid][2]:
                    best_valid = len(outcomes) - 1
            else:
                outcomes.append((new_idx, False, None))
                violations += 1
            g_xr = g[grid_idx[outcomes[best_valid][0]]]
            rows.append(
                {
                    "trial": trial,
                    "iteration": it,
                    "x_new": float(grid[pick, 0]),
                    "valid": int(valid),
                    "g_xr": float(g_xr),
                    "violations": violations,
                }
            )
    return rows


def _draw_safe_objective(grid, start_idx, h, rng, max_tries: int = 200):
    """GP draw (variance 2, lengthscale ~ U[1, 2]) with g(start) >= h."""
    for _ in range(max_tries):
        ell = rng.uniform(1.0, 2.0)
        k = KernelSpec(lengthscales=np.array([ell]), variance=2.0)
        cov = kernel_matrix(k, grid, grid)
        chol = jittered_cholesky(cov)
        g = chol @ rng.standard_normal(grid.shape[0])
        if g[start_idx] >= h:
            return g
    raise InputError("could not draw a feasible safe-BO objective")


# ---------------------------------------------------------------------------
# active learning
# ---------------------------------------------------------------------------


def run_active_learning(config: ExperimentConfig) -> list[dict]:
    rows = []
    for trial in range(config.trials):
        rng = np.random.default_rng(_trial_seed(config, trial, 23))
        if config.dataset:
            from .likelihoods import load_dataset

            data = load_dataset(config.dataset)
        else:
            data = generate_synthetic(
                config.generator, {"n": config.pool_size},
                _trial_seed(config, trial, 29),
            )
        x_all = np.asarray(data["inputs"], dtype=float)
        if x_all.ndim == 1:
            x_all = x_all[:, None]
        labels = np.zeros(x_all.shape[0], dtype=int)
        for ob in data["observations"]:
            if ob["type"] != "class":
                raise InputError("active learning expects a classification dataset")
            labels[int(ob["index"])] = 1 if int(ob["label"]) in (1,) else 0
        n_all = x_all.shape[0]
        test_idx = rng.choice(
            n_all, size=max(1, int(config.test_fraction * n_all)), replace=False
        )
        pool_idx = np.setdiff1d(np.arange(n_all), test_idx)
        labeled = list(
            rng.choice(pool_idx, size=min(config.initial_pool, pool_idx.size),
                       replace=False)
        )
        spec = _al_prior(config, x_all)
        theta_prev = None
        for it in range(config.budget + 1):
            xl = x_all[labeled]
            yl = labels[labeled]
            if config.refit_every and it % max(config.refit_every, 1) == 0 and np.unique(yl).size > 1:
                observations = [
                    {"type": "class", "index": j, "label": int(yl[j])}
                    for j in range(len(labeled))
                ]
                fit_cfg = FitConfig(
                    optimizer="multistart_local", restarts=1,
                    bounds=default_bounds(xl),
                    seed=_trial_seed(config, trial, 31 + it),
                )
                theta_prev, model = optimize(
                    xl, observations, fit_cfg, template=spec
                )
            else:
                from .likelihoods import classification_block

                model = fit(
                    spec, xl, classification_block(xl, yl),
                    seed=_trial_seed(config, trial, 37 + it),
                )
            test_draws = sample_latent(
                model, x_all[test_idx], config.n_samples,
                seed=_trial_seed(config, trial, 41 + it),
            )
            pred = ndtr(test_draws).mean(axis=0) > 0.5
            accuracy = float(np.mean(pred.astype(int) == labels[test_idx]))
            diversity = float(len(set(labeled)) / len(labeled))
            row = {
                "trial": trial,
                "iteration": it,
                "accuracy": accuracy,
                "pool_diversity": diversity,
                "acquired": "",
            }
            if it < config.budget:
                pool_draws = sample_latent(
                    model, x_all[pool_idx], config.n_samples,
                    seed=_trial_seed(config, trial, 43 + it),
                )
                probs = ndtr(pool_draws)
                scores = [bald(probs[:, j]) for j in range(pool_idx.size)]
                choice = int(pool_idx[int(np.argmax(scores))])
                labeled.append(choice)
                row["acquired"] = choice
            rows.append(row)
    return rows


def _al_prior(config: ExperimentConfig, x: np.ndarray) -> SkewPriorSpec:
    if config.lengthscales is not None:
        ls = np.asarray(config.lengthscales, dtype=float)
    else:
        spread = np.maximum(x.max(axis=0) - x.min(axis=0), 1e-3)
        ls = spread / 4.0
    return SkewPriorSpec(
        kernel=KernelSpec(lengthscales=ls, variance=config.variance or 5.0)
    )


# ---------------------------------------------------------------------------
# sampling benchmark
# ---------------------------------------------------------------------------


def run_sample_bench(config: ExperimentConfig) -> list[dict]:
    rows = []
    for n in config.sizes:
        data = generate_synthetic(
            "classification_recipe", {"n": int(n)}, config.seed + int(n)
        )
        x, obs = dataset_to_observations(data)
        meta = data["metadata"]
        spec = SkewPriorSpec(
            kernel=KernelSpec(
                lengthscales=np.asarray(meta["lengthscales"]),
                variance=float(meta["variance"]),
            )
        )
        t0 = time.perf_counter()
        model = fit(spec, x, obs, seed=config.seed)
        model.trunc_draws(1)
        setup_s = time.perf_counter() - t0
        warm = 50
        t0 = time.perf_counter()
        sample_latent(model, x, warm, seed=1, joint=True)
        t_warm = time.perf_counter() - t0
        t0 = time.perf_counter()
        sample_latent(model, x, config.n_samples, seed=1, joint=True)
        t_full = time.perf_counter() - t0
        per_sample = max(t_full - t_warm, 1e-9) / max(config.n_samples - warm, 1)
        model_b = fit(spec, x, obs, seed=config.seed + 1)
        chains = np.stack(
            [
                sample_latent(model, x, config.n_samples, seed=2, joint=True),
                sample_latent(model_b, x, config.n_samples, seed=3, joint=True),
            ]
        )
        gr = float(np.max(gelman_rubin(chains)))
        rows.append(
            {
                "n": int(n),
                "setup_seconds": setup_s,
                "per_sample_seconds": per_sample,
                "gelman_rubin_max": gr,
                "n_samples": config.n_samples,
            }
        )
    return rows


# ---------------------------------------------------------------------------
# synthetic datasets
# ---------------------------------------------------------------------------


def _mixed_true_function(x):
    return np.sin(1.5 * x) * np.exp(-0.2 * x) + 0.5


def generate_synthetic(kind: str, params: dict | None, seed: int) -> dict:
    """Seeded dataset generators; returns a schema-conformant dict."""
    params = dict(params or {})
    kind_key = int.from_bytes(hashlib.sha256(kind.encode()).digest()[:4], "little")
    rng = np.random.default_rng([seed, kind_key])
    if kind == "preference_1d":
        n_points = int(params.get("n_points", 25))
        n_duels = int(params.get("n_duels", 45))
        g = get_benchmark("oneD")
        x = np.sort(rng.uniform(-2.6, 2.6, size=n_points))
        observations = []
        for _ in range(n_duels):
            i, j = rng.choice(n_points, size=2, replace=False)
            w, l = (i, j) if g(x[i]) > g(x[j]) else (j, i)
            observations.append({"type": "pref", "winner": int(w), "loser": int(l)})
        data = {
            "inputs": [[float(v)] for v in x],
            "observations": observations,
            "noise": float(params.get("noise", 1.0)),
            "metadata": {"kind": kind, "seed": seed},
        }
    elif kind == "mixed_1d":
        n_numeric = int(params.get("n_numeric", 12))
        n_pref_points = int(params.get("n_pref_points", 16))
        n_duels = int(params.get("n_duels", 30))
        xa = np.linspace(0.0, 2.4, n_numeric)
        xb = np.sort(rng.uniform(2.5, 5.0, size=n_pref_points))
        x = np.concatenate([xa, xb])
        gv = _mixed_true_function(x)
        red = n_numeric + int(np.argmax(gv[n_numeric:]))
        observations = [
            {"type": "num", "index": int(i), "value": float(gv[i])}
            for i in range(n_numeric)
        ]
        for _ in range(n_duels):
            j = n_numeric + int(rng.integers(n_pref_points))
            if j == red:
                j = n_numeric + (int(j - n_numeric + 1) % n_pref_points)
            w, l = (j, red) if gv[j] > gv[red] else (red, j)
            observations.append({"type": "pref", "winner": int(w), "loser": int(l)})
        data = {
            "inputs": [[float(v)] for v in x],
            "observations": observations,
            "noise": float(params.get("noise", 0.1)),
            "metadata": {"kind": kind, "seed": seed, "numeric_region_end": 2.5},
        }
    elif kind == "classification_recipe":
        n = int(params.get("n", 1000))
        d = int(params.get("d", 3))
        x = rng.standard_normal((n, d))
        ell = rng.uniform(0.1, 1.1, size=d)
        var = rng.uniform(1.0, 10.0)
        k = KernelSpec(lengthscales=ell, variance=var)
        chol = jittered_cholesky(kernel_matrix(k, x, x))
        f = chol @ rng.standard_normal(n)
        y = (rng.uniform(size=n) < ndtr(f)).astype(int)
        data = {
            "inputs": x.tolist(),
            "observations": [
                {"type": "class", "index": int(i), "label": int(y[i])}
                for i in range(n)
            ],
            "metadata": {
                "kind": kind,
                "seed": seed,
                "lengthscales": ell.tolist(),
                "variance": float(var),
            },
        }
    elif kind == "classification_2d":
        n = int(params.get("n", 120))
        margin = float(params.get("margin", 0.2))
        pts = []
        while len(pts) < n:
            cand = rng.uniform(-2.0, 2.0, size=2)
            if abs(cand[0] + cand[1]) >= margin:
                pts.append(cand)
        x = np.array(pts)
        y = (x[:, 0] + x[:, 1] > 0).astype(int)
        data = {
            "inputs": x.tolist(),
            "observations": [
                {"type": "class", "index": int(i), "label": int(y[i])}
                for i in range(n)
            ],
            "metadata": {"kind": kind, "seed": seed},
        }
    else:
        raise InputError(f"unknown synthetic kind {kind!r}")
    return data


# ---------------------------------------------------------------------------
# fit / predict tasks
# ---------------------------------------------------------------------------


def run_fit(config: ExperimentConfig) -> FittedModel:
    if not config.data:
        raise InputError('fit task needs a "data" path')
    from .likelihoods import load_dataset

    data = load_dataset(config.data)
    x, obs = dataset_to_observations(data)
    if config.lengthscales is not None and config.variance is not None:
        spec = SkewPriorSpec(
            kernel=KernelSpec(
                lengthscales=np.asarray(config.lengthscales, dtype=float),
                variance=float(config.variance),
                noise_variance=float(data.get("noise", config.noise)) ** 2,
            )
        )
        return fit(spec, x, obs, seed=config.seed)
    fit_cfg = FitConfig(
        optimizer="multistart_local", restarts=config.restarts, seed=config.seed
    )
    _, model = optimize(x, list(data["observations"]), fit_cfg)
    return model


def run_predict(config: ExperimentConfig) -> list[dict]:
    if not config.model or config.xstar is None:
        raise InputError('predict task needs "model" and "xstar"')
    model = FittedModel.load(config.model)
    xstar = np.asarray(config.xstar, dtype=float)
    if xstar.ndim == 1:
        xstar = xstar[:, None]
    draws = sample_latent(model, xstar, config.n_samples, seed=config.seed)
    from .sun import skewness_statistic

    rows = []
    for j in range(xstar.shape[0]):
        col = draws[:, j]
        rows.append(
            {
                "point": " ".join(f"{v:.6g}" for v in xstar[j]),
                "mean": float(col.mean()),
                "std": float(col.std(ddof=1)),
                "skewness": skewness_statistic(col),
            }
        )
    return rows


RUNNERS = {
    "active_learn": run_active_learning,
    "pbo": run_pbo,
    "mixed_bo": run_mixed_bo,
    "safe_bo": run_safe_bo,
    "sample_bench": run_sample_bench,
    "predict": run_predict,
}
