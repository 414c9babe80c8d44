"""Experiment drivers: seeded, parallelizable, reproducible to the byte.

Each driver takes an ``ExperimentConfig``, runs its Monte Carlo loop from
per-replication random streams, writes delimited output plus a JSON summary
into the configured directory, renders companion figures, and returns the
summary dict.  Every output embeds the package version, the master seed,
and a hash of the configuration, so any file can be traced back to the
exact invocation that produced it.

Replication streams are indexed deterministically (size index times
replication count plus replication), so results do not depend on thread
count or execution order.  Simulated-model streams live in disjoint index
ranges far above the data range.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats as sp_stats

from . import dyadic, figures, hazard
from ._version import __version__
from .ajtai import match_ajtai
from .assignment import improve_two_swap, solve_exact
from .geometry import (
    Metric,
    PointSet,
    SampleKind,
    Transform,
    marginal_quantile_transform,
    replication_stream,
    sample,
)
from .pricemap import compute_price_map, price_map_to_json, write_ppm

__all__ = [
    "ExperimentConfig",
    "DEFAULT_CUTPOINTS",
    "run_matching_bench",
    "run_mean_growth",
    "run_distribution_fit",
    "run_price_map",
    "run_dyadic",
    "run_full_model_test",
    "run_calibration",
]

ALGORITHMS = ("exact", "ajtai", "ajtai+improve")
KINDS = ("uniform", "normal")

# Fitted-parameter Kolmogorov cut points simulated by ``matchlab calibrate``
# (817 observations, 5000 trials, master seed 20240817, 44 trials discarded);
# used by dist-fit whenever no explicit calibration file is supplied.
DEFAULT_CUTPOINTS = {"cut05": 0.7679402815294767, "cut01": 0.884101324050911}

# Simulated replicates draw from stream indices far above any data range.
_SIM_STREAM_BASE = 1_000_000

_GROWTH_SIZES = tuple(int(2**j) for j in range(12))


@dataclass(frozen=True)
class ExperimentConfig:
    """Shared knobs for all drivers; unused fields are ignored per driver."""

    seed: int = 2024
    reps: int = 300
    sizes: tuple[int, ...] = (1024,)
    metric: Metric = Metric.TORUS
    algorithms: tuple[str, ...] = ALGORITHMS
    kinds: tuple[str, ...] = KINDS
    out_dir: Path = Path(".")
    threads: int = 1
    n_points: int = 1024
    resolution: int = 256
    n_buckets: int = 16
    k_max: int = 10
    n_obs: int = 817
    trials: int = 5000
    cutpoints: "dict | None" = None
    model_sim_batches: int = 5

    def __post_init__(self) -> None:
        object.__setattr__(self, "metric", Metric(self.metric))
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        object.__setattr__(self, "sizes", tuple(int(n) for n in self.sizes))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        object.__setattr__(self, "kinds", tuple(self.kinds))
        if self.reps < 1:
            raise ValueError("reps must be positive")
        if any(n < 1 for n in self.sizes):
            raise ValueError("sizes must be positive")
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad:
            raise ValueError(f"unknown algorithms {sorted(bad)}; choose from {ALGORITHMS}")
        bad = set(self.kinds) - set(KINDS)
        if bad:
            raise ValueError(f"unknown sample kinds {sorted(bad)}; choose from {KINDS}")
        if self.threads < 1:
            raise ValueError("threads must be positive")

    def config_hash(self) -> str:
        payload = dataclasses.asdict(self)
        payload["metric"] = self.metric.value
        payload["out_dir"] = ""  # where outputs land must not change their content
        blob = json.dumps(payload, sort_keys=True, default=str).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:12]

    def metadata(self) -> dict:
        return {
            "version": __version__,
            "master_seed": self.seed,
            "config_hash": self.config_hash(),
        }


# ---------------------------------------------------------------------------
# Output helpers


def _meta_line(config: ExperimentConfig) -> str:
    meta = config.metadata()
    return f"# matchlab {meta['version']} seed={meta['master_seed']} config={meta['config_hash']}"


def _write_csv(config: ExperimentConfig, path: Path, header: str, rows: list[str]) -> None:
    with path.open("w", encoding="utf-8") as fh:
        fh.write(_meta_line(config) + "\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(row + "\n")


def _write_json(config: ExperimentConfig, path: Path, payload: dict) -> dict:
    out = dict(config.metadata())
    out.update(payload)
    with path.open("w", encoding="utf-8") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


def _map_reps(worker, items: list, threads: int) -> list:
    if threads <= 1:
        return [worker(item) for item in items]
    chunk = max(1, len(items) // (threads * 8))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, items, chunksize=chunk))


def _sig(x: float) -> str:
    return "%.12g" % x


# ---------------------------------------------------------------------------
# Matching benchmark


def _bench_rep(item: tuple) -> dict:
    seed, stream_index, n, kinds, algorithms, metric = item
    rng = replication_stream(seed, stream_index)
    girls_u = sample(SampleKind.UNIFORM, n, rng, metric)
    boys_u = sample(SampleKind.UNIFORM, n, rng, metric)
    variants = {}
    if "uniform" in kinds:
        variants["uniform"] = (girls_u, boys_u)
    if "normal" in kinds:
        variants["normal"] = (
            marginal_quantile_transform(girls_u, Transform.UNIFORM_TO_NORMAL),
            marginal_quantile_transform(boys_u, Transform.UNIFORM_TO_NORMAL),
        )
    out = {}
    for kind, (g, b) in variants.items():
        hier = None
        if "ajtai" in algorithms or "ajtai+improve" in algorithms:
            hier = match_ajtai(g, b)
        for algo in algorithms:
            if algo == "exact":
                out[(kind, algo)] = solve_exact(g, b).total_cost
            elif algo == "ajtai":
                out[(kind, algo)] = hier.total_cost
            else:
                out[(kind, algo)] = improve_two_swap(g, b, hier.matching).total_cost
    return out


def _validate_bench(config: ExperimentConfig) -> None:
    needs_plane = "normal" in config.kinds or set(config.algorithms) & {"ajtai", "ajtai+improve"}
    if needs_plane and config.metric is not Metric.PLANE:
        raise ValueError(
            "normal samples and hierarchical matching are defined on the plane; "
            "rerun with the plane metric or restrict kinds/algorithms"
        )
    if set(config.algorithms) & {"ajtai", "ajtai+improve"}:
        for n in config.sizes:
            k = 0
            m = n
            while m > 1 and m % 4 == 0:
                m //= 4
                k += 1
            if m != 1 or n < 4:
                raise ValueError(f"hierarchical algorithms need sizes of the form 4^k, got {n}")


def run_matching_bench(config: ExperimentConfig) -> dict:
    """Cost statistics and cross-algorithm correlations on shared samples.

    Within a replication every algorithm sees the same uniform instance,
    and the normal variant is the same instance pushed through the exact
    uniform-to-normal quantile map, so cross-algorithm and cross-kind
    correlations are meaningful.
    """
    _validate_bench(config)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    stat_rows = []
    summary: dict = {"sizes": {}}
    costs_for_figure = {}
    for si, n in enumerate(config.sizes):
        items = [
            (config.seed, si * config.reps + rep, n, config.kinds, config.algorithms, config.metric)
            for rep in range(config.reps)
        ]
        results = _map_reps(_bench_rep, items, config.threads)
        keys = [(kind, algo) for kind in config.kinds for algo in config.algorithms]
        series = {key: np.array([r[key] for r in results]) for key in keys}
        if n == max(config.sizes):
            costs_for_figure = series
        for kind, algo in keys:
            vals = series[(kind, algo)]
            stat_rows.append(
                ",".join(
                    [
                        str(n),
                        kind,
                        algo,
                        str(config.reps),
                        _sig(float(np.mean(vals))),
                        _sig(float(np.std(vals, ddof=1))),
                        _sig(float(sp_stats.skew(vals, bias=False))),
                    ]
                )
            )
        labels = [f"{kind}:{algo}" for kind, algo in keys]
        matrix = np.corrcoef(np.vstack([series[key] for key in keys]))
        corr_rows = [
            label + "," + ",".join(_sig(float(x)) for x in matrix[i])
            for i, label in enumerate(labels)
        ]
        _write_csv(
            config,
            config.out_dir / f"bench_corr_{n}.csv",
            "label," + ",".join(labels),
            corr_rows,
        )
        summary["sizes"][str(n)] = {
            "stats": {
                f"{kind}:{algo}": {
                    "mean": float(np.mean(series[(kind, algo)])),
                    "sd": float(np.std(series[(kind, algo)], ddof=1)),
                    "skewness": float(sp_stats.skew(series[(kind, algo)], bias=False)),
                }
                for kind, algo in keys
            },
            "correlations": {
                f"{labels[i]}|{labels[j]}": float(matrix[i, j])
                for i in range(len(labels))
                for j in range(i + 1, len(labels))
            },
        }
    _write_csv(
        config,
        config.out_dir / "bench_stats.csv",
        "n,kind,algorithm,reps,mean,sd,skewness",
        stat_rows,
    )
    if costs_for_figure:
        figures.bench_figure(costs_for_figure, config.out_dir / "bench.png")
    return _write_json(config, config.out_dir / "bench.json", summary)


# ---------------------------------------------------------------------------
# Mean growth


def _growth_rep(item: tuple) -> float:
    seed, stream_index, n, metric = item
    rng = replication_stream(seed, stream_index)
    g = sample(SampleKind.UNIFORM, n, rng, metric)
    b = sample(SampleKind.UNIFORM, n, rng, metric)
    return solve_exact(g, b).total_cost


def _exact_cost_table(config: ExperimentConfig, sizes: tuple[int, ...]) -> dict[int, np.ndarray]:
    out = {}
    for si, n in enumerate(sizes):
        items = [
            (config.seed, si * config.reps + rep, n, config.metric) for rep in range(config.reps)
        ]
        out[n] = np.asarray(_map_reps(_growth_rep, items, config.threads))
    return out

def run_mean_growth(config: ExperimentConfig) -> dict:
    """Mean exact cost by size, with the logarithmic growth-law fits."""
    sizes = config.sizes if config.sizes != (1024,) else _GROWTH_SIZES
    config.out_dir.mkdir(parents=True, exist_ok=True)
    table = _exact_cost_table(config, sizes)
    means = np.array([float(np.mean(table[n])) for n in sizes])
    if config.reps > 1:
        sds = np.array([float(np.std(table[n], ddof=1)) for n in sizes])
    else:
        sds = np.zeros(len(sizes))
    rows = [
        ",".join(
            [
                str(n),
                str(config.reps),
                _sig(means[i]),
                _sig(sds[i]),
                _sig(sds[i] / np.sqrt(config.reps)),
            ]
        )
        for i, n in enumerate(sizes)
    ]
    _write_csv(config, config.out_dir / "mean_growth.csv", "n,reps,mean,sd,sem", rows)
    fit_free = dyadic.fit_mean_law(np.asarray(sizes, float), means)
    fit_zero = dyadic.fit_mean_law(np.asarray(sizes, float), means, fix_alpha=0.0)
    figures.mean_growth_figure(sizes, means, sds / np.sqrt(config.reps), fit_free, config.out_dir / "mean_growth.png")
    payload = {
        "metric": config.metric.value,
        "sizes": list(sizes),
        "means": [float(m) for m in means],
        "sds": [float(s) for s in sds],
        "means_increasing": bool(np.all(np.diff(means) > 0)),
        "fit": dataclasses.asdict(fit_free),
        "fit_alpha0": dataclasses.asdict(fit_zero),
    }
    return _write_json(config, config.out_dir / "mean_growth.json", payload)


# ---------------------------------------------------------------------------
# Distribution fit


def run_distribution_fit(config: ExperimentConfig) -> dict:
    """Hazard-family fits of per-size cost samples, with calibrated tests.

    Fits each size's exact-cost sample twice (hazard power free and pinned
    to 1), applies the survival transform at the free fit, and compares
    the scaled Kolmogorov statistic against the calibrated cut points.
    """
    config.out_dir.mkdir(parents=True, exist_ok=True)
    cut = config.cutpoints or DEFAULT_CUTPOINTS
    table = _exact_cost_table(config, config.sizes)
    rows = []
    entries = []
    for n in config.sizes:
        costs = table[n]
        fit_free = hazard.fit_mle(costs)
        fit_pinned = hazard.fit_mle(costs, fix_lambda=True)
        uniforms = hazard.pit(costs, fit_free.params)
        ks = hazard.ks_statistic(uniforms)
        hazard.write_pit_csv(uniforms, config.out_dir / f"pit_{n}.csv")
        rows.append(
            ",".join(
                [
                    str(n),
                    str(config.reps),
                    _sig(fit_free.params.mu),
                    _sig(fit_free.params.sigma),
                    _sig(fit_free.params.lam),
                    _sig(fit_free.log_likelihood),
                    str(int(fit_free.converged)),
                    _sig(fit_pinned.params.mu),
                    _sig(fit_pinned.params.sigma),
                    _sig(ks),
                    _sig(cut["cut05"]),
                    _sig(cut["cut01"]),
                    str(int(ks > cut["cut05"])),
                    str(int(ks > cut["cut01"])),
                ]
            )
        )
        entries.append(
            {
                "n": n,
                "ks": ks,
                "uniforms": uniforms,
                "fit_free": fit_free,
                "fit_pinned": fit_pinned,
            }
        )
    _write_csv(
        config,
        config.out_dir / "dist_fit.csv",
        "n,reps,mu,sigma,lambda,log_likelihood,converged,mu_lam1,sigma_lam1,ks,cut05,cut01,reject05,reject01",
        rows,
    )
    figures.dist_fit_figure(entries, config.out_dir / "dist_fit.png")
    payload = {
        "metric": config.metric.value,
        "cutpoints": cut,
        "fits": {
            str(e["n"]): {
                "free": json.loads(hazard.fit_result_to_json(e["fit_free"])),
                "lambda1": json.loads(hazard.fit_result_to_json(e["fit_pinned"])),
                "ks": e["ks"],
                "reject05": bool(e["ks"] > cut["cut05"]),
                "reject01": bool(e["ks"] > cut["cut01"]),
            }
            for e in entries
        },
    }
    return _write_json(config, config.out_dir / "dist_fit.json", payload)


# ---------------------------------------------------------------------------
# Price map


def run_price_map(config: ExperimentConfig) -> dict:
    """One seeded toroidal solve rendered to PPM, JSON sidecar, and figure."""
    config.out_dir.mkdir(parents=True, exist_ok=True)
    run = compute_price_map(
        config.n_points, config.seed, resolution=config.resolution, n_buckets=config.n_buckets
    )
    write_ppm(run.price_map, config.out_dir / "price_map.ppm")
    figures.price_map_figure(run, config.out_dir / "price_map.png")
    return _write_json(config, config.out_dir / "price_map.json", price_map_to_json(run))


# ---------------------------------------------------------------------------
# Dyadic chains


def _chain_rep(item: tuple) -> list:
    seed, rep, k_max, metric = item
    rng = replication_stream(seed, rep)
    return dyadic.run_chain(rep, k_max, rng, metric)


def _chain_records(config: ExperimentConfig) -> list:
    items = [(config.seed, rep, config.k_max, config.metric) for rep in range(config.reps)]
    nested = _map_reps(_chain_rep, items, config.threads)
    return [rec for chain in nested for rec in chain]


def _recursion_levels(config: ExperimentConfig) -> set[int]:
    # The recursion coefficients are asymptotic; fit on the top three levels.
    top = config.k_max
    return set(range(max(0, top - 2), top + 1))


def run_dyadic(config: ExperimentConfig) -> dict:
    """Merge-chain records plus the recursion and conditional-model fits."""
    if config.metric is not Metric.TORUS:
        raise ValueError("the dyadic experiment is defined on the torus")
    config.out_dir.mkdir(parents=True, exist_ok=True)
    records = _chain_records(config)
    dyadic.write_records_csv(records, config.out_dir / "dyadic_records.csv")
    levels = _recursion_levels(config)
    rec_fit = dyadic.fit_recursion(records, levels)
    restricted = dyadic.restricted_dispersion(records, levels)

    sizes = np.array([2.0**k for k in range(config.k_max + 1)])
    w1_means = np.array(
        [np.mean([r.w[0] for r in records if r.level == k]) for k in range(config.k_max + 1)]
    )
    law = dyadic.fit_mean_law(sizes, w1_means)

    gamma_rows = []
    ar_levels = {}
    can_fit_ar = config.reps >= 200
    if can_fit_ar:
        for k in range(config.k_max + 1):
            model = dyadic.fit_ar_model(records, k)
            ar_levels[str(k)] = {
                "intercepts": [float(x) for x in model.intercepts],
                "gammas": [[float(g) for g in row] for row in model.gammas],
                "sigmas": [float(s) for s in model.sigmas],
            }
            for i in range(6):
                coeffs = [""] * 5
                for j, g in enumerate(model.gammas[i]):
                    coeffs[j] = _sig(float(g))
                gamma_rows.append(
                    ",".join(
                        [str(k), str(i + 1), _sig(float(model.intercepts[i]))]
                        + coeffs
                        + [_sig(float(model.sigmas[i]))]
                    )
                )
        _write_csv(
            config,
            config.out_dir / "dyadic_gamma.csv",
            "k,i,intercept,g1,g2,g3,g4,g5,sigma",
            gamma_rows,
        )
    fit_levels = sorted(levels)
    level_records = [r for r in records if r.level in levels]
    figures.dyadic_figure(level_records, rec_fit, config.out_dir / "dyadic.png")
    payload = {
        "k_max": config.k_max,
        "recursion_levels": fit_levels,
        "recursion": {
            "a": rec_fit.a,
            "b": rec_fit.b,
            "noise_sd": rec_fit.noise_sd,
            "stationarity_defect": rec_fit.stationarity_defect,
            "n_records": rec_fit.n_records,
        },
        "restricted_dispersion": restricted,
        "w1_mean_law": dataclasses.asdict(law),
        "ar_models": ar_levels if can_fit_ar else None,
    }
    return _write_json(config, config.out_dir / "dyadic.json", payload)


# ---------------------------------------------------------------------------
# Full model test


def _ks_by_level(vectors: np.ndarray) -> list[float]:
    """Kolmogorov column for the goodness-of-fit table, one row per level.

    Rows 0..10 pool the six costs of a level across replications, so each
    row mixes 6 * reps values that share a fit; the last row is the merged
    cost of the top level (reps values).  Pooled rows are not independent
    samples, which inflates the statistic relative to the calibrated cut
    points.
    """
    stats = []
    for k in range(dyadic.MAX_LEVEL):
        sample_k = np.ascontiguousarray(vectors[:, 6 * k : 6 * k + 6]).ravel()
        fit = hazard.fit_mle(sample_k)
        stats.append(hazard.ks_statistic(hazard.pit(sample_k, fit.params)))
    merged = vectors[:, -1]
    fit = hazard.fit_mle(merged)
    stats.append(hazard.ks_statistic(hazard.pit(merged, fit.params)))
    return stats


def _shrink_model(model: dyadic.ChainModel, factor: float) -> dyadic.ChainModel:
    levels = tuple(
        dataclasses.replace(lv, sigmas=lv.sigmas * factor) for lv in model.levels
    )
    links = tuple(dataclasses.replace(ln, sigma=ln.sigma * factor) for ln in model.links)
    return dyadic.ChainModel(levels=levels, links=links)


def run_full_model_test(config: ExperimentConfig) -> dict:
    """Fit the chain surrogate on real chains and score it by assignment.

    Produces the data replicate vectors, several simulated batches, the
    assignment costs (data vs model, model vs model, data vs a noise-shrunk
    model, and shrunk vs shrunk as a same-law baseline), and a per-level
    goodness-of-fit table comparing the data column against each simulated
    batch.
    """
    if config.metric is not Metric.TORUS:
        raise ValueError("the model test is defined on the torus")
    if config.k_max != dyadic.MAX_LEVEL - 1:
        raise ValueError(f"the model test needs k_max = {dyadic.MAX_LEVEL - 1}")
    config.out_dir.mkdir(parents=True, exist_ok=True)
    records = _chain_records(config)
    dyadic.write_records_csv(records, config.out_dir / "model_test_records.csv")
    data_vectors = dyadic.records_to_vectors(records)
    dyadic.write_vectors_csv(data_vectors, config.out_dir / "model_test_data_vectors.csv")
    model = dyadic.build_chain_model(records)

    n_batches = max(3, config.model_sim_batches)
    batches = []
    for batch in range(n_batches):
        rows = np.vstack(
            [
                dyadic.simulate_ar(
                    model,
                    replication_stream(
                        config.seed, _SIM_STREAM_BASE * (batch + 1) + rep
                    ),
                )
                for rep in range(config.reps)
            ]
        )
        batches.append(rows)
    dyadic.write_vectors_csv(batches[0], config.out_dir / "model_test_sim_vectors.csv")

    shrunk = _shrink_model(model, 0.975)
    shrunk_batches = []
    for extra in range(2):
        rows = np.vstack(
            [
                dyadic.simulate_ar(
                    shrunk,
                    replication_stream(
                        config.seed, _SIM_STREAM_BASE * (n_batches + 1 + extra) + rep
                    ),
                )
                for rep in range(config.reps)
            ]
        )
        shrunk_batches.append(rows)

    data_vs_model = dyadic.model_vs_data(data_vectors, batches[0])
    model_vs_model = dyadic.model_vs_data(batches[1], batches[2])
    data_vs_shrunk = dyadic.model_vs_data(data_vectors, shrunk_batches[0])
    shrunk_vs_shrunk = dyadic.model_vs_data(shrunk_batches[0], shrunk_batches[1])

    data_ks = _ks_by_level(data_vectors)
    model_ks = [_ks_by_level(batch) for batch in batches]
    levels = list(range(dyadic.MAX_LEVEL + 1))
    ks_rows = [
        ",".join(
            [str(k), _sig(data_ks[i])] + [_sig(col[i]) for col in model_ks]
        )
        for i, k in enumerate(levels)
    ]
    _write_csv(
        config,
        config.out_dir / "model_test_ks.csv",
        "k,data," + ",".join(f"sim{j + 1}" for j in range(len(model_ks))),
        ks_rows,
    )
    figures.model_test_figure(levels, data_ks, model_ks, config.out_dir / "model_test.png")
    payload = {
        "reps": config.reps,
        "data_vs_model": data_vs_model,
        "model_vs_model": model_vs_model,
        "data_vs_shrunk": data_vs_shrunk,
        "shrunk_vs_shrunk": shrunk_vs_shrunk,
        "shrink_factor": 0.975,
        "ks_levels": levels,
        "ks_data": data_ks,
        "ks_model": model_ks,
        "ar_models": {
            str(lv.level): {
                "intercepts": [float(x) for x in lv.intercepts],
                "gammas": [[float(g) for g in row] for row in lv.gammas],
                "sigmas": [float(s) for s in lv.sigmas],
            }
            for lv in model.levels
        },
        "cross_links": {
            str(ln.level): {
                "intercept": float(ln.intercept),
                "coeffs": [float(c) for c in ln.coeffs],
                "sigma": float(ln.sigma),
            }
            for ln in model.links
        },
    }
    return _write_json(config, config.out_dir / "model_test.json", payload)


# ---------------------------------------------------------------------------
# Calibration


def run_calibration(config: ExperimentConfig) -> dict:
    """Simulate the fitted-parameter Kolmogorov cut points."""
    config.out_dir.mkdir(parents=True, exist_ok=True)
    result = hazard.calibrate_cutpoints(config.n_obs, config.trials, config.seed)
    _write_csv(
        config,
        config.out_dir / "calibration.csv",
        "n_obs,n_trials,n_discarded,cut05,cut01",
        [
            ",".join(
                [
                    str(result.n_obs),
                    str(result.n_trials),
                    str(result.n_discarded),
                    _sig(result.cut05),
                    _sig(result.cut01),
                ]
            )
        ],
    )
    return _write_json(
        config,
        config.out_dir / "calibration.json",
        json.loads(hazard.calibration_to_json(result)),
    )
