"""Dyadic merge dynamics of matching costs, and an autoregressive surrogate.

The experiment tracks four point sets per replication: established and
newly arrived girls (``old_girls``, ``young_girls``) and likewise boys, each
of size 2^level.  Six exact matching costs are recorded at every level,

    w1 = cost(old_girls,  old_boys)     w4 = cost(young_girls, young_boys)
    w2 = cost(old_girls,  young_boys)   w5 = cost(old_girls,  young_girls)
    w3 = cost(young_girls, old_boys)    w6 = cost(old_boys,   young_boys)

together with the merged cost of the doubled population,

    merged = cost(old_girls + young_girls, old_boys + young_boys),

after which the populations merge (old := old + young) and a fresh cohort
of the doubled size arrives.  Merging is exactly how the next level's w1
arises: w1 at level k+1 equals merged at level k.

Two reductions of the records are fitted here.  The merge recursion
regresses merged on s1 = w1+w2+w3+w4 and s2 = w5+w6 with no intercept,
merged ~ a*s1 - b*s2; if costs grow like beta*log n + const, consistency
of that growth forces 4a - 2b = 1 (each w in s1 sits one level below the
merged cost, each w in s2 connects same-side sets), so the fit's
stationarity defect |4a - 2b - 1| measures compatibility with logarithmic
growth.  The autoregressive surrogate goes further and models, level by
level, each w_i conditionally on its predecessors within the level, plus a
cross-level conditional for the next level's w1 given all six current w's.
Noise is hazard-family distributed with the power pinned at 1: residuals
are fitted by maximum likelihood and the fitted location folds into the
regression intercept, leaving a zero-location noise term.

Simulating the surrogate produces 67-entry replicates (eleven levels of six
costs plus the final merged cost), which are compared with real replicates
by exact assignment in R^67 (``model_vs_data``): matched replicate pairs at
small squared distance mean the surrogate reproduces the joint geometry,
not just the marginals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from . import hazard
from .assignment import solve_exact, solve_exact_dense
from .geometry import Metric, PointSet, SampleKind, sample

__all__ = [
    "QuadSets",
    "DyadicRecord",
    "RecursionFit",
    "MeanLawFit",
    "ARModel",
    "CrossLink",
    "ChainModel",
    "MAX_LEVEL",
    "make_quad",
    "six_distances",
    "merged_cost",
    "evolve",
    "run_chain",
    "fit_recursion",
    "restricted_dispersion",
    "fit_mean_law",
    "fit_ar_model",
    "fit_cross_level",
    "build_chain_model",
    "simulate_ar",
    "model_vs_data",
    "write_records_csv",
    "read_records_csv",
    "records_to_vectors",
    "write_vectors_csv",
    "read_vectors_csv",
    "vector_column_names",
]

# Levels above 11 would need 4096-point populations and multi-second exact
# solves per record; the experiments cap out well before that.
MAX_LEVEL = 11

_N_DIST = 6
VECTOR_LENGTH = MAX_LEVEL * _N_DIST + 1  # levels 0..10, then the final merged cost


@dataclass(frozen=True)
class QuadSets:
    """The four populations of one replication at a fixed level."""

    old_girls: PointSet
    young_girls: PointSet
    old_boys: PointSet
    young_boys: PointSet
    level: int

    def __post_init__(self) -> None:
        n = 2**self.level
        for ps in (self.old_girls, self.young_girls, self.old_boys, self.young_boys):
            if ps.n != n:
                raise ValueError(f"level {self.level} populations must have {n} points")
        metrics = {
            ps.metric
            for ps in (self.old_girls, self.young_girls, self.old_boys, self.young_boys)
        }
        if len(metrics) != 1:
            raise ValueError("all four populations must share one metric")

    @property
    def metric(self) -> Metric:
        return self.old_girls.metric


@dataclass(frozen=True)
class DyadicRecord:
    """Six costs and the merged cost of one replication at one level."""

    rep: int
    level: int
    w: tuple[float, float, float, float, float, float]
    merged: float

    def __post_init__(self) -> None:
        if len(self.w) != _N_DIST:
            raise ValueError("exactly six distances per record")

    @property
    def s1(self) -> float:
        return self.w[0] + self.w[1] + self.w[2] + self.w[3]

    @property
    def s2(self) -> float:
        return self.w[4] + self.w[5]


def make_quad(
    level: int,
    rng: np.random.Generator,
    metric: Metric = Metric.TORUS,
    kind: SampleKind = SampleKind.UNIFORM,
) -> QuadSets:
    """Draw four independent populations of size 2^level."""
    if not 0 <= level <= MAX_LEVEL:
        raise ValueError(f"level must be in 0..{MAX_LEVEL}")
    n = 2**level
    return QuadSets(
        old_girls=sample(kind, n, rng, metric),
        young_girls=sample(kind, n, rng, metric),
        old_boys=sample(kind, n, rng, metric),
        young_boys=sample(kind, n, rng, metric),
        level=level,
    )


def six_distances(quad: QuadSets) -> tuple[float, ...]:
    """Exact matching costs of the six cross pairs, in the w1..w6 order."""
    a, b = quad.old_girls, quad.young_girls
    c, d = quad.old_boys, quad.young_boys
    pairs = ((a, c), (a, d), (b, c), (b, d), (a, b), (c, d))
    return tuple(solve_exact(x, y).total_cost for x, y in pairs)


def _union(x: PointSet, y: PointSet) -> PointSet:
    return PointSet(np.vstack([x.coords, y.coords]), x.metric)


def merged_cost(quad: QuadSets) -> float:
    """Exact matching cost of all girls against all boys."""
    return solve_exact(
        _union(quad.old_girls, quad.young_girls),
        _union(quad.old_boys, quad.young_boys),
    ).total_cost


def evolve(quad: QuadSets, rng: np.random.Generator) -> QuadSets:
    """Merge the populations and draw the next cohort of doubled size."""
    if quad.level + 1 > MAX_LEVEL:
        raise ValueError(f"evolution beyond level {MAX_LEVEL} is not supported")
    n_next = 2 ** (quad.level + 1)
    kind = SampleKind.UNIFORM  # fresh cohorts mirror the initial sampling
    metric = quad.metric
    return QuadSets(
        old_girls=_union(quad.old_girls, quad.young_girls),
        young_girls=sample(kind, n_next, rng, metric),
        old_boys=_union(quad.old_boys, quad.young_boys),
        young_boys=sample(kind, n_next, rng, metric),
        level=quad.level + 1,
    )


def run_chain(
    rep: int,
    k_max: int,
    rng: np.random.Generator,
    metric: Metric = Metric.TORUS,
) -> list[DyadicRecord]:
    """One replication: records for levels 0..k_max along the merge chain."""
    if not 0 <= k_max <= MAX_LEVEL:
        raise ValueError(f"k_max must be in 0..{MAX_LEVEL}")
    quad = make_quad(0, rng, metric)
    records = []
    for level in range(k_max + 1):
        w = six_distances(quad)
        m = merged_cost(quad)
        records.append(DyadicRecord(rep=rep, level=level, w=w, merged=m))
        if level < k_max:
            quad = evolve(quad, rng)
    return records


@dataclass(frozen=True)
class RecursionFit:
    """No-intercept least squares of merged on (s1, -s2)."""

    a: float
    b: float
    noise_sd: float
    residuals: np.ndarray
    n_records: int

    @property
    def stationarity_defect(self) -> float:
        """|4a - 2b - 1|; zero iff the fit preserves logarithmic growth."""
        return abs(4.0 * self.a - 2.0 * self.b - 1.0)


def fit_recursion(records: "list[DyadicRecord]", levels: "set[int] | None" = None) -> RecursionFit:
    """Fit merged ~ a*s1 - b*s2 by least squares without an intercept.

    ``levels`` restricts to the given levels; by default all provided
    records enter.  The relation is scale free, so pooling adjacent high
    levels is legitimate here (unlike the conditional models, which are
    strictly per level).
    """
    if levels is not None:
        records = [r for r in records if r.level in levels]
    if len(records) < 100:
        raise ValueError(f"recursion fit needs at least 100 records, got {len(records)}")
    s1 = np.array([r.s1 for r in records])
    s2 = np.array([r.s2 for r in records])
    y = np.array([r.merged for r in records])
    X = np.column_stack([s1, -s2])
    coef, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    return RecursionFit(
        a=float(coef[0]),
        b=float(coef[1]),
        noise_sd=float(np.std(resid, ddof=2)),
        residuals=resid,
        n_records=len(records),
    )


def restricted_dispersion(records: "list[DyadicRecord]", levels: "set[int] | None" = None) -> float:
    """Residual sd of the coefficient-free model merged = s1 / 4.

    The restricted model imposes a = 1/4, b = 0 (stationary by
    construction); its dispersion is the benchmark the fitted recursion
    must beat.
    """
    if levels is not None:
        records = [r for r in records if r.level in levels]
    if not records:
        raise ValueError("no records")
    resid = np.array([r.merged - r.s1 / 4.0 for r in records])
    return float(np.std(resid, ddof=0))


@dataclass(frozen=True)
class MeanLawFit:
    """Parameters of mean_cost(n) = beta * log(n + alpha) + gamma."""

    alpha: float
    beta: float
    gamma: float
    rss: float


def fit_mean_law(
    sizes: np.ndarray,
    means: np.ndarray,
    fix_alpha: "float | None" = None,
) -> MeanLawFit:
    """Fit the logarithmic growth law to per-size mean costs.

    For fixed alpha the model is linear in (beta, gamma), so alpha is
    profiled: the 1-d residual function is minimized from the starts
    {0, 0.5, 1} and the best local optimum wins.  ``fix_alpha`` pins alpha
    (the two-parameter variant reported alongside the free fit).
    """
    n = np.asarray(sizes, dtype=np.float64)
    m = np.asarray(means, dtype=np.float64)
    if n.shape != m.shape or n.ndim != 1 or n.shape[0] < 3:
        raise ValueError("need matching 1-d arrays of at least 3 sizes")
    if np.any(n <= 0):
        raise ValueError("sizes must be positive")

    def profile(alpha: float) -> tuple[float, float, float]:
        X = np.column_stack([np.log(n + alpha), np.ones_like(n)])
        coef, _, _, _ = np.linalg.lstsq(X, m, rcond=None)
        rss = float(np.sum((m - X @ coef) ** 2))
        return rss, float(coef[0]), float(coef[1])

    if fix_alpha is not None:
        if fix_alpha < 0:
            raise ValueError("alpha must be nonnegative")
        rss, beta, gamma = profile(fix_alpha)
        return MeanLawFit(alpha=float(fix_alpha), beta=beta, gamma=gamma, rss=rss)

    from scipy import optimize as sp_optimize

    best: "tuple[float, float] | None" = None  # (rss, alpha)
    for start in (0.0, 0.5, 1.0):
        res = sp_optimize.minimize(
            lambda a: profile(float(a[0]))[0],
            np.array([start]),
            method="L-BFGS-B",
            bounds=[(0.0, 50.0)],
        )
        if best is None or res.fun < best[0]:
            best = (float(res.fun), float(res.x[0]))
    assert best is not None
    rss, beta, gamma = profile(best[1])
    return MeanLawFit(alpha=best[1], beta=beta, gamma=gamma, rss=rss)


def _two_stage_row(y: np.ndarray, X: np.ndarray) -> tuple[float, np.ndarray, float]:
    """OLS with intercept, then a lam = 1 hazard fit of the residuals.

    Returns (intercept, coefficients, sigma) where the fitted residual
    location is already folded into the intercept, so the noise term is a
    zero-location hazard member with the returned scale.
    """
    design = np.column_stack([np.ones_like(y), X]) if X.size else np.ones((y.shape[0], 1))
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    fit = hazard.fit_mle(resid, fix_lambda=True)
    intercept = float(coef[0]) + fit.params.mu
    slopes = np.asarray(coef[1:], dtype=np.float64)
    return intercept, slopes, fit.params.sigma


@dataclass(frozen=True)
class ARModel:
    """Within-level conditional chain w1 -> w2 -> ... -> w6.

    ``intercepts[i]`` and ``gammas[i]`` (length i) parameterize the
    conditional mean of w_{i+1} given w_1..w_i; row 0 is the marginal of
    w1.  Noise is hazard(0, sigmas[i], 1); the residual location from the
    two-stage fit is folded into the intercept.
    """

    level: int
    intercepts: np.ndarray        # (6,)
    gammas: tuple[np.ndarray, ...]  # lengths 0, 1, 2, 3, 4, 5
    sigmas: np.ndarray            # (6,)
    lam: float = 1.0
    n_records: int = 0

    def __post_init__(self) -> None:
        if len(self.gammas) != _N_DIST or any(
            g.shape != (i,) for i, g in enumerate(self.gammas)
        ):
            raise ValueError("gammas must have lengths 0..5")


@dataclass(frozen=True)
class CrossLink:
    """Conditional of the next level's w1 given the six current costs."""

    level: int                    # conditioning level; predicts level + 1
    intercept: float
    coeffs: np.ndarray            # (6,)
    sigma: float
    lam: float = 1.0
    n_records: int = 0


def _level_matrix(records: "list[DyadicRecord]", level: int) -> tuple[np.ndarray, np.ndarray]:
    rows = [r for r in records if r.level == level]
    return np.array([list(r.w) for r in rows]), np.array([r.merged for r in rows])


def fit_ar_model(records: "list[DyadicRecord]", level: int) -> ARModel:
    """Fit the within-level conditional chain at one level.

    Regressions are never pooled across levels: the coefficients drift
    with level, and mixing levels would average incompatible geometries.
    """
    W, _ = _level_matrix(records, level)
    if W.shape[0] < 200:
        raise ValueError(f"AR fit needs at least 200 records at level {level}, got {W.shape[0]}")
    intercepts = np.empty(_N_DIST)
    sigmas = np.empty(_N_DIST)
    gammas = []
    for i in range(_N_DIST):
        intercept, slopes, sigma = _two_stage_row(W[:, i], W[:, :i])
        intercepts[i] = intercept
        sigmas[i] = sigma
        gammas.append(slopes)
    return ARModel(
        level=level,
        intercepts=intercepts,
        gammas=tuple(gammas),
        sigmas=sigmas,
        n_records=W.shape[0],
    )


def fit_cross_level(records: "list[DyadicRecord]", level: int) -> CrossLink:
    """Fit the conditional of the next level's w1 (= this level's merged cost).

    The merged population IS the next level's established population, so
    the regression target is the merged cost recorded at ``level``.
    """
    W, merged = _level_matrix(records, level)
    if W.shape[0] < 200:
        raise ValueError(
            f"cross-level fit needs at least 200 records at level {level}, got {W.shape[0]}"
        )
    intercept, slopes, sigma = _two_stage_row(merged, W)
    return CrossLink(
        level=level,
        intercept=intercept,
        coeffs=slopes,
        sigma=sigma,
        n_records=W.shape[0],
    )


@dataclass(frozen=True)
class ChainModel:
    """Everything needed to simulate 67-entry replicates.

    Within-level models for levels 0..10 and cross links 0->1 .. 10->11;
    the last link produces the final merged entry.
    """

    levels: tuple[ARModel, ...]
    links: tuple[CrossLink, ...]

    def __post_init__(self) -> None:
        if len(self.levels) != MAX_LEVEL or len(self.links) != MAX_LEVEL:
            raise ValueError(f"need {MAX_LEVEL} level models and {MAX_LEVEL} cross links")
        for k, lv in enumerate(self.levels):
            if lv.level != k:
                raise ValueError("level models must be ordered 0..10")
        for k, ln in enumerate(self.links):
            if ln.level != k:
                raise ValueError("cross links must be ordered 0..10")


def build_chain_model(records: "list[DyadicRecord]") -> ChainModel:
    """Fit all per-level models and cross links from chain records."""
    levels = tuple(fit_ar_model(records, k) for k in range(MAX_LEVEL))
    links = tuple(fit_cross_level(records, k) for k in range(MAX_LEVEL))
    return ChainModel(levels=levels, links=links)


def _hazard_noise(sigma: float, rng: np.random.Generator) -> float:
    # sigma -> 0 collapses the noise to its location, which is zero here.
    if sigma < 1e-12:
        return 0.0
    return float(hazard.sample(hazard.HazardParams(0.0, sigma, 1.0), 1, rng)[0])


def simulate_ar(model: ChainModel, rng: np.random.Generator) -> np.ndarray:
    """Draw one synthetic 67-entry replicate from the fitted chain."""
    out = np.empty(VECTOR_LENGTH)
    pos = 0
    w_prev_level: "np.ndarray | None" = None
    for k, lv in enumerate(model.levels):
        w = np.empty(_N_DIST)
        for i in range(_N_DIST):
            if i == 0:
                if k == 0:
                    mean = lv.intercepts[0]
                else:
                    link = model.links[k - 1]
                    mean = link.intercept + float(link.coeffs @ w_prev_level)
                    # The cross link supersedes the marginal row of w1.
                    w[0] = mean + _hazard_noise(link.sigma, rng)
                    continue
                w[0] = mean + _hazard_noise(lv.sigmas[0], rng)
            else:
                mean = lv.intercepts[i] + float(lv.gammas[i] @ w[:i])
                w[i] = mean + _hazard_noise(lv.sigmas[i], rng)
        out[pos : pos + _N_DIST] = w
        pos += _N_DIST
        w_prev_level = w
    last = model.links[MAX_LEVEL - 1]
    mean = last.intercept + float(last.coeffs @ w_prev_level)
    out[pos] = mean + _hazard_noise(last.sigma, rng)
    return out


def records_to_vectors(records: "list[DyadicRecord]") -> np.ndarray:
    """Stack one 67-entry vector per replication from chain records.

    Requires complete chains: levels 0..10 for every rep; the final entry
    is the level-10 merged cost.  Incomplete reps raise.
    """
    by_rep: dict[int, dict[int, DyadicRecord]] = {}
    for r in records:
        by_rep.setdefault(r.rep, {})[r.level] = r
    reps = sorted(by_rep)
    out = np.empty((len(reps), VECTOR_LENGTH))
    for row, rep in enumerate(reps):
        chain = by_rep[rep]
        missing = sorted(set(range(MAX_LEVEL)) - set(chain))
        if missing:
            raise ValueError(f"rep {rep} lacks levels {missing}")
        pos = 0
        for k in range(MAX_LEVEL):
            out[row, pos : pos + _N_DIST] = chain[k].w
            pos += _N_DIST
        out[row, pos] = chain[MAX_LEVEL - 1].merged
    return out


def model_vs_data(left: np.ndarray, right: np.ndarray) -> float:
    """Exact assignment cost between two families of replicate vectors.

    Rows are matched one to one under squared Euclidean distance in R^67;
    the total is the headline figure of the surrogate-vs-data test.  A
    family matched against itself scores exactly zero.
    """
    left = np.asarray(left, dtype=np.float64)
    right = np.asarray(right, dtype=np.float64)
    if left.shape != right.shape or left.ndim != 2:
        raise ValueError("need two equal-shape 2-d arrays of replicate vectors")
    C = cdist(left, right, metric="sqeuclidean")
    return solve_exact_dense(C).total_cost


# ---------------------------------------------------------------------------
# Serialization

_REC_HEADER = "rep,k,w1,w2,w3,w4,w5,w6,merged"


def write_records_csv(records: "list[DyadicRecord]", path, meta: "str | None" = None) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        if meta is not None:
            fh.write("# " + meta.lstrip("# ") + "\n")
        fh.write(_REC_HEADER + "\n")
        for r in records:
            fields = [str(r.rep), str(r.level)]
            fields += ["%.17g" % x for x in r.w]
            fields.append("%.17g" % r.merged)
            fh.write(",".join(fields) + "\n")


def _skip_comments(fh) -> str:
    line = fh.readline()
    while line.startswith("#"):
        line = fh.readline()
    return line.strip()


def read_records_csv(path) -> "list[DyadicRecord]":
    with Path(path).open("r", encoding="utf-8") as fh:
        header = _skip_comments(fh)
        if header != _REC_HEADER:
            raise ValueError(f"unexpected header {header!r}")
        records = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 9:
                raise ValueError(f"bad record row {line!r}")
            records.append(
                DyadicRecord(
                    rep=int(parts[0]),
                    level=int(parts[1]),
                    w=tuple(float(x) for x in parts[2:8]),
                    merged=float(parts[8]),
                )
            )
    return records


def vector_column_names() -> list[str]:
    names = []
    for k in range(MAX_LEVEL):
        names += [f"k{k}_w{i}" for i in range(1, _N_DIST + 1)]
    names.append(f"k{MAX_LEVEL}_w1")
    return names


def write_vectors_csv(vectors: np.ndarray, path, meta: "str | None" = None) -> None:
    """One row per replicate: rep index plus the 67 entries."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[1] != VECTOR_LENGTH:
        raise ValueError(f"vectors must have shape (m, {VECTOR_LENGTH})")
    with Path(path).open("w", encoding="utf-8") as fh:
        if meta is not None:
            fh.write("# " + meta.lstrip("# ") + "\n")
        fh.write("rep," + ",".join(vector_column_names()) + "\n")
        for rep, row in enumerate(vectors):
            fh.write(str(rep) + "," + ",".join("%.17g" % x for x in row) + "\n")


def read_vectors_csv(path) -> np.ndarray:
    with Path(path).open("r", encoding="utf-8") as fh:
        header = _skip_comments(fh)
        if header != "rep," + ",".join(vector_column_names()):
            raise ValueError("unexpected vector CSV header")
        rows = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            rows.append([float(x) for x in parts[1:]])
    return np.asarray(rows, dtype=np.float64)
