"""Spatial price maps from the duals of one exact toroidal matching.

A matching's dual prices attach a number to every point: the price credited
to each girl and each boy by the optimality certificate.  Painting the unit
square by the price of the nearest point (nearest in the toroidal sense,
over girls and boys together) turns the certificate into an image whose
plateaus and ridges show which regions are expensive to serve.

The map is a pure function of (n, seed, resolution): one seeded uniform
instance is drawn, solved exactly on the torus, and its normalized duals
(smallest price zero) are spread over the pixel grid with a periodic
nearest-neighbor lookup.  Pixels are summarized into equal-width price
buckets, counted separately by whether the nearest point was a girl (wife
side) or a boy (husband side).

Images are written as binary PPM (P6) with a fixed 256-step dark-blue to
yellow ramp; no image library is involved, so the bytes are reproducible
down to the header.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .assignment import Matching, solve_exact
from .geometry import Metric, PointSet, SampleKind, replication_stream, sample

__all__ = [
    "PriceMap",
    "PriceMapRun",
    "compute_price_map",
    "wrapping_couples",
    "color_ramp",
    "write_ppm",
    "price_map_to_json",
]

_DEFAULT_BUCKETS = 16

# Ramp endpoints, dark blue to yellow, chosen once and fixed: the image
# bytes are part of the reproducibility contract.
_RAMP_LO = np.array([13, 25, 94], dtype=np.float64)
_RAMP_HI = np.array([250, 243, 68], dtype=np.float64)


@dataclass(frozen=True)
class PriceMap:
    """A rasterized price field with per-bucket pixel counts.

    ``values[r, c]`` is the price at the pixel centered on
    ((c + 0.5) / resolution, (r + 0.5) / resolution); row 0 is the bottom
    of the square (PPM output flips rows so north is up).  ``wife_counts``
    and ``husband_counts`` split each price bucket by the side of the
    nearest point; they sum to resolution^2.
    """

    resolution: int
    values: np.ndarray
    min_value: float
    max_value: float
    wife_counts: np.ndarray
    husband_counts: np.ndarray
    n_buckets: int

    def __post_init__(self) -> None:
        if self.values.shape != (self.resolution, self.resolution):
            raise ValueError("values grid must be resolution x resolution")
        if self.wife_counts.shape != (self.n_buckets,) or self.husband_counts.shape != (
            self.n_buckets,
        ):
            raise ValueError("bucket counts must have length n_buckets")


@dataclass(frozen=True)
class PriceMapRun:
    """Everything one seeded run produces: instance, matching, raster."""

    girls: PointSet
    boys: PointSet
    matching: Matching
    price_map: PriceMap
    n: int
    master_seed: int


def compute_price_map(
    n: int,
    master_seed: int,
    resolution: int = 256,
    n_buckets: int = _DEFAULT_BUCKETS,
) -> PriceMapRun:
    """Solve one toroidal instance and rasterize its dual prices.

    Girls and boys are drawn from consecutive states of the replication-0
    stream of ``master_seed``, so the whole run is a pure function of its
    arguments.
    """
    if n < 2:
        raise ValueError("a price map needs at least 2 points per side")
    if resolution < 64:
        raise ValueError("resolution below 64 produces unreadable maps")
    if n_buckets < 1:
        raise ValueError("need at least one bucket")
    rng = replication_stream(master_seed, 0)
    girls = sample(SampleKind.UNIFORM, n, rng, Metric.TORUS)
    boys = sample(SampleKind.UNIFORM, n, rng, Metric.TORUS)
    matching = solve_exact(girls, boys)
    assert matching.duals_left is not None and matching.duals_right is not None

    points = np.vstack([girls.coords, boys.coords])
    prices = np.concatenate([matching.duals_left, matching.duals_right])
    tree = cKDTree(points, boxsize=1.0)
    axis = (np.arange(resolution) + 0.5) / resolution
    cx, cy = np.meshgrid(axis, axis)  # cy varies along rows: row r has y = axis[r]
    centers = np.column_stack([cx.ravel(), cy.ravel()])
    _, idx = tree.query(centers, k=1)
    values = prices[idx].reshape(resolution, resolution)
    is_wife = (idx < n).reshape(resolution, resolution)

    vmin = float(values.min())
    vmax = float(values.max())
    width = (vmax - vmin) or 1.0
    buckets = np.clip(
        ((values - vmin) / width * n_buckets).astype(np.int64), 0, n_buckets - 1
    )
    wife_counts = np.bincount(buckets[is_wife], minlength=n_buckets)
    husband_counts = np.bincount(buckets[~is_wife], minlength=n_buckets)

    pmap = PriceMap(
        resolution=resolution,
        values=values,
        min_value=vmin,
        max_value=vmax,
        wife_counts=wife_counts,
        husband_counts=husband_counts,
        n_buckets=n_buckets,
    )
    return PriceMapRun(
        girls=girls, boys=boys, matching=matching, price_map=pmap, n=n, master_seed=master_seed
    )


def wrapping_couples(run: PriceMapRun) -> np.ndarray:
    """Boolean mask over girls: couples whose geodesic crosses the seam.

    A couple wraps when the toroidal displacement disagrees with the
    planar one on either axis; those pairs get no segment in the figure
    and the wife is marked with an X instead.
    """
    g = run.girls.coords
    b = run.boys.coords[run.matching.permutation]
    return np.any(np.abs(g - b) > 0.5, axis=1)


def color_ramp() -> np.ndarray:
    """The fixed 256 x 3 uint8 ramp used by every price image."""
    t = np.linspace(0.0, 1.0, 256)[:, None]
    return np.rint(_RAMP_LO + t * (_RAMP_HI - _RAMP_LO)).astype(np.uint8)


def write_ppm(pmap: PriceMap, path) -> None:
    """Binary P6 image of the price field, north up, fixed color ramp."""
    ramp = color_ramp()
    width = (pmap.max_value - pmap.min_value) or 1.0
    t = (pmap.values - pmap.min_value) / width
    idx = np.clip(np.rint(t * 255.0).astype(np.int64), 0, 255)
    rgb = ramp[idx]  # (res, res, 3); row 0 is the bottom of the square
    rows_top_down = rgb[::-1]
    header = f"P6\n{pmap.resolution} {pmap.resolution}\n255\n".encode("ascii")
    with Path(path).open("wb") as fh:
        fh.write(header)
        fh.write(rows_top_down.tobytes())


def _sig12(x: float) -> float:
    return float("%.12g" % x)


def price_map_to_json(run: PriceMapRun) -> dict:
    """Sidecar payload for one run (callers add run metadata on top)."""
    pmap = run.price_map
    return {
        "n": run.n,
        "seed": run.master_seed,
        "resolution": pmap.resolution,
        "n_buckets": pmap.n_buckets,
        "min_value": _sig12(pmap.min_value),
        "max_value": _sig12(pmap.max_value),
        "total_cost": _sig12(run.matching.total_cost),
        "max_dual": _sig12(
            max(float(run.matching.duals_left.max()), float(run.matching.duals_right.max()))
        ),
        "wife_counts": [int(c) for c in pmap.wife_counts],
        "husband_counts": [int(c) for c in pmap.husband_counts],
        "wrapping_couples": int(wrapping_couples(run).sum()),
    }
