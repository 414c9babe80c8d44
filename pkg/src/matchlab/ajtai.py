"""Hierarchical median-split matching for 4^k-point planar configurations.

The matcher assigns every point a word of 2k bits by alternating median
splits: bit one is whether the point falls in the upper half of the whole
configuration by x, bit two refines each half by y, bit three refines again
by x, and so on until the words are exhausted.  Splits are always exactly
even (each group of size 2s contributes s ones), with ties broken by
original index, so after 2k rounds every word of length 2k occurs exactly
once.  Matching two configurations then means pairing the points whose
words agree.

Because the splits depend only on coordinatewise orderings, the whole
labeling is invariant under strictly increasing transforms applied per
axis.  The pairing is cheap (sorting), needs no distances at all, and its
squared-distance cost is the benchmark heuristic that the exact solver and
the pair-exchange polish are measured against.

Costs are evaluated with the planar squared distance; the construction
splits raw coordinates and has no toroidal variant here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .geometry import Metric, PointSet, matching_cost
from .assignment import Matching, matching_to_json

__all__ = [
    "BitLabeling",
    "AjtaiResult",
    "median_bits",
    "build_labels",
    "match_ajtai",
    "label_expectation",
    "ajtai_result_to_json",
    "write_labels_csv",
    "read_labels_csv",
]


@dataclass(frozen=True)
class BitLabeling:
    """Per-point bit words from the alternating median splits.

    ``labels`` has shape (n, 2k) with entries 0/1; row order matches the
    point set the labeling was built from.  Odd-numbered bit positions
    (the first, third, ...) come from x splits, even-numbered ones from y.
    """

    labels: np.ndarray
    k: int

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels, dtype=np.uint8)
        if labels.ndim != 2 or labels.shape[1] != 2 * self.k:
            raise ValueError(f"labels must have shape (n, {2 * self.k})")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def words(self) -> list[str]:
        return ["".join("1" if b else "0" for b in row) for row in self.labels]


@dataclass(frozen=True)
class AjtaiResult:
    """A hierarchical matching together with its squared-distance cost."""

    matching: Matching
    total_cost: float


def median_bits(values: np.ndarray) -> np.ndarray:
    """Mark the upper half of ``values`` with ones.

    ``values`` must have even length 2s; exactly s entries get bit 1.  Ties
    are resolved by original position: among equal values the earlier ones
    stay in the lower half.  This is the single primitive every split in
    the hierarchy uses.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.shape[0] % 2 != 0 or values.shape[0] == 0:
        raise ValueError("median_bits needs a nonempty 1-d array of even length")
    s = values.shape[0] // 2
    order = np.argsort(values, kind="stable")
    bits = np.zeros(values.shape[0], dtype=np.uint8)
    bits[order[s:]] = 1
    return bits


def _require_power_of_four(n: int) -> int:
    """Return k with n = 4^k, or raise."""
    k = 0
    m = n
    while m > 1 and m % 4 == 0:
        m //= 4
        k += 1
    if m != 1 or n < 4:
        raise ValueError(f"hierarchical matching needs n = 4^k points, got n = {n}")
    return k


def build_labels(
    points: "PointSet | np.ndarray", k: int | None = None
) -> BitLabeling:
    """Label a 4^k-point configuration by alternating median splits.

    Round t (t = 1..2k) splits every group produced by rounds 1..t-1 along
    the x axis when t is odd and the y axis when t is even, writing bit t.
    Groups are index sets, so the labeling depends only on the coordinate
    orderings within each group.  ``k`` may be passed explicitly; it must
    then satisfy n = 4^k.
    """
    coords = points.coords if isinstance(points, PointSet) else np.asarray(points, float)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise ValueError(f"coords must have shape (n, 2), got {coords.shape}")
    n = coords.shape[0]
    k_derived = _require_power_of_four(n)
    if k is not None and k != k_derived:
        raise ValueError(f"n = {n} points require k = {k_derived}, got k = {k}")
    k = k_derived
    labels = np.zeros((n, 2 * k), dtype=np.uint8)
    groups: list[np.ndarray] = [np.arange(n)]
    for t in range(2 * k):
        axis = t % 2  # x on rounds 1, 3, ...; y on rounds 2, 4, ...
        next_groups: list[np.ndarray] = []
        for g in groups:
            bits = median_bits(coords[g, axis])
            labels[g, t] = bits
            next_groups.append(g[bits == 0])
            next_groups.append(g[bits == 1])
        groups = next_groups
    return BitLabeling(labels, k)


def _codes(labeling: BitLabeling) -> np.ndarray:
    """Pack each bit word into an integer; words are unique by construction."""
    weights = 1 << np.arange(2 * labeling.k - 1, -1, -1, dtype=np.int64)
    codes = labeling.labels.astype(np.int64) @ weights
    return codes


def match_ajtai(
    left: "PointSet | np.ndarray",
    right: "PointSet | np.ndarray",
    k: int | None = None,
) -> AjtaiResult:
    """Match two 4^k-point configurations by identical bit words.

    Both sides are labeled independently; point i on the left is paired
    with the unique right point carrying the same word.  The reported cost
    is the planar squared-distance total of that pairing.  ``k`` may be
    passed explicitly; it must then satisfy n = 4^k.
    """
    for ps in (left, right):
        if isinstance(ps, PointSet) and ps.metric is not Metric.PLANE:
            raise ValueError("hierarchical matching is defined for planar point sets")
    lx = left.coords if isinstance(left, PointSet) else np.asarray(left, float)
    rx = right.coords if isinstance(right, PointSet) else np.asarray(right, float)
    if lx.shape != rx.shape:
        raise ValueError("point sets must have equal size")
    lcodes = _codes(build_labels(lx, k))
    rcodes = _codes(build_labels(rx, k))
    # Each code sequence is a permutation of 0..n-1: sort both and align.
    lorder = np.argsort(lcodes)
    rorder = np.argsort(rcodes)
    perm = np.empty(lx.shape[0], dtype=np.int64)
    perm[lorder] = rorder
    total = matching_cost(lx, rx, perm, Metric.PLANE)
    matching = Matching(perm, total, None, None, False)
    return AjtaiResult(matching, total)


def label_expectation(bits: np.ndarray, k: int) -> tuple[float, float]:
    """Nominal cell coordinates for a bit word.

    Sums the x-round bits and the y-round bits separately and scales each
    sum by 1/(2^k + 1), giving a coarse (x, y) summary of where the word's
    cell sits: words with more upper-half splits on an axis score higher on
    that axis.
    """
    bits = np.asarray(bits, dtype=np.int64)
    if bits.shape != (2 * k,):
        raise ValueError(f"expected {2 * k} bits for k = {k}")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    denom = float(2**k + 1)
    c = int(bits[0::2].sum())  # x rounds: positions 1, 3, ... (1-indexed)
    d = int(bits[1::2].sum())
    return (c / denom, d / denom)


def ajtai_result_to_json(result: AjtaiResult, metric: Metric = Metric.PLANE) -> str:
    """Matching JSON with the algorithm tag added."""
    obj = json.loads(matching_to_json(result.matching, metric))
    obj["algorithm"] = "ajtai"
    return json.dumps(obj)


def write_labels_csv(labeling: BitLabeling, path) -> None:
    """Write ``idx,label`` rows; labels are 0/1 words of length 2k."""
    from pathlib import Path

    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("idx,label\n")
        for i, word in enumerate(labeling.words()):
            fh.write(f"{i},{word}\n")


def read_labels_csv(path) -> BitLabeling:
    from pathlib import Path

    with Path(path).open("r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "idx,label":
            raise ValueError(f"unexpected header {header!r}")
        rows = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            idx_s, word = line.split(",")
            rows.append((int(idx_s), word))
    if not rows:
        raise ValueError("empty label file")
    rows.sort(key=lambda r: r[0])
    width = len(rows[0][1])
    if width % 2 != 0:
        raise ValueError("label words must have even length")
    labels = np.zeros((len(rows), width), dtype=np.uint8)
    for i, (idx, word) in enumerate(rows):
        if idx != i or len(word) != width or set(word) - {"0", "1"}:
            raise ValueError(f"bad label row {idx},{word}")
        labels[i] = [1 if ch == "1" else 0 for ch in word]
    return BitLabeling(labels, width // 2)
