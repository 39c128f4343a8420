"""
Fiber to bundle coherence of tractography streamlines.

Every streamline point with its tangent (and the opposite tangent) is a delta
in positions and orientations; the kernel density of all these deltas,
evaluated back at the fiber points, measures how well each point is aligned
with the rest of the bundle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernel import DiffusionParams, kernel_two_point
from .lie import _positive_first

DUPLICATE_TOLERANCE = 1e-9
DEFAULT_WINDOW = 5
DEFAULT_BLOCK = 256


def compute_tangents(points: np.ndarray) -> np.ndarray:
    """Normalised forward differences; the last point repeats the previous tangent."""
    points = np.asarray(points, dtype=float)
    if len(points) < 2:
        raise ValueError("a streamline needs at least two distinct points")
    d = np.diff(points, axis=0)
    length = np.linalg.norm(d, axis=1)
    if np.any(length == 0):
        raise ValueError("streamline has repeated consecutive points")
    t = d / length[:, None]
    return np.vstack([t, t[-1:]])


def remove_duplicates(points: np.ndarray, tol: float = DUPLICATE_TOLERANCE) -> np.ndarray:
    """Drop points closer than ``tol`` to the last kept point."""
    points = np.asarray(points, dtype=float)
    keep = [0]
    for k in range(1, len(points)):
        if np.linalg.norm(points[k] - points[keep[-1]]) > tol:
            keep.append(k)
    return points[keep]


@dataclass(frozen=True, eq=False)
class Streamline:
    points: np.ndarray
    tangents: np.ndarray

    @classmethod
    def from_points(cls, points) -> Streamline:
        points = remove_duplicates(points)
        return cls(points, compute_tangents(points))

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True, eq=False)
class Tractogram:
    fibers: list[Streamline] = field(default_factory=list)

    @classmethod
    def from_point_lists(cls, fibers) -> Tractogram:
        return cls([Streamline.from_points(f) for f in fibers])

    def __len__(self) -> int:
        return len(self.fibers)

    @property
    def n_total(self) -> int:
        return sum(len(f) for f in self.fibers)

    @property
    def points(self) -> np.ndarray:
        return np.concatenate([f.points for f in self.fibers]) if self.fibers else np.empty((0, 3))

    @property
    def tangents(self) -> np.ndarray:
        return np.concatenate([f.tangents for f in self.fibers]) if self.fibers else np.empty((0, 3))

    @property
    def fiber_index(self) -> np.ndarray:
        """Fiber number of every point."""
        return np.repeat(np.arange(len(self.fibers)), [len(f) for f in self.fibers])

    def subset(self, keep) -> Tractogram:
        return Tractogram([self.fibers[i] for i in keep])


def canonical_order(points: np.ndarray, tangents: np.ndarray) -> np.ndarray:
    """
    Order of the points by position, then by tangent up to sign. It does not
    depend on the order of the fibers nor on the tangent signs.
    """
    axis = _positive_first(np.asarray(tangents, dtype=float))
    keys = np.column_stack([points, axis])
    return np.lexsort(keys.T[::-1])


def pair_values(ya, na, yb, nb, p: DiffusionParams) -> np.ndarray:
    """
    Kernel between two fiber points summed over both tangent signs of each:
    (k(a+, b+) + k(a-, b-)) / 2 + (k(a+, b-) + k(a-, b+)) / 2.

    The terms are grouped so that flipping every tangent gives bitwise the
    same value.
    """
    same = kernel_two_point(ya, na, yb, nb, p) + kernel_two_point(ya, -na, yb, -nb, p)
    cross = kernel_two_point(ya, na, yb, -nb, p) + kernel_two_point(ya, -na, yb, nb, p)
    return 0.5 * same + 0.5 * cross


def fiber_density(tr: Tractogram, p: DiffusionParams, block: int = DEFAULT_BLOCK,
                  stats: dict | None = None) -> np.ndarray:
    """
    Density W(y_a, n_a) = 1/N_tot sum_b (sum over tangent signs) k(a, b) at
    every fiber point a, with b running over all fiber points including a.

    The kernel is symmetric in its two arguments, so each unordered pair
    {a, b} is evaluated once: N_tot (N_tot + 1) / 2 pair evaluations, counted
    in ``stats["pair_evaluations"]`` when a dict is passed.
    """
    n_total = tr.n_total
    if n_total == 0:
        raise ValueError("empty tractogram")
    order = canonical_order(tr.points, tr.tangents)
    y = tr.points[order]
    n = tr.tangents[order]
    acc = np.zeros(n_total)
    evaluations = 0
    for a0 in range(0, n_total, block):
        a1 = min(a0 + block, n_total)
        rows = np.arange(a0, a1)
        a, b = np.nonzero(np.arange(a0, n_total)[None, :] >= rows[:, None])
        a = a + a0
        b = b + a0
        values = pair_values(y[a], n[a], y[b], n[b], p)
        evaluations += len(values)
        acc += np.bincount(a, weights=values, minlength=n_total)
        off = a != b
        acc += np.bincount(b[off], weights=values[off], minlength=n_total)
    if stats is not None:
        stats["pair_evaluations"] = evaluations
    density = np.empty(n_total)
    density[order] = acc / n_total
    return density


@dataclass(frozen=True, eq=False)
class FbcResult:
    """
    point_density: W at every fiber point; fiber_fbc: sum of W over each
    fiber; fiber_fbc_normalized: the same divided by the number of points;
    local_fbc: windowed sum of W around every point.
    """

    point_density: np.ndarray
    fiber_fbc: np.ndarray
    fiber_fbc_normalized: np.ndarray
    local_fbc: np.ndarray
    fiber_index: np.ndarray

    def min_local(self) -> np.ndarray:
        """Lowest local FBC along every fiber."""
        out = np.full(len(self.fiber_fbc), np.inf)
        np.minimum.at(out, self.fiber_index, self.local_fbc)
        return out


def fbc_scores(tr: Tractogram, density: np.ndarray, window: int | str = DEFAULT_WINDOW) -> FbcResult:
    """
    Per-fiber and local coherence from point densities. The local score sums
    2 * window + 1 points centred on each point, clipped at the fiber ends;
    ``window="whole"`` uses the whole fiber.
    """
    if window != "whole" and (not isinstance(window, (int, np.integer)) or window < 1):
        raise ValueError(f"window must be a positive integer or 'whole', got {window!r}")
    fiber_fbc, normalized, local = [], [], []
    start = 0
    for f in tr.fibers:
        w = density[start:start + len(f)]
        start += len(f)
        total = float(np.sum(w))
        fiber_fbc.append(total)
        normalized.append(total / len(f))
        if window == "whole":
            local.append(np.full(len(f), total))
        else:
            local.append(np.convolve(w, np.ones(2 * window + 1), mode="same")[:len(f)]
                         if len(f) >= 2 * window + 1 else _clipped_sums(w, window))
    return FbcResult(np.asarray(density, dtype=float), np.array(fiber_fbc), np.array(normalized),
                     np.concatenate(local) if local else np.empty(0), tr.fiber_index)


def _clipped_sums(w: np.ndarray, window: int) -> np.ndarray:
    return np.array([w[max(0, j - window):j + window + 1].sum() for j in range(len(w))])


def fbc(tr: Tractogram, p: DiffusionParams, window: int | str = DEFAULT_WINDOW) -> FbcResult:
    return fbc_scores(tr, fiber_density(tr, p), window)


def filter_tractogram(tr: Tractogram, result: FbcResult, threshold: float,
                      mode: str = "per_fiber") -> Tractogram:
    """
    Keep fibers whose score is at least ``threshold``: the length-normalised
    fiber FBC (``per_fiber``) or the lowest local FBC (``per_point_min``).
    """
    if mode == "per_fiber":
        score = result.fiber_fbc_normalized
    elif mode == "per_point_min":
        score = result.min_local()
    else:
        raise ValueError(f"unknown filter mode {mode!r}")
    return tr.subset(np.flatnonzero(score >= threshold))
