"""Sphere samplings with Voronoi quadrature weights, and voxel grid conventions."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull, SphericalVoronoi

MAX_LEVEL = 5


@dataclass(frozen=True)
class GridSpec:
    dims: tuple[int, int, int]
    spacing: float = 1.0

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or min(dims) < 1:
            raise ValueError(f"grid dims must be three positive integers, got {self.dims}")
        if not self.spacing > 0:
            raise ValueError(f"grid spacing must be positive, got {self.spacing}")
        object.__setattr__(self, "dims", dims)

    @property
    def voxel_volume(self) -> float:
        return self.spacing**3

    @property
    def center(self) -> tuple[int, int, int]:
        return tuple(d // 2 for d in self.dims)


@dataclass(frozen=True, eq=False)
class SphereSampling:
    """
    Orientations on S^2 with quadrature weights (steradians).

    ``faces`` is the triangle mesh connectivity (outward oriented), ``antipodal``
    an optional index map i -> j with points[j] = -points[i], and ``level`` the
    icosphere subdivision level when the sampling is an icosphere.
    """

    points: np.ndarray
    weights: np.ndarray
    faces: np.ndarray | None = None
    antipodal: np.ndarray | None = None
    level: int | None = None
    _key: bytes = field(default=b"", repr=False)

    def __post_init__(self):
        for name in ("points", "weights", "faces", "antipodal"):
            value = getattr(self, name)
            if value is not None:
                value = np.array(value)
                value.setflags(write=False)
                object.__setattr__(self, name, value)
        object.__setattr__(self, "_key", self.points.tobytes() + self.weights.tobytes())

    def __len__(self) -> int:
        return len(self.points)

    def __eq__(self, other) -> bool:
        return isinstance(other, SphereSampling) and self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def nearest(self, n: np.ndarray) -> int:
        """Index of the sample closest to direction n."""
        return int(np.argmax(self.points @ np.asarray(n, dtype=float)))

    def edges(self) -> np.ndarray:
        """Unique undirected mesh edges as an (E, 2) array with i < j."""
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)


def _orient_outward(points: np.ndarray, faces: np.ndarray) -> np.ndarray:
    a, b, c = (points[faces[:, k]] for k in range(3))
    normal = np.cross(b - a, c - a)
    inward = np.einsum("ij,ij->i", normal, a + b + c) < 0
    faces = faces.copy()
    faces[inward] = faces[inward][:, [0, 2, 1]]
    return faces


def voronoi_weights(points: np.ndarray) -> np.ndarray:
    """Areas of the spherical Voronoi cells of unit vectors ``points``."""
    sv = SphericalVoronoi(points, radius=1.0, center=np.zeros(3))
    return sv.calculate_areas()


def _icosahedron() -> tuple[np.ndarray, np.ndarray]:
    # vertex on e_z; the lower half is the exact negation of the upper half
    z = 1.0 / np.sqrt(5.0)
    r = 2.0 / np.sqrt(5.0)
    az = 2.0 * np.pi * np.arange(5) / 5.0
    ring = np.stack([r * np.cos(az), r * np.sin(az), np.full(5, z)], axis=1)
    upper = np.vstack([[0.0, 0.0, 1.0], ring])
    points = np.vstack([upper, -upper])
    faces = ConvexHull(points).simplices
    return points, _orient_outward(points, faces)


def _subdivide(points: np.ndarray, faces: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pts = list(points)
    cache: dict[tuple[int, int], int] = {}

    def midpoint(i: int, j: int) -> int:
        key = (i, j) if i < j else (j, i)
        if key not in cache:
            m = pts[i] + pts[j]
            pts.append(m / np.linalg.norm(m))
            cache[key] = len(pts) - 1
        return cache[key]

    new_faces = []
    for a, b, c in faces:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
    return np.array(pts), np.array(new_faces)


@lru_cache(maxsize=None)
def icosphere(level: int) -> SphereSampling:
    """
    Subdivided icosahedron with 10 * 4**level + 2 vertices, one of them on
    e_z, weighted by spherical Voronoi cell areas.
    """
    if not 0 <= level <= MAX_LEVEL:
        raise ValueError(f"icosphere level must be in [0, {MAX_LEVEL}], got {level}")
    points, faces = _icosahedron()
    for _ in range(level):
        points, faces = _subdivide(points, faces)
    return SphereSampling(points, voronoi_weights(points), faces, level=level)


def sphere_from_points(points: np.ndarray) -> SphereSampling:
    """Sampling from arbitrary distinct directions (mesh from their convex hull)."""
    points = np.asarray(points, dtype=float)
    points = points / np.linalg.norm(points, axis=1, keepdims=True)
    faces = _orient_outward(points, ConvexHull(points).simplices)
    return SphereSampling(points, voronoi_weights(points), faces)


def antipodalize(s: SphereSampling, tol: float = 1e-9) -> SphereSampling:
    """Return a copy of ``s`` with its antipodal index map filled in."""
    j = np.argmin(s.points @ s.points.T, axis=1)
    gap = np.linalg.norm(s.points[j] + s.points, axis=1)
    bad = np.flatnonzero(gap > tol)
    if bad.size:
        raise ValueError(f"sampling is not centrally symmetric: point {bad[0]} has no antipode")
    return replace(s, antipodal=j)


def write_sampling_table(s: SphereSampling, path: str | Path) -> None:
    """Text table with one row per sample: index, n_x, n_y, n_z, weight."""
    rows = np.column_stack([np.arange(len(s)), s.points, s.weights])
    np.savetxt(path, rows, fmt=["%d", "%.17g", "%.17g", "%.17g", "%.17g"],
               header="index n_x n_y n_z weight")
