"""Dyadic cubes in the unit cube [0, 1]^d.

Cube geometry is kept in exact integer units: a cube of level ``k`` has
corner coordinates in units of ``2**-k``, and lattice points at resolution
``K`` are integer vectors in units of ``2**-K``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

MAX_LEVEL = 24


@dataclass(frozen=True, order=True)
class DyadicCube:
    level: int
    corner: tuple[int, ...]

    def __post_init__(self):
        if self.level < 0:
            raise ValueError(f"negative level {self.level}")
        object.__setattr__(self, "corner", tuple(int(c) for c in self.corner))
        n = 1 << self.level
        for c in self.corner:
            if not 0 <= c < n:
                raise ValueError(f"corner {self.corner} outside Q_0 at level {self.level}")

    @classmethod
    def root(cls, d: int) -> "DyadicCube":
        return cls(0, (0,) * d)

    @property
    def dim(self) -> int:
        return len(self.corner)

    @property
    def side(self) -> float:
        return 2.0 ** -self.level

    @property
    def exact_side(self) -> Fraction:
        return Fraction(1, 1 << self.level)

    @property
    def lower(self) -> np.ndarray:
        return np.array(self.corner, dtype=float) * self.side

    @property
    def upper(self) -> np.ndarray:
        return (np.array(self.corner, dtype=float) + 1.0) * self.side

    @property
    def center(self) -> np.ndarray:
        return (np.array(self.corner, dtype=float) + 0.5) * self.side

    @property
    def volume(self) -> float:
        return self.side ** self.dim

    def contains_cube(self, other: "DyadicCube") -> bool:
        if other.level < self.level:
            return False
        shift = other.level - self.level
        return all((o >> shift) == c for o, c in zip(other.corner, self.corner))

    def lattice_range(self, K: int) -> list[range]:
        """Integer lattice coordinates (resolution K) of the closed cube, per axis."""
        if K < self.level:
            raise ValueError(f"resolution K={K} is coarser than cube level {self.level}")
        step = 1 << (K - self.level)
        return [range(c * step, (c + 1) * step + 1) for c in self.corner]


@dataclass(frozen=True)
class Face:
    cube: DyadicCube
    axis: int
    high: bool

    def __post_init__(self):
        if not 0 <= self.axis < self.cube.dim:
            raise ValueError(f"axis {self.axis} out of range for d={self.cube.dim}")

    def opposite(self) -> "Face":
        return Face(self.cube, self.axis, not self.high)


def children(cube: DyadicCube, max_level: int = MAX_LEVEL) -> list[DyadicCube]:
    """The 2^d subcubes of the next level, in lexicographic corner order."""
    if cube.level >= max_level:
        raise ValueError(
            f"cannot subdivide cube at level {cube.level}: MAX_LEVEL is {max_level}")
    base = [2 * c for c in cube.corner]
    return [DyadicCube(cube.level + 1, tuple(b + o for b, o in zip(base, offs)))
            for offs in itertools.product((0, 1), repeat=cube.dim)]


def cubes_at_level(d: int, level: int) -> list[DyadicCube]:
    n = 1 << level
    return [DyadicCube(level, c) for c in itertools.product(range(n), repeat=d)]


def face_lattice_points(face: Face, K: int) -> np.ndarray:
    """Integer lattice points (units of 2^-K) lying on ``face``.

    Returns an array of shape ((2^(K-level)+1)^(d-1), d).
    """
    cube = face.cube
    if K < cube.level:
        raise ValueError(f"resolution K={K} is coarser than cube level {cube.level}")
    ranges = cube.lattice_range(K)
    fixed = ranges[face.axis][-1] if face.high else ranges[face.axis][0]
    ranges[face.axis] = range(fixed, fixed + 1)
    grids = np.meshgrid(*[np.array(r) for r in ranges], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def lattice_shape(d: int, K: int) -> tuple[int, ...]:
    return ((1 << K) + 1,) * d


def lattice_points(d: int, K: int) -> np.ndarray:
    """All integer lattice points of [0,1]^d at resolution K, row-major order."""
    n = (1 << K) + 1
    grids = np.meshgrid(*([np.arange(n)] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def flat_index(points: np.ndarray, d: int, K: int) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=np.int64))
    return np.ravel_multi_index(tuple(points.T), lattice_shape(d, K))


def cube_lattice_indices(cube: DyadicCube, K: int) -> np.ndarray:
    """Flat lattice indices of all samples in the closed cube."""
    grids = np.meshgrid(*[np.array(r) for r in cube.lattice_range(K)], indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    return flat_index(pts, cube.dim, K)


@dataclass(frozen=True)
class RotatedCube:
    center: np.ndarray
    basis: np.ndarray  # rows are the orthonormal axis directions
    side: float

    @property
    def dim(self) -> int:
        return len(self.center)

    def vertices(self) -> np.ndarray:
        signs = np.array(list(itertools.product((-0.5, 0.5), repeat=self.dim)))
        return self.center + self.side * signs @ self.basis

    def to_world(self, local: np.ndarray) -> np.ndarray:
        """Map local coordinates in [0, side]^d to ambient points."""
        local = np.atleast_2d(local)
        return self.center + (local - self.side / 2) @ self.basis

    def face_points(self, axis: int, high: bool, spacing: float) -> np.ndarray:
        """A grid on one face with mesh at most ``spacing`` along each face axis."""
        per_axis = max(1, int(np.ceil(self.side / spacing)))
        ticks = np.linspace(0.0, self.side, per_axis + 1)
        axes = [ticks] * self.dim
        axes[axis] = np.array([self.side if high else 0.0])
        grids = np.meshgrid(*axes, indexing="ij")
        local = np.stack([g.ravel() for g in grids], axis=1)
        return self.to_world(local)


def check_orthonormal(basis: np.ndarray, tol: float) -> None:
    basis = np.asarray(basis, dtype=float)
    if basis.ndim != 2 or basis.shape[0] != basis.shape[1]:
        raise ValueError(f"basis must be a square matrix, got shape {basis.shape}")
    err = np.max(np.abs(basis @ basis.T - np.eye(len(basis))))
    if err > tol:
        raise ValueError(f"basis is not orthonormal (max deviation {err:.3e} > {tol:g})")


def inscribe_rotated_cube(cube: DyadicCube, basis: np.ndarray) -> RotatedCube:
    """Largest cube along ``basis`` that fits in ``cube`` for every orientation.

    The side is ``side(cube)/sqrt(d)``: each vertex offset is bounded by
    ``side/2 * sum_i |b_ij| <= side/2 * sqrt(d)`` coordinatewise.
    """
    basis = np.asarray(basis, dtype=float)
    check_orthonormal(basis, 1e-9)
    if len(basis) != cube.dim:
        raise ValueError(f"basis has {len(basis)} vectors, cube has d={cube.dim}")
    rc = RotatedCube(cube.center, basis, cube.side / np.sqrt(cube.dim))
    v = rc.vertices()
    tol = 1e-12
    if np.any(v < cube.lower - tol) or np.any(v > cube.upper + tol):
        raise AssertionError("inscribed cube escapes its ambient cube")
    return rc
