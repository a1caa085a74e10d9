"""Voxel grid specification, dense occupancy label grids, and a spatial hash index.

The index maps coarse cells to the Gaussians whose conservative bounding boxes
touch them, so splatting can gather a superset of the true contributors per
voxel without an all-pairs sweep.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EMPTY, GaussianScene


@dataclass(frozen=True)
class GridSpec:
    """Cubic-voxel grid: origin is the min corner of voxel (0,0,0)."""

    origin: tuple
    dims: tuple  # (nx, ny, nz)
    voxel_size: float

    def __post_init__(self):
        o = tuple(float(v) for v in self.origin)
        d = tuple(int(v) for v in self.dims)
        if len(o) != 3 or len(d) != 3:
            raise ValueError("origin and dims must have 3 components")
        if any(n <= 0 for n in d):
            raise ValueError("dims must be positive")
        if d[0] * d[1] * d[2] > 2**31:
            raise ValueError("grid too large")
        if self.voxel_size <= 0:
            raise ValueError("voxel_size must be positive")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "dims", d)
        object.__setattr__(self, "voxel_size", float(self.voxel_size))

    @property
    def num_voxels(self):
        nx, ny, nz = self.dims
        return nx * ny * nz

    def flat_index(self, i, j, k):
        """x-fastest flat ordering: i + nx·(j + ny·k)."""
        nx, ny, _ = self.dims
        return i + nx * (j + ny * k)

    def unflatten(self, idx):
        nx, ny, _ = self.dims
        i = idx % nx
        j = (idx // nx) % ny
        k = idx // (nx * ny)
        return i, j, k

    def extent(self):
        """Physical side lengths (meters) per axis."""
        return tuple(n * self.voxel_size for n in self.dims)


def voxel_center(spec: GridSpec, ijk):
    """Center of voxel ijk: origin + (ijk + 0.5)·voxel_size."""
    i, j, k = (int(v) for v in ijk)
    nx, ny, nz = spec.dims
    if not (0 <= i < nx and 0 <= j < ny and 0 <= k < nz):
        raise IndexError(f"voxel {ijk} outside dims {spec.dims}")
    return np.array(spec.origin) + (np.array([i, j, k]) + 0.5) * spec.voxel_size


def voxel_centers(spec: GridSpec):
    """All voxel centers, shape (num_voxels, 3), x-fastest flat order."""
    nx, ny, nz = spec.dims
    i = np.arange(nx)
    j = np.arange(ny)
    k = np.arange(nz)
    I, J, K = np.meshgrid(i, j, k, indexing="ij")
    ijk = np.stack([I, J, K], axis=-1).reshape(-1, 3)
    # reorder from ijk-major to x-fastest flat layout
    flat = ijk[:, 0] + nx * (ijk[:, 1] + ny * ijk[:, 2])
    out = np.empty((spec.num_voxels, 3))
    out[flat] = np.array(spec.origin) + (ijk + 0.5) * spec.voxel_size
    return out


@dataclass(frozen=True)
class OccupancyGrid:
    """Dense voxel label grid; one byte per voxel, EMPTY = 255, x-fastest order.

    num_classes 0 means "unknown"; it is then inferred as max semantic label + 1
    where a class count is needed.
    """

    spec: GridSpec
    labels: np.ndarray
    num_classes: int = 0

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.uint8).reshape(self.spec.num_voxels)
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "num_classes", int(self.num_classes))

    @classmethod
    def empty(cls, spec: GridSpec, num_classes=0):
        return cls(spec, np.full(spec.num_voxels, EMPTY, dtype=np.uint8), num_classes)

    def inferred_num_classes(self):
        if self.num_classes:
            return self.num_classes
        sem = self.labels[self.labels != EMPTY]
        return int(sem.max()) + 1 if sem.size else 1

    def label(self, i, j, k):
        return int(self.labels[self.spec.flat_index(i, j, k)])

    def occupied_fraction(self):
        return float(np.mean(self.labels != EMPTY))

    def as_3d(self):
        """Labels reshaped to (nx, ny, nz)."""
        nx, ny, nz = self.spec.dims
        return self.labels.reshape(nz, ny, nx).transpose(2, 1, 0)


def gaussian_aabb_radii(scene: GaussianScene, kappa):
    """Conservative per-axis half-width κ·exp(max log_scale); valid for any rotation."""
    if len(scene) == 0:
        return np.zeros(0)
    return kappa * np.exp(np.max(scene.log_scales, axis=1))


@dataclass(frozen=True)
class SpatialIndex:
    """Hash from coarse integer cells to sorted Gaussian index lists.

    Superset guarantee: any Gaussian within Mahalanobis κ of a voxel center is
    listed for the cell containing that center (bounding boxes are conservative).
    """

    cell_size: float
    cells: dict  # (cx,cy,cz) -> sorted tuple of Gaussian indices
    origin: tuple
    kappa: float

    def cell_of(self, point):
        p = (np.asarray(point, dtype=np.float64) - np.array(self.origin)) / self.cell_size
        return tuple(int(v) for v in np.floor(p))


def build_index(scene: GaussianScene, spec: GridSpec, kappa, cell_size=None):
    """Hash every Gaussian into the coarse cells its κ-radius AABB overlaps."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    if cell_size is None:
        cell_size = 4.0 * spec.voxel_size
    origin = spec.origin
    cells: dict = {}
    radii = gaussian_aabb_radii(scene, kappa)
    o = np.array(origin)
    for gi in range(len(scene)):
        lo = np.floor((scene.means[gi] - radii[gi] - o) / cell_size).astype(int)
        hi = np.floor((scene.means[gi] + radii[gi] - o) / cell_size).astype(int)
        for cx in range(lo[0], hi[0] + 1):
            for cy in range(lo[1], hi[1] + 1):
                for cz in range(lo[2], hi[2] + 1):
                    cells.setdefault((cx, cy, cz), []).append(gi)
    return SpatialIndex(
        cell_size=float(cell_size),
        cells={c: tuple(v) for c, v in cells.items()},
        origin=origin,
        kappa=float(kappa),
    )


def candidates(index: SpatialIndex, spec: GridSpec, ijk):
    """Sorted, duplicate-free candidate Gaussian indices for voxel ijk."""
    center = voxel_center(spec, ijk)
    return list(index.cells.get(index.cell_of(center), ()))
