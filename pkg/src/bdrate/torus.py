"""Flat-torus geometry: distances, ball boundaries, point clouds and a hash-grid index.

Points of the n-torus are stored as float arrays of shape ``(n,)`` (a single
point) or ``(N, n)`` (a batch), every coordinate reduced to ``[0, 1)``.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

TorusPoint = np.ndarray


class DimensionError(ValueError):
    pass


def reduce_mod1(x) -> np.ndarray:
    """Canonical reduction to [0, 1). ``np.mod`` can return exactly 1.0 for tiny negatives."""
    r = np.mod(np.asarray(x, dtype=float), 1.0)
    return np.where(r >= 1.0, 0.0, r)


def torus_point(coords) -> TorusPoint:
    p = reduce_mod1(coords)
    if p.ndim != 1 or p.size == 0:
        raise DimensionError("a torus point is a nonempty 1-d coordinate vector")
    return p


def min_image(d) -> np.ndarray:
    """Shortest representative of a displacement modulo the integer lattice."""
    d = np.asarray(d, dtype=float)
    return d - np.round(d)


def torus_distance(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DimensionError(f"dimension mismatch: {p.shape} vs {q.shape}")
    return float(np.sqrt(np.sum(min_image(p - q) ** 2)))


def torus_distances(z, pts) -> np.ndarray:
    """Row-wise distances between broadcastable point arrays."""
    return np.sqrt(np.sum(min_image(np.asarray(z) - np.asarray(pts)) ** 2, axis=-1))


def ball_volume(radius: float, n: int = 2) -> float:
    """Lebesgue measure of a metric ball on the flat n-torus (radius < 1/2)."""
    if not 0 <= radius < 0.5:
        raise ValueError("ball does not embed isometrically for radius >= 1/2")
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * radius**n


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Finite sample of a set; every point of the set lies within ``nominal_density`` of the cloud."""

    points: np.ndarray
    nominal_density: float

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1) if pts.size else pts.reshape(0, 0)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if not self.nominal_density > 0:
            raise ValueError("nominal_density must be positive")

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def ball_boundary_cloud(x, eps: float, spacing: float) -> PointCloud:
    """Sample the sphere of radius ``eps`` around ``x`` with arc spacing at most ``spacing``.

    In two dimensions the circle is cut into ``ceil(2*pi*eps/spacing)`` equal arcs
    starting from the direction of the first axis. In three dimensions latitude rings
    are used, each ring and the meridian step respecting the same arc bound.
    """
    x = torus_point(x)
    n = x.size
    if not 0 < eps < 0.25:
        raise ValueError("eps must lie in (0, 1/4)")
    if not 0 < spacing <= 2 * math.pi * eps:
        raise ValueError("spacing must lie in (0, 2*pi*eps]")
    if n == 1:
        offsets = np.array([[eps], [-eps]])
    elif n == 2:
        count = math.ceil(2 * math.pi * eps / spacing - 1e-12)
        t = 2 * math.pi * np.arange(count) / count
        offsets = eps * np.column_stack([np.cos(t), np.sin(t)])
    elif n == 3:
        n_lat = max(1, math.ceil(math.pi * eps / spacing - 1e-12))
        rings = []
        for theta in np.linspace(0.0, math.pi, n_lat + 1):
            m = max(1, math.ceil(2 * math.pi * eps * math.sin(theta) / spacing - 1e-12))
            phi = 2 * math.pi * np.arange(m) / m
            rings.append(
                eps
                * np.column_stack(
                    [math.sin(theta) * np.cos(phi), math.sin(theta) * np.sin(phi), np.full(m, math.cos(theta))]
                )
            )
        offsets = np.vstack(rings)
    else:
        raise DimensionError("ball boundaries are implemented for n <= 3")
    return PointCloud(reduce_mod1(x + offsets), spacing)


@dataclass(frozen=True, eq=False)
class SpatialIndex:
    """Uniform hash grid over the torus.

    The torus is cut into ``ncell`` cells per axis with ``ncell = floor(1/cell_size)``,
    so each cell is at least ``cell_size`` wide and a query of radius ``r <= cell_size``
    only needs the 3**n cells around the query cell. Buckets are kept as a sorted
    table of linear cell keys with CSR offsets into ``order``.
    """

    cell_size: float
    points: np.ndarray
    ncell: int = field(init=False)
    keys: np.ndarray = field(init=False, repr=False)
    starts: np.ndarray = field(init=False, repr=False)
    counts: np.ndarray = field(init=False, repr=False)
    order: np.ndarray = field(init=False, repr=False)
    offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.cell_size > 0:
            raise ValueError("cell_size must be positive")
        pts = np.asarray(self.points, dtype=float)
        n = pts.shape[1]
        ncell = max(1, int(math.floor(1.0 / self.cell_size + 1e-12)))
        cells = self._cells_of(pts, ncell)
        lin = self._linear(cells, ncell)
        order = np.argsort(lin, kind="stable")
        keys, starts, counts = np.unique(lin[order], return_index=True, return_counts=True)
        # with fewer than 3 cells per axis neighbouring offsets alias; keep each cell once
        per_axis = sorted({d % ncell for d in (-1, 0, 1)})
        offsets = np.array(list(itertools.product(per_axis, repeat=n)), dtype=np.int64)
        for name, val in dict(
            points=pts, ncell=ncell, keys=keys, starts=starts, counts=counts, order=order, offsets=offsets
        ).items():
            if isinstance(val, np.ndarray):
                val.setflags(write=False)
            object.__setattr__(self, name, val)

    @staticmethod
    def _cells_of(pts, ncell):
        return np.minimum((pts * ncell).astype(np.int64), ncell - 1)

    @staticmethod
    def _linear(cells, ncell):
        lin = np.zeros(cells.shape[0], dtype=np.int64)
        for j in range(cells.shape[1]):
            lin = lin * ncell + cells[:, j]
        return lin

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def bucket(self, cell) -> np.ndarray:
        """Indices of the points stored in the given integer cell."""
        cell = np.asarray(cell, dtype=np.int64).reshape(1, -1) % self.ncell
        key = self._linear(cell, self.ncell)[0]
        pos = np.searchsorted(self.keys, key)
        if pos < len(self.keys) and self.keys[pos] == key:
            return self.order[self.starts[pos] : self.starts[pos] + self.counts[pos]]
        return np.empty(0, dtype=np.int64)

    def candidate_cells(self, z) -> np.ndarray:
        """Cells inspected by a query at ``z``; at most 3**n of them."""
        c = self._cells_of(torus_point(z).reshape(1, -1), self.ncell)[0]
        return np.unique((c + self.offsets) % self.ncell, axis=0)

    def _pairs(self, z: np.ndarray):
        """Candidate (query, point) index pairs from the neighbouring buckets."""
        q = z.shape[0]
        cells = self._cells_of(z, self.ncell)
        qidx, pidx = [], []
        for off in self.offsets:
            lin = self._linear((cells + off) % self.ncell, self.ncell)
            pos = np.searchsorted(self.keys, lin)
            pos = np.minimum(pos, len(self.keys) - 1)
            hit = self.keys[pos] == lin
            cnt = np.where(hit, self.counts[pos], 0)
            total = int(cnt.sum())
            if total == 0:
                continue
            qi = np.repeat(np.arange(q), cnt)
            first = np.repeat(np.cumsum(cnt) - cnt, cnt)
            pi = np.repeat(self.starts[pos], cnt) + (np.arange(total) - first)
            qidx.append(qi)
            pidx.append(self.order[pi])
        if not qidx:
            return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
        return np.concatenate(qidx), np.concatenate(pidx)

    def _check_radius(self, r):
        if r > self.cell_size * (1 + 1e-12):
            raise ValueError(f"query radius {r} exceeds cell_size {self.cell_size}; exactness not guaranteed")

    def near_mask(self, z, r: float) -> np.ndarray:
        """Vectorised ``within_distance`` for a batch of query points."""
        self._check_radius(r)
        z = np.atleast_2d(np.asarray(z, dtype=float))
        out = np.zeros(z.shape[0], dtype=bool)
        if len(self) == 0 or z.shape[0] == 0:
            return out
        qi, pi = self._pairs(z)
        if qi.size:
            d2 = np.sum(min_image(z[qi] - self.points[pi]) ** 2, axis=1)
            out[qi[d2 <= r * r]] = True
        return out

    def query_ball(self, z, r: float) -> np.ndarray:
        """Sorted indices of the stored points within distance ``r`` of ``z``."""
        self._check_radius(r)
        z = torus_point(z).reshape(1, -1)
        if len(self) == 0:
            return np.empty(0, dtype=np.int64)
        _, pi = self._pairs(z)
        d2 = np.sum(min_image(z - self.points[pi]) ** 2, axis=1)
        return np.sort(pi[d2 <= r * r])

    def nearest_within(self, z, r: float):
        """``(found, distance)`` for the closest stored point within ``r``; ``(False, inf)`` if none."""
        idx = self.query_ball(z, r)
        if idx.size == 0:
            return False, math.inf
        return True, float(np.min(torus_distances(torus_point(z), self.points[idx])))


def build_index(cloud: PointCloud | np.ndarray, cell_size: float) -> SpatialIndex:
    pts = cloud.points if isinstance(cloud, PointCloud) else np.atleast_2d(np.asarray(cloud, dtype=float))
    return SpatialIndex(cell_size, pts)


def within_distance(index: SpatialIndex, z, r: float) -> bool:
    """True iff some indexed point lies within torus distance ``r`` (closed) of ``z``."""
    return bool(index.near_mask(torus_point(z).reshape(1, -1), r)[0])


def batch_sizes(n_samples: int, batch_size: int) -> list[int]:
    full, rest = divmod(n_samples, batch_size)
    return [batch_size] * full + ([rest] if rest else [])


def uniform_batches(n_samples: int, seed: int, dim: int, batch_size: int = 1 << 17):
    """Yield ``(batch_number, samples)`` with one child seed per batch.

    Seeds come from ``SeedSequence(seed).spawn`` so each batch is reproducible on its
    own and batches can be evaluated in any order.
    """
    sizes = batch_sizes(n_samples, batch_size)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    for i, (size, child) in enumerate(zip(sizes, children)):
        yield i, np.random.default_rng(child).random((size, dim))


def mc_count(predicate, n_samples: int, seed: int, dim: int, batch_size: int = 1 << 17, workers: int = 1) -> int:
    """Count uniform torus samples satisfying ``predicate`` (a batch -> bool mask function).

    The reduction is an integer sum, so the result does not depend on batch
    scheduling; with ``workers > 1`` batches are evaluated in a thread pool.
    """

    def count(item):
        return int(np.count_nonzero(predicate(item[1])))

    batches = uniform_batches(n_samples, seed, dim, batch_size)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return sum(pool.map(count, batches))
    return sum(map(count, batches))


def proportion_with_se(hits: int, n_samples: int) -> tuple[float, float]:
    p = hits / n_samples
    return p, math.sqrt(p * (1 - p) / n_samples)


def dilation_volume_mc(
    index: SpatialIndex, eps: float, n_samples: int, seed: int, batch_size: int = 1 << 17, workers: int = 1
) -> tuple[float, float]:
    """Monte Carlo measure of the closed ``eps``-neighbourhood of the indexed points.

    Returns ``(estimate, std_error)``; the torus has unit volume so the estimate is
    the hit fraction.
    """
    if len(index) == 0:
        raise ValueError("cannot estimate the neighbourhood of an empty index")
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    hits = mc_count(lambda z: index.near_mask(z, eps), n_samples, seed, index.dim, batch_size, workers)
    return proportion_with_se(hits, n_samples)
