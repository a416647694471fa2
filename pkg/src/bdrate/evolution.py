"""Images of ball boundaries under f^k, interior tests and greedy epsilon-nets."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .maps import MapDescriptor, apply, lipschitz_constant
from .torus import PointCloud, SpatialIndex, ball_boundary_cloud, build_index, min_image, torus_point

DEFAULT_BUDGET = 10**7
AMBIGUITY_TOL = 1e-10


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class EvolvedBoundary:
    """Samples of ``f^k`` applied to the sphere ``S(x, eps)``.

    ``lifted`` is the same polyline unwrapped into R^n (consecutive pieces joined
    by their shortest displacement), starting at the first sample.
    """

    source_center: np.ndarray
    source_eps: float
    k: int
    cloud: PointCloud
    lipschitz_bound: float
    source_spacing: float
    lifted: np.ndarray

    @property
    def closed(self) -> bool:
        return self.cloud.dim == 2

    def curve_length(self) -> float:
        pts = self.lifted
        if self.closed:
            pts = np.vstack([pts, pts[:1]])
        return float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))


def unwrap(points: np.ndarray, start) -> np.ndarray:
    """Lift a torus polyline to R^n, first vertex taken nearest to ``start``."""
    pts = np.asarray(points, dtype=float)
    steps = min_image(np.diff(pts, axis=0))
    first = np.asarray(start, dtype=float) + min_image(pts[0] - start)
    return np.vstack([first, first + np.cumsum(steps, axis=0)])


def evolve_boundary(
    m: MapDescriptor, x, eps: float, k: int, target_density: float, budget: int = DEFAULT_BUDGET
) -> EvolvedBoundary:
    """Sample ``S(x, eps)`` finely enough that its ``k``-th image has covering radius ``target_density``.

    The source spacing is ``target_density / beta**k`` with ``beta`` the Lipschitz
    bound of ``m``; every sample is then iterated ``k`` times.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if not 0 < target_density <= eps / 4:
        raise ValueError("target_density must lie in (0, eps/4]")
    x = torus_point(x)
    beta = lipschitz_constant(m)
    growth = beta**k
    spacing = target_density / growth
    expected = _expected_count(x.size, eps, spacing)
    if expected > budget:
        raise BudgetExceeded(f"boundary sampling needs about {expected} points, budget is {budget}")
    src = ball_boundary_cloud(x, eps, spacing)
    pts = src.points
    for _ in range(k):
        pts = apply(m, pts)
    lifted = unwrap(pts, pts[0]) if x.size == 2 else pts
    return EvolvedBoundary(x, eps, k, PointCloud(pts, target_density), growth, spacing, lifted)


def _expected_count(n: int, eps: float, spacing: float) -> int:
    if n == 2:
        return math.ceil(2 * math.pi * eps / spacing)
    if n == 3:
        return math.ceil(4 * math.pi * eps**2 / spacing**2 * 1.5)
    return 2


def _winding_numbers(poly: np.ndarray, z: np.ndarray, chunk: int = 256):
    """Winding numbers of the closed polygon ``poly`` around each row of ``z`` (plane, no wrapping),
    together with each point's distance to the polygon."""
    a = poly
    b = np.roll(poly, -1, axis=0)
    ax, ay, bx, by = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
    ex, ey = bx - ax, by - ay
    elen2 = np.maximum(ex * ex + ey * ey, 1e-300)
    wn = np.zeros(z.shape[0], dtype=np.int64)
    dmin = np.full(z.shape[0], np.inf)
    for s in range(0, z.shape[0], chunk):
        zx = z[s : s + chunk, 0:1]
        zy = z[s : s + chunk, 1:2]
        cross = ex * (zy - ay) - (zx - ax) * ey
        up = (ay <= zy) & (by > zy) & (cross > 0)
        down = (ay > zy) & (by <= zy) & (cross < 0)
        wn[s : s + chunk] = up.sum(axis=1) - down.sum(axis=1)
        t = np.clip(((zx - ax) * ex + (zy - ay) * ey) / elen2, 0.0, 1.0)
        dx = zx - (ax + t * ex)
        dy = zy - (ay + t * ey)
        dmin[s : s + chunk] = np.sqrt(np.min(dx * dx + dy * dy, axis=1))
    return wn, dmin


def interior_mask(boundary: EvolvedBoundary, z) -> np.ndarray:
    """Vectorised ``interior_test``.

    ``f^k B`` is embedded in the torus, so at most one integer translate of a query
    lies inside the lifted curve; every translate meeting the curve's bounding box is
    tried. Points within 1e-10 of the polyline count as inside.
    """
    if not boundary.closed:
        raise ValueError("interior tests need a closed planar curve (n = 2)")
    z = np.atleast_2d(np.asarray(z, dtype=float))
    poly = boundary.lifted
    lo = poly.min(axis=0)
    hi = poly.max(axis=0)
    inside = np.zeros(z.shape[0], dtype=bool)
    shifts_x = range(int(math.floor(lo[0])) - 1, int(math.ceil(hi[0])) + 1)
    shifts_y = range(int(math.floor(lo[1])) - 1, int(math.ceil(hi[1])) + 1)
    for sx in shifts_x:
        for sy in shifts_y:
            w = z + (sx, sy)
            sel = np.flatnonzero(~inside & np.all((w >= lo) & (w <= hi), axis=1))
            if sel.size == 0:
                continue
            wn, dmin = _winding_numbers(poly, w[sel])
            inside[sel[(wn != 0) | (dmin < AMBIGUITY_TOL)]] = True
    return inside


def interior_test(boundary: EvolvedBoundary, z) -> bool:
    return bool(interior_mask(boundary, torus_point(z).reshape(1, -1))[0])


@dataclass(frozen=True, eq=False)
class NetResult:
    centers: np.ndarray
    radius: float
    indices: np.ndarray

    @property
    def count(self) -> int:
        return int(self.centers.shape[0])


def greedy_net(cloud: PointCloud, radius: float, shuffle_seed: int | None = None) -> NetResult:
    """Greedy ``radius``-net of a point cloud.

    Points are visited in cloud order (or a seeded shuffle of it); a visited point not
    within ``radius`` of an existing centre becomes a centre. Centres are therefore
    pairwise more than ``radius`` apart and every point lies within ``radius`` of one.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    pts = cloud.points
    order = np.arange(len(pts))
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(len(pts))
    if len(pts) == 0:
        return NetResult(pts.copy(), radius, np.empty(0, dtype=np.int64))
    index = SpatialIndex(radius, pts) if radius <= 0.5 else None
    covered = np.zeros(len(pts), dtype=bool)
    chosen = []
    for i in order:
        if covered[i]:
            continue
        chosen.append(i)
        if index is not None:
            covered[index.query_ball(pts[i], radius)] = True
        else:
            d = np.sqrt(np.sum(min_image(pts - pts[i]) ** 2, axis=1))
            covered[d <= radius] = True
    idx = np.array(chosen, dtype=np.int64)
    return NetResult(pts[idx], radius, idx)


def covering_rate(
    m: MapDescriptor,
    x,
    eps: float,
    schedule=None,
    k: int | None = None,
    density_factor: float = 0.25,
    budget: int = DEFAULT_BUDGET,
    shuffle_seed: int | None = None,
) -> float:
    """``(1/k) ln N(eps)`` where ``N`` is the greedy ``eps``-net size of the evolved boundary.

    ``k`` defaults to ``schedule.k(eps)``. With ``k = 0`` there is no growth to
    measure and the rate is reported as 0.
    """
    if k is None:
        if schedule is None:
            raise ValueError("either a schedule or an explicit k is required")
        k = schedule.k(eps)
    b = evolve_boundary(m, x, eps, k, density_factor * eps, budget)
    n = greedy_net(b.cloud, eps, shuffle_seed).count
    if k == 0:
        return 0.0
    return math.log(n) / k


def write_boundary_csv(boundary: EvolvedBoundary, path) -> None:
    n = boundary.cloud.dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index"] + [f"x{i + 1}" for i in range(n)])
        for i, p in enumerate(boundary.cloud.points):
            w.writerow([i] + [repr(float(c)) for c in p])


def neighbourhood_index(boundary: EvolvedBoundary, eps: float) -> SpatialIndex:
    return build_index(boundary.cloud, eps)
