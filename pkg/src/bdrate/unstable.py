"""Unstable directions, unstable Jacobians and segment growth.

Only one-dimensional unstable bundles are supported, so the unstable volume is
arclength.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .maps import (
    LinearTorusMap,
    MapDescriptor,
    NotHyperbolicError,
    apply,
    apply_inverse,
    differential,
    lipschitz_constant,
)
from .torus import ball_boundary_cloud, ball_volume, min_image, reduce_mod1, torus_point

DEFAULT_WARMUP = 60


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    """Flip rows so that the first coordinate with |v_i| > 1e-12 is positive."""
    v = np.array(v, dtype=float)
    flat = v.reshape(-1, v.shape[-1])
    nz = np.abs(flat) > 1e-12
    first = np.argmax(nz, axis=1)
    s = np.sign(flat[np.arange(flat.shape[0]), first])
    s[s == 0] = 1.0
    return (flat * s[:, None]).reshape(v.shape)


def _linear_splitting(m: MapDescriptor):
    """Unit unstable eigenvector and the dual functional picking its coefficient."""
    lin = m.linear_part
    vals, vecs = lin.eigen()
    unstable = np.abs(vals) > 1
    if unstable.sum() != 1:
        raise NotHyperbolicError("only maps with a one-dimensional unstable bundle are supported")
    e_u = np.real(vecs[:, 0])
    e_u = _canonical_sign(e_u / np.linalg.norm(e_u))
    basis = vecs.copy()
    basis[:, 0] = e_u
    dual = np.real(np.linalg.inv(basis)[0])
    return e_u, dual


def unstable_direction(m: MapDescriptor, x, warmup: int = DEFAULT_WARMUP) -> np.ndarray:
    """Unit tangent to the unstable manifold at ``x`` (batched over leading axes).

    Linear maps: the expanding eigenvector. Perturbed maps: that eigenvector is pushed
    forward by the differential along the orbit segment ``f^{-warmup} x, ..., x``;
    cone contraction makes the result independent of the start up to
    ``(contraction/expansion)**warmup``.
    """
    if warmup < 0:
        raise ValueError("warmup must be nonnegative")
    e_u, _ = _linear_splitting(m)
    x = np.asarray(x, dtype=float)
    v = np.broadcast_to(e_u, x.shape).copy()
    if isinstance(m, LinearTorusMap) or m.delta == 0.0 or warmup == 0:
        return v
    orbit = [x]
    for _ in range(warmup):
        orbit.append(apply_inverse(m, orbit[-1]))
    for y in reversed(orbit[1:]):
        v = np.einsum("...ij,...j->...i", differential(m, y), v)
        v /= np.linalg.norm(v, axis=-1, keepdims=True)
    return _canonical_sign(v)


def unstable_jacobian(m: MapDescriptor, x, warmup: int = DEFAULT_WARMUP) -> np.ndarray:
    """``J^u(x) = |Df(x) e_u(x)|`` for unit ``e_u``."""
    e = unstable_direction(m, x, warmup)
    return np.linalg.norm(np.einsum("...ij,...j->...i", differential(m, x), e), axis=-1)


def log_jacobian_product(m: MapDescriptor, x, k: int, warmup: int = DEFAULT_WARMUP) -> float:
    """``sum_{i<k} ln J^u(f^i x)``; the unstable vector is transported, not recomputed."""
    if k < 1:
        raise ValueError("k must be at least 1")
    x = torus_point(x)
    v = unstable_direction(m, x, warmup)
    total = 0.0
    for _ in range(k):
        w = differential(m, x) @ v
        norm = float(np.linalg.norm(w))
        total += math.log(norm)
        v = w / norm
        x = apply(m, x)
    return total


def jacobian_product(m: MapDescriptor, x, k: int, warmup: int = DEFAULT_WARMUP) -> float:
    return math.exp(log_jacobian_product(m, x, k, warmup))


@dataclass(frozen=True, eq=False)
class UnstableSegment:
    base: np.ndarray
    direction: np.ndarray
    radius: float

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        if abs(np.linalg.norm(d) - 1) > 1e-12:
            raise ValueError("direction must be a unit vector")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "base", torus_point(self.base))
        object.__setattr__(self, "direction", d)

    def points(self, n_subdiv: int) -> np.ndarray:
        t = np.linspace(-self.radius, self.radius, n_subdiv + 1)
        return reduce_mod1(self.base + t[:, None] * self.direction)


def unstable_segment(m: MapDescriptor, x, radius: float, warmup: int = DEFAULT_WARMUP) -> UnstableSegment:
    x = torus_point(x)
    return UnstableSegment(x, unstable_direction(m, x, warmup), radius)


def transversality_sine(m: MapDescriptor) -> float:
    """Sine of the angle between the unstable line and the stable subspace of the linear part."""
    _, dual = _linear_splitting(m)
    return 1.0 / float(np.linalg.norm(dual))


def project_to_unstable(m: LinearTorusMap, x, eps: float) -> UnstableSegment:
    """Projection of the ball ``B(x, eps)`` along stable leaves onto the unstable line through ``x``.

    For a linear map the leaves are parallel lines, the image is a segment centred at
    ``x`` and its half-length is ``eps / sin(omega)``.
    """
    if not isinstance(m, LinearTorusMap):
        raise TypeError("exact projection is only available for linear maps")
    if not 0 < eps < 0.25:
        raise ValueError("eps must lie in (0, 1/4)")
    e_u, _ = _linear_splitting(m)
    return UnstableSegment(torus_point(x), e_u, eps / transversality_sine(m))


def sampled_projection_extent(m: LinearTorusMap, x, eps: float, n_samples: int = 100_000) -> float:
    """Brute-force extent of the projection: slide sampled sphere points along the stable
    line until they hit the unstable line, return the largest distance from ``x``."""
    if m.dim != 2:
        raise ValueError("sampled projection is implemented for n = 2")
    x = torus_point(x)
    vals, vecs = m.eigen()
    e_u = np.real(vecs[:, 0])
    e_s = np.real(vecs[:, 1])
    spacing = 2 * math.pi * eps / n_samples
    cloud = ball_boundary_cloud(x, eps, spacing)
    disp = min_image(cloud.points - x)
    coeffs = np.linalg.solve(np.column_stack([e_u, e_s]), disp.T)
    return float(np.max(np.abs(coeffs[0])) * np.linalg.norm(e_u))


def polyline_length(points: np.ndarray, closed: bool = False) -> float:
    pts = np.asarray(points, dtype=float)
    if closed:
        pts = np.vstack([pts, pts[:1]])
    return float(np.sum(np.linalg.norm(min_image(np.diff(pts, axis=0)), axis=1)))


def segment_growth(m: MapDescriptor, seg: UnstableSegment, k: int, n_subdiv: int = 200,
                   budget: int = 10**7) -> float:
    """Length of the polyline image ``f^k(seg)`` divided by the segment length ``2 r``.

    Pieces are measured by their shortest torus displacement, so they must stay below
    half a unit after ``k`` steps; the subdivision is refined automatically (within
    ``budget`` points) to keep that true.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if n_subdiv < 100:
        raise ValueError("n_subdiv must be at least 100")
    beta = lipschitz_constant(m)
    need = math.ceil(4 * seg.radius * beta**k)
    n = max(n_subdiv, need)
    if n + 1 > budget:
        raise OverflowError(f"segment growth needs {n + 1} points, budget is {budget}")
    pts = seg.points(n)
    for _ in range(k):
        pts = apply(m, pts)
    return polyline_length(pts) / (2 * seg.radius)


@dataclass(frozen=True)
class HolderBoundParams:
    C: float
    alpha: float
    gamma: float
    beta: float
    Ju_min: float

    def __post_init__(self):
        for name in ("C", "alpha", "gamma", "beta", "Ju_min"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.alpha > 1:
            raise ValueError("alpha must not exceed 1")


def holder_error_bound(p: HolderBoundParams, eps: float, k: int) -> float:
    """Upper bound on the gap between the mean-value and along-orbit log-Jacobian averages.

    ``C (eps gamma)^alpha (beta^{k alpha} - 1) / (k Ju_min (beta^alpha - 1))``; the
    geometric sum over ``beta^{i alpha}`` is what fixes the ``beta^alpha - 1`` denominator.
    """
    if p.beta <= 1:
        raise ValueError("beta must exceed 1")
    if k < 1:
        raise ValueError("k must be at least 1")
    a = p.alpha
    return p.C * (eps * p.gamma) ** a * (p.beta ** (k * a) - 1) / (k * p.Ju_min * (p.beta**a - 1))


def fit_holder_constant(
    m: MapDescriptor, n_pairs: int = 1000, alpha: float = 1.0, seed: int = 0,
    max_sep: float = 1e-2, warmup: int = DEFAULT_WARMUP,
) -> float:
    """Empirical Hölder factor of ``J^u``: max of ``|J^u(p) - J^u(q)| / |p - q|^alpha`` over random close pairs."""
    rng = np.random.default_rng(seed)
    p = rng.random((n_pairs, m.dim))
    step = rng.standard_normal((n_pairs, m.dim))
    step *= (max_sep * rng.random(n_pairs) / np.linalg.norm(step, axis=1))[:, None]
    q = reduce_mod1(p + step)
    jp = unstable_jacobian(m, p, warmup)
    jq = unstable_jacobian(m, q, warmup)
    dist = np.linalg.norm(step, axis=1)
    return float(np.max(np.abs(jp - jq) / dist**alpha))


def min_unstable_jacobian(m: MapDescriptor, n_samples: int = 4096, seed: int = 0,
                          warmup: int = DEFAULT_WARMUP) -> float:
    """Sampled minimum of ``J^u`` over the torus (a grid plus random points)."""
    side = int(math.sqrt(n_samples))
    g = (np.arange(side) + 0.5) / side
    grid = np.stack(np.meshgrid(*([g] * m.dim), indexing="ij"), axis=-1).reshape(-1, m.dim)
    rnd = np.random.default_rng(seed).random((n_samples, m.dim))
    return float(np.min(unstable_jacobian(m, np.vstack([grid, rnd]), warmup)))


def midpoint_log_jacobians(m: MapDescriptor, seg: UnstableSegment, k: int, n_subdiv: int = 200,
                           warmup: int = DEFAULT_WARMUP) -> np.ndarray:
    """Length-weighted midpoint-rule averages of ``J^u`` over ``f^i(seg)``, ``i < k``, as logs.

    Each average stands for ``J^u(x_i)`` at the mean-value point ``x_i`` of the
    telescoping identity ``mu^u(f^k B) = mu^u(B) prod J^u(x_i)``.
    """
    pts = seg.points(n_subdiv)
    out = []
    for _ in range(k):
        d = min_image(np.diff(pts, axis=0))
        lengths = np.linalg.norm(d, axis=1)
        mids = reduce_mod1(pts[:-1] + d / 2)
        ju = unstable_jacobian(m, mids, warmup)
        out.append(math.log(float(np.sum(ju * lengths) / np.sum(lengths))))
        pts = apply(m, pts)
    return np.array(out)


def jacobian_discrepancy(m: MapDescriptor, x, eps: float, k: int, n_subdiv: int = 200,
                         warmup: int = DEFAULT_WARMUP) -> float:
    """``|mean_i ln J^u(x_i) - mean_i ln J^u(f^i x)|`` on the unstable segment of radius ``eps``."""
    seg = unstable_segment(m, x, eps, warmup)
    mids = midpoint_log_jacobians(m, seg, k, n_subdiv, warmup)
    return abs(float(np.mean(mids)) - log_jacobian_product(m, seg.base, k, warmup) / k)


def measured_holder_params(m: MapDescriptor, alpha: float = 1.0, seed: int = 0, n_pairs: int = 1000,
                           warmup: int = DEFAULT_WARMUP) -> HolderBoundParams:
    """Bound parameters measured from the map; ``gamma = 2`` since a segment of radius eps has diameter 2 eps."""
    return HolderBoundParams(
        C=fit_holder_constant(m, n_pairs, alpha, seed, warmup=warmup),
        alpha=alpha,
        gamma=2.0,
        beta=lipschitz_constant(m),
        Ju_min=min_unstable_jacobian(m, seed=seed, warmup=warmup),
    )


def volume_regularity_check(a: float, eps: float, trials: int = 1000, seed: int = 0, n: int = 2) -> float:
    """Largest ``|mu(B(x, a eps)) / mu(B(y, eps)) - a**n|`` over random centre pairs.

    On the flat torus ball volumes do not depend on the centre, so the deviation is
    rounding error only.
    """
    if not a > 0:
        raise ValueError("a must be positive")
    if not 2 * eps * (1 + a) < 0.5:
        raise ValueError("eps too large: balls would not embed")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for x, y in zip(rng.random((trials, n)), rng.random((trials, n))):
        ratio = _ball_measure(x, a * eps, n) / _ball_measure(y, eps, n)
        worst = max(worst, abs(ratio - a**n))
    return worst


def _ball_measure(center, r, n):
    del center  # translation invariance of the flat metric
    return ball_volume(r, n)
