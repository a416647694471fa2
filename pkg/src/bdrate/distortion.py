"""The boundary-distortion estimator and the k(eps) schedules it runs on."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .evolution import DEFAULT_BUDGET, BudgetExceeded, evolve_boundary, interior_mask
from .maps import MapDescriptor, apply_inverse, volume_preserving
from .torus import ball_volume, build_index, mc_count, min_image, torus_point


@dataclass(frozen=True)
class Schedule:
    """``k(eps) = max(floor_min, floor(scale * ln(1/eps)**theta))``.

    For ``0 < theta < 1`` this tends to infinity while ``k / ln(1/eps)`` tends to 0.
    """

    theta: float = 0.5
    scale: float = 1.0
    floor_min: int = 1

    def __post_init__(self):
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.floor_min < 1:
            raise ValueError("floor_min must be at least 1")

    def k(self, eps: float) -> int:
        return k_of_eps(self, eps)


def k_of_eps(s: Schedule, eps: float) -> int:
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    value = s.scale * math.log(1 / eps) ** s.theta
    # log(exp(-16)) can land a few ulps below 16; do not let that drop k by one
    return max(s.floor_min, int(math.floor(value + 1e-9)))


@dataclass(frozen=True)
class DistortionSample:
    eps: float
    k: int
    numerator: float
    numerator_se: float
    denominator: float
    hits: int = 0
    n_samples: int = 0

    @property
    def rate(self) -> float:
        return math.log(self.numerator / self.denominator) / self.k

    @property
    def rate_se(self) -> float:
        """Delta-method standard error of ``rate``."""
        return self.numerator_se / (self.numerator * self.k)


def rate_cap(beta: float, k: int, n: int = 2) -> float:
    """Trivial upper bound ``(n/k) ln(beta**k + 1)`` on any distortion rate."""
    return n * math.log(beta**k + 1) / k


def _inside_by_pullback(m, x, eps, k, z):
    w = z
    for _ in range(k):
        w = apply_inverse(m, w)
    return np.sum(min_image(w - x) ** 2, axis=1) <= eps * eps


def estimate_distortion(
    m: MapDescriptor,
    x,
    eps: float,
    s: Schedule | None = None,
    mc_samples: int = 10**6,
    density_factor: float = 0.25,
    seed: int = 0,
    k: int | None = None,
    budget: int = DEFAULT_BUDGET,
    batch_size: int = 1 << 17,
    workers: int = 1,
) -> DistortionSample:
    """Monte Carlo estimate of ``(1/k) ln[mu(O_eps(f^k B(x, eps))) / mu(B(x, eps))]``.

    The image boundary is sampled by ``evolve_boundary`` with covering radius
    ``density_factor * eps`` and indexed with cells of size ``eps``. Uniform torus
    samples then decide membership in the neighbourhood:

    * volume-preserving maps: numerator = exact ``mu(B)`` plus the fraction of samples
      within ``eps`` of the image boundary and outside the image (winding test in the
      plane; in higher dimension the exclusion is skipped, which over-counts by at most
      ``mu(B)``);
    * otherwise ``mu(f^k B)`` is unknown and the whole union ``near or inside`` is
      sampled, inside-ness of far samples being decided by pulling them back ``k`` steps.
    """
    x = torus_point(x)
    n = x.size
    if not 0 < eps < 0.25:
        raise ValueError("eps must lie in (0, 1/4)")
    if mc_samples < 10**4:
        raise ValueError("mc_samples must be at least 1e4")
    if k is None:
        if s is None:
            raise ValueError("either a schedule or an explicit k is required")
        k = s.k(eps)
    if k < 1:
        raise ValueError("k must be at least 1: at k = 0 the rate is undefined")
    boundary = evolve_boundary(m, x, eps, k, density_factor * eps, budget)
    index = build_index(boundary.cloud, eps)
    denominator = ball_volume(eps, n)
    preserving = volume_preserving(m)

    def predicate(z):
        near = index.near_mask(z, eps)
        if preserving:
            if n != 2:
                return near
            sel = np.flatnonzero(near)
            near[sel[interior_mask(boundary, z[sel])]] = False
            return near
        far = np.flatnonzero(~near)
        near[far[_inside_by_pullback(m, x, eps, k, z[far])]] = True
        return near

    hits = mc_count(predicate, mc_samples, seed, n, batch_size, workers)
    frac = hits / mc_samples
    se = math.sqrt(frac * (1 - frac) / mc_samples)
    numerator = denominator + frac if preserving else frac
    return DistortionSample(eps, k, numerator, se, denominator, hits, mc_samples)


def rung_seed(seed: int, rung: int) -> int:
    return int(np.random.SeedSequence([seed, rung]).generate_state(1)[0])


def distortion_curve(
    m: MapDescriptor,
    x,
    eps_ladder,
    s: Schedule,
    mc_samples: int = 10**6,
    seed: int = 0,
    **kwargs,
) -> list[DistortionSample]:
    """One ``estimate_distortion`` per rung of a strictly decreasing eps ladder, with independent seeds."""
    ladder = [float(e) for e in eps_ladder]
    if not ladder:
        raise ValueError("eps ladder is empty")
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("eps ladder must be strictly decreasing")
    out = []
    for i, eps in enumerate(ladder):
        try:
            out.append(estimate_distortion(m, x, eps, s, mc_samples, seed=rung_seed(seed, i), **kwargs))
        except BudgetExceeded as exc:
            raise BudgetExceeded(f"rung {i} (eps={eps!r}): {exc}") from exc
    return out


def error_trend_ok(samples, target: float, n_se: float = 2.0) -> bool:
    """``|rate - target|`` nonincreasing along the ladder, up to ``n_se`` combined standard errors."""
    errs = [abs(s.rate - target) for s in samples]
    for a, b, sa, sb in zip(errs, errs[1:], samples, samples[1:]):
        if b > a + n_se * math.hypot(sa.rate_se, sb.rate_se):
            return False
    return True

