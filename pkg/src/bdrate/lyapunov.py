"""Lyapunov spectra by QR (Benettin) reorthonormalisation along an orbit."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .maps import MapDescriptor, apply, differential, volume_preserving
from .torus import torus_point

CLUSTER_TOL = 1e-3


@dataclass(frozen=True)
class SpectrumEstimate:
    exponents: tuple[float, ...]
    multiplicities: tuple[int, ...]
    n_iterations: int
    residual: float
    raw: tuple[float, ...] = ()

    def __post_init__(self):
        if list(self.exponents) != sorted(self.exponents, reverse=True):
            raise ValueError("exponents must be sorted descending")
        if any(d < 1 for d in self.multiplicities) or len(self.multiplicities) != len(self.exponents):
            raise ValueError("one positive multiplicity per exponent required")

    @property
    def dim(self) -> int:
        return sum(self.multiplicities)

    @property
    def total(self) -> float:
        return sum(l * d for l, d in zip(self.exponents, self.multiplicities))


def cluster_exponents(values, tol: float = CLUSTER_TOL):
    """Group descending values whose neighbours are closer than ``tol``."""
    vals = sorted((float(v) for v in values), reverse=True)
    groups: list[list[float]] = []
    for v in vals:
        if groups and groups[-1][-1] - v < tol:
            groups[-1].append(v)
        else:
            groups.append([v])
    return tuple(float(np.mean(g)) for g in groups), tuple(len(g) for g in groups)


def _gram_schmidt2(m):
    """Positive-diagonal QR of a small frame: Gram-Schmidt with one re-orthogonalisation pass."""
    q = np.array(m, dtype=float)
    diag = np.empty(q.shape[1])
    for j in range(q.shape[1]):
        v = q[:, j]
        for _ in range(2):
            for i in range(j):
                v -= (q[:, i] @ v) * q[:, i]
        nv = math.sqrt(v @ v)
        q[:, j] = v / nv
        diag[j] = nv
    return q, diag


def _qr_pos(m):
    if m.shape[1] <= 3:
        return _gram_schmidt2(m)
    q, r = np.linalg.qr(m)
    s = np.sign(np.diag(r))
    s[s == 0] = 1.0
    return q * s, np.abs(np.diag(r))


def lyapunov_spectrum(
    m: MapDescriptor,
    x0,
    n_iter: int = 10_000,
    reorth_every: int = 1,
    seed: int = 0,
    burn_in: int = 1000,
    cluster_tol: float = CLUSTER_TOL,
) -> SpectrumEstimate:
    """Estimate the Lyapunov spectrum along the forward orbit of ``x0``.

    An orthonormal frame (random, from ``seed``) is carried by the differential and
    re-orthonormalised every ``reorth_every`` steps; the logs of the diagonal of R
    are averaged over ``n_iter`` steps. The first ``burn_in`` steps only align the
    frame and advance the orbit, they are not accumulated.

    ``residual`` is the largest change of any exponent between the half-length and
    full-length averages; it stays tiny for hyperbolic maps and flags slow
    (e.g. polynomial) growth.
    """
    if n_iter < 1000:
        raise ValueError("n_iter must be at least 1000")
    if not 1 <= reorth_every <= 20:
        raise ValueError("reorth_every must lie in [1, 20]")
    x = torus_point(x0)
    n = x.size
    q, _ = _qr_pos(np.random.default_rng(seed).standard_normal((n, n)))

    const = m.matrix.astype(float) if volume_preserving(m) else None

    def run(steps, x, q, acc):
        done = 0
        while done < steps:
            block = min(reorth_every, steps - done)
            for _ in range(block):
                q = (const if const is not None else differential(m, x)) @ q
                x = apply(m, x)
            q, diag = _qr_pos(q)
            if acc is not None:
                acc += np.log(diag)
            done += block
        return x, q

    x, q = run(burn_in, x, q, None)
    sums = np.zeros(n)
    half = n_iter // 2
    x, q = run(half, x, q, sums)
    first = sums / half
    x, q = run(n_iter - half, x, q, sums)
    raw = sums / n_iter
    residual = float(np.max(np.abs(np.sort(raw) - np.sort(first))))
    exps, mult = cluster_exponents(raw, cluster_tol)
    return SpectrumEstimate(exps, mult, n_iter, residual, tuple(sorted(raw.tolist(), reverse=True)))


def positive_sum(s: SpectrumEstimate) -> float:
    return float(sum(l * d for l, d in zip(s.exponents, s.multiplicities) if l > 0))


def linear_exponents(matrix) -> np.ndarray:
    """Exact exponents of a linear automorphism: log-moduli of its eigenvalues, descending."""
    return np.sort(np.log(np.abs(np.linalg.eigvals(np.asarray(matrix, dtype=float)))))[::-1]


def srb_start(m: MapDescriptor, seed: int, burn_in: int = 1000) -> np.ndarray:
    """A point typical for the SRB measure: a uniform start pushed ``burn_in`` steps forward."""
    x = np.random.default_rng(seed).random(m.dim)
    for _ in range(burn_in):
        x = apply(m, x)
    return x
