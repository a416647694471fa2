"""Hyperbolic maps of the flat torus.

Two families are provided: linear automorphisms ``x -> A x mod 1`` with an integer
matrix ``A`` and their smooth perturbations ``x -> A x + delta * g(x) mod 1`` where
``g_i(x) = sin(2 pi x_{i+1}) / (2 pi)`` (indices cyclic). All evaluators accept a
single point ``(n,)`` or a batch ``(N, n)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .torus import reduce_mod1

EIG_TOL = 1e-9


class NotHyperbolicError(ValueError):
    pass


def validate_hyperbolic(m) -> bool:
    """True iff ``m`` is a square integer matrix with |det| = 1 and no eigenvalue near the unit circle."""
    a = np.asarray(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    if not np.all(np.equal(np.mod(a, 1), 0)):
        return False
    a = a.astype(float)
    if round(abs(np.linalg.det(a))) != 1:
        return False
    mods = np.abs(np.linalg.eigvals(a))
    return bool(np.all(np.abs(mods - 1.0) > EIG_TOL))


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LinearTorusMap:
    matrix: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.matrix)
        if not validate_hyperbolic(a):
            raise NotHyperbolicError(f"matrix {a.tolist()} is not a hyperbolic toral automorphism")
        object.__setattr__(self, "matrix", _freeze(a.astype(np.int64)))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def linear_part(self) -> "LinearTorusMap":
        return self

    @property
    def delta(self) -> float:
        return 0.0

    def inverse(self) -> "LinearTorusMap":
        inv = np.rint(np.linalg.inv(self.matrix.astype(float))).astype(np.int64)
        return LinearTorusMap(inv)

    def eigen(self):
        """Eigenvalues sorted by decreasing modulus, with matching eigenvector columns."""
        vals, vecs = np.linalg.eig(self.matrix.astype(float))
        order = np.argsort(-np.abs(vals), kind="stable")
        return vals[order], vecs[:, order]

    def expansion_rates(self) -> np.ndarray:
        return np.sort(np.abs(self.eigen()[0]))[::-1]


def default_perturbation(x: np.ndarray) -> np.ndarray:
    return np.sin(2 * np.pi * np.roll(x, -1, axis=-1)) / (2 * np.pi)


def default_perturbation_jacobian(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    out = np.zeros(x.shape + (n,))
    c = np.cos(2 * np.pi * x)
    for i in range(n):
        out[..., i, (i + 1) % n] = c[..., (i + 1) % n]
    return out


# sup over the torus of the operator norm of the default perturbation's Jacobian
DEFAULT_PERTURBATION_SUP_NORM = 1.0


@dataclass(frozen=True, eq=False)
class PerturbedTorusMap:
    """``x -> A x + delta * g(x) mod 1``.

    ``delta`` must satisfy ``delta * sup|Dg| < (s - 1) / 2`` where ``s`` is the
    weakest expansion rate of ``A``. This keeps the differential inside the
    unstable cone of ``A``; it is a sufficient numerical check, not a proof.
    """

    linear_part: LinearTorusMap
    delta: float

    def __post_init__(self):
        if not isinstance(self.linear_part, LinearTorusMap):
            object.__setattr__(self, "linear_part", LinearTorusMap(self.linear_part))
        rates = self.linear_part.expansion_rates()
        s_min = float(np.min(rates[rates > 1]))
        if not abs(self.delta) * DEFAULT_PERTURBATION_SUP_NORM < (s_min - 1) / 2:
            raise NotHyperbolicError(
                f"|delta|={abs(self.delta)} exceeds the cone bound {(s_min - 1) / 2:.6g} for this matrix"
            )

    @property
    def matrix(self) -> np.ndarray:
        return self.linear_part.matrix

    @property
    def dim(self) -> int:
        return self.linear_part.dim


MapDescriptor = Union[LinearTorusMap, PerturbedTorusMap]


def make_map(matrix, delta: float | None = None) -> MapDescriptor:
    lin = LinearTorusMap(np.asarray(matrix))
    return lin if delta is None else PerturbedTorusMap(lin, float(delta))


def volume_preserving(m: MapDescriptor) -> bool:
    return isinstance(m, LinearTorusMap) or m.delta == 0.0


def _lift(m: MapDescriptor, p: np.ndarray) -> np.ndarray:
    y = p @ m.matrix.T.astype(float)
    if isinstance(m, PerturbedTorusMap) and m.delta != 0.0:
        y = y + m.delta * default_perturbation(p)
    return y


def apply(m: MapDescriptor, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != m.dim:
        raise ValueError(f"point dimension {p.shape[-1]} does not match map dimension {m.dim}")
    return reduce_mod1(_lift(m, p))


def apply_iter(m: MapDescriptor, p, k: int) -> np.ndarray:
    if k < 0:
        raise ValueError("k must be nonnegative")
    p = reduce_mod1(p)
    for _ in range(k):
        p = apply(m, p)
    return p


def apply_inverse(m: MapDescriptor, p, tol: float = 1e-15, max_iter: int = 200) -> np.ndarray:
    """Preimage under ``m``.

    For perturbed maps the fixed point of ``y -> A^{-1}(p - delta g(y))`` is found by
    iteration; it contracts with rate ``|delta| * |A^{-1}|`` which is well below one for
    admissible ``delta``.
    """
    p = np.asarray(p, dtype=float)
    ainv = m.linear_part.inverse().matrix.T.astype(float)
    y = reduce_mod1(p @ ainv)
    if isinstance(m, LinearTorusMap) or m.delta == 0.0:
        return y
    for _ in range(max_iter):
        y_new = reduce_mod1((p - m.delta * default_perturbation(y)) @ ainv)
        step = y_new - y
        step -= np.round(step)
        y = y_new
        if np.max(np.abs(step)) <= tol:
            break
    return y


def differential(m: MapDescriptor, p) -> np.ndarray:
    """Exact Jacobian ``A + delta * Dg(p)``; shape ``(..., n, n)``."""
    p = np.asarray(p, dtype=float)
    a = m.matrix.astype(float)
    if isinstance(m, LinearTorusMap) or m.delta == 0.0:
        return np.broadcast_to(a, p.shape[:-1] + a.shape).copy()
    return a + m.delta * default_perturbation_jacobian(p)


def lipschitz_constant(m) -> float:
    """Upper bound for the Lipschitz constant: largest singular value of A plus |delta| sup|Dg|."""
    if isinstance(m, (LinearTorusMap, PerturbedTorusMap)):
        a = m.matrix.astype(float)
        delta = abs(m.delta)
    else:
        a = np.asarray(m, dtype=float)
        delta = 0.0
    return float(np.linalg.norm(a, 2)) + delta * DEFAULT_PERTURBATION_SUP_NORM


def cat_map() -> LinearTorusMap:
    return LinearTorusMap(np.array([[2, 1], [1, 1]]))


CAT_LAMBDA = math.log((3 + math.sqrt(5)) / 2)
