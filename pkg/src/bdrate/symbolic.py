"""Subshifts of finite type with Markov measures: the exactly solvable distortion ratio.

Metric convention: ``rho(x, y) = 2**-min{|i| : x_i != y_i}``. The ball of radius
``eps`` is taken as the open ball of the dyadic radius ``2**-m`` with
``m = ceil(log2(1/eps))``, i.e. the cylinder fixing coordinates ``-m..m``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np


class InadmissibleError(ValueError):
    pass


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SFT:
    transitions: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.transitions)
        if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] < 2:
            raise ValueError("transitions must be a square matrix over an alphabet of size >= 2")
        if not np.isin(t, (0, 1)).all():
            raise ValueError("transitions must be a 0/1 matrix")
        if (t.sum(axis=0) == 0).any() or (t.sum(axis=1) == 0).any():
            raise ValueError("every symbol needs a successor and a predecessor")
        object.__setattr__(self, "transitions", _frozen(t, np.int64))

    @property
    def alphabet_size(self) -> int:
        return self.transitions.shape[0]

    def irreducible(self) -> bool:
        m = self.alphabet_size
        reach = (np.linalg.matrix_power(np.eye(m, dtype=np.int64) + self.transitions, m - 1) > 0)
        return bool(reach.all())

    def admissible(self, word) -> bool:
        w = np.asarray(word, dtype=np.int64)
        if w.size == 0:
            return True
        if w.min() < 0 or w.max() >= self.alphabet_size:
            return False
        return bool(np.all(self.transitions[w[:-1], w[1:]] == 1))

    def topological_entropy(self) -> float:
        return float(math.log(np.max(np.abs(np.linalg.eigvals(self.transitions.astype(float))))))


def stationary_distribution(P) -> np.ndarray:
    """Left Perron vector of a stochastic matrix, normalised to sum 1."""
    P = np.asarray(P, dtype=float)
    m = P.shape[0]
    a = np.vstack([P.T - np.eye(m), np.ones(m)])
    b = np.zeros(m + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    pi = np.where(np.abs(pi) < 1e-15, 0.0, pi)
    return pi / pi.sum()


@dataclass(frozen=True, eq=False)
class MarkovMeasure:
    """Stationary Markov measure ``(pi, P)`` supported on an SFT."""

    sft: SFT
    P: np.ndarray
    pi: np.ndarray | None = None

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        m = self.sft.alphabet_size
        if P.shape != (m, m):
            raise ValueError("P must match the alphabet size")
        if (P < 0).any() or np.abs(P.sum(axis=1) - 1).max() > 1e-12:
            raise ValueError("P must be row-stochastic")
        if ((P > 0) & (self.sft.transitions == 0)).any():
            raise ValueError("P charges a forbidden transition")
        pi = stationary_distribution(P) if self.pi is None else np.asarray(self.pi, dtype=float)
        if (pi < 0).any() or abs(pi.sum() - 1) > 1e-12 or np.abs(pi @ P - pi).max() > 1e-12:
            raise ValueError("pi must be a stationary probability vector of P")
        object.__setattr__(self, "P", _frozen(P))
        object.__setattr__(self, "pi", _frozen(pi))

    @property
    def alphabet_size(self) -> int:
        return self.sft.alphabet_size


def full_shift(m: int = 2) -> SFT:
    return SFT(np.ones((m, m), dtype=np.int64))


def golden_mean() -> SFT:
    return SFT(np.array([[1, 1], [1, 0]]))


def bernoulli(p: float = 0.5) -> MarkovMeasure:
    """Bernoulli(p, 1-p) on the full 2-shift; ``p`` is the probability of symbol 0."""
    row = [p, 1 - p]
    return MarkovMeasure(full_shift(2), np.array([row, row]), np.array(row))


def parry_measure(sft: SFT) -> MarkovMeasure:
    """Measure of maximal entropy: ``P_ij = T_ij r_j / (lam r_i)``, ``pi_i ~ l_i r_i``."""
    t = sft.transitions.astype(float)
    vals, right = np.linalg.eig(t)
    i = int(np.argmax(vals.real))
    lam = vals[i].real
    r = np.abs(right[:, i].real)
    vals_l, left = np.linalg.eig(t.T)
    l = np.abs(left[:, int(np.argmax(vals_l.real))].real)
    P = t * r[None, :] / (lam * r[:, None])
    P /= P.sum(axis=1, keepdims=True)
    pi = l * r / np.dot(l, r)
    return MarkovMeasure(sft, P, pi)


@dataclass(frozen=True, eq=False)
class SymbolSequence:
    """Bi-infinite sequence stored on a finite window and extended periodically.

    ``symbols[j]`` is coordinate ``j - origin``.
    """

    symbols: np.ndarray
    origin: int = 0

    def __post_init__(self):
        object.__setattr__(self, "symbols", _frozen(self.symbols, np.int64))

    @property
    def lo(self) -> int:
        return -self.origin

    @property
    def hi(self) -> int:
        return len(self.symbols) - 1 - self.origin

    def at(self, i: int) -> int:
        return int(self.symbols[(i + self.origin) % len(self.symbols)])

    def window(self, lo: int, hi: int) -> np.ndarray:
        idx = (np.arange(lo, hi + 1) + self.origin) % len(self.symbols)
        return self.symbols[idx]

    def shift(self, k: int = 1) -> "SymbolSequence":
        """``(sigma^k x)_i = x_{i+k}``."""
        return SymbolSequence(self.symbols, self.origin + k)


@dataclass(frozen=True, eq=False)
class Cylinder:
    window_lo: int
    window_hi: int
    word: np.ndarray

    def __post_init__(self):
        w = _frozen(self.word, np.int64)
        if len(w) != self.window_hi - self.window_lo + 1:
            raise ValueError("word length must match the window")
        object.__setattr__(self, "word", w)


def radius_level(eps: float) -> int:
    if not 0 < eps <= 0.5:
        raise ValueError("eps must lie in (0, 1/2]")
    return math.ceil(math.log2(1 / eps) - 1e-12)


def ball_to_cylinder(sft: SFT, x: SymbolSequence, eps: float) -> Cylinder:
    m = radius_level(eps)
    word = x.window(-m, m)
    if not sft.admissible(word):
        raise InadmissibleError("x is not admissible on the ball window")
    return Cylinder(-m, m, word)


def cylinder_measure(mu: MarkovMeasure, c: Cylinder | np.ndarray) -> float:
    """``pi[w0] prod P[w_j, w_{j+1}]``; stationarity makes this independent of the window position."""
    w = c.word if isinstance(c, Cylinder) else np.asarray(c, dtype=np.int64)
    if len(w) == 0:
        return 1.0
    if not mu.sft.admissible(w):
        return 0.0
    return float(mu.pi[w[0]] * np.prod(mu.P[w[:-1], w[1:]]))


def word_measures(mu: MarkovMeasure, words: np.ndarray) -> np.ndarray:
    """Vectorised ``cylinder_measure`` over rows of ``words``."""
    words = np.asarray(words, dtype=np.int64)
    out = mu.pi[words[:, 0]].copy()
    for j in range(words.shape[1] - 1):
        out *= mu.P[words[:, j], words[:, j + 1]]
    return out


def exact_distortion_ratio(sft: SFT, mu: MarkovMeasure, x: SymbolSequence, eps: float, k: int) -> float:
    """``mu(O_eps(sigma^k B)) / mu(B)`` with ``B = B(x, eps)``.

    ``sigma^k B`` fixes coordinates ``-m-k..m-k`` to ``sigma^k x``; its eps-neighbourhood
    only remembers the part inside ``-m..m``, i.e. ``x`` on ``-m+k..m``.
    """
    m = radius_level(eps)
    if not 0 <= k <= 2 * m:
        raise ValueError("k must lie in [0, 2m]")
    ball = ball_to_cylinder(sft, x, eps)
    image_nbhd = Cylinder(-m, m - k, x.shift(k).window(-m, m - k))
    return cylinder_measure(mu, image_nbhd) / cylinder_measure(mu, ball)


def symbolic_rate(sft: SFT, mu: MarkovMeasure, x: SymbolSequence, eps: float, k: int) -> float:
    return math.log(exact_distortion_ratio(sft, mu, x, eps, k)) / k


def admissible_words(sft: SFT, length: int, budget: int = 10**7) -> np.ndarray:
    """All admissible words of the given length, lexicographic order."""
    a = sft.alphabet_size
    words = np.arange(a, dtype=np.int64).reshape(-1, 1)
    for _ in range(length - 1):
        if words.shape[0] * a > budget:
            raise OverflowError("enumeration budget exceeded")
        ext = np.repeat(words, a, axis=0)
        nxt = np.tile(np.arange(a, dtype=np.int64), words.shape[0])
        ok = sft.transitions[ext[:, -1], nxt] == 1
        words = np.column_stack([ext, nxt])[ok]
    return words


def symbolic_distance(y: np.ndarray, z: np.ndarray, lo: int) -> np.ndarray:
    """``rho`` between rows of ``y`` and ``z`` known on the window starting at coordinate ``lo``;
    sequences agreeing on the whole window get distance ``2**-(max|i| + 1)``."""
    coords = np.abs(np.arange(lo, lo + y.shape[1]))
    diff = y != z
    big = coords.max() + 1
    first = np.where(diff, coords, big).min(axis=1)
    return 2.0 ** (-first.astype(float))


def brute_force_ratio(sft: SFT, mu: MarkovMeasure, x: SymbolSequence, m: int, k: int,
                      budget: int = 10**7) -> float:
    """Enumeration oracle for ``exact_distortion_ratio`` on the ball of level ``m``.

    Every admissible word ``y`` on ``-m..m`` is tested against every admissible
    word ``z`` on ``-m-k..m`` whose coordinates ``-m-k..m-k`` copy ``sigma^k x`` (the
    restrictions of ``sigma^k B``): ``y`` is in the neighbourhood iff some ``z`` is at
    distance below ``2**-m`` on ``-m..m``. Measures are summed word by word.
    """
    if sft.alphabet_size ** (2 * m + 1) > budget:
        raise OverflowError("enumeration budget exceeded")
    ys = admissible_words(sft, 2 * m + 1, budget)
    y_mu = word_measures(mu, ys)
    radius = 2.0**-m

    xs = x.window(-m, m)
    in_ball = symbolic_distance(ys, np.broadcast_to(xs, ys.shape), -m) < radius
    ball_mu = float(y_mu[in_ball].sum())

    fixed = x.shift(k).window(-m - k, m - k)
    tails = np.array(list(itertools.product(range(sft.alphabet_size), repeat=k)), dtype=np.int64)
    tails = tails.reshape(sft.alphabet_size**k, k)
    zs = np.column_stack([np.broadcast_to(fixed, (tails.shape[0], fixed.size)), tails])
    zs = zs[[sft.admissible(z) for z in zs]]
    z_core = zs[:, k:]  # coordinates -m..m
    near = np.zeros(ys.shape[0], dtype=bool)
    for z in z_core:
        near |= symbolic_distance(ys, np.broadcast_to(z, ys.shape), -m) < radius
    return float(y_mu[near].sum()) / ball_mu


def sft_entropy(mu: MarkovMeasure) -> float:
    P = mu.P
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * np.log(np.where(P > 0, P, 1.0)), 0.0)
    return float(-np.dot(mu.pi, terms.sum(axis=1)))


def _reversed_chain(mu: MarkovMeasure) -> np.ndarray:
    pi, P = mu.pi, mu.P
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(pi[:, None] > 0, (pi[None, :] * P.T) / pi[:, None], 0.0)


def _step(cum: np.ndarray, current: np.ndarray, u: np.ndarray) -> np.ndarray:
    rows = cum[current]
    return np.minimum((rows < u[:, None]).sum(axis=1), cum.shape[1] - 1)


def sample_sequences(mu: MarkovMeasure, lo: int, hi: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` independent draws of coordinates ``lo..hi`` of a ``mu``-random sequence, shape ``(n, hi-lo+1)``.

    ``x_0 ~ pi``; the right half follows ``P``, the left half the time-reversed chain
    ``Q_ij = pi_j P_ji / pi_i``, which makes the two-sided draw stationary.
    """
    if not lo <= 0 <= hi:
        raise ValueError("window must contain coordinate 0")
    out = np.empty((n, hi - lo + 1), dtype=np.int64)
    origin = -lo
    out[:, origin] = _step(np.cumsum(mu.pi)[None, :], np.zeros(n, dtype=np.int64), rng.random(n))
    cum_fwd = np.cumsum(mu.P, axis=1)
    cum_bwd = np.cumsum(_reversed_chain(mu), axis=1)
    for i in range(origin + 1, out.shape[1]):
        out[:, i] = _step(cum_fwd, out[:, i - 1], rng.random(n))
    for i in range(origin - 1, -1, -1):
        out[:, i] = _step(cum_bwd, out[:, i + 1], rng.random(n))
    return out


def sample_sequence(mu: MarkovMeasure, lo: int, hi: int, rng: np.random.Generator) -> SymbolSequence:
    return SymbolSequence(sample_sequences(mu, lo, hi, 1, rng)[0], -lo)


def sampled_rates(sft: SFT, mu: MarkovMeasure, m: int, k: int, n_samples: int, seed: int) -> np.ndarray:
    """``(1/k) ln ratio`` at level ``m`` for ``n_samples`` ``mu``-random centres."""
    rng = np.random.default_rng(seed)
    eps = 2.0**-m
    draws = sample_sequences(mu, -m, m, n_samples, rng)
    return np.array([symbolic_rate(sft, mu, SymbolSequence(w, m), eps, k) for w in draws])


def averaged_rate(sft: SFT, mu: MarkovMeasure, m: int, k: int, n_samples: int, seed: int) -> tuple[float, float]:
    """Mean and standard error of the sampled rates."""
    rates = sampled_rates(sft, mu, m, k, n_samples, seed)
    se = float(rates.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    return float(rates.mean()), se
