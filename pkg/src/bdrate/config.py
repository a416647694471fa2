"""Experiment configuration files.

INI-style sections (``system``, ``measure``, ``schedule``, ``ladder``, ``mc``,
``lyapunov``, ``symbolic``, ``cross_check``, ``seeds``, ``acceptance``,
``output``). Matrices are written row by row, rows separated by ``;``. Epsilon
values accept ``2^-8`` as well as plain floats.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distortion import Schedule
from .maps import NotHyperbolicError, make_map, validate_hyperbolic

OUTPUT_ENV = "BDRATE_OUTPUT_DIR"


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def parse_matrix(text: str, name: str) -> np.ndarray:
    try:
        rows = [[float(v) for v in row.split()] for row in text.split(";") if row.strip()]
        arr = np.array(rows)
    except ValueError as exc:
        raise ConfigError(name, f"cannot parse matrix: {exc}") from None
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ConfigError(name, "matrix rows must all have the same length")
    return arr


def parse_eps(token: str, name: str) -> float:
    token = token.strip().rstrip(",")
    try:
        if token.startswith("2^"):
            return 2.0 ** float(token[2:])
        return float(token)
    except ValueError:
        raise ConfigError(name, f"cannot parse {token!r}") from None


def parse_ints(text: str, name: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(name, f"expected integers, got {text!r}") from None


@dataclass
class ExperimentConfig:
    name: str
    kind: str  # "torus" or "sft"
    matrix: np.ndarray | None = None
    delta: float | None = None
    transitions: np.ndarray | None = None
    measure: str = "lebesgue"
    measure_p: float = 0.5
    measure_P: np.ndarray | None = None
    center: tuple[float, ...] | None = None
    schedule: Schedule = field(default_factory=Schedule)
    eps_ladder: list[float] = field(default_factory=list)
    mc_samples: int = 10**6
    density_factor: float = 0.25
    budget: int = 10**7
    batch_size: int = 1 << 17
    workers: int = 1
    lyap_iter: int = 10_000
    reorth_every: int = 1
    lyap_burn_in: int = 1000
    srb_burn_in: int = 1000
    sym_m: int = 60
    sym_k: list[int] = field(default_factory=list)
    sym_samples: int = 1000
    seed: int = 0
    tolerance: float = 0.15
    lyap_tolerance: float = 1e-6
    gap_tolerance: float = 0.3
    covering_tolerance: float = 0.25
    output_dir: str = "runs"
    source: str | None = None

    @property
    def smooth(self) -> bool:
        return self.kind == "torus"

    def resolved_output_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_ENV) or self.output_dir)

    def build_map(self):
        return make_map(self.matrix.astype(np.int64), self.delta)


def _get(cp, section, key, default=None):
    if cp.has_option(section, key):
        return cp.get(section, key).split("#")[0].strip()
    return default


def _num(cp, section, key, default, typ=float):
    raw = _get(cp, section, key)
    if raw is None:
        return default
    try:
        return typ(float(raw)) if typ is int else typ(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key}", f"expected a number, got {raw!r}") from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    if not cp.read(path):
        raise ConfigError("path", f"cannot read {path}")
    return config_from_parser(cp, name=_get(cp, "output", "name", path.stem), source=str(path))


def parse_config_text(text: str, name: str = "experiment") -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.read_string(text)
    return config_from_parser(cp, name=_get(cp, "output", "name", name))


def config_from_parser(cp: configparser.ConfigParser, name: str, source: str | None = None) -> ExperimentConfig:
    kind = _get(cp, "system", "kind")
    if kind not in ("torus", "sft"):
        raise ConfigError("system.kind", "must be 'torus' or 'sft'")
    cfg = ExperimentConfig(name=name, kind=kind, source=source)
    cfg.seed = _num(cp, "seeds", "master", 0, int)
    cfg.output_dir = _get(cp, "output", "dir", cfg.output_dir)
    cfg.measure = _get(cp, "measure", "kind", "lebesgue" if kind == "torus" else "parry")
    cfg.tolerance = _num(cp, "acceptance", "tolerance", cfg.tolerance)

    if kind == "torus":
        raw = _get(cp, "system", "matrix")
        if raw is None:
            raise ConfigError("system.matrix", "required for torus systems")
        cfg.matrix = parse_matrix(raw, "system.matrix")
        if not validate_hyperbolic(cfg.matrix):
            raise ConfigError("system.matrix", "not a hyperbolic integer matrix with |det| = 1")
        delta = _get(cp, "system", "delta")
        cfg.delta = None if delta is None else _num(cp, "system", "delta", 0.0)
        try:
            cfg.build_map()
        except NotHyperbolicError as exc:
            raise ConfigError("system.delta", str(exc)) from None
        if cfg.measure not in ("lebesgue", "srb"):
            raise ConfigError("measure.kind", "torus systems take 'lebesgue' or 'srb'")
        center = _get(cp, "measure", "center", "random")
        if center != "random":
            try:
                cfg.center = tuple(float(v) for v in center.split())
            except ValueError:
                raise ConfigError("measure.center", f"cannot parse {center!r}") from None
            if len(cfg.center) != cfg.matrix.shape[0]:
                raise ConfigError("measure.center", "dimension does not match the matrix")
        try:
            cfg.schedule = Schedule(
                _num(cp, "schedule", "theta", 0.5),
                _num(cp, "schedule", "scale", 1.0),
                _num(cp, "schedule", "floor_min", 1, int),
            )
        except ValueError as exc:
            raise ConfigError("schedule", str(exc)) from None
        eps_raw = _get(cp, "ladder", "eps", "")
        cfg.eps_ladder = [parse_eps(t, "ladder.eps") for t in eps_raw.split()]
        if not cfg.eps_ladder:
            raise ConfigError("ladder.eps", "the eps ladder is empty")
        if any(b >= a for a, b in zip(cfg.eps_ladder, cfg.eps_ladder[1:])):
            raise ConfigError("ladder.eps", "must be strictly decreasing")
        if not all(0 < e < 0.25 for e in cfg.eps_ladder):
            raise ConfigError("ladder.eps", "all values must lie in (0, 1/4)")
        cfg.mc_samples = _num(cp, "mc", "samples", cfg.mc_samples, int)
        cfg.density_factor = _num(cp, "mc", "density_factor", cfg.density_factor)
        cfg.budget = _num(cp, "mc", "budget", cfg.budget, int)
        cfg.batch_size = _num(cp, "mc", "batch_size", cfg.batch_size, int)
        cfg.workers = _num(cp, "mc", "workers", cfg.workers, int)
        if cfg.mc_samples < 10**4:
            raise ConfigError("mc.samples", "must be at least 10000")
        if not 0 < cfg.density_factor <= 0.25:
            raise ConfigError("mc.density_factor", "must lie in (0, 1/4]")
        for key in ("budget", "batch_size", "workers"):
            if getattr(cfg, key) <= 0:
                raise ConfigError(f"mc.{key}", "must be positive")
        cfg.lyap_iter = _num(cp, "lyapunov", "n_iter", cfg.lyap_iter, int)
        cfg.reorth_every = _num(cp, "lyapunov", "reorth_every", cfg.reorth_every, int)
        cfg.lyap_burn_in = _num(cp, "lyapunov", "burn_in", cfg.lyap_burn_in, int)
        cfg.srb_burn_in = _num(cp, "measure", "burn_in", cfg.srb_burn_in, int)
        cfg.lyap_tolerance = _num(cp, "acceptance", "lyapunov_tolerance", cfg.lyap_tolerance)
        cfg.gap_tolerance = _num(cp, "cross_check", "gap_tolerance", cfg.gap_tolerance)
        cfg.covering_tolerance = _num(cp, "cross_check", "covering_tolerance", cfg.covering_tolerance)
        if cfg.lyap_iter < 1000:
            raise ConfigError("lyapunov.n_iter", "must be at least 1000")
        if not 1 <= cfg.reorth_every <= 20:
            raise ConfigError("lyapunov.reorth_every", "must lie in [1, 20]")
    else:
        raw = _get(cp, "system", "transitions")
        if raw is None:
            raise ConfigError("system.transitions", "required for sft systems")
        cfg.transitions = parse_matrix(raw, "system.transitions")
        if cfg.measure not in ("parry", "bernoulli", "markov"):
            raise ConfigError("measure.kind", "sft systems take 'parry', 'bernoulli' or 'markov'")
        cfg.measure_p = _num(cp, "measure", "p", 0.5)
        if cfg.measure == "markov":
            rawp = _get(cp, "measure", "matrix")
            if rawp is None:
                raise ConfigError("measure.matrix", "required for markov measures")
            cfg.measure_P = parse_matrix(rawp, "measure.matrix")
        cfg.sym_m = _num(cp, "symbolic", "m", cfg.sym_m, int)
        cfg.sym_k = parse_ints(_get(cp, "symbolic", "k", ""), "symbolic.k")
        cfg.sym_samples = _num(cp, "symbolic", "samples", cfg.sym_samples, int)
        if not cfg.sym_k:
            raise ConfigError("symbolic.k", "at least one k is required")
        if any(k < 1 or k > 2 * cfg.sym_m for k in cfg.sym_k):
            raise ConfigError("symbolic.k", "each k must lie in [1, 2m]")
        if cfg.sym_samples < 1:
            raise ConfigError("symbolic.samples", "must be positive")
        try:
            build_measure(cfg)
        except ValueError as exc:
            raise ConfigError("measure", str(exc)) from None
    return cfg


def build_measure(cfg: ExperimentConfig):
    from .symbolic import SFT, MarkovMeasure, bernoulli, parry_measure

    sft = SFT(cfg.transitions.astype(np.int64))
    if cfg.measure == "parry":
        if not sft.irreducible():
            raise ValueError("the Parry measure needs an irreducible SFT")
        return sft, parry_measure(sft)
    if cfg.measure == "bernoulli":
        if sft.alphabet_size != 2 or not (sft.transitions == 1).all():
            raise ValueError("bernoulli measures live on the full 2-shift")
        return sft, bernoulli(cfg.measure_p)
    return sft, MarkovMeasure(sft, cfg.measure_P)
