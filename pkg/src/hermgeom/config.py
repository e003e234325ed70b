"""Run configuration: an INI file with one section per concern.

The full grammar is documented in ``docs/config.md``.  Every key is
optional; unknown sections or keys are rejected.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from typing import Optional

from .calculus import DerivativeSpec
from .errors import ConfigError, DerivativeError
from .manifolds import KINDS, TorusDomain, TrigPolynomial

DEFAULT_TOLERANCES = {
    "identity": 1e-6,          # s - ŝ - ⟨∂̄∂̄*ω, ω⟩ pointwise
    "symmetry": 1e-10,         # conjugate symmetry of R, antisymmetry of T
    "torsion": 1e-10,          # Kähler detection
    "kahler_scalar": 1e-8,     # s = ŝ and extra symmetries for Kähler metrics
    "ricci_routes": 1e-7,      # trace vs log-det Ricci
    "hsc_floor": 1e-8,         # H ≥ -floor where semi-positivity is expected
    "fs_sigma": 3.0,           # Monte Carlo agreement in standard errors
    "fs_floor": 1e-10,         # absolute floor for zero-variance averages
    "integral": 1e-5,          # relative, integral identities
    "gauduchon": 1e-6,         # sup |∂∂̄ω_G| after the solve
    "weight": 1e-6,            # f₀ against e^{-u}/mean on conformal tori
    "certificate": 1e-5,       # s̃ f^{1/n} constancy, relative
    "dbar_star": 1e-6,         # conformal law for ∂̄*ω
    "conformal_ricci": 1e-7,   # Ric(e^u g) = Ric(g) - n ∂∂̄u
}

_SCHEMA = {
    "manifold": {"kind", "dim", "u", "variant", "scale", "seed", "eps", "radius"},
    "grid": {"n", "counts", "periods", "stencil"},
    "derivative": {"scheme", "step", "second_step", "richardson_levels"},
    "montecarlo": {"samples", "seed", "points", "restarts"},
    "tolerances": set(DEFAULT_TOLERANCES),
    "solver": {"tol", "maxiter", "seed"},
    "output": {"path", "format"},
}


@dataclass
class ManifoldConfig:
    kind: str = "flat_torus"
    dim: Optional[int] = None
    u: Optional[str] = None
    variant: str = "default"
    scale: float = 1.0
    seed: int = 0
    eps: float = 0.1
    radius: float = 0.5


@dataclass
class RunConfig:
    manifold: ManifoldConfig = field(default_factory=ManifoldConfig)
    grid: tuple = (64, 64, 64, 64)
    periods: Optional[tuple] = None
    stencil: str = "spectral"
    derivative: DerivativeSpec = field(default_factory=DerivativeSpec)
    samples: int = 100_000
    seed: int = 1
    points: int = 10
    restarts: int = 8
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    solver_tol: float = 1e-12
    solver_maxiter: int = 1000
    solver_seed: Optional[int] = None
    out: Optional[str] = None
    format: str = "json"

    @property
    def dim(self) -> int:
        m = self.manifold
        if m.dim is not None:
            return m.dim
        if m.kind == "fubini_study":
            return 1
        return 2

    def torus(self) -> TorusDomain:
        n = self.dim
        grid = self.grid if len(self.grid) == 2 * n else (self.grid[0],) * (2 * n)
        return TorusDomain(n, self.periods, grid)

    def with_overrides(self, seed=None, points=None, out=None, fmt=None) -> "RunConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=int(seed))
        if points is not None:
            if points < 1:
                raise ConfigError("--points must be >= 1")
            cfg = replace(cfg, points=int(points))
        if out is not None:
            cfg = replace(cfg, out=out)
        if fmt is not None:
            cfg = replace(cfg, format=fmt)
        return cfg

    def environment(self) -> dict:
        d = self.derivative
        return {"grid": list(self.torus().grid) if self.manifold.kind.endswith("torus") else None,
                "seed": self.seed, "points": self.points, "samples": self.samples,
                "step": {"scheme": d.scheme, "step": d.step, "second_step": d.second_step,
                         "richardson_levels": d.richardson_levels},
                "stencil": self.stencil, "manifold": vars(self.manifold).copy()}


def _get(parser, section, key, conv, default):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key).strip()
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None


def _ints(text):
    return tuple(int(v) for v in text.replace(" ", "").split(","))


def _floats(text):
    return tuple(float(v) for v in text.replace(" ", "").split(","))


def parse_config(text: str) -> RunConfig:
    """Parse configuration text; raises :class:`ConfigError` on any problem."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        extra = set(parser.options(section)) - _SCHEMA[section]
        if extra:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(extra))}")

    m = ManifoldConfig(
        kind=_get(parser, "manifold", "kind", str, "flat_torus"),
        dim=_get(parser, "manifold", "dim", int, None),
        u=_get(parser, "manifold", "u", str, None),
        variant=_get(parser, "manifold", "variant", str, "default"),
        scale=_get(parser, "manifold", "scale", float, 1.0),
        seed=_get(parser, "manifold", "seed", int, 0),
        eps=_get(parser, "manifold", "eps", float, 0.1),
        radius=_get(parser, "manifold", "radius", float, 0.5),
    )
    if m.kind not in KINDS:
        raise ConfigError(f"unknown manifold kind {m.kind!r}; expected one of {', '.join(KINDS)}")
    if m.variant not in ("default", "full"):
        raise ConfigError("[manifold] variant must be 'default' or 'full'")
    if m.dim is not None and m.dim < 1:
        raise ConfigError("[manifold] dim must be >= 1")
    if m.kind == "hopf_surface" and m.dim not in (None, 2):
        raise ConfigError("hopf_surface has dim = 2")
    if m.kind in ("conformal_torus", "general_torus") and m.dim not in (None, 2) and m.u is None:
        raise ConfigError(f"{m.kind} defaults are defined for dim = 2")
    if m.u is not None:
        if m.kind != "conformal_torus":
            raise ConfigError("[manifold] u applies to conformal_torus only")
        try:
            TrigPolynomial.parse(m.u, m.dim or 2)
        except ValueError as exc:
            raise ConfigError(f"[manifold] u: {exc}") from None

    cfg = RunConfig(manifold=m)
    n = cfg.dim
    counts = _get(parser, "grid", "counts", _ints, None)
    N = _get(parser, "grid", "n", int, None)
    if counts is not None and N is not None:
        raise ConfigError("[grid] give either n or counts, not both")
    cfg.grid = counts if counts is not None else ((N or 64),) * (2 * n)
    cfg.periods = _get(parser, "grid", "periods", _floats, None)
    cfg.stencil = _get(parser, "grid", "stencil", str, "spectral")
    if cfg.stencil not in ("spectral", "fd2"):
        raise ConfigError("[grid] stencil must be 'spectral' or 'fd2'")
    if m.kind.endswith("torus"):
        try:
            cfg.torus()
        except ValueError as exc:
            raise ConfigError(f"[grid] {exc}") from None

    try:
        cfg.derivative = DerivativeSpec(
            scheme=_get(parser, "derivative", "scheme", str, "analytic"),
            step=_get(parser, "derivative", "step", float, None),
            second_step=_get(parser, "derivative", "second_step", float, None),
            richardson_levels=_get(parser, "derivative", "richardson_levels", int, 1))
    except DerivativeError as exc:
        raise ConfigError(f"[derivative] {exc}") from None

    cfg.samples = _get(parser, "montecarlo", "samples", int, cfg.samples)
    cfg.seed = _get(parser, "montecarlo", "seed", int, cfg.seed)
    cfg.points = _get(parser, "montecarlo", "points", int, cfg.points)
    cfg.restarts = _get(parser, "montecarlo", "restarts", int, cfg.restarts)
    if cfg.samples < 2 or cfg.points < 1 or cfg.restarts < 1:
        raise ConfigError("[montecarlo] samples >= 2, points >= 1 and restarts >= 1 required")

    for key in DEFAULT_TOLERANCES:
        cfg.tolerances[key] = _get(parser, "tolerances", key, float, cfg.tolerances[key])
        if not cfg.tolerances[key] > 0:
            raise ConfigError(f"[tolerances] {key} must be > 0")

    cfg.solver_tol = _get(parser, "solver", "tol", float, cfg.solver_tol)
    cfg.solver_maxiter = _get(parser, "solver", "maxiter", int, cfg.solver_maxiter)
    cfg.solver_seed = _get(parser, "solver", "seed", int, None)
    if not cfg.solver_tol > 0 or cfg.solver_maxiter < 1:
        raise ConfigError("[solver] tol must be > 0 and maxiter >= 1")

    cfg.out = _get(parser, "output", "path", str, None)
    cfg.format = _get(parser, "output", "format", str, "json")
    if cfg.format not in ("json", "csv"):
        raise ConfigError("[output] format must be json or csv")
    return cfg


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
