"""Command-line front end: ``hermgeom report | verify | solve``.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numerical error, 4 solver failure.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import sys
from typing import Optional

import numpy as np

from . import __version__
from .calculus import ScalarField, metric_jets
from .conformal import (GridMetric, dbar_star_conformal_check, gauduchon_residual,
                        gauduchon_solve, prescribed_scalar, torus_example_check,
                        total_scalar_identities)
from .config import RunConfig, load_config
from .curvature import (CurvatureTensor, chern_ricci, curvature_from_jets, extremal_hsc,
                        identity_s_hat, point_report, scalar_curvatures, torsion)
from .errors import (CertificateError, ConfigError, DerivativeError, DomainError,
                     GridTooCoarseError,
                     InconsistentEvaluatorError, NotPositiveDefiniteError, NumericalError,
                     SolverError)
from .manifolds import (ConformalMetric, FlatTorus, SamplePlan, TrigPolynomial,
                        default_conformal_factor, fubini_study, hopf_surface, is_torus,
                        perturbed_torus, potential, random_points, random_psh_polynomial)
from .quadrature import (SphereSampler, exact_quartic_moment, fs_average_hsc,
                         sphere_quartic_moment)
from .report import (SCHEMA_REPORT, SCHEMA_SOLVE, CheckRecord, VerificationReport, checks_csv,
                     dumps)
from .spectral import PeriodicGrid

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC, EXIT_SOLVER = 0, 1, 2, 3, 4

SUITES = ("pointwise", "fs-average", "conformal", "gauduchon", "prescribed-scalar")
TORUS_SUITES = ("conformal", "gauduchon", "prescribed-scalar")
KAHLER_KINDS = ("flat_torus", "fubini_study", "potential")


# ---------------------------------------------------------------------------
# metric and helpers

def build_metric(cfg: RunConfig):
    m = cfg.manifold
    n = cfg.dim
    if m.kind.endswith("torus"):
        torus = cfg.torus()
    if m.kind == "flat_torus":
        return FlatTorus(n, torus)
    if m.kind == "conformal_torus":
        u = (TrigPolynomial.parse(m.u, n, torus.periods) if m.u is not None
             else _default_u(torus))
        return ConformalMetric(FlatTorus(n, torus), u, name="conformal_torus")
    if m.kind == "general_torus":
        return perturbed_torus(full=m.variant == "full", scale=m.scale, torus=torus)
    if m.kind == "fubini_study":
        return fubini_study(n)
    if m.kind == "hopf_surface":
        return hopf_surface()
    if m.kind == "potential":
        return potential(random_psh_polynomial(n, m.seed, m.eps), m.radius)
    raise ConfigError(f"unknown manifold kind {m.kind!r}")


def _default_u(torus):
    u = default_conformal_factor()
    return TrigPolynomial(u.terms, 2, u.constant, torus.periods)


def exp_field(v: TrigPolynomial) -> ScalarField:
    """e^v as a scalar field with exact derivatives."""
    fv = v.as_scalar_field()

    def d2(z):
        e = np.exp(fv.value(z))[..., None, None]
        g1 = fv.d1(z)
        return e * (fv.d2(z) + g1[..., :, None] * np.conj(g1)[..., None, :])

    return ScalarField(lambda z: np.exp(fv.value(z)), v.dim,
                       d1=lambda z: np.exp(fv.value(z))[..., None] * fv.d1(z), d2=d2,
                       name="exp")


def _points(metric, cfg: RunConfig) -> np.ndarray:
    return random_points(metric, SamplePlan(cfg.points, cfg.seed))


MAX_GRID_POINTS = 2 ** 22   # about 4M nodes keeps the curvature arrays within a few GB


def _grid(metric, cfg: RunConfig) -> PeriodicGrid:
    """Grid for the torus suites, refusing grids whose fields would not fit in memory.

    Only the real axes the metric actually varies along are stored, so the
    node count is the product of the grid counts over those axes.
    """
    torus = metric.torus
    probe = metric.real_jets(torus.with_grid(4).coords())[0]
    lead = np.shape(probe)[:-2]
    lead = (1,) * (2 * torus.dim - len(lead)) + lead
    active = [N for N, m in zip(torus.grid, lead) if m > 1]
    nodes = int(np.prod(active)) if active else 1
    if nodes > MAX_GRID_POINTS:
        raise ConfigError(f"grid has {nodes} active nodes (limit {MAX_GRID_POINTS}); "
                          "lower [grid] n or give per-axis counts")
    return PeriodicGrid(torus, cfg.stencil)


def _require_torus(metric, suite):
    if not is_torus(metric) or metric.dim != 2:
        raise ConfigError(f"suite {suite!r} needs an n = 2 torus manifold")


# ---------------------------------------------------------------------------
# suites

def suite_pointwise(metric, cfg: RunConfig) -> VerificationReport:
    tol = cfg.tolerances
    spec = cfg.derivative
    rep = VerificationReport("pointwise")
    kahler = cfg.manifold.kind in KAHLER_KINDS
    for k, p in enumerate(_points(metric, cfg)):
        tag = f"[{k}]"
        r = identity_s_hat(metric, p, spec)
        rep.add(CheckRecord(f"s_minus_s_hat_pairing{tag}", r, 0.0, r, tol["identity"]))
        R = CurvatureTensor(curvature_from_jets(*metric_jets(metric, p, spec)))
        r = R.conjugate_symmetry_residual()
        rep.add(CheckRecord(f"conjugate_symmetry{tag}", r, 0.0, r, tol["symmetry"]))
        T = torsion(metric, p, spec)
        r = T.antisymmetry_residual()
        rep.add(CheckRecord(f"torsion_antisymmetry{tag}", r, 0.0, r, tol["symmetry"]))
        ric_t = chern_ricci(metric, p, spec, "trace")
        ric_l = chern_ricci(metric, p, spec, "logdet")
        r = float(np.max(np.abs(ric_t - ric_l)))
        rep.add(CheckRecord(f"ricci_trace_vs_logdet{tag}", r, 0.0, r, tol["ricci_routes"]))
        if kahler:
            tn = T.norm()
            rep.add(CheckRecord(f"torsion_vanishes{tag}", tn, 0.0, tn, tol["torsion"]))
            s, sh = scalar_curvatures(metric, p, spec)
            rep.add(CheckRecord(f"s_equals_s_hat{tag}", s, sh, abs(s - sh), tol["kahler_scalar"]))
            r = R.kahler_symmetry_residual()
            rep.add(CheckRecord(f"kahler_symmetry{tag}", r, 0.0, r, tol["kahler_scalar"]))
        if cfg.manifold.kind == "hopf_surface":
            ext = extremal_hsc(metric, p, spec, cfg.restarts, cfg.seed)
            rep.add(CheckRecord(f"hsc_min_nonnegative{tag}", ext.h_min, 0.0,
                                max(0.0, -ext.h_min), tol["hsc_floor"]))
    return rep


def suite_fs_average(metric, cfg: RunConfig) -> VerificationReport:
    tol = cfg.tolerances
    spec = cfg.derivative
    n = metric.dim
    rep = VerificationReport("fs-average")
    for k, p in enumerate(_points(metric, cfg)):
        sampler = SphereSampler(n, cfg.samples, seed=cfg.seed + 1000 * k)
        est, se = fs_average_hsc(metric, p, spec, sampler)
        s, sh = scalar_curvatures(metric, p, spec)
        exact = (s + sh) / (n * (n + 1))
        rep.add(CheckRecord(f"average_hsc[{k}]", est, exact, abs(est - exact),
                            tol["fs_sigma"] * se + tol["fs_floor"] * max(1.0, abs(exact)),
                            f"stderr={se:.3e}"))
    cases = [(0, 0, 0, 0)] + ([(0, 0, 1, 1), (0, 1, 1, 0), (0, 1, 0, 0)] if n >= 2 else [])
    for i, j, k, l in cases:
        est, se = sphere_quartic_moment(n, i, j, k, l, SphereSampler(n, cfg.samples, cfg.seed))
        exact = exact_quartic_moment(n, i, j, k, l)
        rep.add(CheckRecord(f"quartic_moment[{i}{j}{k}{l}]", est, exact, abs(est - exact),
                            tol["fs_sigma"] * se + tol["fs_floor"], f"stderr={se:.3e}"))
    return rep


def _weight_field(metric):
    """A positive weight with exact derivatives for the pointwise ∂̄* law."""
    u = getattr(metric, "u", None)
    if isinstance(u, TrigPolynomial):
        return exp_field(-u)
    return exp_field(TrigPolynomial([(0.2, 0.0, (1, 0, 0, 1)), (0.0, 0.1, (0, 1, 1, 0))], 2,
                                    periods=metric.torus.periods))


def suite_conformal(metric, cfg: RunConfig) -> VerificationReport:
    _require_torus(metric, "conformal")
    tol = cfg.tolerances
    pg = _grid(metric, cfg)
    f0 = gauduchon_solve(metric, pg, cfg.solver_tol, cfg.solver_maxiter, cfg.solver_seed).solution
    rep = total_scalar_identities(metric, f0, pg, tol["integral"])
    u = metric.u if isinstance(getattr(metric, "u", None), TrigPolynomial) else \
        _default_u(metric.torus)
    rep.extend(torus_example_check(u, metric.torus, tol["integral"], cfg.stencil))
    w = _weight_field(metric)
    v = TrigPolynomial([(0.2, 0.0, (0, 1, 0, 0)), (0.0, 0.1, (1, 0, 1, 0))], 2,
                       periods=metric.torus.periods)
    vf = v.as_scalar_field()
    for k, p in enumerate(_points(metric, cfg)):
        r = dbar_star_conformal_check(metric, w, p)
        rep.add(CheckRecord(f"dbar_star_conformal_law[{k}]", r, 0.0, r, tol["dbar_star"]))
        lhs = chern_ricci(ConformalMetric(metric, v), p, cfg.derivative)
        rhs = chern_ricci(metric, p, cfg.derivative) - metric.dim * vf.d2(p)
        r = float(np.max(np.abs(lhs - rhs)))
        rep.add(CheckRecord(f"conformal_ricci_law[{k}]", r, 0.0, r, tol["conformal_ricci"]))
    return rep


def suite_gauduchon(metric, cfg: RunConfig) -> VerificationReport:
    _require_torus(metric, "gauduchon")
    tol = cfg.tolerances
    pg = _grid(metric, cfg)
    sol = gauduchon_solve(metric, pg, cfg.solver_tol, cfg.solver_maxiter, cfg.solver_seed)
    f0 = sol.solution
    rep = VerificationReport("gauduchon")
    pre = gauduchon_residual(metric, pg)
    post = gauduchon_residual(GridMetric.from_metric(metric, pg).scaled(f0))
    rep.add(CheckRecord("gauduchon_residual_after_solve", post, 0.0, post, tol["gauduchon"],
                        f"before={pre:.3e}"))
    rep.add(CheckRecord("weight_positive", float(np.min(f0)), 0.0,
                        0.0 if np.min(f0) > 0 else 1.0, 0.5))
    rep.add(CheckRecord("solver_residual", sol.residual_norm, 0.0, sol.residual_norm,
                        10 * cfg.solver_tol))
    dev = _weight_deviation(metric, pg, f0)
    if dev is not None:
        rep.add(CheckRecord("weight_matches_exp_minus_u", dev, 0.0, dev, tol["weight"]))
    return rep


def _weight_deviation(metric, pg, f0) -> Optional[float]:
    u = getattr(metric, "u", None)
    if not isinstance(u, TrigPolynomial) or not isinstance(getattr(metric, "base", None),
                                                           FlatTorus):
        return None
    ref = np.exp(-u(pg.coords()))
    ref = ref / np.mean(ref)
    return float(np.max(np.abs(f0 - ref)))


def suite_prescribed(metric, cfg: RunConfig):
    _require_torus(metric, "prescribed-scalar")
    tol = cfg.tolerances
    pg = _grid(metric, cfg)
    f0 = gauduchon_solve(metric, pg, cfg.solver_tol, cfg.solver_maxiter, cfg.solver_seed).solution
    base = GridMetric.from_metric(metric, pg)
    cert = prescribed_scalar(base.scaled(f0), tol=cfg.solver_tol,
                             gauduchon_tol=tol["gauduchon"], certificate_tol=np.inf,
                             maxiter=cfg.solver_maxiter, scale_floor=_curvature_scale(base))
    rep = VerificationReport("prescribed-scalar")
    rep.add(CheckRecord("scaled_scalar_constant", cert.max_deviation, 0.0, cert.max_deviation,
                        tol["certificate"], f"c={cert.c:.6e}"))
    rep.add(CheckRecord("sign_min_s_tilde_matches_c", cert.min_s_tilde, cert.c,
                        0.0 if cert.sign_ok else 1.0, 0.5))
    rep.add(CheckRecord("factor_positive", float(np.min(cert.f)), 0.0,
                        0.0 if np.min(cert.f) > 0 else 1.0, 0.5))
    return rep, cert


def _curvature_scale(gm: GridMetric) -> float:
    """Chern scalar size of the input metric, the reference for relative deviations."""
    return max(float(np.max(np.abs(gm.s))), 1e-8)


def run_suite(name: str, metric, cfg: RunConfig) -> list:
    if name == "all":
        names = [s for s in SUITES if s not in TORUS_SUITES or (is_torus(metric)
                                                                and metric.dim == 2)]
        return [r for s in names for r in run_suite(s, metric, cfg)]
    if name == "pointwise":
        return [suite_pointwise(metric, cfg)]
    if name == "fs-average":
        return [suite_fs_average(metric, cfg)]
    if name == "conformal":
        return [suite_conformal(metric, cfg)]
    if name == "gauduchon":
        return [suite_gauduchon(metric, cfg)]
    if name == "prescribed-scalar":
        return [suite_prescribed(metric, cfg)[0]]
    raise ConfigError(f"unknown suite {name!r}")


# ---------------------------------------------------------------------------
# commands

def cmd_report(cfg: RunConfig, at=None) -> dict:
    metric = build_metric(cfg)
    pts = np.asarray(at, dtype=complex).reshape(-1, metric.dim) if at is not None \
        else _points(metric, cfg)
    records = []
    for p in pts:
        rp = point_report(metric, p, cfg.derivative, cfg.restarts, cfg.seed)
        records.append({
            "point": rp.point, "g": rp.metric, "curvature": rp.curvature.entries,
            "ricci_trace": rp.ricci, "ricci_logdet": rp.ricci_logdet, "s": rp.s,
            "s_hat": rp.s_hat, "torsion_norm": rp.torsion.norm(),
            "dbar_star_omega": rp.dbar_star_form, "h_min": rp.h_min, "h_max": rp.h_max,
            "residuals": rp.identity_residuals})
    return {"schema": SCHEMA_REPORT, "manifold": metric.name, "points": records,
            "environment": _env(cfg)}


def cmd_verify(cfg: RunConfig, suite: str) -> list:
    metric = build_metric(cfg)
    reports = run_suite(suite, metric, cfg)
    for r in reports:
        r.environment = {**_env(cfg), **r.environment}
    return reports


def cmd_solve(cfg: RunConfig, which: str) -> dict:
    metric = build_metric(cfg)
    _require_torus(metric, which)
    pg = _grid(metric, cfg)
    body = {"schema": SCHEMA_SOLVE, "which": which, "manifold": metric.name,
            "environment": _env(cfg)}
    if which == "gauduchon":
        sol = gauduchon_solve(metric, pg, cfg.solver_tol, cfg.solver_maxiter, cfg.solver_seed)
        post = gauduchon_residual(GridMetric.from_metric(metric, pg).scaled(sol.solution))
        body.update({"residual_norm": sol.residual_norm, "iterations": sol.iterations,
                     "gauduchon_residual": post, "grid_shape": list(sol.solution.shape),
                     "f0": sol.solution})
        dev = _weight_deviation(metric, pg, sol.solution)
        if dev is not None:
            body["max_deviation_from_exp_minus_u"] = dev
        return body
    if which == "prescribed-scalar":
        f0 = gauduchon_solve(metric, pg, cfg.solver_tol, cfg.solver_maxiter,
                             cfg.solver_seed).solution
        base = GridMetric.from_metric(metric, pg)
        cert = prescribed_scalar(base.scaled(f0), tol=cfg.solver_tol,
                                 gauduchon_tol=cfg.tolerances["gauduchon"],
                                 certificate_tol=cfg.tolerances["certificate"],
                                 maxiter=cfg.solver_maxiter,
                                 scale_floor=_curvature_scale(base))
        body.update(cert.as_dict())
        body.update({"grid_shape": list(cert.f.shape), "f": cert.f})
        return body
    raise ConfigError(f"unknown solver {which!r}")


def _env(cfg: RunConfig) -> dict:
    env = cfg.environment()
    env["version"] = __version__
    return env


# ---------------------------------------------------------------------------
# entry point

def _parse_points(text: str):
    try:
        return [[complex(v.replace(" ", "")) for v in chunk.split(",")]
                for chunk in text.split(";") if chunk.strip()]
    except ValueError as exc:
        raise ConfigError(f"--at: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file (see docs/config.md)")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), help="output format")
    common.add_argument("--seed", type=int, help="override the Monte Carlo seed")
    common.add_argument("--points", type=int, help="override the number of sample points")

    ap = argparse.ArgumentParser(prog="hermgeom", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"hermgeom {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    rp = sub.add_parser("report", parents=[common], help="pointwise curvature report")
    rp.add_argument("--at", help="explicit points, e.g. '0' or '1,0; 0.5j,1'")
    vp = sub.add_parser("verify", parents=[common], help="run an identity suite")
    vp.add_argument("--suite", default="all", choices=SUITES + ("all",))
    sp = sub.add_parser("solve", parents=[common], help="run an elliptic solve")
    sp.add_argument("which", choices=("gauduchon", "prescribed-scalar"))
    return ap


def _emit(text: str, out: Optional[str]):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _flatten_body(body: dict) -> str:
    """CSV for report/solve bodies: one row per scalar entry."""
    import csv
    import io

    from .report import to_jsonable
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("key", "value"))

    def walk(prefix, obj):
        if isinstance(obj, dict):
            for k in sorted(obj):
                walk(f"{prefix}.{k}" if prefix else str(k), obj[k])
        elif isinstance(obj, list):
            for i, v in enumerate(obj):
                walk(f"{prefix}[{i}]", v)
        else:
            w.writerow((prefix, repr(obj)))

    walk("", to_jsonable(body))
    return buf.getvalue()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(args.seed, args.points, args.out,
                                                      args.format)
        stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        if args.command == "report":
            at = _parse_points(args.at) if args.at else None
            body = cmd_report(cfg, at)
            text = dumps(body, stamp) if cfg.format == "json" else _flatten_body(body)
            _emit(text, cfg.out)
            return EXIT_OK
        if args.command == "verify":
            reports = cmd_verify(cfg, args.suite)
            ok = all(r.passed for r in reports)
            if cfg.format == "json":
                body = {"schema": "hermgeom.verify/1", "suite": args.suite, "pass": ok,
                        "reports": [r.as_dict() for r in reports]}
                text = dumps(body, stamp)
            else:
                text = checks_csv(reports)
            _emit(text, cfg.out)
            for r in reports:
                for c in r.failures():
                    print(f"FAIL {r.suite}/{c.name}: residual={c.residual:.3e} "
                          f"tol={c.tolerance:.1e}", file=sys.stderr)
            return EXIT_OK if ok else EXIT_FAIL
        body = cmd_solve(cfg, args.which)
        text = dumps(body, stamp) if cfg.format == "json" else _flatten_body(body)
        _emit(text, cfg.out)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, CertificateError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (NumericalError, NotPositiveDefiniteError, DomainError, DerivativeError,
            InconsistentEvaluatorError, GridTooCoarseError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
