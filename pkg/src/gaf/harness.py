"""Scenario configuration, pipeline orchestration and verification reports."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import exprlang, fieldio
from .cauchy import cached_plan
from .conformal import (
    HolomorphicChart,
    chart_build,
    continuity_defects,
    matched_kappa,
    omega_invariance_check,
    pullback,
    verify_transformed_pair,
)
from .errors import BranchMismatch, ConfigError, DegenerateGrid, GafError, IoError, ParseError, UnboundParameter
from .grid import DENSITY, SPINOR, ComplexField, DiffScheme, GridDomain, l2_norm
from .moutard import (
    Gauges,
    MoutardKernel,
    apply_solution,
    apply_solution_plus,
    kernel_build,
    omega_f_psiplus,
    omega_psi_fplus,
    transform_potential,
    transform_solution,
    transform_solution_plus,
    verify_prop1,
    verify_transformed,
)
from .omega import OmegaPotential, exactness_residual, omega_build, path_independence
from .vekua import SolveOptions, fixed_point_defect, residual_pair, solve_psi, solve_psi_plus

log = logging.getLogger(__name__)


# --- tolerance classes ------------------------------------------------------

@dataclass(frozen=True)
class ToleranceClass:
    name: str
    residual: float
    exactness: float
    omega_path: float
    omega_imag: float
    transformed: float
    prop1: float
    pullback_residual: float
    omega_invariance: float
    commutativity: float
    roundoff: float = 1e-12


TOLERANCE_CLASSES = {
    "closed_form": ToleranceClass(
        "closed_form", residual=1e-6, exactness=1e-6, omega_path=1e-8, omega_imag=1e-8,
        transformed=1e-6, prop1=1e-8, pullback_residual=1e-5, omega_invariance=1e-7,
        commutativity=1e-8,
    ),
    "numeric": ToleranceClass(
        "numeric", residual=5e-3, exactness=5e-3, omega_path=1e-3, omega_imag=1e-4,
        transformed=1e-2, prop1=1e-3, pullback_residual=1e-2, omega_invariance=1e-3,
        commutativity=1e-3,
    ),
}


# --- scenario ---------------------------------------------------------------

@dataclass(frozen=True)
class FieldSpec:
    key: str
    expr: Optional[exprlang.Expr] = None
    file: Optional[Path] = None


@dataclass(frozen=True)
class GaugeSpec:
    anchor: tuple[int, int] = (0, 0)
    kappa_f: float = 0.0
    kappa_pf: float = 0.0
    kappa_fp: float = 0.0
    kappa_psi: float = 0.0
    kappa_tilde: float = 0.0

    def as_gauges(self) -> Gauges:
        return Gauges(self.kappa_pf, self.kappa_fp, self.kappa_psi, self.kappa_tilde)


@dataclass(frozen=True)
class MapSpec:
    z_of_zeta: exprlang.Expr
    grid: GridDomain
    branch_seed: tuple[int, int] = (0, 0)
    anchor: tuple[int, int] = (0, 0)
    path_b_branch_seed: Optional[tuple[int, int]] = None


@dataclass(frozen=True)
class Scenario:
    name: str
    grid: GridDomain
    scheme: DiffScheme
    tolerance: ToleranceClass
    margin: int
    params: Mapping[str, complex]
    u: FieldSpec
    f: FieldSpec
    f_plus: FieldSpec
    psi: FieldSpec
    psi_plus: FieldSpec
    gauge: GaugeSpec
    solver: SolveOptions
    map: Optional[MapSpec] = None
    digest: str = ""

    @property
    def closed_form(self) -> bool:
        return self.tolerance.name == "closed_form"


CONFIG_KEYS = """\
config keys (TOML):
  name                      scenario label (default: file stem)
  scheme                    centered4 | spectral            (default centered4)
  tolerance_class           closed_form | numeric           (default closed_form)
  margin                    boundary layers excluded from residuals (default 3)
  [grid]                    x_min, x_max, y_min, y_max, nx, ny   (z-plane rectangle)
  [params]                  name = "complex constant", e.g. c = "0.1+0.2i"
  [u]                       expr = "..." | file = "path"  potential u(z)
  [f] [f_plus]              expr | file: solutions (closed_form) or holomorphic seeds (numeric)
  [psi] [psi_plus]          expr | file: same convention as f
  [gauge]                   anchor = [j, k], kappa_f, kappa_pf, kappa_fp, kappa_psi, kappa_tilde
  [solver]                  max_iter (200), tol (1e-12)
  [map]                     z_of_zeta = "...", branch_seed = [j, k], anchor = [j, k],
                            path_b_branch_seed = [j, k] (optional)
  [map.grid]                x_min, x_max, y_min, y_max, nx, ny   (zeta-plane rectangle)
environment:
  GAF_MAX_ALLOC_BYTES       cap on Pompeiu padding buffers (default 2 GiB)
"""


def _get(d: Mapping, key: str, path: str, default: Any = ..., kind=None):
    if key not in d:
        if default is ...:
            raise ConfigError(f"{path}.{key}" if path else key, "missing required key")
        return default
    value = d[key]
    if kind is not None:
        try:
            value = kind(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}.{key}" if path else key, f"bad value {value!r}: {exc}") from None
    return value


def _pair(value, path: str) -> tuple[int, int]:
    try:
        j, k = value
        return int(j), int(k)
    except (TypeError, ValueError):
        raise ConfigError(path, f"expected [j, k], got {value!r}") from None


def _grid(d: Any, path: str) -> GridDomain:
    if not isinstance(d, Mapping):
        raise ConfigError(path, "missing grid block")
    try:
        return GridDomain(*(_get(d, k, path, kind=float) for k in ("x_min", "x_max", "y_min", "y_max")),
                          _get(d, "nx", path, kind=int), _get(d, "ny", path, kind=int))
    except DegenerateGrid as exc:
        raise ConfigError(path, str(exc)) from None


def _expr(src: Any, path: str, params: Mapping[str, complex]) -> exprlang.Expr:
    try:
        e = exprlang.parse(str(src))
    except ParseError as exc:
        raise ConfigError(path, str(exc)) from None
    missing = exprlang.parameters(e) - set(params)
    if missing:
        raise ConfigError(path, f"unbound parameter {sorted(missing)[0]!r}")
    return e


def _field_spec(data: Mapping, key: str, params, base_dir: Path) -> FieldSpec:
    block = data.get(key)
    if not isinstance(block, Mapping) or not ("expr" in block or "file" in block):
        raise ConfigError(key, "needs either 'expr' or 'file'")
    if "expr" in block:
        return FieldSpec(key, expr=_expr(block["expr"], f"{key}.expr", params))
    p = Path(block["file"])
    p = p if p.is_absolute() else base_dir / p
    if not p.exists():
        raise ConfigError(f"{key}.file", f"no such file: {p}")
    return FieldSpec(key, file=p)


def _params(block: Any) -> dict[str, complex]:
    params: dict[str, complex] = {}
    if block is None:
        return params
    if not isinstance(block, Mapping):
        raise ConfigError("params", "must be a table")
    for name, raw in block.items():
        try:
            params[name] = exprlang.parse_constant(str(raw), params)
        except (ParseError, UnboundParameter) as exc:
            raise ConfigError(f"params.{name}", str(exc)) from None
    return params


def scenario_from_dict(data: Mapping, base_dir: Path | str = ".", name: str = "scenario",
                       digest: Optional[str] = None) -> Scenario:
    base_dir = Path(base_dir)
    params = _params(data.get("params"))
    try:
        scheme = DiffScheme.parse(data.get("scheme", "centered4"))
    except ValueError:
        raise ConfigError("scheme", f"unknown scheme {data.get('scheme')!r}") from None
    cls_name = data.get("tolerance_class", "closed_form")
    if cls_name not in TOLERANCE_CLASSES:
        raise ConfigError("tolerance_class", f"unknown class {cls_name!r}")
    grid = _grid(data.get("grid"), "grid")
    g = data.get("gauge", {})
    gauge = GaugeSpec(
        _pair(g.get("anchor", (0, 0)), "gauge.anchor"),
        *(_get(g, k, "gauge", 0.0, float) for k in
          ("kappa_f", "kappa_pf", "kappa_fp", "kappa_psi", "kappa_tilde")),
    )
    try:
        grid.node(*gauge.anchor)
    except IndexError as exc:
        raise ConfigError("gauge.anchor", str(exc)) from None
    s = data.get("solver", {})
    margin = _get(data, "margin", "", 3, int)
    try:
        solver = SolveOptions(_get(s, "max_iter", "solver", 200, int), _get(s, "tol", "solver", 1e-12, float),
                              scheme, margin)
    except ValueError as exc:
        raise ConfigError("solver", str(exc)) from None
    map_spec = None
    if "map" in data:
        m = data["map"]
        if "z_of_zeta" not in m:
            raise ConfigError("map.z_of_zeta", "missing required key")
        z_of_zeta = _expr(m["z_of_zeta"], "map.z_of_zeta", params)
        try:
            exprlang.check_holomorphic(z_of_zeta)
        except GafError as exc:
            raise ConfigError("map.z_of_zeta", str(exc)) from None
        pb = m.get("path_b_branch_seed")
        map_spec = MapSpec(z_of_zeta, _grid(m.get("grid"), "map.grid"),
                           _pair(m.get("branch_seed", (0, 0)), "map.branch_seed"),
                           _pair(m.get("anchor", (0, 0)), "map.anchor"),
                           None if pb is None else _pair(pb, "map.path_b_branch_seed"))
    if digest is None:
        digest = hashlib.sha256(json.dumps(data, sort_keys=True, default=str).encode()).hexdigest()
    return Scenario(
        name=str(data.get("name", name)), grid=grid, scheme=scheme, tolerance=TOLERANCE_CLASSES[cls_name],
        margin=margin, params=params,
        u=_field_spec(data, "u", params, base_dir), f=_field_spec(data, "f", params, base_dir),
        f_plus=_field_spec(data, "f_plus", params, base_dir), psi=_field_spec(data, "psi", params, base_dir),
        psi_plus=_field_spec(data, "psi_plus", params, base_dir),
        gauge=gauge, solver=solver, map=map_spec, digest=digest,
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc}") from None
    try:
        data = tomllib.loads(raw.decode())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"invalid TOML: {exc}") from None
    return scenario_from_dict(data, path.parent, path.stem, hashlib.sha256(raw).hexdigest())


# --- report -----------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    value: float
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.threshold)

    def to_dict(self) -> dict:
        return {"name": self.name, "value": float(self.value), "threshold": float(self.threshold),
                "pass": self.passed}


@dataclass
class Report:
    scenario: str
    checks: list[Check] = field(default_factory=list)
    environment: dict = field(default_factory=dict)
    input_digest: str = ""
    timing: dict = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.checks)

    def add(self, name: str, value: float, threshold: float) -> Check:
        c = Check(name, float(value), float(threshold))
        self.checks.append(c)
        return c

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self, timing: bool = True) -> dict:
        out = {
            "scenario": self.scenario,
            "checks": [c.to_dict() for c in self.checks],
            "pass": self.passed,
            "environment": self.environment,
            "input_digest": self.input_digest,
        }
        if self.error is not None:
            out["error"] = self.error
        if timing:
            out["timing"] = self.timing
        return out


def export_report(r, path) -> None:
    """Write a report (or a list of reports) as JSON."""
    if isinstance(r, Report):
        payload = r.to_dict()
    else:
        reports = list(r)
        payload = {"reports": [x.to_dict() for x in reports], "pass": all(x.passed for x in reports)}
    try:
        Path(path).write_text(json.dumps(payload, indent=2) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write report to {path}: {exc}") from exc


# --- pipelines --------------------------------------------------------------

def _rel_sup(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


class ScenarioRun:
    """Lazily evaluated pipeline state for one scenario."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.tol = scenario.tolerance
        self.solve_reports: dict = {}
        self.exports: dict[str, tuple[ComplexField, dict]] = {}

    # fields ---------------------------------------------------------------
    def _realize(self, spec: FieldSpec, weight) -> ComplexField:
        sc = self.scenario
        if spec.expr is not None:
            fld = ComplexField.from_expr(sc.grid, exprlang.bind(spec.expr, sc.params), weight)
        else:
            loaded = fieldio.read_field(spec.file)
            if loaded.domain != sc.grid:
                raise ConfigError(f"{spec.key}.file", "field grid differs from [grid]")
            fld = ComplexField(sc.grid, loaded.values, weight)
        return fld

    @cached_property
    def u(self) -> ComplexField:
        return self._realize(self.scenario.u, DENSITY)

    def _solution(self, key: str, plus: bool) -> ComplexField:
        spec = getattr(self.scenario, key)
        given = self._realize(spec, SPINOR)
        if self.scenario.closed_form:
            return given
        solver = solve_psi_plus if plus else solve_psi
        plan = cached_plan(self.scenario.grid)
        sol, rep = solver(self.u, given, self.scenario.solver, plan=plan)
        self.solve_reports[key] = (rep, given)
        return sol

    @cached_property
    def f(self):
        return self._solution("f", False)

    @cached_property
    def f_plus(self):
        return self._solution("f_plus", True)

    @cached_property
    def psi(self):
        return self._solution("psi", False)

    @cached_property
    def psi_plus(self):
        return self._solution("psi_plus", True)

    # omega / Moutard ------------------------------------------------------
    def _omega_kwargs(self):
        return {"scheme": self.scenario.scheme, "margin": self.scenario.margin}

    @cached_property
    def omega_psi(self) -> OmegaPotential:
        g = self.scenario.gauge
        return omega_build(self.psi, self.psi_plus, g.anchor, g.kappa_psi, **self._omega_kwargs())

    @cached_property
    def kernel(self) -> MoutardKernel:
        g = self.scenario.gauge
        return kernel_build(self.u, self.f, self.f_plus, g.anchor, g.kappa_f,
                            residual_tol=self.tol.residual, **self._omega_kwargs())

    @cached_property
    def omega_pf(self) -> OmegaPotential:
        return omega_psi_fplus(self.kernel, self.psi, self.scenario.gauge.kappa_pf)

    @cached_property
    def omega_fp(self) -> OmegaPotential:
        return omega_f_psiplus(self.kernel, self.psi_plus, self.scenario.gauge.kappa_fp)

    @cached_property
    def u_tilde(self) -> ComplexField:
        return transform_potential(self.kernel)

    @cached_property
    def psi_tilde(self) -> ComplexField:
        return transform_solution(self.kernel, self.psi, self.scenario.gauge.kappa_pf)

    @cached_property
    def psi_plus_tilde(self) -> ComplexField:
        return transform_solution_plus(self.kernel, self.psi_plus, self.scenario.gauge.kappa_fp)

    # chart ----------------------------------------------------------------
    @cached_property
    def chart(self) -> HolomorphicChart:
        m = self._map()
        return chart_build(m.z_of_zeta, m.grid, m.branch_seed, self.scenario.params)

    def _map(self) -> MapSpec:
        if self.scenario.map is None:
            raise ConfigError("map", "this pipeline needs a [map] block")
        return self.scenario.map

    # report helpers -------------------------------------------------------
    def new_report(self) -> Report:
        sc = self.scenario
        env = {
            "grid": _grid_dict(sc.grid),
            "scheme": sc.scheme.value,
            "tolerance_class": sc.tolerance.name,
            "margin": sc.margin,
            "gauge": {"anchor": list(sc.gauge.anchor), "kappa_f": sc.gauge.kappa_f,
                      "kappa_pf": sc.gauge.kappa_pf, "kappa_fp": sc.gauge.kappa_fp,
                      "kappa_psi": sc.gauge.kappa_psi, "kappa_tilde": sc.gauge.kappa_tilde},
        }
        if sc.map is not None:
            env["map"] = {"z_of_zeta": exprlang.to_source(sc.map.z_of_zeta), "grid": _grid_dict(sc.map.grid),
                          "branch_seed": list(sc.map.branch_seed), "anchor": list(sc.map.anchor)}
        return Report(sc.name, environment=env, input_digest=sc.digest)

    def record(self, name: str, fld: ComplexField, extra: Optional[dict] = None):
        self.exports[name] = (fld, extra or {})


def _grid_dict(g: GridDomain) -> dict:
    return {"x_min": g.x_min, "x_max": g.x_max, "y_min": g.y_min, "y_max": g.y_max, "nx": g.nx, "ny": g.ny}


def _solve_checks(run: ScenarioRun, rep: Report) -> None:
    tol, sc = run.tol, run.scenario
    r1f, r2f = residual_pair(run.u, run.f, run.f_plus, sc.scheme, sc.margin)
    r1p, r2p = residual_pair(run.u, run.psi, run.psi_plus, sc.scheme, sc.margin)
    rep.add("eq1.residual.f", r1f, tol.residual)
    rep.add("eq2.residual.f_plus", r2f, tol.residual)
    rep.add("eq1.residual.psi", r1p, tol.residual)
    rep.add("eq2.residual.psi_plus", r2p, tol.residual)
    solver_env = {}
    for key, (sr, seed) in sorted(run.solve_reports.items()):
        potential = run.u if key in ("f", "psi") else ComplexField(run.u.domain, -np.conj(run.u.values))
        sol = getattr(run, key)
        rep.add(f"solver.{key}.contraction", sr.contraction, 1.0)
        rep.add(f"solver.{key}.fixed_point", fixed_point_defect(potential, seed, sol), 10 * sc.solver.tol)
        solver_env[key] = {"iterations": sr.iterations, "final_difference": sr.final_difference}
    if solver_env:
        rep.environment["solver"] = solver_env
    for key in ("u", "f", "f_plus", "psi", "psi_plus"):
        run.record(key, getattr(run, key))


def _omega_checks(run: ScenarioRun, rep: Report) -> None:
    tol, sc, g = run.tol, run.scenario, run.scenario.gauge
    kw = run._omega_kwargs()
    for label, a, b, kappa in (("ff", run.f, run.f_plus, g.kappa_f),
                               ("psi_psi_plus", run.psi, run.psi_plus, g.kappa_psi)):
        rep.add(f"omega.{label}.exactness", exactness_residual(a, b, sc.scheme, sc.margin), tol.exactness)
        rep.add(f"omega.{label}.path_independence",
                path_independence(a, b, kappa, g.anchor, **kw), tol.omega_path)
        w = run.kernel.omega_ff if label == "ff" else run.omega_psi
        rep.add(f"omega.{label}.max_real_part", w.max_real_part, tol.omega_imag)
        shifted = omega_build(a, b, g.anchor, kappa + 1.0, **kw)
        rep.add(f"omega.{label}.gauge_shift",
                float(np.max(np.abs(shifted.values - w.values - 1j))) / max(1.0, float(np.max(np.abs(w.values)))),
                tol.roundoff)
        run.record(f"omega_{label}", w.field, w.sidecar())


def _moutard_checks(run: ScenarioRun, rep: Report) -> None:
    tol, k, g = run.tol, run.kernel, run.scenario.gauge
    r6, r7 = verify_transformed(k, run.u_tilde, run.psi_tilde, run.psi_plus_tilde)
    rep.add("eq6.residual", r6, tol.transformed)
    rep.add("eq7.residual", r7, tol.transformed)
    scale = max(1.0, float(np.max(np.abs(run.f.values))))
    ann = transform_solution(k, run.f, g.kappa_f, check=False)
    rep.add("moutard.annihilation", float(np.max(np.abs(ann.values))) / scale, tol.roundoff)
    scale = max(1.0, float(np.max(np.abs(run.f_plus.values))))
    ann = transform_solution_plus(k, run.f_plus, g.kappa_f, check=False)
    rep.add("moutard.annihilation_plus", float(np.max(np.abs(ann.values))) / scale, tol.roundoff)
    rep.environment["min_abs_omega_ff"] = k.min_abs_omega
    run.record("u_tilde", run.u_tilde)
    run.record("psi_tilde", run.psi_tilde)
    run.record("psi_plus_tilde", run.psi_plus_tilde)


def _prop1_checks(run: ScenarioRun, rep: Report) -> None:
    res = verify_prop1(run.kernel, run.psi, run.psi_plus, run.scenario.gauge.as_gauges())
    rep.add("prop1.max_deviation", res.max_dev, run.tol.prop1)
    rep.add("prop1.re_c", res.re_c, run.tol.prop1)
    rep.environment["prop1_c"] = [res.c.real, res.c.imag]


def _pullback_checks(run: ScenarioRun, rep: Report) -> None:
    tol, sc = run.tol, run.scenario
    ch = run.chart
    anchor = sc.map.anchor
    pulled = {key: pullback(getattr(run, key), ch).field for key in ("u", "f", "f_plus", "psi", "psi_plus")}
    r12f, r13f = verify_transformed_pair(pulled["u"], pulled["f"], pulled["f_plus"], sc.scheme, sc.margin)
    r12p, r13p = verify_transformed_pair(pulled["u"], pulled["psi"], pulled["psi_plus"], sc.scheme, sc.margin)
    rep.add("eq12.residual.f", r12f, tol.pullback_residual)
    rep.add("eq13.residual.f_plus", r13f, tol.pullback_residual)
    rep.add("eq12.residual.psi", r12p, tol.pullback_residual)
    rep.add("eq13.residual.psi_plus", r13p, tol.pullback_residual)
    kw = run._omega_kwargs()
    kappas = {}
    for label, w, a, b in (("ff", run.kernel.omega_ff, "f", "f_plus"),
                           ("psi_psi_plus", run.omega_psi, "psi", "psi_plus")):
        kappa = matched_kappa(w, ch, anchor)
        kappas[label] = kappa
        rep.add(f"eq14.omega_invariance.{label}",
                omega_invariance_check(w, pulled[a], pulled[b], ch, anchor, kappa, **kw), tol.omega_invariance)
    rep.add("branch.continuity_defects", continuity_defects(ch.sqrt_derivative), 0)
    flip = ch.flipped()
    fu = pullback(run.u, flip).field
    fpsi = pullback(run.psi, flip).field
    fpp = pullback(run.psi_plus, flip).field
    rep.add("branch.flip.u_star", _rel_sup(fu.values, pulled["u"].values), tol.roundoff)
    rep.add("branch.flip.psi_star_negated", _rel_sup(-fpsi.values, pulled["psi"].values), tol.roundoff)
    rep.add("branch.flip.psi_plus_star_negated", _rel_sup(-fpp.values, pulled["psi_plus"].values), tol.roundoff)
    w0 = omega_build(pulled["psi"], pulled["psi_plus"], anchor, kappas["psi_psi_plus"], **kw)
    w1 = omega_build(fpsi, fpp, anchor, kappas["psi_psi_plus"], **kw)
    rep.add("branch.flip.omega_star", _rel_sup(w1.values, w0.values), tol.roundoff)
    rep.environment["matched_kappa"] = kappas
    rep.environment["chart"] = ch.chart_id
    for key, fld in pulled.items():
        run.record(f"{key}_star", fld)


def _timed(run_fn):
    def wrapper(scenario: Scenario, *args, **kwargs) -> Report:
        t0 = time.perf_counter()
        run = ScenarioRun(scenario)
        rep = run_fn(run, *args, **kwargs)
        rep.timing["seconds"] = round(time.perf_counter() - t0, 3)
        rep._run = run
        return rep
    wrapper.__name__ = run_fn.__name__
    wrapper.__doc__ = run_fn.__doc__
    return wrapper


@_timed
def run_solve(run: ScenarioRun) -> Report:
    """Produce f, f⁺, ψ, ψ⁺ and check the conjugate-pair residuals."""
    rep = run.new_report()
    _solve_checks(run, rep)
    return rep


@_timed
def run_omega(run: ScenarioRun) -> Report:
    """Build ω_{f,f⁺} and ω_{ψ,ψ⁺}; check exactness, path independence and gauge covariance."""
    rep = run.new_report()
    _omega_checks(run, rep)
    return rep


@_timed
def run_moutard(run: ScenarioRun) -> Report:
    """Apply the Moutard transform and check the transformed equations."""
    rep = run.new_report()
    _moutard_checks(run, rep)
    return rep


@_timed
def run_pullback(run: ScenarioRun) -> Report:
    """Pull the pair back through the chart and check the transformed pair and ω invariance."""
    rep = run.new_report()
    _pullback_checks(run, rep)
    return rep


def _verify(run: ScenarioRun) -> Report:
    rep = run.new_report()
    _solve_checks(run, rep)
    _omega_checks(run, rep)
    _moutard_checks(run, rep)
    _prop1_checks(run, rep)
    return rep


@_timed
def run_scenario(run: ScenarioRun) -> Report:
    """Full chain: solve, ω, Moutard, transformed equations, transformed-potential identity."""
    return _verify(run)


@_timed
def commutativity_check(run: ScenarioRun) -> Report:
    """Compare pullback∘Moutard (path A) with Moutard∘pullback (path B) on the ζ-grid."""
    sc, tol = run.scenario, run.tol
    m = run._map()
    ch = run.chart
    if m.path_b_branch_seed is not None and m.path_b_branch_seed != m.branch_seed:
        other = chart_build(m.z_of_zeta, m.grid, m.path_b_branch_seed, sc.params)
        if not np.array_equal(other.sigma, ch.sigma):
            raise BranchMismatch(f"path B branch seed {list(m.path_b_branch_seed)} selects the opposite "
                                 f"branch to {list(m.branch_seed)}")
    rep = run.new_report()
    k = run.kernel
    a_u = pullback(run.u_tilde, ch).field
    a_psi = pullback(apply_solution(k, run.psi, run.omega_pf), ch).field
    a_pp = pullback(apply_solution_plus(k, run.psi_plus, run.omega_fp), ch).field

    star = {key: pullback(getattr(run, key), ch).field for key in ("u", "f", "f_plus", "psi", "psi_plus")}
    kw = run._omega_kwargs()
    kappa_f = matched_kappa(k.omega_ff, ch, m.anchor)
    kappa_pf = matched_kappa(run.omega_pf, ch, m.anchor)
    kappa_fp = matched_kappa(run.omega_fp, ch, m.anchor)
    k_star = kernel_build(star["u"], star["f"], star["f_plus"], m.anchor, kappa_f,
                          residual_tol=max(tol.pullback_residual, 10 * tol.residual), **kw)
    b_u = transform_potential(k_star)
    b_psi = apply_solution(k_star, star["psi"], omega_build(star["psi"], star["f_plus"], m.anchor, kappa_pf, **kw))
    b_pp = apply_solution_plus(k_star, star["psi_plus"],
                               omega_build(star["f"], star["psi_plus"], m.anchor, kappa_fp, **kw))
    g = m.grid
    for label, a, b in (("u_tilde", a_u, b_u), ("psi_tilde", a_psi, b_psi), ("psi_plus_tilde", a_pp, b_pp)):
        diff = a.values - b.values
        rep.add(f"theorem3.{label}.sup", float(np.max(np.abs(diff))), tol.commutativity)
        rep.add(f"theorem3.{label}.l2", l2_norm(diff, g.hx, g.hy), tol.commutativity)
        run.record(f"{label}_path_a", a)
        run.record(f"{label}_path_b", b)
    rep.environment["matched_kappa"] = {"f_f_plus": kappa_f, "psi_f_plus": kappa_pf, "f_psi_plus": kappa_fp}
    rep.environment["chart"] = ch.chart_id
    return rep


@_timed
def run_export(run: ScenarioRun) -> Report:
    """Full chain (as ``verify``); every produced field is recorded for export."""
    return _verify(run)


def export_fields(report: Report, directory) -> list[Path]:
    """Write every field recorded during ``report``'s run as CSV and GAF1 binary."""
    run: ScenarioRun = getattr(report, "_run", None)
    if run is None:
        return []
    directory = Path(directory)
    written = []
    try:
        directory.mkdir(parents=True, exist_ok=True)
        for name, (fld, extra) in sorted(run.exports.items()):
            for suffix, writer in ((".csv", fieldio.write_csv), (".gaf", fieldio.write_binary)):
                p = directory / f"{run.scenario.name}.{name}{suffix}"
                writer(p, fld, extra)
                written.append(p)
    except OSError as exc:
        raise IoError(f"cannot export fields to {directory}: {exc}") from exc
    return written


PIPELINES = {
    "solve": run_solve,
    "omega": run_omega,
    "moutard": run_moutard,
    "pullback": run_pullback,
    "verify": run_scenario,
    "compose-check": commutativity_check,
    "export": run_export,
}
