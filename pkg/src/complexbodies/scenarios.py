"""Scenario configuration and the batch runner behind the command line.

A scenario is a body (grid + manifold + density + boundary data), a descent
run, and a battery of verification checks.  Configs live in a flat INI-style
text format with fixed sections; unknown sections, keys, kinds, or check
names are rejected so a typo cannot silently change an experiment.

run() minimizes, evaluates every enabled check, writes all artifacts
(trace.csv, fields_u.csv, fields_nu.csv, fields.npz, residuals.csv,
report.txt), and raises ScenarioFailedError when an enabled check fails;
artifacts are written either way.  Outputs contain no timestamps, so a
config plus a seed reproduces them bitwise.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .admissibility import (
    check_ciarlet_necas,
    check_orientation,
    d_field_boundary_flux,
    defect_charges,
)
from .balance import (
    ResidualReport,
    Residual,
    assemble_actions,
    configurational_residual,
    eshelby,
    eulerian_cauchy_residual,
    random_compact_tests,
    rotational_balance,
    strong_residuals,
    weak_el_residual,
)
from .energy import (
    CompressibleMacro,
    ComponentDoubleWell,
    DirichletDescriptor,
    EnergyDensity,
    GinzburgLandau,
    LineDefect,
    QuadraticVector,
    SumDensity,
    check_convexity,
    check_growth,
    isotropic_elasticity,
    make_quasicrystal,
    make_smectic_a,
    relaxed_spin_energy,
    total_energy,
)
from .errors import ComplexBodiesError, ConfigError, ScenarioFailedError
from .fieldio import _fg, write_fields, write_report, write_residuals, write_trace
from .fields import (
    FieldState,
    Grid,
    ball_mask,
    identity_state,
    incident_node_mask,
    interior_node_mask,
    node_volumes,
)
from .manifolds import Euclidean, Interval, Manifold, Product, SymPositive, UnitSphere
from .manifolds import degree_of_orientation, layer_director
from .minimize import MinimizeConfig, MinimizeResult, minimize, riesz_gradient

CHECK_NAMES = (
    "orientation",
    "injectivity",
    "growth",
    "convexity",
    "weak_el",
    "rotational",
    "strong",
    "configurational",
    "eulerian",
    "defects",
    "relaxed_formula",
)

GRID_SHAPES = ("box", "ball")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class ScenarioConfig:
    """Complete description of one scenario run.

    Tolerances are library-level knobs with conservative defaults; they are
    deliberately not part of the text format, which carries only the physics
    (grid, manifold, density, boundary, init), the descent settings, the
    check toggles, the seed, and the output directory.
    """

    name: str
    resolution: int = 16
    lo: float = 0.0
    hi: float = 1.0
    shape: str = "box"
    manifold_kind: str = "unit-sphere"
    manifold_params: dict = field(default_factory=dict)
    density_kind: str = "dirichlet"
    density_params: dict = field(default_factory=dict)
    boundary_kind: str = "none"
    boundary_params: dict = field(default_factory=dict)
    init_kind: str = "identity"
    init_params: dict = field(default_factory=dict)
    minimize: MinimizeConfig = field(default_factory=MinimizeConfig)
    checks: dict = field(default_factory=dict)
    out_dir: str | None = None
    seed: int = 0
    n_tests: int = 20
    weak_tol: float = 1e-5
    duality_tol: float = 1e-12
    rotational_tol: float = 1e-6
    strong_tol: float = 0.5
    configurational_tol: float = 5e-2
    eulerian_tol: float = 5e-2
    growth_samples: int = 4000

    def __post_init__(self):
        if self.resolution < 2:
            raise ConfigError("grid resolution must be at least 2")
        if not self.lo < self.hi:
            raise ConfigError(f"empty box [{self.lo}, {self.hi}]")
        if self.shape not in GRID_SHAPES:
            raise ConfigError(f"shape must be one of {GRID_SHAPES}, got {self.shape!r}")
        for key in self.checks:
            if key not in CHECK_NAMES:
                raise ConfigError(f"unknown check {key!r}; known: {CHECK_NAMES}")
        self.checks = {name: bool(self.checks.get(name, False)) for name in CHECK_NAMES}
        if self.n_tests < 1:
            raise ConfigError("n_tests must be positive")


# --- typed readers ---------------------------------------------------------

def _as_int(section: str, key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} must be an integer, got {raw!r}") from None


def _as_float(section: str, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} must be a number, got {raw!r}") from None


def _as_bool(section: str, key: str, raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("on", "true", "yes", "1"):
        return True
    if low in ("off", "false", "no", "0"):
        return False
    raise ConfigError(f"[{section}] {key} must be on/off, got {raw!r}")


_MINIMIZE_TYPES = {
    "max_iters": _as_int,
    "grad_tol": _as_float,
    "energy_tol": _as_float,
    "step0": _as_float,
    "backtrack": _as_float,
    "armijo_c": _as_float,
    "max_backtracks": _as_int,
    "bb_steps": _as_bool,
    "step_max": _as_float,
    "block_mode": lambda s, k, raw: raw.strip(),
    "log_every": _as_int,
}

_SECTIONS = ("scenario", "grid", "manifold", "density", "boundary", "init",
             "minimize", "checks")


def parse_config(text: str) -> ScenarioConfig:
    """Parse the INI text format; any unknown section or key is an error."""
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unparseable config: {exc}") from None
    if cp.defaults():
        raise ConfigError("a [DEFAULT] section is not allowed")
    for sec in cp.sections():
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown section [{sec}]; known: {_SECTIONS}")

    def section(name):
        return dict(cp[name]) if cp.has_section(name) else {}

    sc = section("scenario")
    if "name" not in sc:
        raise ConfigError("[scenario] must set name")
    kwargs = {"name": sc.pop("name").strip()}
    if "seed" in sc:
        kwargs["seed"] = _as_int("scenario", "seed", sc.pop("seed"))
    if "out" in sc:
        kwargs["out_dir"] = sc.pop("out").strip()
    if sc:
        raise ConfigError(f"unknown [scenario] keys: {sorted(sc)}")

    gr = section("grid")
    if "resolution" in gr:
        kwargs["resolution"] = _as_int("grid", "resolution", gr.pop("resolution"))
    if "lo" in gr:
        kwargs["lo"] = _as_float("grid", "lo", gr.pop("lo"))
    if "hi" in gr:
        kwargs["hi"] = _as_float("grid", "hi", gr.pop("hi"))
    if "shape" in gr:
        kwargs["shape"] = gr.pop("shape").strip()
    if gr:
        raise ConfigError(f"unknown [grid] keys: {sorted(gr)}")

    for sec_name, kind_key, params_key in (
        ("manifold", "manifold_kind", "manifold_params"),
        ("density", "density_kind", "density_params"),
        ("boundary", "boundary_kind", "boundary_params"),
        ("init", "init_kind", "init_params"),
    ):
        data = section(sec_name)
        if "kind" in data:
            kwargs[kind_key] = data.pop("kind").strip()
        kwargs[params_key] = {
            k: _as_float(sec_name, k, v) for k, v in data.items()
        }

    mz = section("minimize")
    mz_kwargs = {}
    for key, raw in mz.items():
        if key not in _MINIMIZE_TYPES:
            raise ConfigError(f"unknown [minimize] key {key!r}")
        mz_kwargs[key] = _MINIMIZE_TYPES[key]("minimize", key, raw)
    kwargs["minimize"] = MinimizeConfig(**mz_kwargs)

    ck = section("checks")
    kwargs["checks"] = {k: _as_bool("checks", k, v) for k, v in ck.items()}

    return ScenarioConfig(**kwargs)


def format_config(config: ScenarioConfig) -> str:
    """Render a config back to the text format (inverse of parse_config)."""
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    cp.optionxform = str
    cp["scenario"] = {"name": config.name, "seed": str(config.seed)}
    if config.out_dir is not None:
        cp["scenario"]["out"] = config.out_dir
    cp["grid"] = {
        "resolution": str(config.resolution),
        "lo": _fg(config.lo),
        "hi": _fg(config.hi),
        "shape": config.shape,
    }
    for sec_name, kind, params in (
        ("manifold", config.manifold_kind, config.manifold_params),
        ("density", config.density_kind, config.density_params),
        ("boundary", config.boundary_kind, config.boundary_params),
        ("init", config.init_kind, config.init_params),
    ):
        cp[sec_name] = {"kind": kind}
        for k in sorted(params):
            cp[sec_name][k] = _fg(params[k])
    mz = config.minimize
    cp["minimize"] = {
        "max_iters": str(mz.max_iters),
        "grad_tol": _fg(mz.grad_tol),
        "energy_tol": _fg(mz.energy_tol),
        "step0": _fg(mz.step0),
        "backtrack": _fg(mz.backtrack),
        "armijo_c": _fg(mz.armijo_c),
        "max_backtracks": str(mz.max_backtracks),
        "bb_steps": "on" if mz.bb_steps else "off",
        "step_max": _fg(mz.step_max),
        "block_mode": mz.block_mode,
        "log_every": str(mz.log_every),
    }
    cp["checks"] = {
        name: "on" if config.checks.get(name, False) else "off"
        for name in CHECK_NAMES
    }
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# registries: manifolds, densities, boundary data, initial fields
# ---------------------------------------------------------------------------

def _take(params: dict, defaults: dict, context: str) -> dict:
    unknown = set(params) - set(defaults)
    if unknown:
        raise ConfigError(
            f"unknown {context} parameters {sorted(unknown)}; known: {sorted(defaults)}"
        )
    merged = dict(defaults)
    merged.update(params)
    return merged


def build_manifold(kind: str, params: dict) -> Manifold:
    if kind == "unit-sphere":
        _take(params, {}, "unit-sphere")
        return UnitSphere()
    if kind == "euclidean1":
        _take(params, {}, "euclidean1")
        return Euclidean(1)
    if kind == "euclidean3":
        _take(params, {}, "euclidean3")
        return Euclidean(3)
    if kind == "interval":
        p = _take(params, {"lo": 0.0, "hi": 1.0}, "interval")
        return Interval(p["lo"], p["hi"])
    if kind == "degree-of-orientation":
        _take(params, {}, "degree-of-orientation")
        return degree_of_orientation()
    if kind == "layer-director":
        _take(params, {}, "layer-director")
        return layer_director()
    raise ConfigError(
        "unknown manifold kind "
        f"{kind!r}; known: unit-sphere, euclidean1, euclidean3, interval, "
        "degree-of-orientation, layer-director"
    )


def _coupling_trace(kappa: float) -> np.ndarray:
    # B : (F, N) = kappa tr(F^T N); ambient indices contract with each other,
    # which is the rotation-invariant bilinear coupling.
    eye = np.eye(3)
    return kappa * np.einsum("ia,jk->ijak", eye, eye)


def build_density(kind: str, params: dict, manifold: Manifold) -> EnergyDensity:
    if kind == "dirichlet":
        _take(params, {}, "dirichlet")
        return DirichletDescriptor(embed_dim=manifold.embed_dim)
    if kind == "orientation-landau":
        p = _take(
            params,
            {"stiffness": 1.0, "well_depth": 3.0, "beta_a": 0.0, "beta_b": 0.8},
            "orientation-landau",
        )
        well = ComponentDoubleWell(p["well_depth"], p["beta_a"], p["beta_b"], component=3)
        return GinzburgLandau(well, p["stiffness"], 4, name="orientation-landau",
                              well_nonnegative=True)
    if kind == "microcracked":
        p = _take(
            params,
            {"lam": 1.2, "mu": 0.9, "couple": 0.35, "restore": 0.6,
             "grad_stiffness": 0.15},
            "microcracked",
        )
        eye = np.eye(3)
        a2 = 0.5 * p["couple"] * (
            np.einsum("ia,jk->ijak", eye, eye) + np.einsum("ja,ik->ijak", eye, eye)
        )
        a5 = p["grad_stiffness"] * np.einsum("ac,ij->aicj", eye, eye)
        return QuadraticVector(
            isotropic_elasticity(p["lam"], p["mu"]),
            A2=a2,
            A3=p["restore"] * eye,
            A5=a5,
            centrosymmetric=True,
            name="microcracked-vector",
        )
    if kind == "quasicrystal":
        p = _take(
            params,
            {"a": 1.0, "b": 1.0, "c": 0.6, "phason_stiffness": 1.0, "kappa": 0.0},
            "quasicrystal",
        )
        coupling = _coupling_trace(p["kappa"]) if p["kappa"] != 0.0 else None
        return make_quasicrystal(
            CompressibleMacro(p["a"], p["b"], p["c"]),
            phason_stiffness=p["phason_stiffness"],
            coupling=coupling,
        )
    if kind == "smectic":
        p = _take(params, {"k1": 1.0, "k2": 1.0, "penalty": 0.2}, "smectic")
        base = make_smectic_a(p["k1"], p["k2"])
        if p["penalty"] == 0.0:
            return base
        # the layer energy alone is degenerate along divergence-free director
        # perturbations; a small quadratic penalty keeps descent conditioned
        pen = GinzburgLandau(None, p["penalty"], 4, name="compression-penalty")
        return SumDensity([base, pen], name="smectic-layers")
    if kind == "porous-landau":
        p = _take(
            params,
            {"stiffness": 0.25, "well_depth": 1.0, "pore_a": 0.0, "pore_b": 1.0},
            "porous-landau",
        )
        well = ComponentDoubleWell(p["well_depth"], p["pore_a"], p["pore_b"], component=0)
        return GinzburgLandau(well, p["stiffness"], 1, name="porous-landau",
                              well_nonnegative=True)
    raise ConfigError(
        "unknown density kind "
        f"{kind!r}; known: dirichlet, orientation-landau, microcracked, "
        "quasicrystal, smectic, porous-landau"
    )


def _rim_mask(state: FieldState) -> np.ndarray:
    grid = state.grid
    return incident_node_mask(grid, state.active) & ~interior_node_mask(
        grid, state.active, margin=1
    )


def _pin(state: FieldState, which: str, mask: np.ndarray, values: np.ndarray,
         manifold: Manifold | None = None) -> None:
    if which == "nu" and manifold is not None:
        values = manifold.project(values)
    target = state.u if which == "u" else state.nu
    target[mask] = values[mask]
    if which == "u":
        state.pinned_u |= mask
    else:
        state.pinned_nu |= mask


def _safe_radial(coords: np.ndarray, center: np.ndarray) -> np.ndarray:
    d = coords - center
    n = np.linalg.norm(d, axis=-1, keepdims=True)
    fallback = np.zeros_like(d)
    fallback[..., 2] = 1.0
    return np.where(n > 1e-12, d / np.where(n > 1e-12, n, 1.0), fallback)


def _box_center(grid: Grid) -> np.ndarray:
    return 0.5 * (np.asarray(grid.lo) + np.asarray(grid.hi))


def _defect_anchor(grid: Grid) -> np.ndarray:
    """Center of the cell containing the box center.

    Radial fields are anchored here rather than at the box center itself: a
    singular point on a grid node sits on the corner of eight cells and the
    per-cell winding splits into spurious multi-charge fragments.  The total
    flux and the detected charge do not depend on the half-spacing shift.
    """
    lo = np.asarray(grid.lo)
    h = np.asarray(grid.spacing)
    idx = np.clip(
        np.floor((_box_center(grid) - lo) / h).astype(int),
        0,
        np.asarray(grid.cells) - 1,
    )
    return lo + (idx + 0.5) * h


def apply_boundary(kind: str, params: dict, state: FieldState,
                   manifold: Manifold) -> None:
    grid = state.grid
    coords = grid.node_coords()
    rim = _rim_mask(state)
    if kind == "none":
        _take(params, {}, "none")
        return
    if kind == "radial-director":
        _take(params, {}, "radial-director")
        _pin(state, "nu", rim, _safe_radial(coords, _defect_anchor(grid)), manifold)
        return
    if kind == "radial-orientation":
        p = _take(params, {"beta": 0.8}, "radial-orientation")
        vals = np.concatenate(
            [
                _safe_radial(coords, _defect_anchor(grid)),
                np.full(grid.nodes + (1,), p["beta"]),
            ],
            axis=-1,
        )
        _pin(state, "nu", rim, vals, manifold)
        return
    if kind == "affine-stretch":
        p = _take(
            params,
            {"gamma": 0.05, "e1": 1.0, "e2": -0.3, "e3": -0.3, "nu_slope": 0.0},
            "affine-stretch",
        )
        A = np.eye(3) + p["gamma"] * np.diag([p["e1"], p["e2"], p["e3"]])
        if np.linalg.det(A) <= 0:
            raise ConfigError("affine-stretch flips orientation; reduce gamma")
        vals = np.einsum("ij,...j->...i", A, coords)
        _pin(state, "u", rim, vals)
        nu_vals = np.zeros(state.nu.shape)
        nu_vals[..., : min(3, state.embed_dim)] = (
            p["nu_slope"] * (coords - _box_center(grid))[..., : min(3, state.embed_dim)]
        )
        _pin(state, "nu", rim, nu_vals, manifold)
        return
    if kind == "simple-shear":
        p = _take(params, {"gamma": 0.3}, "simple-shear")
        vals = coords.copy()
        vals[..., 0] += p["gamma"] * coords[..., 1]
        _pin(state, "u", rim, vals)
        return
    if kind == "tilted-layers":
        p = _take(params, {"tilt": 0.1}, "tilted-layers")
        vals = np.zeros(grid.nodes + (4,))
        vals[..., 0] = coords[..., 2] + p["tilt"] * coords[..., 0]
        vals[..., 3] = 1.0
        _pin(state, "nu", rim, vals, manifold)
        return
    if kind == "two-face-ramp":
        p = _take(params, {"a": 0.0, "b": 1.0}, "two-face-ramp")
        h0 = grid.spacing[0]
        lo_face = rim & (np.abs(coords[..., 0] - grid.lo[0]) < 0.5 * h0)
        hi_face = rim & (np.abs(coords[..., 0] - grid.hi[0]) < 0.5 * h0)
        _pin(state, "nu", lo_face, np.full(state.nu.shape, p["a"]), manifold)
        _pin(state, "nu", hi_face, np.full(state.nu.shape, p["b"]), manifold)
        return
    raise ConfigError(
        "unknown boundary kind "
        f"{kind!r}; known: none, radial-director, radial-orientation, "
        "affine-stretch, simple-shear, tilted-layers, two-face-ramp"
    )


def apply_init(kind: str, params: dict, state: FieldState,
               manifold: Manifold) -> None:
    grid = state.grid
    coords = grid.node_coords()
    center = _box_center(grid)
    span = np.asarray(grid.hi) - np.asarray(grid.lo)
    xi = (coords - np.asarray(grid.lo)) / span
    if kind == "identity":
        _take(params, {}, "identity")
        return
    if kind == "radial":
        _take(params, {}, "radial")
        state.nu[...] = _safe_radial(coords, _defect_anchor(grid))
        return
    if kind == "radial-orientation":
        p = _take(params, {"beta": 0.8}, "radial-orientation")
        state.nu[..., :3] = _safe_radial(coords, _defect_anchor(grid))
        state.nu[..., 3] = p["beta"]
        return
    if kind == "affine":
        p = _take(
            params,
            {"gamma": 0.05, "e1": 1.0, "e2": -0.3, "e3": -0.3, "nu_slope": 0.0},
            "affine",
        )
        A = np.eye(3) + p["gamma"] * np.diag([p["e1"], p["e2"], p["e3"]])
        state.u[...] = np.einsum("ij,...j->...i", A, coords)
        state.nu[..., : min(3, state.embed_dim)] = (
            p["nu_slope"] * (coords - center)[..., : min(3, state.embed_dim)]
        )
        return
    if kind == "shear":
        p = _take(params, {"gamma": 0.3}, "shear")
        state.u[..., 0] = coords[..., 0] + p["gamma"] * coords[..., 1]
        return
    if kind == "layers":
        p = _take(params, {"tilt": 0.1, "amp": 0.05}, "layers")
        bump = np.prod(np.sin(np.pi * xi), axis=-1)
        state.nu[..., 0] = coords[..., 2] + p["tilt"] * coords[..., 0] + p["amp"] * bump
        state.nu[..., 1:3] = 0.0
        state.nu[..., 3] = 1.0
        return
    if kind == "ramp":
        p = _take(params, {"a": 0.0, "b": 1.0, "amp": 0.05}, "ramp")
        bump = np.prod(np.sin(np.pi * xi), axis=-1)
        state.nu[..., 0] = p["a"] + (p["b"] - p["a"]) * xi[..., 0] + p["amp"] * bump
        return
    raise ConfigError(
        "unknown init kind "
        f"{kind!r}; known: identity, radial, radial-orientation, affine, "
        "shear, layers, ramp"
    )


def _default_nu0(manifold: Manifold) -> np.ndarray:
    if isinstance(manifold, Product):
        return np.concatenate([_default_nu0(f) for f in manifold.factors])
    if isinstance(manifold, UnitSphere):
        return np.array([0.0, 0.0, 1.0])
    if isinstance(manifold, Interval):
        return np.array([0.5 * (manifold.lo + manifold.hi)])
    if isinstance(manifold, SymPositive):
        return np.eye(3).reshape(9)
    return np.zeros(manifold.embed_dim)


# ---------------------------------------------------------------------------
# materialization and validation
# ---------------------------------------------------------------------------

@dataclass
class BuiltScenario:
    manifold: Manifold
    density: EnergyDensity
    state: FieldState
    checks: dict


def materialize(config: ScenarioConfig) -> BuiltScenario:
    """Resolve every name in the config and build the initial state."""
    manifold = build_manifold(config.manifold_kind, config.manifold_params)
    density = build_density(config.density_kind, config.density_params, manifold)
    if density.embed_dim != manifold.embed_dim:
        raise ConfigError(
            f"density {config.density_kind!r} expects a {density.embed_dim}-component "
            f"descriptor but manifold {config.manifold_kind!r} embeds in "
            f"{manifold.embed_dim}"
        )
    grid = Grid.cube(config.resolution, config.lo, config.hi)
    state = identity_state(grid, manifold, _default_nu0(manifold))
    if config.shape == "ball":
        state = FieldState(grid, state.u, state.nu, state.pinned_u,
                           state.pinned_nu, active=ball_mask(grid))
    apply_init(config.init_kind, config.init_params, state, manifold)
    state.nu[...] = manifold.project(state.nu)
    apply_boundary(config.boundary_kind, config.boundary_params, state, manifold)

    checks = dict(config.checks)
    if checks["growth"] and density.growth_meta is None:
        raise ConfigError(
            f"growth check enabled but density {density.name!r} documents no growth bound"
        )
    if checks["rotational"] and not manifold.rotation_generator_defined:
        raise ConfigError(
            f"rotational check enabled but manifold {manifold.name!r} carries no rotation action"
        )
    if (checks["defects"] or checks["relaxed_formula"]) and not isinstance(manifold, UnitSphere):
        raise ConfigError("defect accounting needs a unit-director descriptor")
    if checks["defects"] and grid.dim != 3:
        raise ConfigError("defect accounting needs a 3d grid")
    return BuiltScenario(manifold=manifold, density=density, state=state, checks=checks)


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckOutcome:
    name: str
    passed: bool
    detail: str


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    out_dir: Path | None
    minimize_result: MinimizeResult
    residuals: ResidualReport
    outcomes: list
    report_lines: list

    @property
    def passed(self) -> bool:
        return all(o.passed for o in self.outcomes)

    def outcome(self, name: str) -> CheckOutcome:
        for o in self.outcomes:
            if o.name == name:
                return o
        raise KeyError(name)


def _gradient_pairing(state: FieldState, g_u, g_nu, h, ups) -> float:
    vols = node_volumes(state.grid, state.active)[..., None]
    return float(np.sum(g_u * h * vols) + np.sum(g_nu * ups * vols))


def _spatial_tests(state: FieldState, n: int, seed: int) -> list:
    """Compactly supported spatial test fields on the deformed body.

    Each test is a (phi, dphi) closure pair built from a quartic bump in a
    random box well inside the image of the active region, so no boundary
    traction terms enter the spatial weak balance.
    """
    rng = np.random.default_rng(seed)
    incident = incident_node_mask(state.grid, state.active)
    pts = state.u[incident]
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    out = []
    for _ in range(n):
        c = mid + rng.uniform(-0.3, 0.3, size=3) * half
        R = rng.uniform(0.2, 0.4) * half
        pol = rng.normal(size=3)

        def phi(y, c=c, R=R, pol=pol):
            t = (y - c) / R
            f = np.prod(np.clip(1.0 - t**2, 0.0, None) ** 2, axis=-1)
            return f[..., None] * pol

        def dphi(y, c=c, R=R, pol=pol):
            t = (y - c) / R
            b = np.clip(1.0 - t**2, 0.0, None)
            f_ax = b**2
            df_ax = -4.0 * t * b / R
            grad = np.empty(y.shape)
            for j in range(3):
                others = [f_ax[..., a] for a in range(3) if a != j]
                grad[..., j] = df_ax[..., j] * others[0] * others[1]
            return pol[:, None] * grad[..., None, :]

        out.append((phi, dphi))
    return out


def _run_checks(config: ScenarioConfig, built: BuiltScenario,
                mres: MinimizeResult) -> tuple[list, list, ResidualReport]:
    final = mres.state
    manifold = built.manifold
    density = built.density
    outcomes = []
    lines = []
    report = ResidualReport()

    needs_actions = any(
        built.checks[n]
        for n in ("weak_el", "rotational", "strong", "configurational", "eulerian")
    )
    bf = assemble_actions(density, final, manifold) if needs_actions else None

    def record(name, passed, detail):
        outcomes.append(CheckOutcome(name=name, passed=passed, detail=detail))
        lines.append(f"check {name}: {'PASS' if passed else 'FAIL'} | {detail}")

    if built.checks["orientation"]:
        rep = check_orientation(final)
        record(
            "orientation",
            rep.passed,
            f"cells={rep.cells} violations={rep.violations} min_det={_fg(rep.min_det)}",
        )
    if built.checks["injectivity"]:
        rep = check_ciarlet_necas(final)
        record(
            "injectivity",
            rep.passed,
            f"volume_integral={_fg(rep.volume_integral)} image_volume={_fg(rep.image_volume)} "
            f"slack={_fg(rep.slack)} tol={_fg(rep.tolerance)}",
        )
    if built.checks["growth"]:
        rep = check_growth(density, n=config.growth_samples, seed=config.seed)
        record(
            "growth",
            rep.passed,
            f"samples={rep.samples} violations={rep.violations} min_slack={_fg(rep.min_slack)}",
        )
    if built.checks["convexity"]:
        mode = "in_minors_and_N" if density.minors_form() is not None else "in_N"
        rep = check_convexity(density, mode=mode, n_segments=600, seed=config.seed)
        record(
            "convexity",
            rep.passed,
            f"mode={mode} segments={rep.segments} max_defect={_fg(rep.max_defect)}",
        )
    if built.checks["weak_el"]:
        h_tests = random_compact_tests(final, config.n_tests, 3, seed=config.seed + 11)
        nu_tests = random_compact_tests(
            final, config.n_tests, final.embed_dim, seed=config.seed + 12,
            manifold=manifold,
        )
        pairs = list(zip(h_tests, nu_tests))
        rows = weak_el_residual(bf, pairs)
        report.add(rows)
        g_u, g_nu = riesz_gradient(density, final, manifold, project=True)
        dual = []
        for k, ((h, ups), r) in enumerate(zip(pairs, rows)):
            inner = _gradient_pairing(final, g_u, g_nu, h, ups)
            dual.append(Residual(name=f"duality[{k}]", raw=r.raw - inner,
                                 scale=1.0 + r.scale))
        report.add(dual)
        worst = max(r.ratio for r in rows)
        worst_dual = max(r.ratio for r in dual)
        record(
            "weak_el",
            worst <= config.weak_tol and worst_dual <= config.duality_tol,
            f"worst_ratio={_fg(worst)} tol={_fg(config.weak_tol)} "
            f"duality={_fg(worst_dual)} tol={_fg(config.duality_tol)}",
        )
    if built.checks["rotational"]:
        rep = rotational_balance(bf)
        report.add(rep.residual)
        record(
            "rotational",
            rep.ratio <= config.rotational_tol,
            f"ratio={_fg(rep.ratio)} tol={_fg(config.rotational_tol)}",
        )
    if built.checks["strong"]:
        sr = strong_residuals(bf)
        report.add([sr.cauchy_residual, sr.capriz_residual])
        worst = max(sr.cauchy_residual.ratio, sr.capriz_residual.ratio)
        record(
            "strong",
            worst <= config.strong_tol,
            f"cauchy={_fg(sr.cauchy_residual.ratio)} "
            f"capriz={_fg(sr.capriz_residual.ratio)} tol={_fg(config.strong_tol)}",
        )
    if built.checks["configurational"]:
        ef = eshelby(bf)
        phi_tests = random_compact_tests(final, config.n_tests, 3, seed=config.seed + 13)
        rows = configurational_residual(ef, bf, phi_tests)
        report.add(rows)
        worst = max(r.ratio for r in rows)
        record(
            "configurational",
            worst <= config.configurational_tol,
            f"worst_ratio={_fg(worst)} tol={_fg(config.configurational_tol)}",
        )
    if built.checks["eulerian"]:
        tests = _spatial_tests(final, config.n_tests, config.seed + 14)
        rows = eulerian_cauchy_residual(bf, tests)
        report.add(rows)
        worst = max(r.ratio for r in rows)
        record(
            "eulerian",
            worst <= config.eulerian_tol,
            f"worst_ratio={_fg(worst)} tol={_fg(config.eulerian_tol)}",
        )
    if built.checks["defects"]:
        rep = defect_charges(final, manifold)
        flux = d_field_boundary_flux(final, manifold)
        expected = int(round(rep.boundary_degree))
        # a relaxed core may fragment into adjacent zero-charge pieces; what
        # may not happen is a far dipole pair or a sign flip, both of which
        # inflate the summed absolute cluster charge
        ok = (
            expected != 0
            and rep.total_charge == expected
            and sum(abs(c.charge) for c in rep.clusters) == abs(expected)
        )
        cluster_desc = ";".join(
            f"charge={c.charge}@({_fg(c.center[0])},{_fg(c.center[1])},{_fg(c.center[2])})"
            for c in rep.clusters
        ) or "none"
        record(
            "defects",
            ok,
            f"clusters={len(rep.clusters)} total_charge={rep.total_charge} "
            f"winding_flux={_fg(rep.total_flux)} quadrature_flux={_fg(flux)} "
            f"[{cluster_desc}]",
        )
        lines.append(f"  flux_over_4pi: winding={_fg(rep.total_flux / (4 * np.pi))} "
                     f"quadrature={_fg(flux / (4 * np.pi))}")
    if built.checks["relaxed_formula"]:
        outcome, extra = _relaxed_demo(config, built, mres)
        outcomes.append(outcome)
        lines.append(f"check relaxed_formula: "
                     f"{'PASS' if outcome.passed else 'FAIL'} | {outcome.detail}")
        lines.extend(extra)
    return outcomes, lines, report


def _relaxed_demo(config: ScenarioConfig, built: BuiltScenario,
                  mres: MinimizeResult) -> tuple[CheckOutcome, list]:
    """Relaxed director energy demo: minimizer versus a defect-line competitor.

    The competitor field points away from a pole just outside the body; its
    point singularity has slid along a radius onto the boundary, so the pair
    (field, radial line of multiplicity one) is admissible for the same
    boundary data in the relaxed class.  The relaxed total must equal the
    competitor's Dirichlet part plus 4 pi times the line mass, recomputed
    here from scratch.
    """
    final = mres.state
    grid = final.grid
    center = _box_center(grid)
    radius = 0.5 * min(h - l for l, h in zip(grid.lo, grid.hi))
    pole = center + np.array([0.0, 0.0, radius + 0.5 * grid.spacing[2]])

    competitor = final.copy()
    competitor.nu[...] = _safe_radial(grid.node_coords(), pole)
    foot = center + np.array([0.0, 0.0, radius])
    line = LineDefect(points=np.array([center, foot]), multiplicities=[1])

    breakdown = relaxed_spin_energy(competitor, line)
    dirichlet_direct = total_energy(DirichletDescriptor(3), competitor)
    mass_direct = float(np.linalg.norm(foot - center))
    independent = dirichlet_direct + 4.0 * np.pi * mass_direct
    gap = abs(breakdown.total - independent)
    scale = max(1.0, abs(breakdown.total))
    minimizer_energy = relaxed_spin_energy(final).dirichlet

    passed = gap <= 1e-12 * scale
    detail = (
        f"additivity_gap={_fg(gap)} tol={_fg(1e-12 * scale)} "
        f"minimizer_dirichlet={_fg(minimizer_energy)} relaxed_total={_fg(breakdown.total)}"
    )
    extra = [
        f"  minimizer_dirichlet_energy: {_fg(minimizer_energy)}",
        f"  competitor_dirichlet_energy: {_fg(breakdown.dirichlet)}",
        f"  defect_line_mass: {_fg(mass_direct)}",
        f"  defect_term_4pi_mass: {_fg(breakdown.defect_term)}",
        f"  relaxed_total: {_fg(breakdown.total)}",
        f"  independent_recomputation: {_fg(independent)}",
    ]
    return CheckOutcome(name="relaxed_formula", passed=passed, detail=detail), extra


# ---------------------------------------------------------------------------
# runner
# ---------------------------------------------------------------------------

def run(config: ScenarioConfig, out_dir: str | Path | None = None) -> ScenarioResult:
    """Minimize, verify, and write artifacts; raise ScenarioFailedError when
    an enabled check fails (artifacts are on disk either way)."""
    built = materialize(config)
    out = out_dir if out_dir is not None else config.out_dir
    if out is None:
        raise ConfigError("no output directory: set [scenario] out or pass one explicitly")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)

    mres = minimize(built.density, built.state, built.manifold, config.minimize)
    final = mres.state

    outcomes, check_lines, report = _run_checks(config, built, mres)

    lines = [
        f"scenario: {config.name}",
        f"grid: {config.resolution}^3 on [{_fg(config.lo)}, {_fg(config.hi)}]^3 "
        f"shape={config.shape} active_cells={int(final.active.sum())}",
        f"manifold: {built.manifold.name} embed={built.manifold.embed_dim}",
        f"density: {built.density.name}",
        f"seed: {config.seed}",
        f"minimize: converged={mres.converged} iterations={mres.iterations} "
        f"energy={_fg(mres.energy)} grad_sup={_fg(mres.grad_sup)} "
        f"barrier_rejects={mres.barrier_rejects} armijo_rejects={mres.armijo_rejects}",
        f"constraint_violation: {_fg(final.constraint_violation(built.manifold))}",
    ]
    lines.extend(check_lines)
    n_pass = sum(1 for o in outcomes if o.passed)
    verdict = "PASS" if n_pass == len(outcomes) else "FAIL"
    lines.append(f"result: {verdict} ({n_pass}/{len(outcomes)} checks passed)")

    write_trace(out / "trace.csv", mres.trace)
    write_fields(out, final)
    write_residuals(out / "residuals.csv", report)
    write_report(out / "report.txt", lines)

    result = ScenarioResult(
        config=config,
        out_dir=out,
        minimize_result=mres,
        residuals=report,
        outcomes=outcomes,
        report_lines=lines,
    )
    if not result.passed:
        failed = [o.name for o in outcomes if not o.passed]
        exc = ScenarioFailedError(
            f"scenario {config.name!r}: checks failed: {', '.join(failed)} "
            f"(see {out / 'report.txt'})"
        )
        exc.result = result
        raise exc
    return result


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

def _preset_nematic_hedgehog() -> ScenarioConfig:
    return ScenarioConfig(
        name="nematic-hedgehog",
        resolution=16,
        lo=-1.0,
        hi=1.0,
        shape="ball",
        manifold_kind="unit-sphere",
        density_kind="dirichlet",
        boundary_kind="radial-director",
        init_kind="radial",
        minimize=MinimizeConfig(max_iters=4000, grad_tol=1e-6),
        checks={
            "orientation": True,
            "growth": True,
            "convexity": True,
            "weak_el": True,
            "rotational": True,
            "defects": True,
        },
        seed=7,
    )


def _preset_degree_of_orientation() -> ScenarioConfig:
    return ScenarioConfig(
        name="degree-of-orientation",
        resolution=16,
        lo=-1.0,
        hi=1.0,
        shape="ball",
        manifold_kind="degree-of-orientation",
        density_kind="orientation-landau",
        density_params={"stiffness": 1.0, "well_depth": 3.0, "beta_a": 0.0,
                        "beta_b": 0.8},
        boundary_kind="radial-orientation",
        boundary_params={"beta": 0.8},
        init_kind="radial-orientation",
        init_params={"beta": 0.8},
        minimize=MinimizeConfig(max_iters=4000, grad_tol=1e-6),
        checks={
            "orientation": True,
            "growth": True,
            "convexity": True,
            "weak_el": True,
            "rotational": True,
        },
        seed=7,
    )


def _preset_microcracked_vector() -> ScenarioConfig:
    return ScenarioConfig(
        name="microcracked-vector",
        resolution=16,
        lo=0.0,
        hi=1.0,
        shape="box",
        manifold_kind="euclidean3",
        density_kind="microcracked",
        density_params={"lam": 1.2, "mu": 0.9, "couple": 0.35, "restore": 0.6,
                        "grad_stiffness": 0.15},
        boundary_kind="affine-stretch",
        boundary_params={"gamma": 0.08, "e1": 1.0, "e2": -0.3, "e3": -0.3,
                         "nu_slope": 0.25},
        init_kind="affine",
        init_params={"gamma": 0.08, "e1": 1.0, "e2": -0.3, "e3": -0.3,
                     "nu_slope": 0.25},
        minimize=MinimizeConfig(max_iters=8000, grad_tol=1e-7),
        checks={
            "orientation": True,
            "injectivity": True,
            "convexity": True,
            "weak_el": True,
        },
        seed=7,
    )


def _preset_quasicrystal_shear() -> ScenarioConfig:
    return ScenarioConfig(
        name="quasicrystal-shear",
        resolution=16,
        lo=0.0,
        hi=1.0,
        shape="box",
        manifold_kind="euclidean3",
        density_kind="quasicrystal",
        density_params={"a": 1.0, "b": 1.0, "c": 0.6, "phason_stiffness": 1.0,
                        "kappa": 0.0},
        boundary_kind="simple-shear",
        boundary_params={"gamma": 0.3},
        init_kind="shear",
        init_params={"gamma": 0.3},
        minimize=MinimizeConfig(max_iters=500, grad_tol=1e-9),
        checks={
            "orientation": True,
            "injectivity": True,
            "growth": True,
            "convexity": True,
            "weak_el": True,
            "rotational": True,
        },
        seed=7,
    )


def _preset_smectic_layers() -> ScenarioConfig:
    return ScenarioConfig(
        name="smectic-layers",
        resolution=16,
        lo=0.0,
        hi=1.0,
        shape="box",
        manifold_kind="layer-director",
        density_kind="smectic",
        density_params={"k1": 1.0, "k2": 1.0, "penalty": 0.2},
        boundary_kind="tilted-layers",
        boundary_params={"tilt": 0.1},
        init_kind="layers",
        init_params={"tilt": 0.1, "amp": 0.05},
        minimize=MinimizeConfig(max_iters=6000, grad_tol=1e-8),
        checks={
            "orientation": True,
            "weak_el": True,
        },
        seed=7,
    )


def _preset_porous_interval() -> ScenarioConfig:
    return ScenarioConfig(
        name="porous-interval",
        resolution=16,
        lo=0.0,
        hi=1.0,
        shape="box",
        manifold_kind="interval",
        manifold_params={"lo": 0.0, "hi": 1.0},
        density_kind="porous-landau",
        density_params={"stiffness": 0.25, "well_depth": 1.0, "pore_a": 0.0,
                        "pore_b": 1.0},
        boundary_kind="two-face-ramp",
        boundary_params={"a": 0.0, "b": 1.0},
        init_kind="ramp",
        init_params={"a": 0.0, "b": 1.0, "amp": 0.05},
        minimize=MinimizeConfig(max_iters=8000, grad_tol=1e-8),
        checks={
            "orientation": True,
            "growth": True,
            "convexity": True,
            "weak_el": True,
        },
        seed=7,
    )


def _preset_spin_relaxed_demo() -> ScenarioConfig:
    return ScenarioConfig(
        name="spin-relaxed-demo",
        resolution=16,
        lo=-1.0,
        hi=1.0,
        shape="ball",
        manifold_kind="unit-sphere",
        density_kind="dirichlet",
        boundary_kind="radial-director",
        init_kind="radial",
        minimize=MinimizeConfig(max_iters=4000, grad_tol=1e-6),
        checks={
            "orientation": True,
            "growth": True,
            "weak_el": True,
            "rotational": True,
            "defects": True,
            "relaxed_formula": True,
        },
        seed=7,
    )


_PRESETS = {
    "nematic-hedgehog": _preset_nematic_hedgehog,
    "degree-of-orientation": _preset_degree_of_orientation,
    "microcracked-vector": _preset_microcracked_vector,
    "quasicrystal-shear": _preset_quasicrystal_shear,
    "smectic-layers": _preset_smectic_layers,
    "porous-interval": _preset_porous_interval,
    "spin-relaxed-demo": _preset_spin_relaxed_demo,
}

PRESET_SUMMARIES = {
    "nematic-hedgehog": "unit director on a ball, radial data, point defect accounting",
    "degree-of-orientation": "director with scalar order parameter on S^2 x [-1/2, 1]",
    "microcracked-vector": "centrosymmetric quadratic vector descriptor under triaxial stretch",
    "quasicrystal-shear": "compressible macro energy with phason field under simple shear",
    "smectic-layers": "layer phase and director with tilted layer boundary data",
    "porous-interval": "two-well scalar order parameter ramped across the box",
    "spin-relaxed-demo": "relaxed director energy: minimizer vs defect-line competitor",
}


def preset_names() -> list:
    return sorted(_PRESETS)


def preset_config(name: str) -> ScenarioConfig:
    try:
        return _PRESETS[name]()
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; known: {', '.join(sorted(_PRESETS))}"
        ) from None


def presets() -> list:
    """Fresh configs for every built-in scenario."""
    return [build() for _, build in sorted(_PRESETS.items())]
