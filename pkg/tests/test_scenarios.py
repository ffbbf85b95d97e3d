"""Scenario layer oracles.

The INI text format is exercised against hand-written documents (the format
is the contract, not whatever the parser happens to accept), every preset
must survive a format -> parse round trip unchanged, and every unknown
section, key, kind, or parameter must be rejected loudly.  Run artifacts are
checked for exact headers and byte-identical repeats under a fixed seed.
"""

import dataclasses

import numpy as np
import pytest

from complexbodies.admissibility import defect_charges
from complexbodies.errors import ConfigError, ScenarioFailedError
from complexbodies.fieldio import load_fields
from complexbodies.minimize import MinimizeConfig
from complexbodies.scenarios import (
    CHECK_NAMES,
    ScenarioConfig,
    build_density,
    build_manifold,
    format_config,
    materialize,
    parse_config,
    preset_config,
    preset_names,
    presets,
    run,
)

MINIMAL = """
[scenario]
name = tiny
"""

FULL = """
[scenario]
name = demo
seed = 11
out = /tmp/demo

[grid]
resolution = 8
lo = -1.0
hi = 1.0
shape = ball

[manifold]
kind = unit-sphere

[density]
kind = dirichlet

[boundary]
kind = radial-director

[init]
kind = radial

[minimize]
max_iters = 200
grad_tol = 1e-05

[checks]
orientation = on
defects = off
"""


def _tiny_porous(**overrides):
    """Interval-descriptor scenario small enough for sub-second runs."""
    base = dict(
        name="tiny-porous",
        resolution=6,
        manifold_kind="interval",
        density_kind="porous-landau",
        boundary_kind="two-face-ramp",
        init_kind="ramp",
        minimize=MinimizeConfig(max_iters=3000, grad_tol=1e-7),
        checks={"orientation": True, "weak_el": True},
        seed=3,
        n_tests=5,
    )
    base.update(overrides)
    return ScenarioConfig(**base)


ARTIFACTS = ("trace.csv", "fields_u.csv", "fields_nu.csv", "fields.npz",
             "residuals.csv", "report.txt")


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

def test_parse_minimal_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.name == "tiny"
    assert cfg.resolution == 16
    assert cfg.shape == "box"
    assert cfg.out_dir is None
    assert cfg.checks == {name: False for name in CHECK_NAMES}


def test_parse_full_document():
    cfg = parse_config(FULL)
    assert cfg.name == "demo"
    assert cfg.seed == 11
    assert cfg.out_dir == "/tmp/demo"
    assert cfg.resolution == 8
    assert (cfg.lo, cfg.hi, cfg.shape) == (-1.0, 1.0, "ball")
    assert cfg.manifold_kind == "unit-sphere"
    assert cfg.density_kind == "dirichlet"
    assert cfg.boundary_kind == "radial-director"
    assert cfg.init_kind == "radial"
    assert cfg.minimize.max_iters == 200
    assert cfg.minimize.grad_tol == 1e-5
    assert cfg.checks["orientation"] is True
    assert cfg.checks["defects"] is False


def test_parse_reads_params_as_floats():
    text = MINIMAL + "\n[density]\nkind = porous-landau\nstiffness = 0.5\n"
    cfg = parse_config(text)
    assert cfg.density_params == {"stiffness": 0.5}


@pytest.mark.parametrize("name", preset_names())
def test_preset_round_trip(name):
    cfg = preset_config(name)
    assert parse_config(format_config(cfg)) == cfg


def test_round_trip_preserves_overrides(tmp_path):
    # n_tests and the tolerances are library knobs outside the text format
    cfg = _tiny_porous(out_dir=str(tmp_path), seed=99, n_tests=20)
    assert parse_config(format_config(cfg)) == cfg


@pytest.mark.parametrize("text,fragment", [
    (MINIMAL + "\n[physics]\nfoo = 1\n", "unknown section"),
    ("[scenario]\nname = t\ncolour = red\n", "scenario"),
    ("[grid]\nresolution = 8\n", "name"),
    ("[DEFAULT]\nx = 1\n\n[scenario]\nname = t\n", "DEFAULT"),
    ("[scenario]\nname = t\nseed = pi\n", "integer"),
    (MINIMAL + "\n[grid]\nlo = banana\n", "number"),
    (MINIMAL + "\n[grid]\nspacing = 2\n", "grid"),
    (MINIMAL + "\n[minimize]\nlearning_rate = 1\n", "minimize"),
    (MINIMAL + "\n[checks]\nwibble = on\n", "check"),
    (MINIMAL + "\n[checks]\norientation = maybe\n", "on/off"),
    ("not an ini document", "unparseable"),
])
def test_parse_rejections(text, fragment):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert fragment in str(err.value)


def test_config_constructor_validation():
    with pytest.raises(ConfigError):
        ScenarioConfig(name="x", resolution=1)
    with pytest.raises(ConfigError):
        ScenarioConfig(name="x", lo=1.0, hi=1.0)
    with pytest.raises(ConfigError):
        ScenarioConfig(name="x", shape="torus")
    with pytest.raises(ConfigError):
        ScenarioConfig(name="x", checks={"bogus": True})
    with pytest.raises(ConfigError):
        ScenarioConfig(name="x", n_tests=0)


def test_checks_normalize_to_full_toggle_map():
    cfg = ScenarioConfig(name="x", checks={"growth": True})
    assert set(cfg.checks) == set(CHECK_NAMES)
    assert cfg.checks["growth"] is True
    assert not any(v for k, v in cfg.checks.items() if k != "growth")


# ---------------------------------------------------------------------------
# registries
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("kind,embed", [
    ("unit-sphere", 3),
    ("euclidean1", 1),
    ("euclidean3", 3),
    ("interval", 1),
    ("degree-of-orientation", 4),
    ("layer-director", 4),
])
def test_build_manifold_kinds(kind, embed):
    assert build_manifold(kind, {}).embed_dim == embed


def test_build_manifold_rejects_unknown():
    with pytest.raises(ConfigError):
        build_manifold("moebius", {})
    with pytest.raises(ConfigError):
        build_manifold("unit-sphere", {"radius": 2.0})


def test_build_density_rejects_unknown():
    man = build_manifold("unit-sphere", {})
    with pytest.raises(ConfigError):
        build_density("unobtainium", {}, man)
    with pytest.raises(ConfigError):
        build_density("dirichlet", {"bogus": 1.0}, man)


def test_materialize_rejects_embed_mismatch():
    cfg = ScenarioConfig(name="bad", manifold_kind="unit-sphere",
                         density_kind="smectic")
    with pytest.raises(ConfigError, match="descriptor"):
        materialize(cfg)


def test_materialize_unknown_boundary_and_init():
    with pytest.raises(ConfigError):
        materialize(_tiny_porous(boundary_kind="warp"))
    with pytest.raises(ConfigError):
        materialize(_tiny_porous(init_kind="vortex"))
    with pytest.raises(ConfigError):
        materialize(_tiny_porous(boundary_params={"slope": 2.0}))


def test_growth_check_needs_documented_bound():
    # the coupled quasicrystal density carries no coercivity certificate
    cfg = ScenarioConfig(name="bad", manifold_kind="euclidean3",
                         density_kind="quasicrystal",
                         density_params={"kappa": 0.5},
                         checks={"growth": True})
    with pytest.raises(ConfigError, match="growth"):
        materialize(cfg)


def test_rotational_check_needs_rotation_action():
    cfg = _tiny_porous(checks={"rotational": True})
    with pytest.raises(ConfigError, match="rotation"):
        materialize(cfg)


def test_defect_check_needs_unit_director():
    cfg = ScenarioConfig(name="bad", manifold_kind="euclidean3",
                         density_kind="dirichlet", checks={"defects": True})
    with pytest.raises(ConfigError, match="unit-director"):
        materialize(cfg)


def test_affine_boundary_rejects_folding():
    cfg = ScenarioConfig(name="bad", manifold_kind="euclidean3",
                         density_kind="microcracked",
                         boundary_kind="affine-stretch",
                         boundary_params={"gamma": -1.0},
                         init_kind="affine")
    with pytest.raises(ConfigError, match="orientation"):
        materialize(cfg)


# ---------------------------------------------------------------------------
# materialized states
# ---------------------------------------------------------------------------

def test_ball_shape_masks_corners():
    built = materialize(preset_config("nematic-hedgehog"))
    active = built.state.active
    assert active.any()
    assert active.sum() < active.size
    assert not active[0, 0, 0]


def test_init_lands_on_manifold():
    built = materialize(preset_config("nematic-hedgehog"))
    norms = np.linalg.norm(built.state.nu, axis=-1)
    assert np.allclose(norms, 1.0, atol=1e-12)


def test_boundary_pins_some_nodes_only():
    built = materialize(preset_config("microcracked-vector"))
    for pinned in (built.state.pinned_u, built.state.pinned_nu):
        assert pinned.any()
        assert not pinned.all()


@pytest.mark.parametrize("res", [8, 12, 16])
def test_radial_init_has_single_unit_winding_cell(res):
    # the radial center must sit strictly inside a cell: centered on a node
    # it is a corner of eight cells and the winding splits between them
    cfg = dataclasses.replace(preset_config("nematic-hedgehog"), resolution=res)
    built = materialize(cfg)
    rep = defect_charges(built.state, built.manifold)
    assert rep.total_charge == 1
    assert len(rep.clusters) == 1
    assert rep.clusters[0].charge == 1
    assert rep.clusters[0].cell_count == 1


# ---------------------------------------------------------------------------
# run() and artifacts
# ---------------------------------------------------------------------------

def test_run_writes_documented_artifacts(tmp_path):
    out = tmp_path / "a"
    result = run(_tiny_porous(), out_dir=out)
    assert result.passed
    assert result.out_dir == out
    for fname in ARTIFACTS:
        assert (out / fname).exists(), fname

    trace = (out / "trace.csv").read_text().splitlines()
    assert trace[0] == "iter,energy,grad_sup,step,rejects"
    assert trace[1].startswith("0,")
    assert len(trace) >= 3

    res_lines = (out / "residuals.csv").read_text().splitlines()
    assert res_lines[0] == "law,raw,scale,ratio"
    assert any(line.startswith("weak_el") for line in res_lines[1:])
    assert any(line.startswith("duality") for line in res_lines[1:])

    u_lines = (out / "fields_u.csv").read_text().splitlines()
    assert u_lines[0] == "i,j,k,x1,x2,x3,u1,u2,u3"
    assert len(u_lines) == 1 + 7**3
    nu_lines = (out / "fields_nu.csv").read_text().splitlines()
    assert nu_lines[0] == "i,j,k,x1,x2,x3,nu1"

    report = (out / "report.txt").read_text()
    assert "scenario: tiny-porous" in report
    assert "check orientation: PASS" in report
    assert "check weak_el: PASS" in report
    assert "result: PASS (2/2 checks passed)" in report


def test_fields_npz_round_trips(tmp_path):
    result = run(_tiny_porous(), out_dir=tmp_path)
    data = load_fields(tmp_path / "fields.npz")
    final = result.minimize_result.state
    assert np.array_equal(data["u"], final.u)
    assert np.array_equal(data["nu"], final.nu)
    assert np.array_equal(data["active"], final.active)
    assert data["cells"].tolist() == [6, 6, 6]


def test_run_artifacts_bitwise_deterministic(tmp_path):
    run(_tiny_porous(), out_dir=tmp_path / "one")
    run(_tiny_porous(), out_dir=tmp_path / "two")
    for fname in ARTIFACTS:
        a = (tmp_path / "one" / fname).read_bytes()
        b = (tmp_path / "two" / fname).read_bytes()
        assert a == b, fname


def test_run_seed_changes_residual_probes(tmp_path):
    first = run(_tiny_porous(seed=3), out_dir=tmp_path / "one")
    second = run(_tiny_porous(seed=4), out_dir=tmp_path / "two")
    a = [r for r in first.residuals.rows() if r[0].startswith("weak_el")]
    b = [r for r in second.residuals.rows() if r[0].startswith("weak_el")]
    assert [row[1] for row in a] != [row[1] for row in b]


def test_run_failure_raises_and_keeps_artifacts(tmp_path):
    cfg = _tiny_porous(weak_tol=0.0)
    with pytest.raises(ScenarioFailedError) as err:
        run(cfg, out_dir=tmp_path)
    result = err.value.result
    assert not result.passed
    assert not result.outcome("weak_el").passed
    assert result.outcome("orientation").passed
    assert "weak_el" in str(err.value)
    assert "result: FAIL" in (tmp_path / "report.txt").read_text()


def test_run_without_out_dir_is_an_error():
    with pytest.raises(ConfigError, match="output"):
        run(_tiny_porous())


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

REQUIRED_PRESETS = {
    "nematic-hedgehog",
    "degree-of-orientation",
    "microcracked-vector",
    "quasicrystal-shear",
    "smectic-layers",
    "porous-interval",
    "spin-relaxed-demo",
}


def test_preset_catalogue_is_complete():
    names = preset_names()
    assert REQUIRED_PRESETS <= set(names)
    assert len(names) >= 7
    assert [cfg.name for cfg in presets()] == names


@pytest.mark.parametrize("name", preset_names())
def test_presets_materialize(name):
    built = materialize(preset_config(name))
    assert built.state.active.any()
    assert any(built.checks.values())


def test_preset_configs_are_fresh_copies():
    a = preset_config("porous-interval")
    b = preset_config("porous-interval")
    assert a == b and a is not b
    a.checks["growth"] = not a.checks["growth"]
    assert a != preset_config("porous-interval")


def test_unknown_preset_rejected():
    with pytest.raises(ConfigError):
        preset_config("does-not-exist")
