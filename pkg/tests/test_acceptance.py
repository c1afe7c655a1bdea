"""One test per acceptance criterion, with tolerances pinned as stated."""
import json

import numpy as np
import pytest

from hodge_period_lab import dolbeault as ops
from hodge_period_lab import exterior as ext
from hodge_period_lab import period_lab as lab
from hodge_period_lab.cli import main
from hodge_period_lab.errors import NotInOrbitError
from hodge_period_lab.extension import (
    ExtensionProblem,
    neumann_order,
    neumann_partial_sum,
    solve_extension,
)
from hodge_period_lab.hodge_algebra import BlockMatrix, BlockPartition, HodgeFrame, HodgeType, block_lu, in_unipotent_orbit
from hodge_period_lab.torus import BeltramiDifferential, FourierForm, TorusGeometry
from hodge_period_lab.verify import admissible_points, random_integrable

GEOMETRIES = [
    TorusGeometry(np.array([[0.3 + 1.2j]]), np.array([[1.7]])),
    TorusGeometry(
        np.array([[1.1j + 0.2, 0.1 + 0.05j], [0.1 + 0.05j, 0.9j - 0.3]]),
        np.array([[1.5, 0.2 + 0.1j], [0.2 - 0.1j, 0.8]]),
    ),
]


def _bidegrees(d):
    return [(p, q) for p in range(d + 1) for q in range(d + 1)]


def _unit_forms(count, rng, band=2, keep=lambda geom, bd: True):
    """``count`` random unit-norm forms cycling over geometries and bidegrees."""
    pool = [(g, bd) for g in GEOMETRIES for bd in _bidegrees(g.dimension) if keep(g, bd)]
    out = []
    for i in range(count):
        geom, bd = pool[i % len(pool)]
        f = FourierForm.random(geom, bd, band, rng)
        out.append(f * (1.0 / f.norm()))
    return out


def test_criterion_01_operator_identities():
    rng = np.random.default_rng(101)
    worst = dict.fromkeys(("dbar2", "partial2", "green", "kahler", "adjoint_dbar", "adjoint_partial"), 0.0)
    for f in _unit_forms(100, rng):
        worst["dbar2"] = max(worst["dbar2"], ops._dbar(ops._dbar(f)).norm())
    for f in _unit_forms(100, rng):
        worst["partial2"] = max(worst["partial2"], ops._partial(ops._partial(f)).norm())
    for f in _unit_forms(100, rng):
        worst["green"] = max(worst["green"], (ops.laplacian(ops.green(f)) - (f - ops.harmonic_projection(f))).norm())
    for f in _unit_forms(100, rng):
        worst["kahler"] = max(worst["kahler"], (ops.laplacian(f, "dbar") - ops.laplacian(f, "partial")).norm())
    for f in _unit_forms(100, rng, keep=lambda g, bd: bd[1] < g.dimension):
        p, q = f.bidegree
        h = FourierForm.random(f.geometry, (p, q + 1), 2, rng)
        h = h * (1.0 / h.norm())
        worst["adjoint_dbar"] = max(worst["adjoint_dbar"], abs(ops.dbar(f).inner(h) - f.inner(ops.adjoint_dbar(h))))
    for f in _unit_forms(100, rng, keep=lambda g, bd: bd[0] < g.dimension):
        p, q = f.bidegree
        h = FourierForm.random(f.geometry, (p + 1, q), 2, rng)
        h = h * (1.0 / h.norm())
        worst["adjoint_partial"] = max(worst["adjoint_partial"], abs(ops.partial(f).inner(h) - f.inner(ops.adjoint_partial(h))))
    assert all(v <= 1e-10 for v in worst.values()), worst


def test_criterion_02_quasi_isometry():
    rng = np.random.default_rng(102)
    worst_rel, bound_ok = 0.0, True
    for g in _unit_forms(500, rng, band=1):
        tg = ops.t_operator(g).norm()
        rhs = g.norm() ** 2 - ops.harmonic_projection(g).norm() ** 2
        rhs -= ops._partial(ops.adjoint_partial(ops.green(g))).norm() ** 2
        rhs -= ops._dbar(ops.green(ops._partial(g))).norm() ** 2
        worst_rel = max(worst_rel, abs(tg**2 - rhs) / g.norm() ** 2)
        bound_ok &= tg <= g.norm()
    assert worst_rel <= 1e-10
    assert bound_ok


def test_criterion_03_conjugation_formula():
    rng = np.random.default_rng(103)
    worst = 0.0
    for i in range(50):
        geom = GEOMETRIES[i % 2]
        phi = BeltramiDifferential.random(geom, 1, rng)
        phi = phi * (0.5 * rng.random() / ops.sup_operator_norm(phi))
        assert ops.sup_operator_norm(phi) <= 0.5
        bd = _bidegrees(geom.dimension)[i % len(_bidegrees(geom.dimension))]
        f = FourierForm.random(geom, bd, 1, rng)
        f = f * (1.0 / f.norm())
        worst = max(worst, ops.conjugation_residual(phi, f))
    assert worst <= 1e-8


def _admissible_problem(i, rng):
    geom = TorusGeometry.square(1 + i % 2)
    d = geom.dimension
    phi = random_integrable(geom, rng, 0.01, band=1)
    bd = (1, 0) if d == 1 else [(2, 0), (1, 1), (1, 0), (0, 1), (0, 2)][(i // 2) % 5]
    basis = ops.primitive_basis(geom, *bd)
    coef = rng.standard_normal(len(basis)) + 1j * rng.standard_normal(len(basis))
    sigma0 = FourierForm.constant(geom, bd, (coef @ basis).reshape(ops._dim(d, bd[0]), ops._dim(d, bd[1])))
    return ExtensionProblem(sigma0, phi, band=4 if d == 1 else 2)


def test_criterion_04_extension_solver():
    rng = np.random.default_rng(104)
    for i in range(50):
        prob = _admissible_problem(i, rng)
        sol = solve_extension(prob)
        assert sol.fixed_point_residual <= 1e-10
        assert sol.obstruction_residual_partial <= 1e-8
        assert sol.obstruction_residual_dbar <= 1e-8
        assert sol.d_closed_residual <= 1e-8 + sol.truncation_residual
        neumann = neumann_partial_sum(prob, neumann_order(sol.sup_norm, prob.tol))
        assert (sol.sigma - neumann).norm() <= 1e-9


@pytest.mark.parametrize("name", ["elliptic", "abelian-diagonal"])
def test_criterion_05_coincidence(name):
    fam = lab.preset(name)
    points = admissible_points(fam, 20, np.random.default_rng(105))
    assert max(lab.compare_sections(fam, t) for t in points) <= 1e-6
    if name == "elliptic":
        assert max(abs(lab.oracle_period(fam, t).block(0, 1)[0, 0] - t[0]) for t in points) <= 1e-10


def test_criterion_06_block_derivative_relation():
    fam = lab.preset("abelian-diagonal")
    h = 1e-3
    for t in admissible_points(fam, 10, np.random.default_rng(106)):
        res_h = max(lab.derivative_relation_residual(fam, t, mu, h) for mu in range(fam.n_params))
        res_h2 = max(lab.derivative_relation_residual(fam, t, mu, h / 2) for mu in range(fam.n_params))
        assert res_h <= 1e-6
        assert res_h >= 3.5 * res_h2, f"residual {res_h:.3e} at h, {res_h2:.3e} at h/2"


def test_criterion_07_orbit_containment():
    rng = np.random.default_rng(107)
    for name in lab.PRESETS:
        fam = lab.preset(name)
        records = lab.orbit_scan(fam, admissible_points(fam, 10, rng))
        assert all(r.in_orbit for r in records), name
    swap = HodgeFrame(np.array([[0.0, 1.0], [1.0, 0.0]]), HodgeType(1, (1, 1)))
    (record,) = lab.orbit_scan(None, frames={"swap": swap})
    assert not record.in_orbit and record.failed_block == 0


@pytest.mark.parametrize("name, expected", [("elliptic", 1), ("abelian-full", 3), ("degenerate", 1)])
def test_criterion_08_affine_structure(name, expected):
    fam = lab.preset(name)
    if name == "degenerate":
        assert expected == fam.n_params - 1
    else:
        assert expected == fam.n_params
    for t in admissible_points(fam, 10, np.random.default_rng(108), fraction=0.5):
        assert lab.affine_jacobian_rank(fam, t) == expected


def test_criterion_09_oracle_equivalence():
    rng = np.random.default_rng(109)
    part = BlockPartition.from_sizes((1, 3, 1))
    for i in range(1000):
        a = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        if i % 3 == 0:
            a[0, 0] = 0.0
        elif i % 3 == 1:
            a[1:4, :4] = a[0:1, :4] * rng.standard_normal((3, 1))  # leading 4×4 block singular
        bm = BlockMatrix(a, part)
        try:
            block_lu(bm)
            succeeded = True
        except NotInOrbitError:
            succeeded = False
        assert succeeded == in_unipotent_orbit(bm)

    fam = lab.preset("abelian-diagonal")
    geom = fam.geometry
    for t1, t2 in [(0.3, -0.2j), (0.1 + 0.4j, 0.25), (-0.5, 0.5)]:
        got = ops.exp_contraction(fam.phi([t1, t2]), FourierForm.constant(geom, (2, 0), [[1.0]]))
        # (dz_1 + t_1 dz̄_1) ∧ (dz_2 + t_2 dz̄_2)
        hand = ext.cwedge(ext.one_form(np.array([1, 0]), np.array([t1, 0])), ext.one_form(np.array([0, 1]), np.array([0, t2])))
        expected = ext.bidegree_blocks(hand, 2)
        assert set(got.keys()) == set(expected)
        for key, block in expected.items():
            assert np.array_equal(got[key].constant_part(), block)


def test_criterion_10_determinism(tmp_path):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"family": "abelian-diagonal"}))
    reports = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["verify", "--config", str(cfg), "--out", str(out)]) == 0
        reports.append(((out / "report.json").read_bytes(), (out / "verify.csv").read_bytes()))
    assert reports[0] == reports[1]
