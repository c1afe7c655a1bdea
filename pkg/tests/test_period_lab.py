import numpy as np
import pytest

from hodge_period_lab.errors import StepError, UnsupportedOracleError
from hodge_period_lab.hodge_algebra import (
    HodgeFrame,
    check_first_bilinear_relation,
    check_second_bilinear_relation,
)
from hodge_period_lab.period_lab import (
    BeltramiFamily,
    abelian_diagonal_family,
    abelian_full_family,
    affine_jacobian_rank,
    affine_map,
    base_frame,
    base_polarization,
    compare_sections,
    degenerate_family,
    derivative_relation_residual,
    differential_blocks,
    elliptic_family,
    hodge_type,
    lie_sections,
    oracle_period,
    orbit_scan,
    period_derivative,
    preset,
)
from hodge_period_lab.torus import BeltramiDifferential, TorusGeometry


@pytest.mark.parametrize(
    "geom, n, h",
    [(TorusGeometry.square(1), 1, (1, 1)), (TorusGeometry.square(2), 2, (1, 3, 1)), (TorusGeometry.square(2), 1, (2, 2))],
)
def test_hodge_types(geom, n, h):
    assert hodge_type(geom, n).hodge_numbers == h


@pytest.mark.parametrize("d, n", [(1, 1), (2, 1), (2, 2)])
def test_base_frame_satisfies_relations(d, n):
    geom = TorusGeometry.square(d)
    frame, q = base_frame(geom, n), base_polarization(geom, n)
    assert check_first_bilinear_relation(frame, q)
    assert check_second_bilinear_relation(frame, q)


def test_radii_of_presets():
    assert np.isclose(elliptic_family().critical_radius, 1.0)
    assert np.isclose(abelian_diagonal_family().admissible_radius, 0.9)
    assert preset("abelian-full").n_params == 3
    with pytest.raises(ValueError):
        preset("nope")


@pytest.mark.parametrize("t", [0.0, 0.3, 0.2 - 0.5j])
def test_elliptic_period_is_parameter(t):
    pp = oracle_period(elliptic_family(), [t])
    assert np.allclose(pp.entries, [[1, t], [0, 1]], atol=1e-12)


def test_abelian_diagonal_period():
    t1, t2 = 0.3, -0.2 + 0.1j
    pp = oracle_period(abelian_diagonal_family(), [t1, t2])
    assert np.allclose(pp.block(0, 1), [[t2, -t1, 0]], atol=1e-12)
    assert np.allclose(pp.block(0, 2), [[t1 * t2]], atol=1e-12)
    assert np.allclose(pp.block(1, 2), [[t1], [-t2], [0]], atol=1e-12)
    assert pp.matrix.is_block_upper_unipotent()


def test_abelian_full_first_block():
    t = [0.1, 0.2j, -0.15]
    pp = oracle_period(abelian_full_family(), t)
    assert np.allclose(pp.block(0, 1), [[t[1], -t[0], 2 * t[2]]], atol=1e-12)


def test_lie_sections_are_rows_of_period():
    pp = oracle_period(abelian_diagonal_family(), [0.1, 0.2])
    table = lie_sections(pp)
    assert [r.shape for r in table.rows] == [(1, 5), (3, 5), (1, 5)]
    assert np.array_equal(table.stacked(), pp.entries)


@pytest.mark.parametrize("family, t", [(elliptic_family(), [0.4j]), (abelian_diagonal_family(), [0.3, -0.2j])])
def test_deformation_sections_match_lie_sections(family, t):
    assert compare_sections(family, t) <= 1e-10


def test_derivative_relation_and_blocks():
    fam = abelian_diagonal_family()
    assert derivative_relation_residual(fam, [0.2, 0.1], 0) <= 1e-8
    dphi = period_derivative(fam, [0.2, 0.1], 1)
    assert np.allclose(dphi[0, 1:4], [1, 0, 0], atol=1e-8)
    blocks = differential_blocks(elliptic_family(), [0.0])
    assert len(blocks) == 1 and np.allclose(blocks[0].entries, [[0, 1], [0, 0]], atol=1e-9)


def test_step_error_near_boundary():
    with pytest.raises(StepError):
        period_derivative(elliptic_family(), [0.8999], 0, h=1e-3)


def test_affine_ranks():
    assert affine_jacobian_rank(elliptic_family(), [0.1]) == 1
    assert affine_jacobian_rank(abelian_full_family(), [0.1, 0.0, 0.2]) == 3
    assert affine_jacobian_rank(degenerate_family(), [0.1, 0.1]) == 1
    assert np.allclose(affine_map(abelian_diagonal_family(), [0.1, 0.2]), [0.2, -0.1, 0], atol=1e-12)


def test_non_constant_family_has_no_oracle():
    geom = TorusGeometry.square(1)
    fam = BeltramiFamily(geom, (BeltramiDifferential.from_terms(geom, {((1, 0), 0, 0): 1.0}),), 1)
    with pytest.raises(UnsupportedOracleError):
        oracle_period(fam, [0.1])


def test_orbit_scan_fixtures_and_synthetic_frame():
    fam = abelian_diagonal_family()
    ht = fam.hodge_type
    swap = np.eye(5)[[4, 1, 2, 3, 0]]
    recs = orbit_scan(fam, [[0.0, 0.0], [0.3, -0.2]], {"swap": HodgeFrame(swap, ht)})
    assert [r.in_orbit for r in recs] == [True, True, False]
    assert recs[-1].failed_block == 0 and recs[-1].min_det == 0.0
