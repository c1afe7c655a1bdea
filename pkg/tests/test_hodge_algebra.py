import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hodge_period_lab.errors import InvalidFrameError, InvalidHodgeTypeError, NotInOrbitError, ShapeError
from hodge_period_lab.hodge_algebra import (
    BlockMatrix,
    BlockPartition,
    HodgeFrame,
    HodgeType,
    Polarization,
    block_lu,
    check_first_bilinear_relation,
    check_second_bilinear_relation,
    filtration_dims,
    group_membership,
    in_unipotent_orbit,
    is_horizontal,
)


@pytest.mark.parametrize(
    "h, expected",
    [((1, 1), (1, 2)), ((1, 3, 1), (1, 4, 5)), ((1, 0, 1), (1, 1, 2)), ((0, 2), (0, 2))],
)
def test_filtration_dims(h, expected):
    assert filtration_dims(h) == expected


@pytest.mark.parametrize("bad", [(), (1, -1), (0, 0)])
def test_filtration_dims_rejects(bad):
    with pytest.raises(InvalidHodgeTypeError):
        filtration_dims(bad)


@given(st.lists(st.integers(0, 5), min_size=1, max_size=6).filter(any))
def test_filtration_dims_partial_sums(h):
    f = filtration_dims(h)
    assert f[-1] == sum(h)
    assert all(b - a == x for a, b, x in zip((0,) + f, f, h))


def test_hodge_type_partition():
    ht = HodgeType(2, (1, 3, 1))
    assert ht.dim == 5
    assert ht.f(2) == 1 and ht.f(1) == 4 and ht.f(0) == 5 and ht.f(3) == 0
    assert ht.partition().boundaries == (0, 1, 4, 5)


def test_polarization_validation():
    with pytest.raises(ValueError):
        Polarization(np.array([[0, 1], [1, 0]]), 1)  # symmetric for odd weight
    with pytest.raises(ValueError):
        Polarization(np.zeros((2, 2)), 2)


def test_block_matrix_blocks_reassemble():
    part = BlockPartition.from_sizes((1, 2, 1))
    a = np.arange(16.0).reshape(4, 4)
    bm = BlockMatrix(a, part)
    assert np.array_equal(bm.block(1, 2), a[1:3, 3:4])
    blocks = [[bm.block(i, j) for j in range(3)] for i in range(3)]
    assert np.array_equal(BlockMatrix.from_blocks(blocks, part).entries, a)


# --- bilinear relations -----------------------------------------------------------

ELLIPTIC_TYPE = HodgeType(1, (1, 1))
# basis (dz, dz̄): conjugation swaps the two coordinates
SWAP = np.array([[0, 1], [1, 0]])
# Q(dz, dz̄) = ∫ dz ∧ dz̄ = -2i on the unit square
Q_ELLIPTIC = np.array([[0, -2j], [2j, 0]])


def test_first_relation_elliptic():
    frame = HodgeFrame(np.eye(2), ELLIPTIC_TYPE, SWAP)
    assert check_first_bilinear_relation(frame, Polarization(Q_ELLIPTIC, 1))


def test_first_relation_violated():
    q = Polarization(np.eye(2), 2)  # Q(e0, e0) = 1 pairs F^2 with F^1
    frame = HodgeFrame(np.eye(2), HodgeType(2, (1, 0, 1)))
    assert not check_first_bilinear_relation(frame, q)


def test_first_relation_vacuous():
    frame = HodgeFrame(np.eye(2), HodgeType(2, (0, 2, 0)))
    assert check_first_bilinear_relation(frame, Polarization(np.eye(2), 2))


@pytest.mark.parametrize("sign, expected", [(1, True), (-1, False)])
def test_second_relation_elliptic(sign, expected):
    frame = HodgeFrame(np.eye(2), ELLIPTIC_TYPE, SWAP)
    assert check_second_bilinear_relation(frame, Polarization(sign * Q_ELLIPTIC, 1)) is expected


def test_second_relation_h101():
    # real basis e0, e1 with conjugation swapping them and Q antidiagonal:
    # block k=2 gives i^{2}·Q(e0, e1) = -1 < 0
    frame = HodgeFrame(np.eye(2), HodgeType(2, (1, 0, 1)), SWAP)
    assert not check_second_bilinear_relation(frame, Polarization(np.array([[0, 1], [1, 0]]), 2))
    assert check_second_bilinear_relation(frame, Polarization(-np.array([[0, 1], [1, 0]]), 2))


def test_second_relation_rejects_unadapted_frame():
    frame = HodgeFrame(np.array([[1, 1], [0, 1]]), ELLIPTIC_TYPE, SWAP)
    with pytest.raises(InvalidFrameError):
        check_second_bilinear_relation(frame, Polarization(Q_ELLIPTIC, 1))


def test_relation_dimension_error():
    frame = HodgeFrame(np.eye(2), ELLIPTIC_TYPE)
    q4 = Polarization(np.kron(np.eye(2), np.array([[0, 1], [-1, 0]])), 1)
    with pytest.raises(ShapeError):
        check_first_bilinear_relation(frame, q4)


def test_first_relation_invariant_under_block_recombination():
    rng = np.random.default_rng(0)
    frame = HodgeFrame(np.eye(2), ELLIPTIC_TYPE, SWAP)
    q = Polarization(Q_ELLIPTIC, 1)
    for _ in range(10):
        g = np.diag(rng.standard_normal(2) + 2)
        assert check_first_bilinear_relation(HodgeFrame(g @ frame.rows, ELLIPTIC_TYPE, SWAP), q)


# --- block LU and orbit membership ---------------------------------------------------


def test_block_lu_identity():
    part = BlockPartition.from_sizes((1, 2, 1))
    l, u = block_lu(BlockMatrix(np.eye(4), part))
    assert np.array_equal(l.entries, np.eye(4)) and np.array_equal(u.entries, np.eye(4))


def test_block_lu_two_by_two():
    # a = u·l with u block-lower, l block-upper unipotent:
    # [[2,1],[0,3]] = [[2,0],[0,3]] @ [[1,1/2],[0,1]]
    a = BlockMatrix(np.array([[2.0, 1.0], [0.0, 3.0]]), BlockPartition.from_sizes((1, 1)))
    l, u = block_lu(a)
    assert np.allclose(l.entries, [[1, 0.5], [0, 1]], atol=1e-15)
    assert np.allclose(u.entries, [[2, 0], [0, 3]], atol=1e-15)


def test_block_lu_swap_fails_at_zero():
    a = BlockMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]), BlockPartition.from_sizes((1, 1)))
    with pytest.raises(NotInOrbitError) as info:
        block_lu(a)
    assert info.value.k == 0
    assert not in_unipotent_orbit(a)


def _random_unipotent(part, rng):
    m = part.size
    n = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    for a in range(part.nblocks):
        for b in range(a + 1):
            n[part.slice(a), part.slice(b)] = np.eye(part.sizes[a]) if a == b else 0
    return n


def _random_lower(part, rng):
    m = part.size
    b = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    for i in range(part.nblocks):
        for j in range(i + 1, part.nblocks):
            b[part.slice(i), part.slice(j)] = 0
    return b


@pytest.mark.parametrize("sizes", [(1, 1), (1, 2, 1), (1, 3, 1), (2, 1, 0, 2)])
def test_block_lu_recovers_known_factors(sizes):
    rng = np.random.default_rng(len(sizes))
    part = BlockPartition.from_sizes(sizes)
    for _ in range(20):
        n, b = _random_unipotent(part, rng), _random_lower(part, rng)
        a = BlockMatrix(b @ n, part)
        assert in_unipotent_orbit(a)
        l, u = block_lu(a)
        assert np.abs(l.entries - n).max() < 1e-9
        assert np.abs(u.entries @ l.entries - a.entries).max() <= 1e-10 * max(1, np.abs(a.entries).max())
        assert l.is_block_upper_unipotent() and u.is_block_lower()


def test_block_lu_uniqueness_under_tiny_perturbation():
    rng = np.random.default_rng(5)
    part = BlockPartition.from_sizes((1, 3, 1))
    a = _random_lower(part, rng) @ _random_unipotent(part, rng)
    l1, _ = block_lu(BlockMatrix(a, part))
    l2, _ = block_lu(BlockMatrix(a + 1e-11 * rng.standard_normal(a.shape), part))
    assert np.abs(l1.entries - l2.entries).max() < 1e-9


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_orbit_criterion_matches_block_lu(seed):
    rng = np.random.default_rng(seed)
    part = BlockPartition.from_sizes((1, 2, 1))
    a = rng.integers(-1, 2, size=(4, 4)).astype(float)
    bm = BlockMatrix(a, part)
    try:
        block_lu(bm)
        ok = True
    except NotInOrbitError:
        ok = False
    assert ok == in_unipotent_orbit(bm)


# --- group and horizontality ---------------------------------------------------------


def test_group_membership_examples():
    q = Polarization(np.array([[0.0, 1.0], [-1.0, 0.0]]), 1)
    assert group_membership(np.eye(2), q)
    assert group_membership(np.array([[0.0, 1.0], [-1.0, 0.0]]), q)
    assert not group_membership(2 * np.eye(2), q)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_group_closure_sl2(a, b, c):
    q = Polarization(np.array([[0.0, 1.0], [-1.0, 0.0]]), 1)
    g1 = np.array([[1.0, a], [0.0, 1.0]])
    g2 = np.array([[1.0, 0.0], [b, 1.0]])
    g3 = np.array([[np.exp(c / 3), 0], [0, np.exp(-c / 3)]])
    for g in (g1, g2, g3):
        assert group_membership(g, q)
    assert group_membership(g1 @ g2 @ g3, q, 1e-9)


def test_is_horizontal():
    part = BlockPartition.from_sizes((1, 1, 1))
    assert is_horizontal(BlockMatrix(np.zeros((3, 3)), part))
    v = np.zeros((3, 3))
    v[0, 1] = 2.0
    assert is_horizontal(BlockMatrix(v, part))
    v[0, 2] = 1.0
    assert not is_horizontal(BlockMatrix(v, part))
