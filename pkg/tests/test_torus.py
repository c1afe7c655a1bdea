import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hodge_period_lab.errors import DegreeError, ShapeError
from hodge_period_lab.torus import BeltramiDifferential, FourierForm, GradedForm, TorusGeometry

SQUARE1 = TorusGeometry.square(1)
SKEW2 = TorusGeometry(
    np.array([[1.1j + 0.2, 0.1 + 0.05j], [0.1 + 0.05j, 0.9j - 0.3]]),
    np.array([[1.5, 0.2 + 0.1j], [0.2 - 0.1j, 0.8]]),
)


def test_geometry_validation():
    with pytest.raises(ValueError):
        TorusGeometry(np.array([[-1j]]), np.eye(1))
    with pytest.raises(ValueError):
        TorusGeometry(np.array([[1j]]), np.array([[-1.0]]))
    with pytest.raises(ShapeError):
        TorusGeometry(1j * np.eye(2), np.eye(1))


@pytest.mark.parametrize("m, n", [(1, 0), (0, 1), (2, -1), (-1, -2)])
def test_square_frequencies_match_wirtinger(m, n):
    # e = exp(2πi(m x + n y)), z = x + i y: ∂_z e = π(n + i m) e, ∂_z̄ e = π(i m - n) e
    a, b = SQUARE1.frequencies(2)
    idx = (m + 2, n + 2)
    assert np.isclose(a[idx][0], np.pi * (n + 1j * m))
    assert np.isclose(b[idx][0], np.pi * (1j * m - n))


def test_symbols_conjugate_relation():
    a, b = SKEW2.frequencies(2)
    assert np.allclose(b, -a.conj())


def test_laplace_eigenvalues_square():
    lam = SQUARE1.laplace_eigenvalues(1)
    m, n = np.meshgrid(np.arange(-1, 2), np.arange(-1, 2), indexing="ij")
    assert np.allclose(lam, np.pi**2 * (m**2 + n**2))


def test_gram_is_hermitian_positive():
    for p in range(3):
        for q in range(3):
            g = SKEW2.gram(p, q)
            assert np.allclose(g, g.conj().T)
            assert np.linalg.eigvalsh(g).min() > 0
    assert SKEW2.gram(3, 0).shape == (0, 0)


def test_from_terms_canonicalizes_sign():
    f = FourierForm.from_terms(TorusGeometry.square(2), (2, 0), {((0, 0, 0, 0), (1, 0), ()): 1.0})
    assert f.constant_part()[0, 0] == -1.0
    with pytest.raises(DegreeError):
        FourierForm.from_terms(TorusGeometry.square(2), (1, 0), {((0, 0, 0, 0), (0, 1), ()): 1.0})


def test_from_terms_infers_band():
    f = FourierForm.from_terms(SQUARE1, (0, 1), {((2, -1), (), (0,)): 3j})
    assert f.band == 2
    assert f.mode((2, -1))[0, 0] == 3j


def test_padding_preserves_norm_and_truncation_records_loss():
    rng = np.random.default_rng(1)
    f = FourierForm.random(SKEW2, (1, 1), 2, rng)
    assert np.isclose(f.padded(4).norm(), f.norm())
    t = f.truncated(1)
    assert t.band == 1
    assert np.isclose(t.norm() ** 2 + t.truncation_residual**2, f.norm() ** 2)


def test_arithmetic_aligns_bands():
    f = FourierForm.constant(SQUARE1, (1, 0), [2.0])
    g = FourierForm.from_terms(SQUARE1, (1, 0), {((1, 0), (0,), ()): 1.0})
    s = f + g
    assert s.band == 1 and s.constant_part()[0, 0] == 2.0
    assert (s - g).allclose(f.padded(1))
    assert np.isclose((2 * s).norm(), 2 * s.norm())
    with pytest.raises(DegreeError):
        f + FourierForm.zeros(SQUARE1, (0, 1))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31))
def test_inner_product_is_hermitian(seed):
    rng = np.random.default_rng(seed)
    f, g = (FourierForm.random(SKEW2, (1, 1), 1, rng) for _ in range(2))
    assert np.isclose(f.inner(g), np.conj(g.inner(f)))
    assert np.isclose(f.inner(f).real, f.norm() ** 2)


def test_empty_bidegree_is_zero():
    z = FourierForm.zeros(SQUARE1, (2, 0), 1)
    assert z.coeffs.size == 0 and z.norm() == 0.0


@pytest.mark.parametrize("geom, bideg", [(SQUARE1, (0, 1)), (SKEW2, (1, 1)), (SKEW2, (2, 0))])
def test_form_text_round_trip(geom, bideg):
    f = FourierForm.random(geom, bideg, 1, np.random.default_rng(3))
    g = FourierForm.from_text(f.to_text(), geom)
    assert g.band == f.band and np.array_equal(g.coeffs, f.coeffs)


def test_form_text_is_one_based():
    f = FourierForm.from_terms(TorusGeometry.square(2), (1, 1), {((0, 0, 0, 1), (1,), (0,)): 1.0})
    line = f.to_text().splitlines()[1]
    assert line.startswith("0 0 0 1 | 2 | 1 |")


def test_form_text_rejects_wrong_dimension():
    f = FourierForm.zeros(SQUARE1, (0, 0))
    with pytest.raises(ShapeError):
        FourierForm.from_text(f.to_text(), SKEW2)


def test_beltrami_round_trip_and_band_helpers():
    phi = BeltramiDifferential.from_terms(SKEW2, {((0, 1, 0, 0), 1, 0): 0.3j, ((0, 0, 0, 0), 0, 1): 0.1}, band=3)
    assert phi.effective_band == 1
    assert phi.trimmed().band == 1
    back = BeltramiDifferential.from_text(phi.to_text(), SKEW2)
    assert np.array_equal(back.coeffs, phi.coeffs)
    assert not phi.is_constant()
    assert BeltramiDifferential.constant(SKEW2, np.eye(2)).is_constant()


def test_graded_form_skips_empty_and_adds():
    f = FourierForm.constant(SQUARE1, (1, 0), [1.0])
    g = GradedForm.of(f, FourierForm.zeros(SQUARE1, (2, 0)))
    assert list(g.keys()) == [(1, 0)]
    h = g + GradedForm.of(FourierForm.constant(SQUARE1, (0, 1), [1.0]))
    assert set(h.keys()) == {(1, 0), (0, 1)}
    assert np.isclose(h.norm(), np.sqrt(2))
