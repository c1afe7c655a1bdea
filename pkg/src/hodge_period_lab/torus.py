"""Flat complex tori and banded Fourier representations of forms on them.

Coordinates
-----------
A point of ``X = ℂ^d / (ℤ^d + τℤ^d)`` is written ``z = x_a + τ x_b`` with real
coordinates ``x = (x_a, x_b) ∈ [0, 1)^{2d}``.  A lattice mode
``k = (m, n) ∈ ℤ^{2d}`` is the character ``e_k(x) = exp(2πi (m·x_a + n·x_b))``.
With ``Y = Im τ`` and ``w = Y^{-T}(n - τᵀm)`` one has

    ∂/∂z_j  e_k = (2πi m_j + π w_j) e_k,      ∂/∂z̄_j e_k = -π w_j e_k.

The Kähler form is ``ω = i Σ W_ij dz_i ∧ dz̄_j`` with ``W`` Hermitian positive
definite; ``⟨∂_i, ∂_j⟩ = W_ij`` and the induced Gram matrix on ``(1, 0)``
covectors is ``N = (W^{-1})ᵀ``.  The L² inner product is normalized to the
average over the fundamental domain, so characters are orthonormal.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache
from math import comb
from typing import Iterable, Mapping

import numpy as np

from . import exterior as ext
from .errors import DegreeError, ShapeError


@dataclass(frozen=True, eq=False)
class TorusGeometry:
    tau: np.ndarray
    kahler: np.ndarray

    def __post_init__(self):
        tau = np.atleast_2d(np.asarray(self.tau, dtype=complex))
        kahler = np.atleast_2d(np.asarray(self.kahler, dtype=complex))
        d = tau.shape[0]
        if tau.shape != (d, d) or kahler.shape != (d, d):
            raise ShapeError(f"tau {tau.shape} and kahler {kahler.shape} must be square of equal size")
        if np.linalg.eigvalsh(0.5 * (tau.imag + tau.imag.T)).min() <= 0:
            raise ValueError("Im(tau) must be positive definite")
        if np.abs(kahler - kahler.conj().T).max() > 1e-12 or np.linalg.eigvalsh(kahler).min() <= 0:
            raise ValueError("kahler form must be Hermitian positive definite")
        tau.setflags(write=False)
        kahler.setflags(write=False)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "kahler", kahler)

    @classmethod
    def square(cls, d: int = 1) -> "TorusGeometry":
        return cls(1j * np.eye(d), np.eye(d))

    @property
    def dimension(self) -> int:
        return self.tau.shape[0]

    def same_as(self, other: "TorusGeometry") -> bool:
        return self is other or (
            np.array_equal(self.tau, other.tau) and np.array_equal(self.kahler, other.kahler)
        )

    @cached_property
    def covector_gram(self) -> np.ndarray:
        return np.linalg.inv(self.kahler).T

    @cached_property
    def _chol(self) -> np.ndarray:
        return np.linalg.cholesky(self.kahler)

    @lru_cache(maxsize=None)
    def gram(self, p: int, q: int) -> np.ndarray:
        """Gram matrix of ``dz_I ∧ dz̄_J`` in flattened ``(I, J)`` order."""
        if not (0 <= p <= self.dimension and 0 <= q <= self.dimension):
            return np.zeros((0, 0), dtype=complex)
        n = self.covector_gram
        g = np.kron(ext.compound(n, p), ext.compound(n.conj(), q))
        g.setflags(write=False)
        return g

    @lru_cache(maxsize=None)
    def vector_gram(self, degree: int) -> np.ndarray:
        """Gram matrix of ``dz̄_A ⊗ ∂_i`` in flattened ``(i, A)`` order."""
        g = np.kron(self.kahler, ext.compound(self.covector_gram.conj(), degree))
        g.setflags(write=False)
        return g

    @lru_cache(maxsize=None)
    def modes(self, band: int) -> np.ndarray:
        d2 = 2 * self.dimension
        axes = np.meshgrid(*([np.arange(-band, band + 1)] * d2), indexing="ij")
        out = np.stack(axes, axis=-1)
        out.setflags(write=False)
        return out

    @lru_cache(maxsize=None)
    def frequencies(self, band: int) -> tuple[np.ndarray, np.ndarray]:
        """Symbols of ``∂/∂z_j`` and ``∂/∂z̄_j`` on the band grid, each ``grid + (d,)``."""
        d = self.dimension
        k = self.modes(band).astype(float)
        m, n = k[..., :d], k[..., d:]
        w = (n - m @ self.tau) @ np.linalg.inv(self.tau.imag)
        a = 2j * np.pi * m + np.pi * w
        b = -np.pi * w
        a.setflags(write=False)
        b.setflags(write=False)
        return a, b

    @lru_cache(maxsize=None)
    def laplace_eigenvalues(self, band: int) -> np.ndarray:
        """``λ_k = |Σ_j b_j dz̄_j|²``, the eigenvalue of ``Δ_∂̄`` on mode ``k``."""
        _, b = self.frequencies(band)
        lam = np.einsum("...i,ij,...j->...", b, self.covector_gram.conj(), b.conj()).real
        lam.setflags(write=False)
        return lam

    def operator_norm_matrix(self, phi: np.ndarray) -> np.ndarray:
        """Metric-weighted matrix whose 2-norm is the pointwise norm of ``φ: T^{0,1} → T^{1,0}``."""
        c = self._chol
        return c.T @ phi @ np.linalg.inv(c.conj().T)


def _grid_shape(d: int, band: int) -> tuple[int, ...]:
    return (2 * band + 1,) * (2 * d)


def _pad(coeffs: np.ndarray, d: int, band: int, new_band: int) -> np.ndarray:
    if new_band == band:
        return coeffs
    if new_band < band:
        raise ValueError("use truncation to shrink a band")
    out = np.zeros(_grid_shape(d, new_band) + coeffs.shape[2 * d:], dtype=complex)
    off = new_band - band
    out[(slice(off, off + 2 * band + 1),) * (2 * d)] = coeffs
    return out


def _crop(coeffs: np.ndarray, d: int, band: int, new_band: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (kept, discarded-with-kept-zeroed) arrays."""
    off = band - new_band
    sl = (slice(off, off + 2 * new_band + 1),) * (2 * d)
    kept = coeffs[sl].copy()
    rest = coeffs.copy()
    rest[sl] = 0
    return kept, rest


def _mode_index(mode: Iterable[int], band: int) -> tuple[int, ...]:
    idx = tuple(int(k) + band for k in mode)
    if any(i < 0 or i > 2 * band for i in idx):
        raise IndexError(f"mode {tuple(mode)} outside band {band}")
    return idx


@dataclass(frozen=True, eq=False)
class FourierForm:
    """A ``(p, q)``-form ``Σ_k Σ_{I,J} c[k, I, J] e_k dz_I ∧ dz̄_J``.

    ``coeffs`` has shape ``(2K+1,)*2d + (C(d,p), C(d,q))``.  Bidegrees outside
    ``0..d`` are allowed and carry zero-width arrays (the zero form).
    """

    geometry: TorusGeometry
    bidegree: tuple[int, int]
    coeffs: np.ndarray
    truncation_residual: float = 0.0

    def __post_init__(self):
        p, q = self.bidegree
        d = self.geometry.dimension
        c = np.asarray(self.coeffs, dtype=complex)
        tail = (comb(d, p) if 0 <= p <= d else 0, comb(d, q) if 0 <= q <= d else 0)
        if c.ndim != 2 * d + 2 or c.shape[2 * d:] != tail or len(set(c.shape[: 2 * d])) != 1 or c.shape[0] % 2 != 1:
            raise ShapeError(f"coefficient shape {c.shape} invalid for bidegree {self.bidegree} in dimension {d}")
        object.__setattr__(self, "bidegree", (int(p), int(q)))
        object.__setattr__(self, "coeffs", c)

    # construction -----------------------------------------------------------------

    @classmethod
    def zeros(cls, geometry: TorusGeometry, bidegree: tuple[int, int], band: int = 0) -> "FourierForm":
        d = geometry.dimension
        p, q = bidegree
        tail = (comb(d, p) if 0 <= p <= d else 0, comb(d, q) if 0 <= q <= d else 0)
        return cls(geometry, bidegree, np.zeros(_grid_shape(d, band) + tail, dtype=complex))

    @classmethod
    def constant(cls, geometry: TorusGeometry, bidegree: tuple[int, int], values, band: int = 0) -> "FourierForm":
        f = cls.zeros(geometry, bidegree, band)
        c = f.coeffs
        c[(band,) * (2 * geometry.dimension)] = np.asarray(values, dtype=complex).reshape(c.shape[2 * geometry.dimension:])
        return f

    @classmethod
    def from_terms(
        cls,
        geometry: TorusGeometry,
        bidegree: tuple[int, int],
        terms: Mapping[tuple, complex],
        band: int | None = None,
    ) -> "FourierForm":
        """Build from ``{(mode, I, J): value}`` with 0-based increasing ``I, J``.

        Unsorted index tuples are canonicalized with the permutation sign.
        """
        d = geometry.dimension
        p, q = bidegree
        if band is None:
            band = max((max(abs(int(x)) for x in k[0]) for k in terms), default=0)
        f = cls.zeros(geometry, bidegree, band)
        for (mode, I, J), val in terms.items():
            if len(I) != p or len(J) != q:
                raise DegreeError(f"term {I}, {J} does not have bidegree {bidegree}")
            si, I = ext.sort_sign(tuple(I))
            sj, J = ext.sort_sign(tuple(J))
            if si * sj == 0:
                continue
            idx = _mode_index(mode, band) + (ext.index_lookup(d, p)[I], ext.index_lookup(d, q)[J])
            f.coeffs[idx] += si * sj * val
        return f

    @classmethod
    def random(
        cls,
        geometry: TorusGeometry,
        bidegree: tuple[int, int],
        band: int,
        rng: np.random.Generator,
        scale: float = 1.0,
    ) -> "FourierForm":
        f = cls.zeros(geometry, bidegree, band)
        shape = f.coeffs.shape
        vals = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        return cls(geometry, bidegree, scale * vals)

    # structure --------------------------------------------------------------------

    @property
    def band(self) -> int:
        return (self.coeffs.shape[0] - 1) // 2

    @property
    def degree(self) -> int:
        return sum(self.bidegree)

    @property
    def flat(self) -> np.ndarray:
        """Coefficients reshaped to ``grid + (C(d,p)·C(d,q),)``."""
        d = self.geometry.dimension
        return self.coeffs.reshape(self.coeffs.shape[: 2 * d] + (-1,))

    def with_flat(self, flat: np.ndarray, bidegree: tuple[int, int] | None = None, **kw) -> "FourierForm":
        bidegree = self.bidegree if bidegree is None else bidegree
        d = self.geometry.dimension
        p, q = bidegree
        tail = (comb(d, p) if 0 <= p <= d else 0, comb(d, q) if 0 <= q <= d else 0)
        return FourierForm(self.geometry, bidegree, flat.reshape(flat.shape[: 2 * d] + tail), **kw)

    def mode(self, k: Iterable[int]) -> np.ndarray:
        return self.coeffs[_mode_index(k, self.band)]

    def constant_part(self) -> np.ndarray:
        return self.coeffs[(self.band,) * (2 * self.geometry.dimension)]

    def padded(self, band: int) -> "FourierForm":
        return replace(self, coeffs=_pad(self.coeffs, self.geometry.dimension, self.band, band))

    def truncated(self, band: int) -> "FourierForm":
        """Restrict to ``band``; the discarded L² mass is stored as ``truncation_residual``."""
        if band >= self.band:
            return self.padded(band)
        kept, rest = _crop(self.coeffs, self.geometry.dimension, self.band, band)
        discarded = _norm(rest.reshape(rest.shape[: 2 * self.geometry.dimension] + (-1,)), self.geometry.gram(*self.bidegree))
        return FourierForm(self.geometry, self.bidegree, kept, truncation_residual=discarded)

    def is_constant(self) -> bool:
        c = self.coeffs.copy()
        c[(self.band,) * (2 * self.geometry.dimension)] = 0
        return not np.any(c)

    # algebra ------------------------------------------------------------------------

    def _aligned(self, other: "FourierForm") -> tuple[np.ndarray, np.ndarray, int]:
        if not isinstance(other, FourierForm):
            raise TypeError(f"cannot combine FourierForm with {type(other).__name__}")
        if not self.geometry.same_as(other.geometry):
            raise ValueError("forms live on different tori")
        if self.bidegree != other.bidegree:
            raise DegreeError(f"bidegree mismatch {self.bidegree} vs {other.bidegree}")
        band = max(self.band, other.band)
        d = self.geometry.dimension
        return _pad(self.coeffs, d, self.band, band), _pad(other.coeffs, d, other.band, band), band

    def __add__(self, other: "FourierForm") -> "FourierForm":
        a, b, _ = self._aligned(other)
        return FourierForm(self.geometry, self.bidegree, a + b, self.truncation_residual + other.truncation_residual)

    def __sub__(self, other: "FourierForm") -> "FourierForm":
        a, b, _ = self._aligned(other)
        return FourierForm(self.geometry, self.bidegree, a - b, self.truncation_residual + other.truncation_residual)

    def __neg__(self) -> "FourierForm":
        return replace(self, coeffs=-self.coeffs)

    def __mul__(self, c: complex) -> "FourierForm":
        return replace(self, coeffs=c * self.coeffs, truncation_residual=abs(c) * self.truncation_residual)

    __rmul__ = __mul__

    def inner(self, other: "FourierForm") -> complex:
        """``⟨self, other⟩``, linear in the first slot."""
        a, b, _ = self._aligned(other)
        g = self.geometry.gram(*self.bidegree)
        if not g.size:
            return 0j
        ra = a.reshape(-1, g.shape[0])
        rb = b.reshape(-1, g.shape[0])
        return complex(np.einsum("ka,ab,kb->", ra, g, rb.conj()))

    def norm(self) -> float:
        return _norm(self.flat, self.geometry.gram(*self.bidegree))

    def allclose(self, other: "FourierForm", atol: float = 1e-12) -> bool:
        return (self - other).norm() <= atol

    # serialization ------------------------------------------------------------------

    def to_text(self) -> str:
        d = self.geometry.dimension
        p, q = self.bidegree
        lines = [f"# fourier-form d={d} p={p} q={q} band={self.band}"]
        Is, Js = ext.multi_indices(d, p), ext.multi_indices(d, q)
        for idx in zip(*np.nonzero(self.coeffs)):
            mode = [i - self.band for i in idx[: 2 * d]]
            val = self.coeffs[idx]
            lines.append(
                f"{' '.join(map(str, mode))} | {_fmt_index(Is[idx[-2]])} | {_fmt_index(Js[idx[-1]])} | "
                f"{val.real:.16e} {val.imag:.16e}"
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, geometry: TorusGeometry) -> "FourierForm":
        header, rows = _parse_text(text, "fourier-form")
        if header["d"] != geometry.dimension:
            raise ShapeError(f"text is for d={header['d']}, geometry has d={geometry.dimension}")
        terms = {}
        for mode, I, J, val in rows:
            key = (mode, I, J)
            terms[key] = terms.get(key, 0) + val
        return cls.from_terms(geometry, (header["p"], header["q"]), terms, band=header["band"])


@dataclass(frozen=True, eq=False)
class BeltramiDifferential:
    """A ``T^{1,0}``-valued ``(0, k)``-form ``Σ c[x, i, A] dz̄_A ⊗ ∂_i``.

    ``degree`` is 1 for Beltrami differentials proper; brackets of two of
    them are represented with ``degree=2``.  For ``degree=1`` the index ``A``
    is the single covector index ``j`` and ``c[k, i, j]`` is ``φ^i_j̄``.
    """

    geometry: TorusGeometry
    coeffs: np.ndarray
    degree: int = 1

    def __post_init__(self):
        d = self.geometry.dimension
        c = np.asarray(self.coeffs, dtype=complex)
        tail = (d, comb(d, self.degree) if 0 <= self.degree <= d else 0)
        if c.ndim != 2 * d + 2 or c.shape[2 * d:] != tail or c.shape[0] % 2 != 1:
            raise ShapeError(f"coefficient shape {c.shape} invalid for a degree-{self.degree} vector form, d={d}")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, geometry: TorusGeometry, band: int = 0, degree: int = 1) -> "BeltramiDifferential":
        d = geometry.dimension
        tail = (d, comb(d, degree) if 0 <= degree <= d else 0)
        return cls(geometry, np.zeros(_grid_shape(d, band) + tail, dtype=complex), degree)

    @classmethod
    def constant(cls, geometry: TorusGeometry, matrix, band: int = 0) -> "BeltramiDifferential":
        """Constant field with ``matrix[i, j] = φ^i_j̄``."""
        phi = cls.zeros(geometry, band)
        phi.coeffs[(band,) * (2 * geometry.dimension)] = np.asarray(matrix, dtype=complex)
        return phi

    @classmethod
    def from_terms(
        cls, geometry: TorusGeometry, terms: Mapping[tuple, complex], band: int | None = None
    ) -> "BeltramiDifferential":
        """``{(mode, i, j): value}`` for ``value · e_mode dz̄_j ⊗ ∂_i`` (0-based)."""
        if band is None:
            band = max((max(abs(int(x)) for x in k[0]) for k in terms), default=0)
        phi = cls.zeros(geometry, band)
        for (mode, i, j), val in terms.items():
            phi.coeffs[_mode_index(mode, band) + (i, j)] += val
        return phi

    @classmethod
    def random(cls, geometry: TorusGeometry, band: int, rng: np.random.Generator, scale: float = 1.0):
        phi = cls.zeros(geometry, band)
        shape = phi.coeffs.shape
        return cls(geometry, scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)))

    @property
    def band(self) -> int:
        return (self.coeffs.shape[0] - 1) // 2

    def padded(self, band: int) -> "BeltramiDifferential":
        return replace(self, coeffs=_pad(self.coeffs, self.geometry.dimension, self.band, band))

    def constant_part(self) -> np.ndarray:
        return self.coeffs[(self.band,) * (2 * self.geometry.dimension)]

    def is_constant(self) -> bool:
        c = self.coeffs.copy()
        c[(self.band,) * (2 * self.geometry.dimension)] = 0
        return not np.any(c)

    @property
    def effective_band(self) -> int:
        """Largest ``|k|_∞`` over modes carrying a nonzero coefficient."""
        return max((max(abs(i - self.band) for i in s) for s in self.nonzero_modes()), default=0)

    def trimmed(self) -> "BeltramiDifferential":
        k, off = self.effective_band, self.band - self.effective_band
        sl = (slice(off, off + 2 * k + 1),) * (2 * self.geometry.dimension)
        return replace(self, coeffs=self.coeffs[sl].copy())

    def nonzero_modes(self) -> list[tuple[int, ...]]:
        d2 = 2 * self.geometry.dimension
        mask = np.any(self.coeffs.reshape(self.coeffs.shape[:d2] + (-1,)) != 0, axis=-1)
        return [tuple(int(i) for i in idx) for idx in zip(*np.nonzero(mask))]

    def _aligned(self, other):
        if not self.geometry.same_as(other.geometry) or self.degree != other.degree:
            raise ValueError("incompatible vector forms")
        band = max(self.band, other.band)
        d = self.geometry.dimension
        return _pad(self.coeffs, d, self.band, band), _pad(other.coeffs, d, other.band, band)

    def __add__(self, other: "BeltramiDifferential") -> "BeltramiDifferential":
        a, b = self._aligned(other)
        return replace(self, coeffs=a + b)

    def __sub__(self, other: "BeltramiDifferential") -> "BeltramiDifferential":
        a, b = self._aligned(other)
        return replace(self, coeffs=a - b)

    def __neg__(self):
        return replace(self, coeffs=-self.coeffs)

    def __mul__(self, c: complex) -> "BeltramiDifferential":
        return replace(self, coeffs=c * self.coeffs)

    __rmul__ = __mul__

    def norm(self) -> float:
        d2 = 2 * self.geometry.dimension
        flat = self.coeffs.reshape(self.coeffs.shape[:d2] + (-1,))
        return _norm(flat, self.geometry.vector_gram(self.degree))

    def to_text(self) -> str:
        d = self.geometry.dimension
        if self.degree != 1:
            raise DegreeError("only degree-1 vector forms are serialized")
        lines = [f"# beltrami d={d} band={self.band}"]
        for idx in zip(*np.nonzero(self.coeffs)):
            mode = [i - self.band for i in idx[: 2 * d]]
            val = self.coeffs[idx]
            lines.append(
                f"{' '.join(map(str, mode))} | {idx[-2] + 1} | {idx[-1] + 1} | {val.real:.16e} {val.imag:.16e}"
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, geometry: TorusGeometry) -> "BeltramiDifferential":
        header, rows = _parse_text(text, "beltrami")
        if header["d"] != geometry.dimension:
            raise ShapeError(f"text is for d={header['d']}, geometry has d={geometry.dimension}")
        terms = {}
        for mode, I, J, val in rows:
            if len(I) != 1 or len(J) != 1:
                raise ValueError("Beltrami lines need exactly one vector and one covector index")
            key = (mode, I[0], J[0])
            terms[key] = terms.get(key, 0) + val
        return cls.from_terms(geometry, terms, band=header["band"])


@dataclass
class GradedForm:
    """A mixed-degree form, stored as ``{(p, q): FourierForm}``; absent pieces are zero."""

    components: dict[tuple[int, int], FourierForm] = field(default_factory=dict)

    @classmethod
    def of(cls, *forms: FourierForm) -> "GradedForm":
        out = cls()
        for f in forms:
            out.add_component(f)
        return out

    def add_component(self, f: FourierForm) -> None:
        if f.coeffs.size == 0:
            return
        key = f.bidegree
        self.components[key] = self.components[key] + f if key in self.components else f

    def __getitem__(self, key: tuple[int, int]) -> FourierForm:
        return self.components[key]

    def __contains__(self, key) -> bool:
        return key in self.components

    def keys(self):
        return sorted(self.components, key=lambda k: (-k[0], k[1]))

    def __add__(self, other: "GradedForm") -> "GradedForm":
        out = GradedForm(dict(self.components))
        for f in other.components.values():
            out.add_component(f)
        return out

    def __neg__(self) -> "GradedForm":
        return GradedForm({k: -v for k, v in self.components.items()})

    def __sub__(self, other: "GradedForm") -> "GradedForm":
        return self + (-other)

    def __mul__(self, c: complex) -> "GradedForm":
        return GradedForm({k: c * v for k, v in self.components.items()})

    __rmul__ = __mul__

    def map(self, fn) -> "GradedForm":
        out = GradedForm()
        for k in self.keys():
            res = fn(self.components[k])
            if isinstance(res, GradedForm):
                out = out + res
            elif res is not None:
                out.add_component(res)
        return out

    def norm(self) -> float:
        return float(np.sqrt(sum(f.norm() ** 2 for f in self.components.values())))

    @property
    def truncation_residual(self) -> float:
        return sum(f.truncation_residual for f in self.components.values())


def _norm(flat: np.ndarray, gram: np.ndarray) -> float:
    if flat.size == 0:
        return 0.0
    rows = flat.reshape(-1, flat.shape[-1])
    val = np.einsum("ka,ab,kb->", rows, gram, rows.conj()).real
    return float(np.sqrt(max(val, 0.0)))


def _fmt_index(idx: tuple[int, ...]) -> str:
    return " ".join(str(i + 1) for i in idx) if idx else "-"


def _parse_index(tok: str) -> tuple[int, ...]:
    tok = tok.strip()
    return () if tok in ("", "-") else tuple(int(x) - 1 for x in tok.split())


def _parse_text(text: str, kind: str):
    header = None
    rows = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts and parts[0] == kind:
                header = {k: int(v) for k, v in (p.split("=") for p in parts[1:])}
            continue
        fields = line.split("|")
        if len(fields) != 4:
            raise ValueError(f"malformed line: {raw!r}")
        mode = tuple(int(x) for x in fields[0].split())
        re_im = fields[3].split()
        rows.append((mode, _parse_index(fields[1]), _parse_index(fields[2]), complex(float(re_im[0]), float(re_im[1]))))
    if header is None:
        raise ValueError(f"missing '# {kind} ...' header line")
    return header, rows
