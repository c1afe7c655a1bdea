"""Period matrices of torus families and the two constructions of Hodge sections.

The Lie side reads ``Φ(t) ∈ N₋`` off an exact wedge expansion of the deformed
Hodge frame (constant Beltrami fields only).  The deformation side runs the
extension solver on each base-point basis element.  Both are expressed in
the base-point primitive basis ``η`` ordered by bidegree ``(n,0), …, (0,n)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations, product

import numpy as np
from scipy.linalg import null_space

from . import dolbeault as ops
from . import exterior as ext
from .errors import FamilyError, NotInOrbitError, StepError, UnsupportedOracleError
from .extension import DEFAULT_TOL, section_tilde
from .hodge_algebra import (
    BlockMatrix,
    HodgeFrame,
    HodgeType,
    Polarization,
    block_lu,
    in_unipotent_orbit,
    leading_block_dets,
)
from .torus import BeltramiDifferential, TorusGeometry

RADIUS_SHRINK = 0.9
RADIUS_RANDOM_DIRECTIONS = 64
RADIUS_SEED = 20240611
DEFAULT_STEP = 1e-3
RANK_TOL = 1e-8


# --- base-point data ------------------------------------------------------------------


def base_basis(geom: TorusGeometry, n: int) -> np.ndarray:
    """Rows ``η`` of the primitive basis of constant n-forms, in the full degree-n coordinates."""
    d = geom.dimension
    rows = []
    offsets = {}
    pos = 0
    for p in range(n, -1, -1):
        q = n - p
        offsets[(p, q)] = pos
        pos += ops._dim(d, p) * ops._dim(d, q)
    for p in range(n, -1, -1):
        q = n - p
        for vec in ops.primitive_basis(geom, p, q):
            row = np.zeros(pos, dtype=complex)
            row[offsets[(p, q)]: offsets[(p, q)] + vec.size] = vec
            rows.append(row)
    return np.array(rows)


def hodge_type(geom: TorusGeometry, n: int) -> HodgeType:
    """Hodge numbers of primitive weight-n cohomology of the torus."""
    return HodgeType(n, tuple(ops.primitive_basis(geom, p, n - p).shape[0] for p in range(n, -1, -1)))


def _const_from_vector(vec: np.ndarray, d: int, n: int) -> dict:
    blocks = {}
    pos = 0
    for p in range(n, -1, -1):
        q = n - p
        size = ops._dim(d, p) * ops._dim(d, q)
        blocks[(p, q)] = vec[pos: pos + size].reshape(ops._dim(d, p), ops._dim(d, q))
        pos += size
    return ext.from_blocks(blocks, d)


def _top_coefficient(form: dict, d: int) -> complex:
    """Coefficient against ``dx_1∧dy_1∧…∧dx_d∧dy_d`` of a top-degree constant form."""
    # dz_j ∧ dz̄_j = -2i dx_j ∧ dy_j; reorder dz_1..dz_d dz̄_1..dz̄_d into pairs
    order = tuple(g for j in range(d) for g in (j, d + j))
    sign, canon = ext.sort_sign(order)
    c = form.get(canon, 0.0)
    return complex(c * sign * (-2j) ** d)


def base_polarization(geom: TorusGeometry, n: int) -> Polarization:
    """``Q(u, v) = (−1)^{n(n−1)/2} ∫ u ∧ v ∧ ω^{d−n}`` on the basis ``η`` (volume-normalized)."""
    d = geom.dimension
    eta = base_basis(geom, n)
    wpow = ext.cpower(ext.kahler_const(geom.kahler), d - n)
    forms = [_const_from_vector(row, d, n) for row in eta]
    m = len(forms)
    q = np.zeros((m, m), dtype=complex)
    for i, j in product(range(m), repeat=2):
        q[i, j] = _top_coefficient(ext.cwedge(ext.cwedge(forms[i], forms[j]), wpow), d)
    q *= (-1) ** (n * (n - 1) // 2)
    return Polarization(q, n)


def base_conjugation(geom: TorusGeometry, n: int) -> np.ndarray:
    """``S`` with ``coords(v̄) = conj(coords(v)) @ S`` in the basis ``η``."""
    d = geom.dimension
    eta = base_basis(geom, n)
    conj_rows = np.array([ext.to_vector(ext.cconj(_const_from_vector(r, d, n), d), d, n) for r in eta])
    coords, *_ = np.linalg.lstsq(eta.T, conj_rows.T, rcond=None)
    return coords.T


def base_frame(geom: TorusGeometry, n: int) -> HodgeFrame:
    ht = hodge_type(geom, n)
    return HodgeFrame(np.eye(ht.dim), ht, base_conjugation(geom, n))


# --- families -----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BeltramiFamily:
    """``φ(t) = Σ_μ t_μ χ_μ`` on a fixed torus, with weight ``n`` for the periods."""

    geometry: TorusGeometry
    fields: tuple[BeltramiDifferential, ...]
    weight: int
    name: str = "custom"

    @property
    def n_params(self) -> int:
        return len(self.fields)

    @property
    def is_constant(self) -> bool:
        return all(f.is_constant() for f in self.fields)

    def phi(self, t) -> BeltramiDifferential:
        t = self.check_point(t)
        out = BeltramiDifferential.zeros(self.geometry, max(f.band for f in self.fields))
        for tm, chi in zip(t, self.fields):
            out = out + complex(tm) * chi
        return out

    def check_point(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=complex))
        if t.shape != (self.n_params,):
            raise ValueError(f"parameter point has {t.size} entries, family has {self.n_params}")
        return t

    @cached_property
    def hodge_type(self) -> HodgeType:
        return hodge_type(self.geometry, self.weight)

    def direction_norm(self, u) -> float:
        return ops.sup_operator_norm(self.phi(u))

    @cached_property
    def critical_radius(self) -> float:
        """``1 / max_u sup‖φ(u)‖`` over sampled unit directions (inf if all vanish)."""
        N = self.n_params
        dirs = [np.eye(N)[m] for m in range(N)]
        for a, b in combinations(range(N), 2):
            for c in (1, -1, 1j, -1j):
                v = np.zeros(N, dtype=complex)
                v[a], v[b] = 1.0, c
                dirs.append(v / np.sqrt(2))
        rng = np.random.default_rng(RADIUS_SEED)
        for _ in range(RADIUS_RANDOM_DIRECTIONS):
            v = rng.standard_normal(N) + 1j * rng.standard_normal(N)
            dirs.append(v / np.linalg.norm(v))
        worst = max(self.direction_norm(u) for u in dirs)
        return np.inf if worst == 0 else 1.0 / worst

    @property
    def admissible_radius(self) -> float:
        return RADIUS_SHRINK * self.critical_radius

    def is_admissible(self, t) -> bool:
        t = self.check_point(t)
        return float(np.linalg.norm(t)) < self.admissible_radius and ops.sup_operator_norm(self.phi(t)) < 1.0


def _constant_field(geom: TorusGeometry, matrix) -> BeltramiDifferential:
    return BeltramiDifferential.constant(geom, np.asarray(matrix, dtype=complex))


def _unit(d: int, i: int, j: int) -> np.ndarray:
    e = np.zeros((d, d))
    e[i, j] = 1.0
    return e


def elliptic_family() -> BeltramiFamily:
    geom = TorusGeometry.square(1)
    return BeltramiFamily(geom, (_constant_field(geom, [[1.0]]),), 1, "elliptic")


def abelian_diagonal_family() -> BeltramiFamily:
    geom = TorusGeometry.square(2)
    return BeltramiFamily(geom, (_constant_field(geom, _unit(2, 0, 0)), _constant_field(geom, _unit(2, 1, 1))), 2, "abelian-diagonal")


def abelian_full_family() -> BeltramiFamily:
    """Three-parameter symmetric family ``[[t1, t3], [t3, t2]]`` (keeps ``ω`` of type (1,1))."""
    geom = TorusGeometry.square(2)
    fields = (
        _constant_field(geom, _unit(2, 0, 0)),
        _constant_field(geom, _unit(2, 1, 1)),
        _constant_field(geom, _unit(2, 0, 1) + _unit(2, 1, 0)),
    )
    return BeltramiFamily(geom, fields, 2, "abelian-full")


def degenerate_family() -> BeltramiFamily:
    """Diagonal family with the second field repeated: ``χ₂ = χ₁``."""
    geom = TorusGeometry.square(2)
    chi = _constant_field(geom, _unit(2, 0, 0))
    return BeltramiFamily(geom, (chi, chi), 2, "degenerate")


PRESETS = {
    "elliptic": elliptic_family,
    "abelian-diagonal": abelian_diagonal_family,
    "abelian-full": abelian_full_family,
    "degenerate": degenerate_family,
}


def preset(name: str) -> BeltramiFamily:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


# --- periods -------------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PeriodPoint:
    matrix: BlockMatrix
    parameter: np.ndarray
    hodge_type: HodgeType
    frame: np.ndarray | None = None

    def block(self, p: int, q: int) -> np.ndarray:
        return self.matrix.block(p, q)

    @property
    def entries(self) -> np.ndarray:
        return self.matrix.entries


@dataclass(frozen=True, eq=False)
class SectionTable:
    rows: tuple[np.ndarray, ...]
    provenance: str
    parameter: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def stacked(self, upto: int | None = None) -> np.ndarray:
        rows = self.rows if upto is None else self.rows[: upto + 1]
        return np.vstack(rows)


def deformed_frame(family: BeltramiFamily, t) -> np.ndarray:
    """Rows of an (arbitrary) basis of each deformed primitive ``H^{n−α, α}``, in ``η`` coordinates."""
    if not family.is_constant:
        raise UnsupportedOracleError("the wedge-expansion oracle needs constant Beltrami fields")
    geom = family.geometry
    d, n = geom.dimension, family.weight
    phi = family.phi(t).constant_part()
    w = [ext.one_form(np.eye(d)[i], phi[i]) for i in range(d)]
    wbar = [ext.cconj(x, d) for x in w]
    lmat = _lefschetz_full(geom, n)
    eta = base_basis(geom, n)
    ht = family.hodge_type
    rows = []
    for alpha in range(n + 1):
        p, q = n - alpha, alpha
        cols = []
        for I in ext.multi_indices(d, p):
            for J in ext.multi_indices(d, q):
                form = {(): 1.0}
                for i in I:
                    form = ext.cwedge(form, w[i])
                for j in J:
                    form = ext.cwedge(form, wbar[j])
                cols.append(ext.to_vector(form, d, n))
        span = np.array(cols).T
        z = null_space(lmat @ span) if lmat.shape[0] else np.eye(span.shape[1])
        if z.shape[1] != ht.hodge_numbers[alpha]:
            raise FamilyError(
                f"deformed primitive H^({p},{q}) has dimension {z.shape[1]}, expected {ht.hodge_numbers[alpha]}; "
                "the family does not preserve the polarization"
            )
        vecs = span @ z
        coords, *_ = np.linalg.lstsq(eta.T, vecs, rcond=None)
        rows.append(coords.T)
    return np.vstack(rows)


def _lefschetz_full(geom: TorusGeometry, n: int) -> np.ndarray:
    """``ω^{d−n+1} ∧`` on all constant n-forms, stacked over target bidegrees."""
    d = geom.dimension
    r = d - n + 1
    src = []
    for p in range(n, -1, -1):
        q = n - p
        src.append(((p, q), ops._dim(d, p) * ops._dim(d, q)))
    blocks = []
    for (p, q), size in src:
        blocks.append(ops.lefschetz_matrix(geom, p, q, r))
    # block-diagonal in source bidegree; targets differ per source so rows simply stack
    total_cols = sum(s for _, s in src)
    out_rows = []
    col = 0
    for ((p, q), size), mat in zip(src, blocks):
        if mat.shape[0]:
            padded = np.zeros((mat.shape[0], total_cols), dtype=complex)
            padded[:, col: col + size] = mat
            out_rows.append(padded)
        col += size
    return np.vstack(out_rows) if out_rows else np.zeros((0, total_cols), dtype=complex)


def oracle_period(family: BeltramiFamily, t, tol: float = 1e-10) -> PeriodPoint:
    """``Φ(t)``: the unipotent factor of the deformed frame."""
    t = family.check_point(t)
    frame = deformed_frame(family, t)
    ht = family.hodge_type
    l, _ = block_lu(BlockMatrix(frame, ht.partition()), tol)
    return PeriodPoint(l, t, ht, frame)


def lie_sections(pp: PeriodPoint) -> SectionTable:
    """``Ω_{(p)} = η_{(p)} + Σ_k Φ^{(p,p+k)} η_{(p+k)}``; in ``η`` coordinates these are the row blocks of ``Φ``."""
    part = pp.matrix.partition
    rows = tuple(pp.entries[part.slice(p)].copy() for p in range(part.nblocks))
    return SectionTable(rows, "lie", pp.parameter)


def deformation_sections(family: BeltramiFamily, t, tol: float = DEFAULT_TOL, band: int | None = None) -> SectionTable:
    t = family.check_point(t)
    rows = tuple(section_tilde(p, t, family, tol=tol, band=band) for p in range(family.weight + 1))
    return SectionTable(rows, "deformation", t)


def compare_sections(family: BeltramiFamily, t, tol: float = DEFAULT_TOL, band: int | None = None) -> float:
    lie = lie_sections(oracle_period(family, t))
    dfm = deformation_sections(family, t, tol=tol, band=band)
    return float(max(np.abs(a - b).max() for a, b in zip(lie.rows, dfm.rows) if a.size))


def _step_points(family: BeltramiFamily, t, mu: int, h: float):
    t = family.check_point(t)
    e = np.zeros(family.n_params, dtype=complex)
    e[mu] = h
    plus, minus = t + e, t - e
    r = family.admissible_radius
    for s in (plus, minus):
        if np.linalg.norm(s) >= r:
            raise StepError(f"step point {s} lies outside the admissible radius {r:.6g}")
    return t, plus, minus


def period_derivative(family: BeltramiFamily, t, mu: int, h: float = DEFAULT_STEP) -> np.ndarray:
    """Central difference ``∂Φ/∂t_μ``."""
    _, plus, minus = _step_points(family, t, mu, h)
    return (oracle_period(family, plus).entries - oracle_period(family, minus).entries) / (2 * h)


def derivative_relation_residual(family: BeltramiFamily, t, mu: int, h: float = DEFAULT_STEP) -> float:
    """``max_{p,i≥2} ‖∂Φ^{(p,p+i)} − ∂Φ^{(p,p+1)} Φ^{(p+1,p+i)}‖_max``; zero when no such block exists."""
    dphi = period_derivative(family, t, mu, h)
    pp = oracle_period(family, t)
    part = pp.matrix.partition
    dblock = BlockMatrix(dphi, part)
    n = part.nblocks - 1
    worst = 0.0
    for p in range(n + 1):
        for i in range(2, n - p + 1):
            lhs = dblock.block(p, p + i)
            rhs = dblock.block(p, p + 1) @ pp.block(p + 1, p + i)
            if lhs.size:
                worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst


def differential_blocks(family: BeltramiFamily, t, h: float = DEFAULT_STEP) -> list[BlockMatrix]:
    """Tangent representatives per ``μ``: only the ``(p, p+1)`` derivative blocks are kept."""
    out = []
    part = family.hodge_type.partition()
    for mu in range(family.n_params):
        dphi = BlockMatrix(period_derivative(family, t, mu, h), part)
        rep = np.zeros_like(dphi.entries)
        for p in range(part.nblocks - 1):
            rep[part.slice(p), part.slice(p + 1)] = dphi.block(p, p + 1)
        out.append(BlockMatrix(rep, part))
    return out


def affine_map(family: BeltramiFamily, t) -> np.ndarray:
    """``Ψ(t)``: the flattened ``Φ^{(0,1)}(t)`` block."""
    return oracle_period(family, t).block(0, 1).ravel()


def affine_jacobian(family: BeltramiFamily, t, h: float = DEFAULT_STEP) -> np.ndarray:
    cols = []
    for mu in range(family.n_params):
        _, plus, minus = _step_points(family, t, mu, h)
        cols.append((affine_map(family, plus) - affine_map(family, minus)) / (2 * h))
    return np.array(cols).T


def affine_jacobian_rank(family: BeltramiFamily, t, h: float = DEFAULT_STEP) -> int:
    s = np.linalg.svd(affine_jacobian(family, t, h), compute_uv=False)
    return int(np.sum(s > RANK_TOL))


@dataclass(frozen=True)
class OrbitRecord:
    label: str
    in_orbit: bool
    min_det: float
    failed_block: int | None


def _orbit_record(label: str, a: BlockMatrix, tol: float) -> OrbitRecord:
    dets = leading_block_dets(a)
    ok = in_unipotent_orbit(a, tol)
    failed = None
    if not ok:
        try:
            block_lu(a, tol)
        except NotInOrbitError as err:
            failed = err.k
    return OrbitRecord(label, ok, float(min(dets)) if dets else 1.0, failed)


def orbit_scan(family: BeltramiFamily | None, path=(), frames: dict[str, HodgeFrame] | None = None, tol: float = 1e-10) -> list[OrbitRecord]:
    """Orbit membership along a parameter path, plus optional synthetic frames."""
    out = []
    if family is not None:
        for t in path:
            t = family.check_point(t)
            frame = deformed_frame(family, t)
            out.append(_orbit_record(str(list(t)), BlockMatrix(frame, family.hodge_type.partition()), tol))
    for label, frame in (frames or {}).items():
        out.append(_orbit_record(label, frame.as_block_matrix(), tol))
    return out
